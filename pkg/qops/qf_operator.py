"""Polynomial Q-operator Q_f(lambda).

Q_f acts site by site: y_i^m goes to a combination of x_{i-1}^k x_i^{m-k}
with the periodic convention x_0 = x_M. It is defined only where the
(zeta^-4; q^2)_m denominators are nonzero, i.e. generic spin or m <= I.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from .errors import DomainError, PoleError, SingularityError
from .qkernel import SeriesSpec, csum, ensure_finite, phi_standard, qpoch, qpoch_polynomial
from .sector import Monomial, OperatorMatrix, SectorBasis, enumerate_basis
from .transfer import ModelParams

SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class QfActionRow:
    """y_site^power -> sum_k coefficients[k] x_{site-1}^k x_site^{power-k}."""

    site: int
    power: int
    coefficients: Tuple[complex, ...]

    def __post_init__(self):
        if len(self.coefficients) != self.power + 1:
            raise DomainError(
                f"action row for power {self.power} needs {self.power + 1} coefficients")


def zeta_pochhammer(params: ModelParams, m: int) -> complex:
    """(zeta^-4; q^2)_m, refusing the singular factors of integer spin."""
    q2 = params.q2
    base = params.zeta**-4
    for t in range(m):
        factor = 1 - base * q2**t
        if abs(factor) <= SINGULAR_TOL * max(1.0, abs(base * q2**t)):
            raise SingularityError(
                f"Q_f becomes singular for m > I: (zeta^-4;q^2)_{m} vanishes at factor t={t}; "
                "integer spin goes through the factorized A+")
    return qpoch(base, q2, m)


def _column_prefactor(params: ModelParams, m: int) -> complex:
    return qpoch(params.q2, params.q2, m) / zeta_pochhammer(params, m)


def _action_coefficients(params: ModelParams, m: int, with_prefactor: bool = True):
    q2 = params.q2
    lam, zeta, phi = params.lam, params.zeta, params.phi
    lead = (lam / zeta)**m
    if with_prefactor:
        lead *= _column_prefactor(params, m)
    # (1;q^2)_k vanishes exactly at the identity point
    up = 1 + 0j if lam == zeta else lam**2 / zeta**2
    down = 1 / (lam**2 * zeta**2)
    ratio = phi**2 / lam**2
    coefficients = []
    for k in range(m + 1):
        value = (ratio**k * qpoch(up, q2, k) * qpoch(down, q2, m - k)
                 / (qpoch(q2, q2, k) * qpoch(q2, q2, m - k)))
        coefficients.append(ensure_finite(lead * value, "Q_f action coefficient"))
    return tuple(coefficients)


def qf_monomial_action(params: ModelParams, m: int, site: int = 1) -> QfActionRow:
    if m < 0:
        raise DomainError(f"power must be nonnegative, got {m}")
    return QfActionRow(site=site, power=m, coefficients=_action_coefficients(params, m))


def qf_monomial_action_pochhammer(params: ModelParams, m: int) -> Tuple[complex, ...]:
    """Same action from the unsummed form
    (zeta x_i / lam)^m sum_k (q^-2m, lam^2/zeta^2, t phi^2/zeta^2; q^2)_k / (q^2, zeta^-4; q^2)_k q^2k
    with t = x_{i-1}/x_i expanded as a polynomial."""
    zeta_pochhammer(params, m)
    q2 = params.q2
    lam, zeta, phi = params.lam, params.zeta, params.phi
    coefficients = np.zeros(m + 1, dtype=complex)
    weight = 1 + 0j
    for k in range(m + 1):
        if k > 0:
            weight *= ((1 - q2**(k - 1 - m)) * (1 - lam**2 / zeta**2 * q2**(k - 1)) * q2
                       / ((1 - q2**k) * (1 - zeta**-4 * q2**(k - 1))))
        poly = qpoch_polynomial(phi**2 / zeta**2, q2, k)
        coefficients[:k + 1] += weight * poly
    scale = (zeta / lam)**m
    return tuple(ensure_finite(scale * c) for c in coefficients)


def qf_image(params: ModelParams, j: Monomial, with_prefactor: bool = True) -> Dict[Monomial, complex]:
    """Q_f applied to prod_k y_k^{j_k}; site k hands a_k powers to site k-1."""
    j = tuple(j)
    sites = len(j)
    rows = [_action_coefficients(params, power, with_prefactor) for power in j]
    image = {}
    for choice in itertools.product(*(range(power + 1) for power in j)):
        out = tuple(j[k] - choice[k] + choice[(k + 1) % sites] for k in range(sites))
        coeff = 1 + 0j
        for k in range(sites):
            coeff *= rows[k][choice[k]]
        image[out] = image.get(out, 0) + coeff
    return image


def qf_block(params: ModelParams, rows: SectorBasis, columns: SectorBasis,
             with_prefactor: bool = True) -> np.ndarray:
    """Q_f restricted to ``rows`` x ``columns`` of the same degree."""
    block = np.zeros((rows.size, columns.size), dtype=complex)
    for c, j in enumerate(columns.members):
        for monomial, coeff in qf_image(params, j, with_prefactor).items():
            r = rows.index.get(monomial)
            if r is not None:
                block[r, c] += coeff
    return block


def _require_uncapped(basis: SectorBasis) -> None:
    if basis.cap is not None:
        raise DomainError("Q_f needs the uncapped basis; integer spin goes through aplus_operator")


def build_qf(params: ModelParams, basis: SectorBasis) -> OperatorMatrix:
    _require_uncapped(basis)
    return OperatorMatrix(basis, qf_block(params, basis, basis), "Qf")


def _lk_range(i: Monomial, j: Monomial):
    """Yield l_k = l_1 + delta_k for every l_1 keeping 0 <= l_k <= j_k."""
    deltas = [0]
    for s in range(len(i) - 1):
        deltas.append(deltas[-1] + i[s] - j[s])
    for l1 in range(j[0] + 1):
        lks = [l1 + d for d in deltas]
        if all(0 <= lk <= jk for lk, jk in zip(lks, j)):
            yield lks


def qf_matrix_element(params: ModelParams, i: Monomial, j: Monomial) -> complex:
    """Single-sum matrix element of Q_f between output i and input j."""
    i, j = tuple(i), tuple(j)
    if sum(i) != sum(j):
        return 0j
    q2 = params.q2
    lam, zeta, phi = params.lam, params.zeta, params.phi
    prefactor = 1 + 0j
    for jk in j:
        prefactor *= (lam / zeta)**jk * _column_prefactor(params, jk)
    terms = []
    for lks in _lk_range(i, j):
        term = 1 + 0j
        for lk, jk in zip(lks, j):
            term *= ((phi**2 / lam**2)**lk * qpoch(lam**2 / zeta**2, q2, lk)
                     * qpoch(1 / (lam**2 * zeta**2), q2, jk - lk)
                     / (qpoch(q2, q2, lk) * qpoch(q2, q2, jk - lk)))
        terms.append(term)
    return ensure_finite(prefactor * csum(terms), "Q_f matrix element")


def build_qinf(params: ModelParams, basis: SectorBasis) -> OperatorMatrix:
    """Exact lambda -> infinity limit of lambda^-l Q_f(lambda)."""
    _require_uncapped(basis)
    q, q2, zeta, phi = params.q, params.q2, params.zeta, params.phi
    entries = np.zeros((basis.size, basis.size), dtype=complex)
    for c, j in enumerate(basis.members):
        prefactor = zeta**(-basis.degree)
        for jk in j:
            prefactor /= zeta_pochhammer(params, jk)
        for r, i in enumerate(basis.members):
            terms = []
            for lks in _lk_range(i, j):
                term = 1 + 0j
                for lk, jk in zip(lks, j):
                    term *= (qpoch(q2**(-jk), q2, lk) / qpoch(q2, q2, lk)
                             * (q**jk * phi / zeta)**(2 * lk))
                terms.append(term)
            if terms:
                entries[r, c] = prefactor * csum(terms)
    return OperatorMatrix(basis, entries, "Qinf")


def compose_coeff(params: ModelParams, mu, m: int, n: int, k: int) -> complex:
    """Coefficient of x_{i-1}^n x_i^{m-n-k} x_{i+1}^k in Q_f(lam) Q_f(mu) x_{i+1}^m,
    via the balanced 4phi3 closed form."""
    if min(m, n, k) < 0 or n + k > m:
        raise DomainError(f"need 0 <= n + k <= m, got m={m}, n={n}, k={k}")
    mu = complex(mu)
    q2 = params.q2
    lam, zeta, phi = params.lam, params.zeta, params.phi
    L, U, e = lam**2, mu**2, zeta**-2
    numerator = (qpoch(e / L, q2, k) * qpoch(e / U, q2, m - n) * qpoch(L * e, q2, m - n - k)
                 * qpoch(q2, q2, m) * qpoch(L * e, q2, n) * qpoch(U * e, q2, n))
    denominator = (zeta_pochhammer(params, m) * zeta_pochhammer(params, m - n)
                   * qpoch(q2, q2, n) * zeta_pochhammer(params, n)
                   * qpoch(q2, q2, k) * qpoch(q2, q2, m - n - k))
    prefactor = (zeta**(-2 * m) * phi**(2 * (m + n - k)) * lam**(2 * k - m) * mu**(m - 2 * n)
                 * numerator / denominator)
    degree = m - k - n
    spec = SeriesSpec(
        a=(q2**(1 + n - m) * zeta**4, e / L, q2**n * U * e),
        b=(q2**n * e**2, q2**(1 - degree) / (e * L), q2**(1 + n - m) * U / e),
        n=degree,
        q=q2,
        z=q2,
    )
    try:
        series = phi_standard(spec)
    except PoleError as exc:
        raise SingularityError(
            f"composition coefficient has a pole in denominator parameter b[{exc.parameter_index}] "
            f"at k={exc.k}; perturb the test point") from exc
    return ensure_finite(prefactor * series, "composition coefficient")


def compose_coeff_direct(params: ModelParams, mu, m: int, n: int, k: int) -> complex:
    """Same coefficient by composing the two monomial actions:
    sum_j C^mu_{m,j} C^lam_{j,n} C^lam_{m-j,m-j-k}."""
    if min(m, n, k) < 0 or n + k > m:
        raise DomainError(f"need 0 <= n + k <= m, got m={m}, n={n}, k={k}")
    outer = _action_coefficients(params.with_lambda(mu), m)
    terms = []
    for j in range(n, m - k + 1):
        first = _action_coefficients(params, j)
        second = _action_coefficients(params, m - j)
        terms.append(outer[j] * first[n] * second[m - j - k])
    return csum(terms)


def _multi_indices(sites: int, order: int):
    for total in range(order + 1):
        for exponents in enumerate_basis(sites, total).members:
            yield exponents


def genfun_residual(params: ModelParams, mu_values: Sequence, order: int) -> float:
    """Coefficientwise mismatch of the generating-function identity through
    total order ``order`` in mu, scale-free."""
    mu_values = [complex(v) for v in mu_values]
    sites = len(mu_values)
    if sites < 1:
        raise DomainError("need at least one mu value")
    if order < 0:
        raise DomainError("order must be nonnegative")
    q2 = params.q2
    lam, zeta, phi = params.lam, params.zeta, params.phi

    def left_weight(m):
        return zeta**(2 * m) * phi**(-m) * zeta_pochhammer(params, m) / qpoch(q2, q2, m)

    def prev_weight(a):
        return qpoch(lam**2 / zeta**2, q2, a) / qpoch(q2, q2, a) * (zeta / lam * phi)**a

    def self_weight(b):
        return qpoch(1 / (lam**2 * zeta**2), q2, b) / qpoch(q2, q2, b) * (lam * zeta / phi)**b

    worst = 0.0
    scale = 0.0
    for exponents in _multi_indices(sites, order):
        mu_power = 1 + 0j
        weight = 1 + 0j
        for value, m in zip(mu_values, exponents):
            mu_power *= value**m
            weight *= left_weight(m)
        lhs = {mono: weight * mu_power * c for mono, c in qf_image(params, exponents).items()}
        rhs = {}
        for split in itertools.product(*(range(m + 1) for m in exponents)):
            out = [0] * sites
            coeff = mu_power
            for site, (m, a) in enumerate(zip(exponents, split)):
                out[(site - 1) % sites] += a
                out[site] += m - a
                coeff *= prev_weight(a) * self_weight(m - a)
            out = tuple(out)
            rhs[out] = rhs.get(out, 0) + coeff
        for mono in set(lhs) | set(rhs):
            left = lhs.get(mono, 0)
            right = rhs.get(mono, 0)
            worst = max(worst, abs(left - right))
            scale = max(scale, abs(left), abs(right))
    if scale == 0:
        return 0.0
    return worst / scale
