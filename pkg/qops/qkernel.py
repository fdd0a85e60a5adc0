"""Complex q-series substrate.

q-Pochhammer symbols (finite, negative and infinite length), the standard
and regularized terminating basic hypergeometric series, and a few
numerical identities used as kernel self-tests. Everything here is a pure
function of its arguments.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from numbers import Integral
from typing import Iterable, Sequence, Tuple

import numpy as np

from .errors import DomainError, NonFiniteError, PoleError

INFINITY = math.inf
TAIL_TOL = 1e-18
POLE_TOL = 1e-13
ROOT_OF_UNITY_TOL = 1e-8
ROOT_OF_UNITY_MAX_ORDER = 64
MAX_INFINITE_TERMS = 100_000


def ensure_finite(value, what: str = "value") -> complex:
    z = complex(value)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise NonFiniteError(f"{what} is not finite: {z!r}")
    return z


def csum(terms: Iterable[complex]) -> complex:
    """Compensated sum of complex terms, real and imaginary parts separately."""
    re_parts = []
    im_parts = []
    for term in terms:
        term = complex(term)
        re_parts.append(term.real)
        im_parts.append(term.imag)
    return complex(math.fsum(re_parts), math.fsum(im_parts))


def relative_residual(lhs: complex, rhs: complex) -> float:
    scale = abs(lhs) + abs(rhs)
    if scale == 0:
        return 0.0
    return abs(lhs - rhs) / scale


def _is_infinite(n) -> bool:
    return isinstance(n, float) and math.isinf(n) and n > 0


def _as_length(n) -> int:
    if isinstance(n, bool) or not isinstance(n, Integral):
        raise DomainError(f"Pochhammer length must be an integer or INFINITY, got {n!r}")
    return int(n)


@dataclass(frozen=True)
class InfiniteProduct:
    """(x;q)_inf truncated once |x q^k| drops below the tolerance.

    ``tail_bound`` bounds |log| of the omitted factors.
    """

    value: complex
    tail_bound: float
    terms: int


def qpoch_infinite(x, q, tol: float = TAIL_TOL) -> InfiniteProduct:
    x = complex(x)
    q = complex(q)
    abs_q = abs(q)
    if not abs_q < 1:
        raise DomainError(f"(x;q)_inf needs |q| < 1, got |q|={abs_q}")
    result = 1 + 0j
    k = 0
    factor = x
    while abs(factor) >= tol:
        if k >= MAX_INFINITE_TERMS:
            raise DomainError(f"(x;q)_inf did not reach tolerance {tol} for x={x!r}, q={q!r}")
        result *= 1 - factor
        k += 1
        factor = x * q**k
    rest = abs(factor)
    tail = rest / ((1 - abs_q) * (1 - rest)) if rest else 0.0
    return InfiniteProduct(ensure_finite(result, "(x;q)_inf"), tail, k)


def qpoch(x, q, n, tol: float = TAIL_TOL) -> complex:
    """(x;q)_n = prod_{k<n} (1 - x q^k).

    ``n`` may be ``INFINITY`` (needs |q| < 1, cut off at ``tol``) or negative,
    where (x;q)_{-k} = 1 / (x q^{-k}; q)_k.
    """
    if _is_infinite(n):
        return qpoch_infinite(x, q, tol).value
    n = _as_length(n)
    x = complex(x)
    q = complex(q)
    if n < 0:
        denominator = qpoch(x * q**n, q, -n)
        if denominator == 0:
            raise DomainError(f"(x;q)_{n} has a pole at x={x!r}")
        return ensure_finite(1 / denominator, f"(x;q)_{n}")
    result = 1 + 0j
    for k in range(n):
        result *= 1 - x * q**k
    return ensure_finite(result, f"(x;q)_{n}")


def qpoch_many(xs: Sequence, q, n, tol: float = TAIL_TOL) -> complex:
    """(x1, x2, ...; q)_n as a product of single symbols."""
    result = 1 + 0j
    for x in xs:
        result *= qpoch(x, q, n, tol)
    return ensure_finite(result)


def qpoch_polynomial(c, q, n: int) -> np.ndarray:
    """Coefficients of prod_{t<n} (1 - c q^t z) in ascending powers of z."""
    n = _as_length(n)
    if n < 0:
        raise DomainError("qpoch_polynomial needs n >= 0")
    c = complex(c)
    q = complex(q)
    coeffs = np.ones(1, dtype=complex)
    for t in range(n):
        coeffs = np.convolve(coeffs, np.array([1.0, -c * q**t], dtype=complex))
    return coeffs


@dataclass(frozen=True)
class SeriesSpec:
    """Terminating r+1 phi r with parameters a (numerators) and b (denominators).

    The terminating numerator q^{-n} is implicit.
    """

    a: Tuple[complex, ...]
    b: Tuple[complex, ...]
    n: int
    q: complex
    z: complex

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(complex(v) for v in self.a))
        object.__setattr__(self, "b", tuple(complex(v) for v in self.b))
        object.__setattr__(self, "q", complex(self.q))
        object.__setattr__(self, "z", complex(self.z))
        if len(self.a) != len(self.b):
            raise DomainError(
                f"series needs as many numerators as denominators, got {len(self.a)} and {len(self.b)}")
        if isinstance(self.n, bool) or not isinstance(self.n, Integral) or self.n < 0:
            raise DomainError(f"termination degree must be a nonnegative integer, got {self.n!r}")
        if self.q == 0:
            raise DomainError("series base must be nonzero")


def _leading_ratios(spec: SeriesSpec):
    """Yield z^k (q^{-n};q)_k/(q;q)_k prod_s (a_s;q)_k for k = 0..n."""
    q = spec.q
    lead = 1 + 0j
    for k in range(spec.n + 1):
        yield k, lead
        lead *= spec.z * (1 - q**(k - spec.n)) / (1 - q**(k + 1))
        for a in spec.a:
            lead *= 1 - a * q**k


def phi_regularized(spec: SeriesSpec) -> complex:
    """Sum_k z^k (q^{-n};q)_k/(q;q)_k prod_s (a_s;q)_k (b_s q^k;q)_{n-k}.

    Finite for every b_s, including b_s = q^{-m}.
    """
    q = spec.q
    terms = []
    for k, lead in _leading_ratios(spec):
        term = lead
        for b in spec.b:
            term *= qpoch(b * q**k, q, spec.n - k)
        terms.append(term)
    return ensure_finite(csum(terms), "regularized series")


def phi_standard(spec: SeriesSpec) -> complex:
    """Sum_k z^k (q^{-n};q)_k/(q;q)_k prod_s (a_s;q)_k/(b_s;q)_k."""
    q = spec.q
    denominators = [1 + 0j] * len(spec.b)
    terms = []
    for k, lead in _leading_ratios(spec):
        if k > 0:
            for s, b in enumerate(spec.b):
                factor = 1 - b * q**(k - 1)
                if abs(factor) <= POLE_TOL * max(1.0, abs(b * q**(k - 1))):
                    raise PoleError(s, k, b)
                denominators[s] *= factor
        term = lead
        for denominator in denominators:
            term /= denominator
        terms.append(term)
    return ensure_finite(csum(terms), "standard series")


def geom_identity_residual(i: int, x, q) -> float:
    """Residual of the finite sum
    sum_k (q^{-2i};q^2)_k/(q^2;q^2)_k q^{2ik}/(1 - x q^{-2k})
    = -x^{-1} (q^2;q^2)_i / (x^{-1};q^2)_{i+1}.
    """
    i = _as_length(i)
    if i < 0:
        raise DomainError("identity index must be nonnegative")
    x = complex(x)
    q = complex(q)
    if x == 0:
        raise DomainError("identity needs x != 0")
    q2 = q * q
    terms = []
    coeff = 1 + 0j
    for k in range(i + 1):
        denominator = 1 - x * q2**(-k)
        if abs(denominator) <= POLE_TOL:
            raise DomainError(f"pole on the evaluation path: x q^(-2k) = 1 at k={k}")
        terms.append(coeff * q2**(i * k) / denominator)
        coeff *= (1 - q2**(k - i)) / (1 - q2**(k + 1))
    lhs = csum(terms)
    rhs_denominator = qpoch(1 / x, q2, i + 1)
    if abs(rhs_denominator) <= POLE_TOL:
        raise DomainError("pole on the evaluation path: (1/x;q^2)_{i+1} = 0")
    rhs = -qpoch(q2, q2, i) / (x * rhs_denominator)
    return relative_residual(ensure_finite(lhs), ensure_finite(rhs))


def qbinomial_expansion_residual(m: int, x, q) -> float:
    """Residual of x^m = sum_k (q^{-m};q)_k/(q;q)_k q^k (x;q)_k, measured against
    the largest term."""
    m = _as_length(m)
    x = complex(x)
    q = complex(q)
    spec = SeriesSpec(a=(), b=(), n=m, q=q, z=q)
    terms = [lead * qpoch(x, q, k) for k, lead in _leading_ratios(spec)]
    scale = max([abs(x**m)] + [abs(t) for t in terms])
    if scale == 0:
        return 0.0
    return abs(x**m - csum(terms)) / scale


def _qpoch_infinite_array(x: np.ndarray, q: complex, tol: float = TAIL_TOL) -> np.ndarray:
    result = np.ones_like(x, dtype=complex)
    k = 0
    while True:
        factor = x * q**k
        if np.max(np.abs(factor)) < tol:
            return result
        if k >= MAX_INFINITE_TERMS:
            raise DomainError("vectorized (x;q)_inf did not reach tolerance")
        result *= 1 - factor
        k += 1


def _check_askey_roy(a, b, c, d, rho, q):
    if not 0 < abs(q) < 1:
        raise DomainError(f"contour integral needs 0 < |q| < 1, got |q|={abs(q)}")
    for name, value in (("a", a), ("b", b), ("c", c), ("d", d)):
        if not abs(value) < 1:
            raise DomainError(
                f"unit circle is not a valid contour: |{name}|={abs(value)} >= 1")
    if rho * c * d == 0:
        raise DomainError("contour integral needs rho*c*d != 0")


def askey_roy_lhs(a, b, c, d, rho, q, npoints: int, tol: float = TAIL_TOL) -> complex:
    """Trapezoid rule for (1/2 pi i) of the contour integral over |y| = 1.

    ``tol`` is the cutoff of every infinite product in the integrand.
    """
    a, b, c, d, rho, q = (complex(v) for v in (a, b, c, d, rho, q))
    _check_askey_roy(a, b, c, d, rho, q)
    if npoints < 1:
        raise DomainError("quadrature needs at least one node")
    theta = 2 * np.pi * np.arange(npoints) / npoints
    y = np.exp(1j * theta)
    numerator = (_qpoch_infinite_array(rho * y / d, q, tol)
                 * _qpoch_infinite_array(q * d / (rho * y), q, tol)
                 * _qpoch_infinite_array(rho * c / y, q, tol)
                 * _qpoch_infinite_array(q * y / (rho * c), q, tol))
    denominator = (_qpoch_infinite_array(a * y, q, tol)
                   * _qpoch_infinite_array(b * y, q, tol)
                   * _qpoch_infinite_array(c / y, q, tol)
                   * _qpoch_infinite_array(d / y, q, tol))
    values = numerator / denominator
    return ensure_finite(csum(values) / npoints, "contour quadrature")


def askey_roy_rhs(a, b, c, d, rho, q, tol: float = TAIL_TOL) -> complex:
    a, b, c, d, rho, q = (complex(v) for v in (a, b, c, d, rho, q))
    _check_askey_roy(a, b, c, d, rho, q)
    numerator = qpoch_many(
        (a * b * c * d, rho, q / rho, rho * c / d, q * d / (rho * c)), q, INFINITY, tol)
    denominator = qpoch_many((a * c, a * d, b * c, b * d, q), q, INFINITY, tol)
    if denominator == 0:
        raise DomainError("closed form has a pole (ac, ad, bc or bd = q^-n)")
    return ensure_finite(numerator / denominator, "closed form")


def askey_roy_residual(a, b, c, d, rho, q, npoints: int, tol: float = TAIL_TOL) -> float:
    lhs = askey_roy_lhs(a, b, c, d, rho, q, npoints, tol)
    rhs = askey_roy_rhs(a, b, c, d, rho, q, tol)
    return relative_residual(lhs, rhs)


def askey_roy_swap_residual(a, b, c, d, rho, q, tol: float = TAIL_TOL) -> float:
    """The closed form is invariant under c <-> d with rho -> rho c / d."""
    original = askey_roy_rhs(a, b, c, d, rho, q, tol)
    swapped = askey_roy_rhs(a, b, d, c, complex(rho) * complex(c) / complex(d), q, tol)
    return relative_residual(original, swapped)


def root_of_unity_warnings(q, max_order: int = ROOT_OF_UNITY_MAX_ORDER,
                           tol: float = ROOT_OF_UNITY_TOL) -> list:
    q = complex(q)
    for order in range(1, max_order + 1):
        distance = abs(q**order - 1)
        if distance < tol:
            return [
                f"q={q!r} is within {distance:.2e} of a root of unity of order {order}; "
                "results near this point are unreliable"
            ]
    return []


def principal_power(base, exponent) -> complex:
    """base**exponent on the principal branch."""
    base = complex(base)
    if base == 0:
        raise DomainError("principal power of zero")
    return cmath.exp(exponent * cmath.log(base))
