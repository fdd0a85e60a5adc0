"""Q-operators A+ (any spin) and A- (integer spin).

A+/- are transfer matrices with a q-oscillator auxiliary space: the Fock
index n is traced over, and the normalization (1 - phi^2M q^{2l-IM})
multiplies the trace. Three constructions are provided:

* the truncated Fock trace (``build_aplus_trace``, ``build_aminus``),
  valid where the geometric series converges;
* the same trace summed in closed form (``build_aplus_continued``,
  ``build_aminus_continued``), which is its analytic continuation in phi;
* the factorized form A+(lam) = A+(zeta) Q_f(lam) with the closed-form
  A+(zeta) (``aplus_at_zeta``, ``build_aplus_factorized``).

Matrix convention: for a local element [A]_{n,i}^{n',i'} the lower pair is
the output (row) and the upper pair the input (column).
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import ConsistencyError, DivergenceError, DomainError, SingularityError, UnsupportedSpinError
from .qf_operator import qf_block
from .qkernel import SeriesSpec, ensure_finite, phi_regularized, qpoch, qpoch_polynomial
from .sector import (OperatorMatrix, SectorBasis, enumerate_basis, max_norm, mirror_basis,
                     mirror_permutation)
from .settings import Settings
from .transfer import ModelParams

RESONANCE_TOL = 1e-12
DIVERGENCE_WINDOW = 3


@dataclass(frozen=True)
class TruncationPolicy:
    n_min: int = 8
    n_max: int = 512
    tol: float = 1e-14
    hysteresis: int = 3

    def __post_init__(self):
        if self.n_min < 1:
            raise DomainError(f"n_min must be positive, got {self.n_min}")
        if self.n_min > self.n_max:
            raise DomainError(f"n_min ({self.n_min}) exceeds n_max ({self.n_max})")
        if not self.tol > 0:
            raise DomainError(f"tolerance must be positive, got {self.tol}")
        if self.hysteresis < 1:
            raise DomainError("hysteresis must be at least 1")

    @classmethod
    def from_settings(cls, settings: Optional[Settings] = None) -> "TruncationPolicy":
        settings = settings or Settings.from_env()
        return cls(n_min=settings.trunc_min, n_max=settings.trunc_max, tol=settings.trunc_tol)


@dataclass
class FockTraceResult:
    matrix: OperatorMatrix
    tail_bound: float
    terms_used: int


# Local L-operator elements

@lru_cache(maxsize=65536)
def _aplus_element(params: ModelParams, n: int, i: int, nprime: int, iprime: int) -> complex:
    if min(n, i, nprime, iprime) < 0 or i + nprime != iprime + n:
        return 0j
    q, q2 = params.q, params.q2
    zeta, phi, lam = params.zeta, params.phi, params.lam
    exponent = (i * (i + 1) - iprime * (iprime + 1)) // 2 + i * iprime - n * (i + iprime)
    prefactor = (phi**(-2 * n) * (-1)**(i + iprime) * lam**(-i) * q**exponent
                 * zeta**(2 * i + 2 * n)
                 * qpoch(q2, q2, nprime) / (qpoch(q2, q2, n) * qpoch(q2, q2, i)))
    series = phi_regularized(SeriesSpec(
        a=(q2**(-iprime), lam**2 / zeta**2),
        b=(zeta**-4, q2**(1 + n - i)),
        n=i, q=q2, z=q2))
    return ensure_finite(prefactor * series, "A+ element")


def aplus_L_element(params: ModelParams, n: int, i: int, nprime: int, iprime: int) -> complex:
    return _aplus_element(params, n, i, nprime, iprime)


def _require_integer_spin(params: ModelParams, what: str) -> int:
    if params.spin_I is None:
        raise UnsupportedSpinError(
            f"{what} needs integer spin; the second Q-operator is not available at complex spin")
    return params.spin_I


@lru_cache(maxsize=65536)
def _aminus_element_direct(params: ModelParams, n: int, i: int, nprime: int, iprime: int) -> complex:
    spin = params.spin_I
    if min(n, i, nprime, iprime) < 0 or i + n != iprime + nprime:
        return 0j
    q, q2 = params.q, params.q2
    phi, lam = params.phi, params.lam
    exponent = -(i * (i - 1)) // 2 + (iprime * (iprime - 1)) // 2 + i * (spin + iprime) \
        + n * (spin - i - iprime)
    prefactor = (phi**(2 * n) * lam**(i - spin) * q**exponent
                 * qpoch(lam**2 * q**(-spin + 2 * (iprime - n)), q2, spin - i - iprime)
                 / qpoch(q2, q2, i))
    series = phi_regularized(SeriesSpec(
        a=(q2**(-iprime), lam**2 * q**(-spin)),
        b=(q**(-2 * spin), q2**(1 + n - iprime)),
        n=i, q=q2, z=q2))
    return ensure_finite(prefactor * series, "A- element")


def aminus_L_element(params: ModelParams, n: int, i: int, nprime: int, iprime: int,
                     direct: bool = False) -> complex:
    """A- element through the mirror of A+ with phi -> 1/phi, or directly."""
    spin = _require_integer_spin(params, "A-")
    if not (0 <= i <= spin and 0 <= iprime <= spin):
        raise DomainError(f"site indices must lie in [0, {spin}], got i={i}, i'={iprime}")
    if direct:
        return _aminus_element_direct(params, n, i, nprime, iprime)
    return _aplus_element(params.with_phi(1 / params.phi), n, spin - i, nprime, spin - iprime)


# Fock-space traces

def trace_normalization(params: ModelParams, M: int, l: int) -> complex:
    """1 - phi^2M q^{2l-IM}, with q^{IM} read as zeta^2M."""
    return 1 - params.phi**(2 * M) * params.q**(2 * l) * params.zeta**(-2 * M)


class FockTrace(ABC):
    """Fock trace of M local elements on one sector."""

    kind = ""

    def __init__(self, params: ModelParams, basis: SectorBasis):
        self.params = params
        self.basis = basis
        self.sites = basis.sites
        self.normalization = trace_normalization(params, basis.sites, basis.degree)

    @abstractmethod
    def element(self, n: int, i: int, nprime: int, iprime: int) -> complex:
        pass

    @abstractmethod
    def step(self, i: int, iprime: int) -> int:
        """n' - n for a local element with site indices (i, i')."""

    @abstractmethod
    def predicted_ratio(self) -> complex:
        pass

    def offsets(self, row, column):
        offsets = [0]
        for k in range(self.sites - 1):
            offsets.append(offsets[-1] + self.step(row[k], column[k]))
        return offsets

    def term(self, n: int, row, column, offsets) -> complex:
        value = 1 + 0j
        for k in range(self.sites):
            n_here = n + offsets[k]
            n_next = n + offsets[(k + 1) % self.sites]
            value *= self.element(n_here, row[k], n_next, column[k])
            if value == 0:
                break
        return value

    def build(self, policy: TruncationPolicy) -> FockTraceResult:
        members = self.basis.members
        size = self.basis.size
        layout = {}
        for r, row in enumerate(members):
            for c, column in enumerate(members):
                offsets = self.offsets(row, column)
                layout[(r, c)] = (offsets, max(0, -min(offsets)))
        acc = np.zeros((size, size), dtype=complex)
        ratios = []
        previous = None
        quiet = 0
        tail = float("inf")
        for t in range(policy.n_max):
            term = np.zeros((size, size), dtype=complex)
            for (r, c), (offsets, n0) in layout.items():
                term[r, c] = self.term(n0 + t, members[r], members[c], offsets)
            acc += term
            term_norm = max_norm(term)
            acc_norm = max_norm(acc)
            if previous is not None:
                ratios.append(term_norm / previous if previous else 0.0)
            previous = term_norm
            small = term_norm <= policy.tol * acc_norm
            quiet = quiet + 1 if small else 0
            terms_used = t + 1
            if terms_used < policy.n_min:
                continue
            recent = ratios[-DIVERGENCE_WINDOW:]
            if not small and recent and min(recent) >= 1:
                self._diverged(terms_used, float(np.mean(recent)))
            if quiet >= policy.hysteresis:
                rho = max(ratios[-policy.hysteresis:]) if ratios else 0.0
                if rho < 1:
                    tail = term_norm * rho / ((1 - rho) * acc_norm) if acc_norm else 0.0
                    if tail < policy.tol:
                        matrix = OperatorMatrix(self.basis, self.normalization * acc, self.kind)
                        return FockTraceResult(matrix, tail, terms_used)
        observed = float(np.mean(ratios[-DIVERGENCE_WINDOW:])) if ratios else float("inf")
        self._diverged(policy.n_max, observed)

    def _diverged(self, terms: int, observed: float):
        predicted = abs(self.predicted_ratio())
        message = (f"{self.kind} Fock trace does not decay after {terms} terms "
                   f"(observed ratio {observed:.3g}, geometric ratio {predicted:.3g}); "
                   f"choose phi with |ratio| < 1 or use the continued trace")
        raise DivergenceError(message, observed, predicted)


class AplusTrace(FockTrace):
    kind = "A+"

    def element(self, n, i, nprime, iprime):
        return _aplus_element(self.params, n, i, nprime, iprime)

    def step(self, i, iprime):
        return iprime - i

    def predicted_ratio(self):
        return self.params.aplus_trace_ratio(self.sites, self.basis.degree)


class AminusTrace(FockTrace):
    kind = "A-"

    def __init__(self, params: ModelParams, basis: SectorBasis):
        _require_integer_spin(params, "A-")
        super().__init__(params, basis)
        self._mirrored = params.with_phi(1 / params.phi)
        self._spin = params.spin_I

    def element(self, n, i, nprime, iprime):
        return _aplus_element(self._mirrored, n, self._spin - i, nprime, self._spin - iprime)

    def step(self, i, iprime):
        return i - iprime

    def predicted_ratio(self):
        return self.params.aminus_trace_ratio(self.sites, self.basis.degree)


class TraceFactory:

    @staticmethod
    def create_trace(kind: str, params: ModelParams, basis: SectorBasis) -> FockTrace:
        if kind == "aplus":
            return AplusTrace(params, basis)
        elif kind == "aminus":
            return AminusTrace(params, basis)
        else:
            raise ValueError(f"Unsupported trace kind: {kind}")


def _check_trace_basis(params: ModelParams, basis: SectorBasis) -> None:
    if params.spin_I is not None and basis.cap != params.spin_I:
        raise DomainError(f"integer spin I={params.spin_I} needs a basis capped at I")
    if params.spin_I is None and basis.cap is not None:
        raise DomainError("a capped basis needs integer spin")


def build_aplus_trace(params: ModelParams, basis: SectorBasis,
                      policy: Optional[TruncationPolicy] = None) -> FockTraceResult:
    _check_trace_basis(params, basis)
    policy = policy or TruncationPolicy.from_settings()
    return TraceFactory.create_trace("aplus", params, basis).build(policy)


def build_aminus(params: ModelParams, basis: SectorBasis,
                 policy: Optional[TruncationPolicy] = None) -> FockTraceResult:
    _require_integer_spin(params, "A-")
    _check_trace_basis(params, basis)
    policy = policy or TruncationPolicy.from_settings()
    return TraceFactory.create_trace("aminus", params, basis).build(policy)


# Closed-form trace (analytic continuation in phi)

def _site_polynomial(params: ModelParams, i: int, iprime: int, offset: int) -> np.ndarray:
    """A+ element at Fock index n + offset without its n-geometric factor and the
    telescoping (q^2;q^2) ratio, as a polynomial in u = q^{2n}."""
    q, q2 = params.q, params.q2
    zeta, phi, lam = params.zeta, params.phi, params.lam
    exponent = (i * (i + 1) - iprime * (iprime + 1)) // 2 + i * iprime
    ratio = phi**-2 * zeta**2 * q**(-(i + iprime))
    constant = ((-1)**(i + iprime) * lam**(-i) * q**exponent * zeta**(2 * i)
                / qpoch(q2, q2, i) * ratio**offset)
    a1, a2, b1 = q2**(-iprime), lam**2 / zeta**2, zeta**-4
    poly = np.zeros(i + 1, dtype=complex)
    lead = 1 + 0j
    for s in range(i + 1):
        if s > 0:
            lead *= (q2 * (1 - q2**(s - 1 - i)) / (1 - q2**s)
                     * (1 - a1 * q2**(s - 1)) * (1 - a2 * q2**(s - 1)))
        weight = lead * qpoch(b1 * q2**s, q2, i - s)
        poly[:i - s + 1] += weight * qpoch_polynomial(q2**(1 - i + offset + s), q2, i - s)
    return constant * poly


def _continued_entries(params: ModelParams, rows, columns, normalization: complex,
                       leading_factor: complex) -> np.ndarray:
    """sum_{n >= n0} beta^n P(q^2n) = sum_j p_j beta_j^n0 / (1 - beta_j) per entry, with
    the j = 0 normalization supplied exactly as ``leading_factor``."""
    q2 = params.q2
    sites = len(rows[0]) if rows else 0
    entries = np.zeros((len(rows), len(columns)), dtype=complex)
    for r, row in enumerate(rows):
        for c, column in enumerate(columns):
            offsets = [0]
            for k in range(sites - 1):
                offsets.append(offsets[-1] + column[k] - row[k])
            n0 = max(0, -min(offsets))
            poly = np.ones(1, dtype=complex)
            beta = 1 + 0j
            for k in range(sites):
                poly = np.convolve(poly, _site_polynomial(params, row[k], column[k], offsets[k]))
                beta *= params.phi**-2 * params.zeta**2 * params.q**(-(row[k] + column[k]))
            value = 0j
            for j, coeff in enumerate(poly):
                if coeff == 0:
                    continue
                beta_j = beta * q2**j
                if j == 0:
                    factor = leading_factor
                else:
                    gap = 1 - beta_j
                    if abs(gap) <= RESONANCE_TOL:
                        raise SingularityError(
                            f"continued trace has a pole: phi resonance at shift {j}", s=j)
                    factor = normalization / gap
                value += coeff * beta_j**n0 * factor
            entries[r, c] = ensure_finite(value, "continued trace entry")
    return entries


def build_aplus_continued(params: ModelParams, basis: SectorBasis) -> OperatorMatrix:
    _check_trace_basis(params, basis)
    M, l = basis.sites, basis.degree
    beta = params.aplus_trace_ratio(M, l)
    normalization = trace_normalization(params, M, l)
    entries = _continued_entries(params, basis.members, basis.members, normalization, -1 / beta)
    return OperatorMatrix(basis, entries, "A+")


def build_aminus_continued(params: ModelParams, basis: SectorBasis) -> OperatorMatrix:
    spin = _require_integer_spin(params, "A-")
    _check_trace_basis(params, basis)
    mirrored = params.with_phi(1 / params.phi)
    rows = [tuple(spin - v for v in m) for m in basis.members]
    normalization = trace_normalization(params, basis.sites, basis.degree)
    entries = _continued_entries(mirrored, rows, rows, normalization, 1 + 0j)
    return OperatorMatrix(basis, entries, "A-")


# Closed form at lambda = zeta and the factorization

def _taylor_coefficients(row, column, q2) -> np.ndarray:
    """Coefficients in z of prod_{m>=2} (z q^{2+2 sum_{t<m}(i_t - i'_t)}; q^2)_{i_m}."""
    poly = np.ones(1, dtype=complex)
    shift = 0
    for m in range(1, len(row)):
        shift += row[m - 1] - column[m - 1]
        poly = np.convolve(poly, qpoch_polynomial(q2**(1 + shift), q2, row[m]))
    return poly


def _aplus_at_zeta_block(params: ModelParams, rows: SectorBasis, columns: SectorBasis,
                         with_prefactor: bool = True) -> np.ndarray:
    q, q2 = params.q, params.q2
    zeta, phi = params.zeta, params.phi
    M, l = rows.sites, rows.degree
    resonance = phi**(2 * M) * zeta**(-2 * M)
    for u in range(l + 1):
        if abs(1 - resonance * q2**u) <= RESONANCE_TOL:
            raise SingularityError(
                f"A+(zeta) is singular: phi^2M zeta^-2M q^2s = 1 at s={u}", s=u)
    normalization = trace_normalization(params, M, l)
    overall = (-1)**(l + 1) * normalization * q**l * zeta**l
    block = np.zeros((rows.size, columns.size), dtype=complex)
    for r, row in enumerate(rows.members):
        row_factor = overall
        if with_prefactor:
            for ik in row:
                row_factor *= qpoch(zeta**-4, q2, ik) / qpoch(q2, q2, ik)
        for c, column in enumerate(columns.members):
            power = 2 * M + 2 * sum((k + 1) * (column[k] - row[k]) for k in range(M))
            taylor = _taylor_coefficients(row, column, q2)
            total = 0j
            for s in range(l - row[0] + 1):
                coeff = taylor[s] if s < len(taylor) else 0
                if coeff == 0:
                    continue
                total += (qpoch(q2, q2, row[0]) / qpoch(resonance * q2**s, q2, row[0] + 1)
                          * coeff)
            block[r, c] = row_factor * (phi / zeta)**power * total
    return block


def aplus_at_zeta(params: ModelParams, basis: SectorBasis) -> OperatorMatrix:
    _check_trace_basis(params, basis)
    return OperatorMatrix(basis, _aplus_at_zeta_block(params, basis, basis), "A+(zeta)")


def _mirror_to_aminus(params: ModelParams, basis: SectorBasis, build) -> OperatorMatrix:
    """A-(phi) on sector l = -phi^2M q^{2l-IM} R A+(1/phi) on sector IM-l R."""
    _require_integer_spin(params, "A-")
    _check_trace_basis(params, basis)
    M, l = basis.sites, basis.degree
    mirrored_basis = mirror_basis(basis)
    mirrored = build(params.with_phi(1 / params.phi), mirrored_basis)
    perm = mirror_permutation(basis, mirrored_basis)
    scale = -params.phi**(2 * M) * params.q**(2 * l) * params.zeta**(-2 * M)
    return OperatorMatrix(basis, scale * mirrored.entries[np.ix_(perm, perm)], "A-")


def aminus_at_zeta(params: ModelParams, basis: SectorBasis) -> OperatorMatrix:
    result = _mirror_to_aminus(params, basis, aplus_at_zeta)
    result.label = "A-(zeta)"
    return result


def build_aplus_factorized(params: ModelParams, basis: SectorBasis) -> OperatorMatrix:
    """A+(lam) = A+(zeta) Q_f(lam); at integer spin the (zeta^-4;q^2) factors of the
    intermediate sum are cancelled before evaluation."""
    _check_trace_basis(params, basis)
    if params.spin_I is None:
        at_zeta = _aplus_at_zeta_block(params, basis, basis)
        return OperatorMatrix(basis, at_zeta @ qf_block(params, basis, basis), "A+")
    verma = enumerate_basis(basis.sites, basis.degree)
    left = qf_block(params, basis, verma, with_prefactor=False)
    right = _aplus_at_zeta_block(params, verma, basis, with_prefactor=False)
    entries = left @ right
    if not np.all(np.isfinite(entries)):
        raise ConsistencyError("uncancelled singularity in the integer-spin factorized product")
    return OperatorMatrix(basis, entries, "A+")


def build_aminus_factorized(params: ModelParams, basis: SectorBasis) -> OperatorMatrix:
    return _mirror_to_aminus(params, basis, build_aplus_factorized)


# Normalizations

def leading_constant(params: ModelParams, M: int, l: int, kind: str = "aplus") -> complex:
    """lam -> infinity limit of lam^-l A+ (or lam^-(IM-l) A-) as a multiple of the identity."""
    if kind == "aplus":
        return (-1)**(l + 1) * params.phi**(2 * M) * params.q**l * params.zeta**(-2 * M)
    if kind == "aminus":
        spin = _require_integer_spin(params, "A-")
        return (-1)**(spin * M - l) * params.q**(l - spin * M)
    raise ValueError(f"Unknown operator kind: {kind}")


def wronskian_scalar(params: ModelParams, M: int, l: int, lam) -> complex:
    """(-1)^IM phi^M q^{l-IM} (1 - phi^2M q^{2l-IM}) lam^IM (lam^-2 q^-I; q^2)_I^M."""
    spin = _require_integer_spin(params, "the Wronskian")
    lam = complex(lam)
    q, phi = params.q, params.phi
    return ((-1)**(spin * M) * phi**M * q**(l - spin * M)
            * (1 - phi**(2 * M) * q**(2 * l - spin * M))
            * lam**(spin * M) * qpoch(lam**-2 * q**(-spin), params.q2, spin)**M)
