"""Six-vertex transfer matrix on a charge sector.

``build_transfer`` follows the auxiliary-space trace of the ordered product
of local L-operators; ``apply_transfer_qdiff`` is an independently coded
oracle that realizes the same L-operator as q-difference operators on
polynomials and sums over all auxiliary paths.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Dict, Optional, Tuple

import numpy as np

from . import console
from .errors import DomainError
from .qkernel import ensure_finite, principal_power
from .sector import Monomial, OperatorMatrix, SectorBasis, max_norm

SPIN_CONSISTENCY_TOL = 1e-12
LEAKAGE_TOL = 1e-13


def bracket(x) -> complex:
    """[x] = x - 1/x."""
    x = complex(x)
    return x - 1 / x


@dataclass(frozen=True)
class ModelParams:
    """Parameter bundle (q, zeta, optional integer spin, phi, lambda).

    ``lam`` is the spectral parameter. ``spin_I`` is set only in the
    finite-dimensional mode, where zeta**2 must equal q**spin_I.
    """

    q: complex
    zeta: complex
    phi: complex
    lam: complex
    spin_I: Optional[int] = None

    def __post_init__(self):
        for name in ("q", "zeta", "phi", "lam"):
            value = ensure_finite(getattr(self, name), name)
            object.__setattr__(self, name, value)
        if not 0 < abs(self.q) < 1:
            raise DomainError(f"need 0 < |q| < 1, got |q|={abs(self.q)}")
        for name in ("zeta", "phi", "lam"):
            if getattr(self, name) == 0:
                raise DomainError(f"{name} must be nonzero")
        if self.spin_I is not None:
            if isinstance(self.spin_I, bool) or int(self.spin_I) != self.spin_I or self.spin_I < 0:
                raise DomainError(f"integer spin must be a nonnegative integer, got {self.spin_I!r}")
            object.__setattr__(self, "spin_I", int(self.spin_I))
            mismatch = abs(self.zeta**2 - self.q**self.spin_I)
            if mismatch >= SPIN_CONSISTENCY_TOL:
                raise DomainError(
                    f"zeta^2 differs from q^I by {mismatch:.2e} for I={self.spin_I}")

    @classmethod
    def from_spin(cls, q, spin_I: int, phi, lam) -> "ModelParams":
        zeta = principal_power(q, spin_I / 2)
        return cls(q=q, zeta=zeta, phi=phi, lam=lam, spin_I=spin_I)

    @property
    def is_integer_spin(self) -> bool:
        return self.spin_I is not None

    @property
    def q2(self) -> complex:
        return self.q * self.q

    def with_lambda(self, lam) -> "ModelParams":
        return replace(self, lam=complex(lam))

    def with_phi(self, phi) -> "ModelParams":
        return replace(self, phi=complex(phi))

    def aplus_trace_ratio(self, M: int, l: int) -> complex:
        """Geometric ratio of the A+ Fock trace in sector l."""
        return self.phi**(-2 * M) * self.zeta**(2 * M) * self.q**(-2 * l)

    def aminus_trace_ratio(self, M: int, l: int) -> complex:
        return 1 / self.aplus_trace_ratio(M, l)

    def trace_converges(self, kind: str, M: int, l: int) -> bool:
        if kind == "aplus":
            return abs(self.aplus_trace_ratio(M, l)) < 1
        if kind == "aminus":
            return abs(self.aminus_trace_ratio(M, l)) < 1
        raise ValueError(f"Unknown trace kind: {kind}")


@dataclass(frozen=True)
class LocalLBlocks:
    """The four L-operator entries acting on v_i, each as (coefficient, shift)."""

    l11: Tuple[complex, int]
    l12: Tuple[complex, int]
    l21: Tuple[complex, int]
    l22: Tuple[complex, int]

    def entry(self, a: int, b: int) -> Tuple[complex, int]:
        return ((self.l11, self.l12), (self.l21, self.l22))[a][b]


def local_L(params: ModelParams, i: int) -> LocalLBlocks:
    if i < 0:
        raise DomainError(f"site occupation must be nonnegative, got {i}")
    if params.spin_I is not None and i > params.spin_I:
        raise DomainError(f"site occupation {i} exceeds spin I={params.spin_I}")
    q, zeta, phi, lam = params.q, params.zeta, params.phi, params.lam
    return LocalLBlocks(
        l11=(bracket(lam * zeta * q**(-i)) / phi, 0),
        l12=(bracket(zeta**2 * q**(-i)) / phi, 1),
        l21=(phi * (q**i - q**(-i)), -1),
        l22=(phi * bracket(lam / zeta * q**i), 0),
    )


def _check_basis(params: ModelParams, basis: SectorBasis) -> None:
    if params.spin_I is None and basis.cap is not None:
        raise DomainError("a capped basis needs integer spin")
    if params.spin_I is not None and basis.cap != params.spin_I:
        raise DomainError(
            f"integer spin I={params.spin_I} needs a basis capped at I, got cap={basis.cap}")


def transfer_image(params: ModelParams, m: Monomial) -> Dict[Monomial, complex]:
    """T applied to one monomial, accumulating the 2x2 auxiliary matrix site by site."""
    m = tuple(m)
    acc = {(a0, a0): {m: 1 + 0j} for a0 in (0, 1)}
    for site in range(len(m)):
        rows = {}
        cache = {}
        for (a0, a), image in acc.items():
            for b in (0, 1):
                target = rows.setdefault((a0, b), {})
                for monomial, coeff in image.items():
                    occupation = monomial[site]
                    if occupation not in cache:
                        cache[occupation] = local_L(params, occupation)
                    weight, shift = cache[occupation].entry(a, b)
                    if weight == 0:
                        continue
                    moved = list(monomial)
                    moved[site] += shift
                    moved = tuple(moved)
                    target[moved] = target.get(moved, 0) + coeff * weight
        acc = rows
    result = {}
    for a0 in (0, 1):
        for monomial, coeff in acc[(a0, a0)].items():
            result[monomial] = result.get(monomial, 0) + coeff
    return result


def _assemble(basis: SectorBasis, images) -> Tuple[np.ndarray, float]:
    entries = np.zeros((basis.size, basis.size), dtype=complex)
    leaked = 0.0
    for column, image in enumerate(images):
        for monomial, coeff in image.items():
            row = basis.index.get(monomial)
            if row is None:
                if sum(monomial) != basis.degree:
                    raise DomainError(f"image left the sector: {monomial}")
                leaked = max(leaked, abs(coeff))
                continue
            entries[row, column] += coeff
    return entries, leaked


def _transfer_entries(params: ModelParams, basis: SectorBasis) -> Tuple[np.ndarray, float]:
    _check_basis(params, basis)
    return _assemble(basis, (transfer_image(params, m) for m in basis.members))


def build_transfer(params: ModelParams, basis: SectorBasis) -> OperatorMatrix:
    entries, leaked = _transfer_entries(params, basis)
    scale = max_norm(entries) or 1.0
    if leaked / scale >= LEAKAGE_TOL:
        console.status("transfer", f"capped sector leaks {leaked / scale:.2e} at I={params.spin_I}",
                       "warn")
    return OperatorMatrix(basis, entries, "T")


def transfer_leakage(params: ModelParams, basis: SectorBasis) -> float:
    """Largest image component outside a capped basis, relative to max|T|."""
    entries, leaked = _transfer_entries(params, basis)
    scale = max_norm(entries) or 1.0
    return leaked / scale


# q-difference oracle: one-variable polynomials are {power: coefficient}.

def _scale_by_d(poly, scale, power, q):
    """p(x) -> [scale * D^power] p(x), with D x^i = q^i x^i."""
    out = {}
    for i, c in poly.items():
        value = scale * q**(power * i)
        weight = value - 1 / value
        if weight != 0:
            out[i] = c * weight
    return out


def _times_x(poly):
    return {i + 1: c for i, c in poly.items()}


def _divide_x(poly):
    if 0 in poly:
        raise DomainError("X^-1 applied to a constant term")
    return {i - 1: c for i, c in poly.items()}


def _qdiff_entry(params: ModelParams, a: int, b: int, poly):
    q, zeta, phi, lam = params.q, params.zeta, params.phi, params.lam
    if (a, b) == (0, 0):
        out = _scale_by_d(poly, lam * zeta, -1, q)
        return {i: c / phi for i, c in out.items()}
    if (a, b) == (0, 1):
        out = _times_x(_scale_by_d(poly, zeta**2, -1, q))
        return {i: c / phi for i, c in out.items()}
    if (a, b) == (1, 0):
        out = _divide_x(_scale_by_d(poly, 1, 1, q))
        return {i: c * phi for i, c in out.items()}
    out = _scale_by_d(poly, lam / zeta, 1, q)
    return {i: c * phi for i, c in out.items()}


def apply_transfer_qdiff(params: ModelParams, m: Monomial) -> Dict[Monomial, complex]:
    """T on one monomial as a sum over all 2^M auxiliary paths of q-difference operators."""
    m = tuple(m)
    sites = len(m)
    result = {}
    for path in itertools.product((0, 1), repeat=sites):
        factors = []
        for site in range(sites):
            a, b = path[site], path[(site + 1) % sites]
            factors.append(_qdiff_entry(params, a, b, {m[site]: 1 + 0j}))
        if any(not f for f in factors):
            continue
        for combo in itertools.product(*(sorted(f.items()) for f in factors)):
            monomial = tuple(power for power, _ in combo)
            coeff = 1 + 0j
            for _, c in combo:
                coeff *= c
            result[monomial] = result.get(monomial, 0) + coeff
    return result


def qdiff_matrix(params: ModelParams, basis: SectorBasis) -> OperatorMatrix:
    _check_basis(params, basis)
    entries, _ = _assemble(basis, (apply_transfer_qdiff(params, m) for m in basis.members))
    return OperatorMatrix(basis, entries, "T-qdiff")
