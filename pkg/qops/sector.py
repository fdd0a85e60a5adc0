"""Charge sectors W_l and dense operator matrices over them.

A sector is the set of monomials x_1^{i_1} ... x_M^{i_M} of total degree l,
optionally with every exponent capped at an integer spin I. Members are
kept in graded-lexicographic order with the leftmost site most significant.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from math import comb
from pathlib import Path
from types import MappingProxyType
from typing import Iterator, Mapping, Optional, Tuple

import numpy as np

from .errors import DomainError, EmptySectorError, NotInSectorError

Monomial = Tuple[int, ...]


def _compositions(sites: int, degree: int, cap: int) -> Iterator[Monomial]:
    if sites == 1:
        if degree <= cap:
            yield (degree,)
        return
    upper = min(degree, cap)
    lower = max(0, degree - cap * (sites - 1))
    for first in range(upper, lower - 1, -1):
        for rest in _compositions(sites - 1, degree - first, cap):
            yield (first,) + rest


@dataclass(frozen=True)
class SectorBasis:
    sites: int
    degree: int
    cap: Optional[int]
    members: Tuple[Monomial, ...]
    index: Mapping[Monomial, int]

    @property
    def size(self) -> int:
        return len(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, monomial) -> bool:
        return tuple(monomial) in self.index


def enumerate_basis(M: int, l: int, cap: Optional[int] = None) -> SectorBasis:
    if M < 1:
        raise DomainError(f"number of sites must be positive, got {M}")
    if l < 0:
        raise DomainError(f"sector degree must be nonnegative, got {l}")
    if cap is not None:
        if cap < 0:
            raise DomainError(f"cap must be nonnegative, got {cap}")
        if l > M * cap:
            raise EmptySectorError(M, l, cap)
    effective_cap = l if cap is None else min(cap, l)
    members = tuple(_compositions(M, l, effective_cap))
    index = MappingProxyType({m: k for k, m in enumerate(members)})
    return SectorBasis(sites=M, degree=l, cap=cap, members=members, index=index)


def index_of(basis: SectorBasis, m) -> int:
    key = tuple(int(v) for v in m)
    try:
        return basis.index[key]
    except KeyError:
        raise NotInSectorError(
            f"monomial {key} is not in the sector M={basis.sites}, l={basis.degree}, "
            f"cap={basis.cap}") from None


def uncapped_size(M: int, l: int) -> int:
    return comb(M + l - 1, l)


def mirror_monomial(m: Monomial, cap: int) -> Monomial:
    """i_k -> I - i_k."""
    return tuple(cap - v for v in m)


def mirror_basis(basis: SectorBasis) -> SectorBasis:
    """Capped sector l mapped onto sector I*M - l."""
    if basis.cap is None:
        raise DomainError("mirror needs a capped basis")
    return enumerate_basis(basis.sites, basis.cap * basis.sites - basis.degree, basis.cap)


def mirror_permutation(basis: SectorBasis, mirrored: SectorBasis) -> np.ndarray:
    """perm[r] = position in ``mirrored`` of the mirror image of member r."""
    return np.array([index_of(mirrored, mirror_monomial(m, basis.cap)) for m in basis.members],
                    dtype=int)


def max_norm(entries) -> float:
    array = np.asarray(entries)
    if array.size == 0:
        return 0.0
    return float(np.max(np.abs(array)))


class OperatorMatrix:
    """Dense complex matrix on a sector; entry (r, c) is the coefficient of
    member r in the image of member c."""

    def __init__(self, basis: SectorBasis, entries, label: str = ""):
        entries = np.array(entries, dtype=complex)
        if entries.shape != (basis.size, basis.size):
            raise DomainError(
                f"matrix shape {entries.shape} does not match sector size {basis.size}")
        self.basis = basis
        self.entries = entries
        self.label = label

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        if other.basis.members != self.basis.members:
            raise DomainError("cannot compose operators on different sectors")
        return OperatorMatrix(self.basis, self.entries @ other.entries)

    def __repr__(self):
        return (f"OperatorMatrix({self.label or 'op'}, M={self.basis.sites}, "
                f"l={self.basis.degree}, size={self.basis.size})")

    @property
    def size(self) -> int:
        return self.basis.size

    def max_norm(self) -> float:
        return max_norm(self.entries)

    def scaled(self, factor) -> "OperatorMatrix":
        return OperatorMatrix(self.basis, self.entries * complex(factor), self.label)

    def csv_rows(self):
        for r in range(self.size):
            for c in range(self.size):
                value = self.entries[r, c]
                yield r, c, repr(float(value.real)), repr(float(value.imag))

    def dump_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["row", "col", "re", "im"])
            writer.writerows(self.csv_rows())
        return path


def _as_array(operand) -> np.ndarray:
    if isinstance(operand, OperatorMatrix):
        return operand.entries
    return np.asarray(operand, dtype=complex)


def relative_difference(a, b) -> float:
    """max|a - b| / max(max|a|, max|b|)."""
    a = _as_array(a)
    b = _as_array(b)
    scale = max(max_norm(a), max_norm(b))
    if scale == 0:
        return 0.0
    return max_norm(a - b) / scale


def commutator_residual(a, b) -> float:
    """max|AB - BA| / (max|A| max|B|)."""
    a = _as_array(a)
    b = _as_array(b)
    scale = max_norm(a) * max_norm(b)
    if scale == 0:
        return 0.0
    return max_norm(a @ b - b @ a) / scale
