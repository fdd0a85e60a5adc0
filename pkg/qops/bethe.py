"""Bethe roots from Q-operator eigenvalues.

T(lam_ref) fixes a common eigenbasis; each eigenvalue of A+ (or A-) is then
read off the projected diagonal on a circle of nodes, lam^d times it is
interpolated as a polynomial of degree 2d and its roots are the Bethe roots.
"""

from __future__ import annotations

import math
from typing import List, Optional

import numpy as np
import scipy.linalg
from numpy.polynomial import polynomial as P

from . import console
from .aplus_operator import build_aminus_continued, build_aplus_continued, leading_constant
from .models import BetheRoot, BetheRootReport, as_pair
from .sector import SectorBasis
from .transfer import ModelParams, bracket, build_transfer

DEGENERACY_TOL = 1e-6
SPURIOUS_ROOT = 1e8
PAIR_TOL = 1e-6
TRIM_TOL = 1e-13
RADIUS_CANDIDATES = (1.37, 1.73, 0.61, 2.2)


def node_radius(params: ModelParams) -> float:
    """Circle radius farthest (in log scale) from |lam| = 1, |zeta| and 1/|zeta|."""
    avoid = [0.0, math.log(abs(params.zeta)), -math.log(abs(params.zeta))]
    return max(RADIUS_CANDIDATES, key=lambda r: min(abs(math.log(r) - a) for a in avoid))


def interpolation_nodes(degree: int, radius: float) -> np.ndarray:
    count = 2 * degree + 1
    return radius * np.exp(2j * np.pi * np.arange(count) / count)


def _family_degree(params: ModelParams, basis: SectorBasis, family: str) -> int:
    if family == "aplus":
        return basis.degree
    if family == "aminus":
        return params.spin_I * basis.sites - basis.degree
    raise ValueError(f"Unknown Q-operator family: {family}")


def _build(params: ModelParams, basis: SectorBasis, family: str):
    if family == "aplus":
        return build_aplus_continued(params, basis)
    return build_aminus_continued(params, basis)


def _is_degenerate(eigenvalues: np.ndarray) -> bool:
    scale = float(np.max(np.abs(eigenvalues))) or 1.0
    for a in range(len(eigenvalues)):
        for b in range(a + 1, len(eigenvalues)):
            if abs(eigenvalues[a] - eigenvalues[b]) < DEGENERACY_TOL * scale:
                return True
    return False


def eigenvalue_samples(params: ModelParams, basis: SectorBasis, family: str,
                       nodes: np.ndarray):
    """Eigenvalues of T(lam_ref) and the projected Q eigenvalues at each node, shape (nodes, size)."""
    transfer = build_transfer(params, basis)
    eigenvalues, vectors = scipy.linalg.eig(transfer.entries)
    degenerate = _is_degenerate(eigenvalues)
    if degenerate:
        console.status("bethe", f"T spectrum is degenerate in sector l={basis.degree}; "
                       "roots are reported unmatched", "warn")
    samples = np.zeros((len(nodes), basis.size), dtype=complex)
    for j, lam in enumerate(nodes):
        operator = _build(params.with_lambda(lam), basis, family)
        projected = scipy.linalg.solve(vectors, operator.entries @ vectors)
        samples[j] = np.diag(projected)
    return eigenvalues, samples, degenerate


def fit_polynomial(nodes: np.ndarray, values: np.ndarray, degree: int) -> np.ndarray:
    """Ascending coefficients of lam^degree * value(lam) through the nodes."""
    vandermonde = np.vander(nodes, len(nodes), increasing=True)
    return scipy.linalg.solve(vandermonde, nodes**degree * values)


def _eigenvalue_at(coefficients: np.ndarray, degree: int, lam: complex) -> complex:
    return P.polyval(lam, coefficients) / lam**degree


def bethe_residual(params: ModelParams, family: str, coefficients: np.ndarray, degree: int,
                   root: complex, sites: int) -> float:
    """|phi^{+-M}[lam/zeta]^M Q(q lam) + phi^{-+M}[lam zeta]^M Q(lam/q)| over the sum of magnitudes."""
    q, zeta, phi = params.q, params.zeta, params.phi
    sign = 1 if family == "aplus" else -1
    first = phi**(sign * sites) * bracket(root / zeta)**sites \
        * _eigenvalue_at(coefficients, degree, q * root)
    second = phi**(-sign * sites) * bracket(root * zeta)**sites \
        * _eigenvalue_at(coefficients, degree, root / q)
    scale = abs(first) + abs(second)
    if scale == 0:
        return 0.0
    return abs(first + second) / scale


def _pair_roots(roots) -> List[tuple]:
    """Collapse lam, -lam pairs to one representative with a paired flag."""
    remaining = list(roots)
    out = []
    while remaining:
        root = remaining.pop(0)
        partner = None
        for k, other in enumerate(remaining):
            if abs(root + other) <= PAIR_TOL * max(abs(root), 1.0):
                partner = k
                break
        if partner is None:
            out.append((root, False))
            continue
        remaining.pop(partner)
        if root.real < 0 or (root.real == 0 and root.imag < 0):
            root = -root
        out.append((root, True))
    return out


def bethe_roots(params: ModelParams, basis: SectorBasis, family: str = "aplus",
                nodes: Optional[np.ndarray] = None) -> List[BetheRootReport]:
    """One report per T eigenvector; ``nodes`` overrides the default 2d + 1 point circle."""
    degree = _family_degree(params, basis, family)
    M = basis.sites
    rho = leading_constant(params, M, basis.degree, family)
    if degree == 0:
        eigenvalues = scipy.linalg.eigvals(build_transfer(params, basis).entries)
        constant = _build(params, basis, family).entries
        return [
            BetheRootReport(sector=basis.degree, family=family, eigenvalue_index=k,
                            eigenvalue=as_pair(value), coefficients=[as_pair(constant[k, k])],
                            leading_coefficient=as_pair(constant[k, k]), rho=as_pair(rho))
            for k, value in enumerate(eigenvalues)
        ]
    if nodes is None:
        nodes = interpolation_nodes(degree, node_radius(params))
    else:
        nodes = np.asarray(nodes, dtype=complex)
        if len(nodes) != 2 * degree + 1:
            raise ValueError(f"need {2 * degree + 1} interpolation nodes, got {len(nodes)}")
    eigenvalues, samples, degenerate = eigenvalue_samples(params, basis, family, nodes)
    reports = []
    for k in range(basis.size):
        coefficients = fit_polynomial(nodes, samples[:, k], degree)
        scale = float(np.max(np.abs(coefficients))) or 1.0
        trimmed = P.polytrim(coefficients, TRIM_TOL * scale)
        spurious = len(coefficients) - len(trimmed)
        roots = []
        for root in (P.polyroots(trimmed) if len(trimmed) > 1 else []):
            if abs(root) > SPURIOUS_ROOT or abs(root) < 1 / SPURIOUS_ROOT:
                spurious += 1
                continue
            roots.append(complex(root))
        entries = []
        for root, paired in _pair_roots(roots):
            residual = bethe_residual(params, family, coefficients, degree, root, M)
            entries.append(BetheRoot(value=as_pair(root), paired=paired, residual=residual))
        if spurious:
            console.status("bethe", f"l={basis.degree} eigenvalue {k}: discarded {spurious} "
                           "spurious roots", "warn")
        reports.append(BetheRootReport(
            sector=basis.degree, family=family, eigenvalue_index=k,
            eigenvalue=as_pair(eigenvalues[k]),
            coefficients=[as_pair(c) for c in coefficients],
            roots=entries, spurious=spurious,
            leading_coefficient=as_pair(coefficients[-1]), rho=as_pair(rho),
            matched=not degenerate))
    return reports
