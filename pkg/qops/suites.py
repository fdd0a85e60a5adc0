"""Verification suites.

Each suite turns one identity into scale-free residuals over a grid of
parameter points. A ``RunContext`` carries the resolved parameters; the
``SuiteFactory`` maps suite names to ``Suite`` subclasses.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .aplus_operator import (TruncationPolicy, aplus_at_zeta, build_aminus, build_aminus_continued,
                             build_aminus_factorized, build_aplus_continued, build_aplus_factorized,
                             build_aplus_trace, leading_constant, wronskian_scalar)
from .bethe import bethe_roots
from .errors import ConsistencyError, DomainError, UnsupportedSpinError
from .models import BetheRootReport, RunConfig, as_complex, as_pair
from .qf_operator import build_qf, build_qinf, compose_coeff, compose_coeff_direct, genfun_residual
from .qkernel import (TAIL_TOL, SeriesSpec, askey_roy_residual, askey_roy_swap_residual,
                      geom_identity_residual, phi_regularized, phi_standard,
                      qbinomial_expansion_residual, qpoch)
from .sector import (OperatorMatrix, SectorBasis, commutator_residual, enumerate_basis, max_norm,
                     relative_difference)
from .transfer import ModelParams, bracket, build_transfer, qdiff_matrix, transfer_leakage

KERNEL_SEED = 20240601
KERNEL_DRAWS = 100
ASYMPTOTIC_POINTS = (1e3, 1e4)
ASYMPTOTIC_FLOOR = 1e-13
ASKEY_ROY_LADDER = (4, 8, 16, 32)
ASKEY_ROY_NODES = (256, 512, 1024)
ASKEY_ROY_FLOOR = 1e-13
ASKEY_ROY_PARAMS = dict(
    a=0.45 * np.exp(0.7j), b=0.3 * np.exp(-1.1j), c=0.4 * np.exp(2.0j), d=0.35 * np.exp(-0.4j),
    rho=0.8 * np.exp(0.5j), q=0.5 * np.exp(0.25j))
GENFUN_MU = (0.21 + 0.13j, -0.17 + 0.08j, 0.11 - 0.19j, -0.06 - 0.14j)
GENFUN_ORDER = 3
SEARS_MAX_M = 5
MU_SHIFT = 1.1 * np.exp(0.37j)


def trace_path(params: ModelParams, basis: SectorBasis, kind: str) -> str:
    """'trace' when the Fock trace of A+ or A- converges at ``params.phi``, else 'continued'."""
    family = "aplus" if kind == "Aplus" else "aminus"
    return "trace" if params.trace_converges(family, basis.sites, basis.degree) else "continued"


def q_operator(params: ModelParams, basis: SectorBasis, kind: str,
               policy: Optional[TruncationPolicy] = None, continued: bool = False) -> OperatorMatrix:
    """T, Qf, Aplus or Aminus at ``params.lam``; A+- use the truncated trace where it
    converges and the continued trace otherwise (or always, with ``continued``)."""
    if kind == "T":
        return build_transfer(params, basis)
    if kind == "Qf":
        return build_qf(params, basis)
    if kind not in ("Aplus", "Aminus"):
        raise ValueError(f"Unknown operator: {kind}")
    if continued or trace_path(params, basis, kind) == "continued":
        if kind == "Aplus":
            return build_aplus_continued(params, basis)
        return build_aminus_continued(params, basis)
    if kind == "Aplus":
        return build_aplus_trace(params, basis, policy).matrix
    return build_aminus(params, basis, policy).matrix


def _three_term(lhs: np.ndarray, first: np.ndarray, second: np.ndarray) -> float:
    scale = max(max_norm(lhs), max_norm(first), max_norm(second))
    if scale == 0:
        return 0.0
    return max_norm(lhs - first - second) / scale


def tq_residual(params: ModelParams, basis: SectorBasis, operator: str,
                policy: Optional[TruncationPolicy] = None, continued: bool = False) -> float:
    """Three-term TQ relation; Q_f multiplies T from the left, A+- from the right."""
    M, q, lam, zeta, phi = basis.sites, params.q, params.lam, params.zeta, params.phi
    sign = -1 if operator == "Aminus" else 1
    transfer = build_transfer(params, basis).entries
    here = q_operator(params, basis, operator, policy, continued).entries
    up = q_operator(params.with_lambda(q * lam), basis, operator, policy, continued).entries
    down = q_operator(params.with_lambda(lam / q), basis, operator, policy, continued).entries
    lhs = here @ transfer if operator == "Qf" else transfer @ here
    first = phi**(sign * M) * bracket(lam / zeta)**M * up
    second = phi**(-sign * M) * bracket(lam * zeta)**M * down
    return _three_term(lhs, first, second)


def commutativity_residual(params: ModelParams, basis: SectorBasis, lam, mu,
                           pair: Tuple[str, str] = ("Qf", "Qf"),
                           policy: Optional[TruncationPolicy] = None) -> float:
    """Normalized commutator of pair[0](lam) with pair[1](mu)."""
    continued = "Aplus" in pair and "Aminus" in pair
    left = q_operator(params.with_lambda(lam), basis, pair[0], policy, continued)
    right = q_operator(params.with_lambda(mu), basis, pair[1], policy, continued)
    return commutator_residual(left, right)


def wronskian_residual(params: ModelParams, basis: SectorBasis, lam) -> float:
    """phi^M A+(q lam) A-(lam) - phi^-M A-(q lam) A+(lam) against its scalar."""
    if params.spin_I is None:
        raise UnsupportedSpinError("the Wronskian needs integer spin")
    lam = complex(lam)
    M, phi = basis.sites, params.phi
    here, up = params.with_lambda(lam), params.with_lambda(params.q * lam)
    first = phi**M * (build_aplus_continued(up, basis).entries
                      @ build_aminus_continued(here, basis).entries)
    second = phi**(-M) * (build_aminus_continued(up, basis).entries
                          @ build_aplus_continued(here, basis).entries)
    scalar = wronskian_scalar(params, M, basis.degree, lam)
    difference = first - second - scalar * np.eye(basis.size)
    scale = max(max_norm(first), max_norm(second), abs(scalar))
    return max_norm(difference) / scale if scale else 0.0


def inversion_residual(params: ModelParams, basis: SectorBasis) -> float:
    """A+(zeta) Q_inf against its leading constant times the identity."""
    product = aplus_at_zeta(params, basis).entries @ build_qinf(params, basis).entries
    constant = leading_constant(params, basis.sites, basis.degree, "aplus")
    return max_norm(product - constant * np.eye(basis.size)) / abs(constant)


def asymptotic_deviation(params: ModelParams, basis: SectorBasis, operator: str, lam: float,
                         policy: Optional[TruncationPolicy] = None) -> float:
    M, l = basis.sites, basis.degree
    if operator == "Qf":
        degree, target = l, build_qinf(params, basis).entries
    elif operator == "Aplus":
        degree = l
        target = leading_constant(params, M, l, "aplus") * np.eye(basis.size)
    else:
        degree = params.spin_I * M - l
        target = leading_constant(params, M, l, "aminus") * np.eye(basis.size)
    value = q_operator(params.with_lambda(lam), basis, operator, policy).entries / lam**degree
    return max_norm(value - target) / max_norm(target)


@dataclass(frozen=True)
class RunContext:
    sites: int
    q: complex
    zeta: complex
    phi: complex
    spin_I: Optional[int]
    lambdas: Tuple[complex, ...]
    sectors: Tuple[int, ...]
    policy: TruncationPolicy
    series_tol: float = TAIL_TOL

    @classmethod
    def from_config(cls, config: RunConfig) -> "RunContext":
        q = as_complex(config.q)
        if config.spin_int is not None:
            zeta = ModelParams.from_spin(q, config.spin_int, 1, 1).zeta
        else:
            zeta = as_complex(config.zeta)
        return cls(
            sites=config.sites, q=q, zeta=zeta, phi=as_complex(config.phi),
            spin_I=config.spin_int,
            lambdas=tuple(as_complex(lam) for lam in config.lambdas),
            sectors=tuple(config.sectors),
            policy=TruncationPolicy(n_min=config.trunc_min, n_max=config.trunc_max,
                                    tol=config.trunc_tol),
            series_tol=config.series_tol)

    @property
    def integer(self) -> bool:
        return self.spin_I is not None

    def params(self, lam=None) -> ModelParams:
        lam = self.lambdas[0] if lam is None else lam
        return ModelParams(q=self.q, zeta=self.zeta, phi=self.phi, lam=lam, spin_I=self.spin_I)

    def basis(self, l: int) -> SectorBasis:
        return enumerate_basis(self.sites, l, self.spin_I)

    def partner(self, index: int) -> complex:
        if len(self.lambdas) > 1:
            return self.lambdas[(index + 1) % len(self.lambdas)]
        return self.lambdas[index] * MU_SHIFT


@dataclass
class Outcome:
    residual: float
    tolerance: Optional[float] = None
    diagnostic: Optional[str] = None
    reports: List[BetheRootReport] = field(default_factory=list)


class Suite(ABC):
    """One verification family; ``points`` fixes the grid, ``evaluate`` one residual."""

    name = ""
    tolerance = 1e-9
    needs_integer = False
    needs_generic = False

    def skip_reason(self, context: RunContext) -> Optional[str]:
        if self.needs_integer and not context.integer:
            return f"{self.name} needs integer spin"
        if self.needs_generic and context.integer:
            return f"{self.name} needs generic complex spin"
        return None

    @abstractmethod
    def points(self, context: RunContext) -> List[Dict[str, Any]]:
        pass

    @abstractmethod
    def evaluate(self, context: RunContext, point: Dict[str, Any]) -> Outcome:
        pass

    def tolerance_for(self, point: Dict[str, Any]) -> float:
        return self.tolerance


def _sector_points(context: RunContext) -> List[Dict[str, Any]]:
    return [{"l": l} for l in context.sectors]


def _grid_points(context: RunContext, **extra) -> List[Dict[str, Any]]:
    return [dict(l=l, lam_index=k, **extra)
            for l in context.sectors for k in range(len(context.lambdas))]


def _lam(context: RunContext, point: Dict[str, Any]) -> complex:
    return context.lambdas[point.get("lam_index", 0)]


class KernelSuite(Suite):
    name = "kernel"
    tolerance = 1e-12

    def points(self, context):
        return [{"check": "geom"}, {"check": "series"}, {"check": "qbinomial"}]

    def evaluate(self, context, point):
        rng = np.random.default_rng(KERNEL_SEED)
        check = point["check"]
        worst = 0.0
        for _ in range(KERNEL_DRAWS):
            q = rng.uniform(0.2, 0.9) * np.exp(1j * rng.uniform(-np.pi, np.pi))
            x = rng.uniform(0.4, 2.5) * np.exp(1j * rng.uniform(-np.pi, np.pi))
            degree = int(rng.integers(0, 9))
            if check == "geom":
                try:
                    residual = geom_identity_residual(degree, x, q)
                except DomainError:
                    continue
            elif check == "qbinomial":
                residual = qbinomial_expansion_residual(degree, x, q)
            else:
                a = tuple(rng.uniform(-1, 1, 2) @ np.array([1, 1j]) for _ in range(2))
                b = tuple(rng.uniform(-1, 1, 2) @ np.array([1, 1j]) for _ in range(2))
                spec = SeriesSpec(a=a, b=b, n=min(degree, 4), q=q if abs(q) > 0.4 else q * 1.5,
                                  z=x / abs(x))
                norm = 1 + 0j
                for value in b:
                    norm *= qpoch(value, spec.q, spec.n)
                standard = phi_standard(spec)
                regular = phi_regularized(spec) / norm
                residual = abs(standard - regular) / max(abs(standard), abs(regular), 1e-300)
            worst = max(worst, residual)
        return Outcome(worst)


class AskeyRoySuite(Suite):
    name = "askeyroy"
    tolerance = 1e-8

    def points(self, context):
        return [{"check": "quadrature", "nodes": ASKEY_ROY_NODES[-1]}, {"check": "swap"}]

    def tolerance_for(self, point):
        return 1e-12 if point["check"] == "swap" else self.tolerance

    def evaluate(self, context, point):
        params = dict(ASKEY_ROY_PARAMS, tol=context.series_tol)
        if point["check"] == "swap":
            return Outcome(askey_roy_swap_residual(**params))
        ladder = [askey_roy_residual(npoints=n, **params) for n in ASKEY_ROY_LADDER]
        if any(b >= a for a, b in zip(ladder, ladder[1:])):
            raise ConsistencyError(f"trapezoid error is not decreasing on {ASKEY_ROY_LADDER}: {ladder}")
        tail = [askey_roy_residual(npoints=n, **params) for n in ASKEY_ROY_NODES]
        if any(b > max(a, ASKEY_ROY_FLOOR) for a, b in zip(tail, tail[1:])):
            raise ConsistencyError(f"trapezoid error grows on {ASKEY_ROY_NODES}: {tail}")
        return Outcome(tail[-1], diagnostic=f"ladder {['%.1e' % r for r in ladder]}")


class OracleSuite(Suite):
    name = "oracle"
    tolerance = 1e-12

    def points(self, context):
        checks = ["qdiff", "leakage"] if context.integer else ["qdiff"]
        return [{"l": l, "check": check} for l in context.sectors for check in checks]

    def tolerance_for(self, point):
        return 1e-13 if point["check"] == "leakage" else self.tolerance

    def evaluate(self, context, point):
        params, basis = context.params(), context.basis(point["l"])
        if point["check"] == "leakage":
            return Outcome(transfer_leakage(params, basis))
        return Outcome(relative_difference(build_transfer(params, basis), qdiff_matrix(params, basis)))


class TQSuite(Suite):
    """A+- on the truncated trace where it converges; the point's ``path`` names the one used."""

    name = "tq"

    def points(self, context):
        operators = ["Aplus", "Aminus"] if context.integer else ["Qf", "Aplus"]
        params = context.params()
        out = []
        for op in operators:
            for point in _grid_points(context, operator=op):
                if op != "Qf":
                    point["path"] = trace_path(params, context.basis(point["l"]), op)
                out.append(point)
        return out

    def tolerance_for(self, point):
        return 1e-10 if point["operator"] == "Qf" else 1e-9

    def evaluate(self, context, point):
        params = context.params(_lam(context, point))
        continued = point.get("path") == "continued"
        residual = tq_residual(params, context.basis(point["l"]), point["operator"], context.policy,
                               continued)
        diagnostic = None
        if continued:
            diagnostic = f"{point['operator']} Fock trace diverges at this phi; continued trace used"
        return Outcome(residual, diagnostic=diagnostic)


class CommuteSuite(Suite):
    name = "commute"

    def points(self, context):
        if context.integer:
            pairs = [("T", "T"), ("Aplus", "T"), ("Aminus", "T"), ("Aplus", "Aminus")]
        else:
            pairs = [("T", "T"), ("Qf", "Qf"), ("Qf", "T"), ("Aplus", "T"), ("Aplus", "Aplus")]
        return [p for pair in pairs for p in _grid_points(context, pair=list(pair))]

    def tolerance_for(self, point):
        return 1e-9 if any(op.startswith("A") for op in point["pair"]) else 1e-11

    def evaluate(self, context, point):
        index = point["lam_index"]
        lam, mu = context.lambdas[index], context.partner(index)
        return Outcome(commutativity_residual(context.params(), context.basis(point["l"]), lam, mu,
                                              tuple(point["pair"]), context.policy))


class FactorizeSuite(Suite):
    name = "factorize"

    def points(self, context):
        out = []
        for l in context.sectors:
            if not context.integer:
                out.append({"l": l, "check": "qf_identity"})
                out.append({"l": l, "check": "order"})
            checks = ["Aplus", "Aminus"] if context.integer else ["Aplus"]
            out.extend(dict(l=l, lam_index=k, check=check)
                       for check in checks for k in range(len(context.lambdas)))
        return out

    def tolerance_for(self, point):
        return {"qf_identity": 1e-13, "order": 1e-10}.get(point["check"], 1e-9)

    def evaluate(self, context, point):
        basis = context.basis(point["l"])
        check = point["check"]
        if check == "qf_identity":
            identity = build_qf(context.params(context.zeta), basis).entries
            return Outcome(max_norm(identity - np.eye(basis.size)))
        if check == "order":
            params = context.params()
            return Outcome(commutator_residual(aplus_at_zeta(params, basis), build_qf(params, basis)))
        params = context.params(_lam(context, point))
        if check == "Aplus":
            trace = build_aplus_trace(params, basis, context.policy).matrix
            return Outcome(relative_difference(trace, build_aplus_factorized(params, basis)))
        return Outcome(relative_difference(build_aminus_continued(params, basis),
                                           build_aminus_factorized(params, basis)))


class InversionSuite(Suite):
    name = "inversion"
    tolerance = 1e-10
    needs_generic = True

    def points(self, context):
        return _sector_points(context)

    def evaluate(self, context, point):
        return Outcome(inversion_residual(context.params(), context.basis(point["l"])))


class AsymptoticsSuite(Suite):
    """Scaling exponent of the lambda -> infinity deviation, which must be lambda^-2."""

    name = "asymptotics"
    tolerance = math.log10(2)

    def points(self, context):
        operators = ["Aplus", "Aminus"] if context.integer else ["Aplus", "Qf"]
        return [{"l": l, "operator": op} for l in context.sectors for op in operators]

    def evaluate(self, context, point):
        basis = context.basis(point["l"])
        near, far = (asymptotic_deviation(context.params(), basis, point["operator"], lam, context.policy)
                     for lam in ASYMPTOTIC_POINTS)
        if near < ASYMPTOTIC_FLOOR:
            return Outcome(far, tolerance=1e-10,
                           diagnostic="operator is constant in lambda at this sector")
        exponent = math.log10(near / far) if far > 0 else float("inf")
        return Outcome(abs(exponent - 2),
                       diagnostic=f"deviation {near:.2e} at 1e3, {far:.2e} at 1e4")


class GenfunSuite(Suite):
    name = "genfun"
    tolerance = 1e-11
    needs_generic = True

    def points(self, context):
        return [{"order": GENFUN_ORDER}]

    def evaluate(self, context, point):
        mu = [GENFUN_MU[k % len(GENFUN_MU)] for k in range(context.sites)]
        return Outcome(genfun_residual(context.params(), mu, point["order"]))


class SearsSuite(Suite):
    name = "sears"
    tolerance = 1e-11
    needs_generic = True

    def points(self, context):
        return [{"check": "symmetry", "max_m": SEARS_MAX_M}, {"check": "direct", "max_m": SEARS_MAX_M}]

    def evaluate(self, context, point):
        lam, mu = context.lambdas[0], context.partner(0)
        here, there = context.params(lam), context.params(mu)
        left, right = [], []
        for m in range(point["max_m"] + 1):
            for n in range(m + 1):
                for k in range(m - n + 1):
                    value = compose_coeff(here, mu, m, n, k)
                    left.append(value)
                    if point["check"] == "symmetry":
                        right.append(compose_coeff(there, lam, m, n, k))
                    else:
                        right.append(compose_coeff_direct(here, mu, m, n, k))
        return Outcome(relative_difference(np.array(left), np.array(right)))


class WronskianSuite(Suite):
    name = "wronskian"
    tolerance = 1e-8
    needs_integer = True

    def points(self, context):
        return _sector_points(context)

    def evaluate(self, context, point):
        params = context.params()
        return Outcome(wronskian_residual(params, context.basis(point["l"]), params.lam))


class BetheSuite(Suite):
    name = "bethe"
    tolerance = 1e-6

    def points(self, context):
        families = ["aplus", "aminus"] if context.integer else ["aplus"]
        return [{"l": l, "family": family} for l in context.sectors for family in families]

    def evaluate(self, context, point):
        params, basis = context.params(), context.basis(point["l"])
        family = point["family"]
        reports = bethe_roots(params, basis, family)
        bound = basis.degree if family == "aplus" else params.spin_I * basis.sites - basis.degree
        # a degenerate T spectrum mixes eigenvalues, so only the bound holds there
        wrong = [r.eigenvalue_index for r in reports
                 if len(r.roots) > bound or (r.matched and len(r.roots) != bound)]
        if wrong:
            raise ConsistencyError(f"eigenvalues {wrong} do not have exactly {bound} root pairs")
        residual = max((r.max_residual for r in reports), default=0.0)
        counts = [len(r.roots) for r in reports]
        return Outcome(residual, diagnostic=f"root pairs per eigenvalue {counts}", reports=reports)


class SuiteFactory:

    _suites = {
        suite.name: suite for suite in (
            KernelSuite, AskeyRoySuite, OracleSuite, TQSuite, CommuteSuite, FactorizeSuite,
            InversionSuite, AsymptoticsSuite, GenfunSuite, SearsSuite, WronskianSuite, BetheSuite)
    }

    @staticmethod
    def create_suite(name: str) -> Suite:
        try:
            return SuiteFactory._suites[name]()
        except KeyError:
            raise ValueError(f"Unsupported suite: {name}") from None

    @staticmethod
    def available() -> Tuple[str, ...]:
        return tuple(SuiteFactory._suites)


def point_label(point: Dict[str, Any], context: RunContext) -> Dict[str, Any]:
    """Point parameters as they appear in the report."""
    label = dict(point)
    if "lam_index" in label:
        label["lambda"] = list(as_pair(context.lambdas[label.pop("lam_index")]))
    return label
