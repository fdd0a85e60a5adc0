"""Pydantic I/O models for runs and reports.

Complex numbers are carried as ``[re, im]`` pairs so that reports are plain
JSON; ``as_complex`` converts back.
"""

from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Pair = Tuple[float, float]

SCHEMA_VERSION = 1
DEFAULT_ZETA = (0.7829, 0.3310)
DEFAULT_SECTOR_MAX = 3

SUITE_NAMES = (
    "kernel", "askeyroy", "oracle", "tq", "commute", "factorize", "inversion",
    "asymptotics", "genfun", "sears", "wronskian", "bethe",
)


def as_pair(value) -> Pair:
    value = complex(value)
    return (float(value.real), float(value.imag))


def as_complex(pair) -> complex:
    return complex(pair[0], pair[1])


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    sites: int = Field(2, ge=1)
    sectors: Optional[List[int]] = None
    spin_int: Optional[int] = Field(None, ge=0)
    zeta: Optional[Pair] = None
    q: Pair = (0.5933, 0.0897)
    phi: Pair = (2.9, 0.75)
    lambdas: List[Pair] = Field(default_factory=lambda: [(0.7, 0.3), (1.3, -0.4), (-0.5, 0.9)])
    trunc_tol: float = Field(1e-14, gt=0)
    trunc_min: int = Field(8, ge=1)
    trunc_max: int = Field(512, ge=1)
    series_tol: float = Field(1e-18, gt=0)
    suites: List[str] = Field(default_factory=lambda: list(SUITE_NAMES))
    out: Optional[str] = None
    dump_matrices: Optional[str] = None
    precision_warn: bool = False
    workers: int = Field(1, ge=1)

    @field_validator("sectors")
    @classmethod
    def check_sectors(cls, sectors):
        if sectors is None:
            return sectors
        if any(l < 0 for l in sectors):
            raise ValueError("sector degrees must be nonnegative")
        if len(set(sectors)) != len(sectors):
            raise ValueError("sector list has duplicates")
        return sectors

    @field_validator("suites")
    @classmethod
    def check_suites(cls, suites):
        if "all" in suites:
            return list(SUITE_NAMES)
        unknown = [name for name in suites if name not in SUITE_NAMES]
        if unknown:
            raise ValueError(f"unknown suites: {', '.join(unknown)}")
        return suites

    @field_validator("lambdas")
    @classmethod
    def check_lambdas(cls, lambdas):
        if not lambdas:
            raise ValueError("the lambda grid is empty")
        if any(as_complex(lam) == 0 for lam in lambdas):
            raise ValueError("lambda must be nonzero")
        return lambdas

    @model_validator(mode="after")
    def check_spin_mode(self):
        if self.spin_int is not None and self.zeta is not None:
            raise ValueError("give at most one of spin_int and zeta")
        if self.spin_int is None and self.zeta is None:
            self.zeta = DEFAULT_ZETA
        if self.sectors is None:
            top = DEFAULT_SECTOR_MAX
            if self.spin_int is not None:
                top = min(top, self.sites * self.spin_int)
            self.sectors = list(range(top + 1))
        if self.trunc_min > self.trunc_max:
            raise ValueError("trunc_min exceeds trunc_max")
        if self.spin_int is not None:
            too_big = [l for l in self.sectors if l > self.sites * self.spin_int]
            if too_big:
                raise ValueError(
                    f"sectors {too_big} are empty for M={self.sites}, I={self.spin_int}")
        return self


class SuiteRecord(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    name: str
    params: Dict[str, Any] = Field(default_factory=dict)
    residual: Optional[float] = None
    tolerance: float
    passed: bool = Field(alias="pass")
    ms: float = 0.0
    skipped: bool = False
    diagnostic: Optional[str] = None


class BetheRoot(BaseModel):
    value: Pair
    paired: bool
    residual: float


class BetheRootReport(BaseModel):
    sector: int
    family: str
    eigenvalue_index: int
    eigenvalue: Pair
    coefficients: List[Pair]
    roots: List[BetheRoot] = Field(default_factory=list)
    spurious: int = 0
    leading_coefficient: Pair
    rho: Pair
    matched: bool = True

    @property
    def max_residual(self) -> float:
        return max((root.residual for root in self.roots), default=0.0)


class EnvironmentStamp(BaseModel):
    python: str
    numpy: str
    scipy: str
    pydantic: str
    platform: str


class SuiteReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(SCHEMA_VERSION, alias="schema")
    config: Dict[str, Any]
    suites: List[SuiteRecord] = Field(default_factory=list)
    bethe: List[BetheRootReport] = Field(default_factory=list)
    warnings: List[str] = Field(default_factory=list)
    environment: Optional[EnvironmentStamp] = None

    @property
    def all_passed(self) -> bool:
        return all(record.passed for record in self.suites)

    def as_document(self) -> Dict[str, Any]:
        return self.model_dump(by_alias=True, mode="json")
