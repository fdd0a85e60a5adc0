"""Environment-driven defaults.

CLI flags override these; library callers may pass explicit values
instead. Values are read when ``Settings.from_env()`` is called, never at
import time.
"""

import os

from .errors import ConfigurationError

DEFAULT_TRUNC_TOL = 1e-14
DEFAULT_TRUNC_MIN = 8
DEFAULT_TRUNC_MAX = 512
DEFAULT_SERIES_TOL = 1e-18
DEFAULT_WORKERS = 1


def _read_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = float(raw)
    except ValueError:
        raise ConfigurationError(f"{name} must be a number, got {raw!r}")
    if not value > 0:
        raise ConfigurationError(f"{name} must be positive, got {raw!r}")
    return value


def _read_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ConfigurationError(f"{name} must be an integer, got {raw!r}")
    if value < 1:
        raise ConfigurationError(f"{name} must be at least 1, got {raw!r}")
    return value


class Settings:

    def __init__(self,
                 trunc_tol: float = DEFAULT_TRUNC_TOL,
                 trunc_min: int = DEFAULT_TRUNC_MIN,
                 trunc_max: int = DEFAULT_TRUNC_MAX,
                 series_tol: float = DEFAULT_SERIES_TOL,
                 workers: int = DEFAULT_WORKERS):
        if trunc_min > trunc_max:
            raise ConfigurationError(
                f"QOPS_TRUNC_MIN ({trunc_min}) exceeds QOPS_TRUNC_MAX ({trunc_max})")
        self.trunc_tol = trunc_tol
        self.trunc_min = trunc_min
        self.trunc_max = trunc_max
        self.series_tol = series_tol
        self.workers = workers

    @classmethod
    def from_env(cls) -> "Settings":
        return cls(
            trunc_tol=_read_float("QOPS_TRUNC_TOL", DEFAULT_TRUNC_TOL),
            trunc_min=_read_int("QOPS_TRUNC_MIN", DEFAULT_TRUNC_MIN),
            trunc_max=_read_int("QOPS_TRUNC_MAX", DEFAULT_TRUNC_MAX),
            series_tol=_read_float("QOPS_SERIES_TOL", DEFAULT_SERIES_TOL),
            workers=_read_int("QOPS_WORKERS", DEFAULT_WORKERS),
        )
