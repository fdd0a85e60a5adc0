import os

import pytest

# Set test environment before any qops imports
os.environ["QOPS_QUIET"] = "1"
os.environ["PYTHONDONTWRITEBYTECODE"] = "1"

from qops import console
from tests.utils.test_helpers import LAMBDAS, PHI, SMALL_PHI, ParamGenerator

TUNING_VARIABLES = ("QOPS_TRUNC_TOL", "QOPS_TRUNC_MIN", "QOPS_TRUNC_MAX", "QOPS_SERIES_TOL",
                    "QOPS_WORKERS")


@pytest.fixture(autouse=True)
def isolated_environment(monkeypatch):
    """Every test starts from default settings with status lines silenced."""
    for name in TUNING_VARIABLES:
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv("QOPS_QUIET", "1")
    console.set_quiet(None)
    yield
    console.set_quiet(None)


@pytest.fixture
def generic_params():
    """Generic complex spin, |phi| = 3 so the A+ trace converges on small sectors."""
    return ParamGenerator.generic()


@pytest.fixture
def spin_params():
    """Factory for integer-spin bundles: spin_params(I, phi=...)."""
    def make(spin, phi=PHI, lam=LAMBDAS[0]):
        return ParamGenerator.integer(spin, lam=lam, phi=phi)
    return make


@pytest.fixture
def small_phi():
    """|phi| small enough for the A- trace to converge."""
    return SMALL_PHI

