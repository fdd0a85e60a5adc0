import pytest

from qops import console
from qops.aplus_operator import build_aplus_trace
from qops.errors import ConfigurationError, DivergenceError
from qops.sector import enumerate_basis
from qops.settings import DEFAULT_TRUNC_MAX, Settings
from qops.suites import RunContext
from qops.verify_cli import build_parser, config_from_args


@pytest.mark.unit
class TestSettings:
    """Test environment-driven defaults."""

    def test_defaults(self):
        """Test an empty environment yields the documented defaults."""
        settings = Settings.from_env()
        assert settings.trunc_max == DEFAULT_TRUNC_MAX
        assert settings.trunc_tol == 1e-14
        assert settings.workers == 1

    def test_overrides(self, monkeypatch):
        """Test QOPS_* variables are read at call time."""
        monkeypatch.setenv("QOPS_TRUNC_MIN", "4")
        monkeypatch.setenv("QOPS_WORKERS", "3")
        monkeypatch.setenv("QOPS_SERIES_TOL", "")
        settings = Settings.from_env()
        assert (settings.trunc_min, settings.workers, settings.series_tol) == (4, 3, 1e-18)

    @pytest.mark.parametrize("name,value", [
        ("QOPS_TRUNC_TOL", "tiny"),
        ("QOPS_TRUNC_TOL", "-1e-3"),
        ("QOPS_TRUNC_MAX", "0"),
        ("QOPS_WORKERS", "2.5"),
    ])
    def test_invalid_values(self, monkeypatch, name, value):
        """Test malformed or nonpositive values raise ConfigurationError."""
        monkeypatch.setenv(name, value)
        with pytest.raises(ConfigurationError):
            Settings.from_env()

    def test_inconsistent_bounds(self, monkeypatch):
        """Test QOPS_TRUNC_MIN above QOPS_TRUNC_MAX is rejected."""
        monkeypatch.setenv("QOPS_TRUNC_MIN", "100")
        monkeypatch.setenv("QOPS_TRUNC_MAX", "10")
        with pytest.raises(ConfigurationError):
            Settings.from_env()

    def test_series_cutoff_reaches_run(self, monkeypatch):
        """Test QOPS_SERIES_TOL flows into the run context."""
        monkeypatch.setenv("QOPS_SERIES_TOL", "1e-6")
        config = config_from_args(build_parser().parse_args(["--suites", "askeyroy"]))
        assert config.series_tol == 1e-6
        assert RunContext.from_config(config).series_tol == 1e-6


@pytest.mark.unit
class TestConsole:
    """Test tagged status lines."""

    def test_quiet_hides_progress(self, capsys):
        """Test quiet mode drops ok lines but keeps failures."""
        console.set_quiet(True)
        console.status("tq", "residual=1e-13", "ok")
        console.status("trace", "diverged", "fail")
        err = capsys.readouterr().err
        assert "residual" not in err
        assert "❌ [TRACE] diverged" in err

    def test_loud_mode(self, capsys, monkeypatch):
        """Test QOPS_QUIET=0 prints every line with its tag."""
        monkeypatch.setenv("QOPS_QUIET", "0")
        console.status("run", "12 points", "run")
        assert "🚀 [RUN] 12 points" in capsys.readouterr().err

    def test_unknown_kind(self):
        """Test an unknown status kind is a programming error."""
        with pytest.raises(ValueError):
            console.status("x", "y", "bogus")

    def test_divergence_is_silent_in_library(self, generic_params, small_phi, capsys):
        """Test a diverging trace raises without printing; the caller reports it."""
        console.set_quiet(False)
        with pytest.raises(DivergenceError):
            build_aplus_trace(generic_params.with_phi(small_phi), enumerate_basis(2, 1))
        assert capsys.readouterr().err == ""
