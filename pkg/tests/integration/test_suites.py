import pytest

from qops.models import SUITE_NAMES, RunConfig, as_pair
from qops.suites import RunContext, SuiteFactory, point_label
from tests.utils.test_helpers import SMALL_PHI


def make_context(**overrides) -> RunContext:
    values = dict(sites=2, sectors=[0, 1, 2])
    values.update(overrides)
    return RunContext.from_config(RunConfig(**values))


def evaluate_all(name: str, context: RunContext):
    suite = SuiteFactory.create_suite(name)
    results = []
    for point in suite.points(context):
        outcome = suite.evaluate(context, point)
        tolerance = outcome.tolerance if outcome.tolerance is not None else suite.tolerance_for(point)
        results.append((point, outcome, tolerance))
    return results


@pytest.mark.integration
class TestSuiteFactory:
    """Test suite lookup and skipping."""

    def test_every_suite_is_registered(self):
        """Test the factory knows every configurable suite."""
        assert SuiteFactory.available() == SUITE_NAMES
        for name in SUITE_NAMES:
            assert SuiteFactory.create_suite(name).name == name

    def test_unknown_suite(self):
        """Test an unknown name raises ValueError."""
        with pytest.raises(ValueError):
            SuiteFactory.create_suite("bogus")

    def test_spin_mode_skips(self):
        """Test integer-only and generic-only suites skip in the other mode."""
        generic, integer = make_context(), make_context(spin_int=1)
        wronskian = SuiteFactory.create_suite("wronskian")
        inversion = SuiteFactory.create_suite("inversion")
        assert "integer spin" in wronskian.skip_reason(generic)
        assert wronskian.skip_reason(integer) is None
        assert "generic" in inversion.skip_reason(integer)
        assert inversion.skip_reason(generic) is None

    def test_point_label(self):
        """Test grid points report lambda as a [re, im] pair."""
        context = make_context()
        label = point_label({"l": 1, "lam_index": 2}, context)
        assert label == {"l": 1, "lambda": [-0.5, 0.9]}

    def test_integer_context_zeta(self):
        """Test integer spin fixes zeta^2 = q^I."""
        context = make_context(spin_int=2)
        assert context.zeta**2 == pytest.approx(context.q**2, rel=1e-14)
        assert context.basis(1).cap == 2


@pytest.mark.integration
class TestSuiteEvaluation:
    """Test the verification suites pass on the default point."""

    def test_kernel(self):
        """Test the seeded kernel draws stay below 1e-12."""
        for _, outcome, tolerance in evaluate_all("kernel", make_context()):
            assert outcome.residual < tolerance

    def test_oracle_integer(self):
        """Test the q-difference oracle and leakage at integer spin."""
        results = evaluate_all("oracle", make_context(spin_int=1))
        assert {point["check"] for point, _, _ in results} == {"qdiff", "leakage"}
        for _, outcome, tolerance in results:
            assert outcome.residual < tolerance

    def test_tq_generic(self):
        """Test both TQ relations over the sector and lambda grid."""
        results = evaluate_all("tq", make_context())
        assert len(results) == 2 * 3 * 3
        for point, outcome, tolerance in results:
            assert outcome.residual < tolerance, point

    def test_commute_integer(self):
        """Test all commuting pairs at integer spin, A+ with A- included."""
        results = evaluate_all("commute", make_context(spin_int=1))
        assert any(point["pair"] == ["Aplus", "Aminus"] for point, _, _ in results)
        for point, outcome, tolerance in results:
            assert outcome.residual < tolerance, point

    def test_wronskian(self):
        """Test the quantum Wronskian on every integer-spin sector."""
        for point, outcome, tolerance in evaluate_all("wronskian", make_context(spin_int=1)):
            assert outcome.residual < tolerance, point

    def test_inversion(self):
        """Test A+(zeta) Q_inf on every generic sector."""
        for point, outcome, tolerance in evaluate_all("inversion", make_context()):
            assert outcome.residual < tolerance, point

    def test_asymptotics_constant_sector(self):
        """Test l = 0 is reported as lambda-independent."""
        results = evaluate_all("asymptotics", make_context(sectors=[0]))
        for _, outcome, tolerance in results:
            assert "constant" in outcome.diagnostic
            assert outcome.residual < tolerance

    def test_asymptotics_scaling(self):
        """Test the deviation from the leading term falls like lambda^-2."""
        for point, outcome, tolerance in evaluate_all("asymptotics", make_context(sectors=[1, 2])):
            assert outcome.residual < tolerance, point

    def test_sears_and_genfun(self):
        """Test the composition coefficients and the generating function."""
        for name in ("sears", "genfun"):
            for _, outcome, tolerance in evaluate_all(name, make_context()):
                assert outcome.residual < tolerance

    def test_tq_path_follows_convergence(self):
        """Test integer-spin tq runs A+ on its trace and A- on the continued trace at |phi| ~ 3."""
        results = evaluate_all("tq", make_context(spin_int=1))
        assert len(results) == 2 * 3 * 3
        for point, outcome, tolerance in results:
            assert outcome.residual < tolerance, point
            if point["operator"] == "Aplus":
                assert point["path"] == "trace"
                assert outcome.diagnostic is None
            else:
                assert point["path"] == "continued"
                assert "continued trace used" in outcome.diagnostic

    def test_tq_small_phi_swaps_paths(self):
        """Test a small |phi| puts A- on its trace and A+ on the continued trace."""
        context = make_context(spin_int=1, phi=as_pair(SMALL_PHI))
        paths = {(point["operator"], point["path"])
                 for point in SuiteFactory.create_suite("tq").points(context)}
        assert paths == {("Aplus", "continued"), ("Aminus", "trace")}

    def test_bethe_exact_counts(self):
        """Test every integer-spin eigenvalue has l A+ roots and IM - l A- roots."""
        context = make_context(spin_int=1)
        for point, outcome, tolerance in evaluate_all("bethe", context):
            assert outcome.residual < tolerance, point
            bound = point["l"] if point["family"] == "aplus" else context.sites - point["l"]
            assert [len(report.roots) for report in outcome.reports] == [bound] * len(outcome.reports)

    def test_askeyroy_uses_series_cutoff(self):
        """Test the contour check reads its product cutoff from the run context."""
        assert make_context().series_tol == 1e-18
        for _, outcome, tolerance in evaluate_all("askeyroy", make_context()):
            assert outcome.residual < tolerance
