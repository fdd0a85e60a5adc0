import numpy as np
import pytest

from qops.aplus_operator import (TruncationPolicy, aminus_at_zeta, aminus_L_element, aplus_at_zeta,
                                 aplus_L_element, build_aminus, build_aminus_continued,
                                 build_aminus_factorized, build_aplus_continued,
                                 build_aplus_factorized, build_aplus_trace, leading_constant,
                                 trace_normalization, wronskian_scalar)
from qops.errors import DivergenceError, DomainError, SingularityError, UnsupportedSpinError
from qops.qf_operator import build_qf
from qops.sector import (commutator_residual, enumerate_basis, max_norm, mirror_basis,
                         mirror_permutation, relative_difference)
from qops.suites import (asymptotic_deviation, inversion_residual, tq_residual, trace_path,
                         wronskian_residual)
from qops.transfer import build_transfer
from tests.utils.test_helpers import LAMBDAS, ParamGenerator


@pytest.mark.unit
class TestLocalElements:
    """Test the q-oscillator L-operator elements."""

    def test_vacuum_corner(self, generic_params):
        """Test (0, 0, 0, 0) -> 1."""
        assert aplus_L_element(generic_params, 0, 0, 0, 0) == pytest.approx(1, rel=1e-15)

    def test_charge_constraint(self, generic_params):
        """Test elements vanish unless i + n' = i' + n."""
        assert aplus_L_element(generic_params, 1, 2, 1, 1) == 0
        assert aplus_L_element(generic_params, 0, 1, 0, 0) == 0

    def test_empty_sites_are_geometric(self, generic_params):
        """Test i = i' = 0 gives phi^-2n zeta^2n."""
        p = generic_params
        for n in range(5):
            expected = p.phi**(-2 * n) * p.zeta**(2 * n)
            assert aplus_L_element(p, n, 0, n, 0) == pytest.approx(expected, rel=1e-13)

    def test_aminus_corner(self, spin_params):
        """Test the A- element (0, I, 0, I) equals 1."""
        assert aminus_L_element(spin_params(2), 0, 2, 0, 2) == pytest.approx(1, rel=1e-14)

    def test_aminus_paths_agree(self, spin_params):
        """Test the mirrored A+ element against the direct A- element, I = 2, n <= 4."""
        for lam in LAMBDAS:
            params = spin_params(2, lam=lam)
            for n in range(5):
                mirrored, direct = [], []
                for i in range(3):
                    for iprime in range(3):
                        nprime = i + n - iprime
                        if nprime < 0:
                            continue
                        mirrored.append(aminus_L_element(params, n, i, nprime, iprime))
                        direct.append(aminus_L_element(params, n, i, nprime, iprime, direct=True))
                assert relative_difference(np.array(mirrored), np.array(direct)) < 1e-12

    def test_aminus_charge_constraint(self, spin_params):
        """Test A- elements vanish unless i + n = i' + n'."""
        params = spin_params(2)
        assert aminus_L_element(params, 0, 1, 0, 2) == 0
        assert aminus_L_element(params, 0, 1, 0, 2, direct=True) == 0

    def test_aminus_needs_integer_spin(self, generic_params):
        """Test A- is unavailable at complex spin."""
        with pytest.raises(UnsupportedSpinError):
            aminus_L_element(generic_params, 0, 0, 0, 0)
        with pytest.raises(NotImplementedError):
            build_aminus(generic_params, enumerate_basis(2, 1))

    def test_aminus_index_range(self, spin_params):
        """Test site indices above I are rejected."""
        with pytest.raises(DomainError):
            aminus_L_element(spin_params(1), 0, 2, 0, 2)


@pytest.mark.unit
class TestTruncationPolicy:
    """Test truncation policy validation and settings."""

    def test_defaults(self):
        """Test the documented defaults."""
        policy = TruncationPolicy()
        assert (policy.n_min, policy.n_max, policy.tol) == (8, 512, 1e-14)

    def test_invalid(self):
        """Test inconsistent bounds are rejected."""
        with pytest.raises(DomainError):
            TruncationPolicy(n_min=20, n_max=10)
        with pytest.raises(DomainError):
            TruncationPolicy(tol=0)

    def test_from_environment(self, monkeypatch):
        """Test QOPS_TRUNC_* feed the policy."""
        monkeypatch.setenv("QOPS_TRUNC_MAX", "64")
        monkeypatch.setenv("QOPS_TRUNC_TOL", "1e-12")
        policy = TruncationPolicy.from_settings()
        assert policy.n_max == 64
        assert policy.tol == 1e-12


@pytest.mark.unit
class TestFockTrace:
    """Test the truncated and continued Fock traces."""

    @pytest.mark.parametrize("lam", LAMBDAS)
    def test_single_site_vacuum(self, generic_params, lam):
        """Test M = 1, l = 0: A+ = -phi^2 zeta^-2 for every lambda."""
        p = generic_params.with_lambda(lam)
        result = build_aplus_trace(p, enumerate_basis(1, 0))
        assert result.matrix.entries[0, 0] == pytest.approx(-p.phi**2 / p.zeta**2, rel=1e-12)
        assert result.tail_bound < 1e-14
        assert result.terms_used >= 8

    def test_single_site_vacuum_integer(self, spin_params):
        """Test M = 1, l = 0 at integer spin: A+ = -phi^2 q^-I."""
        p = spin_params(1)
        entry = build_aplus_trace(p, enumerate_basis(1, 0, 1)).matrix.entries[0, 0]
        assert entry == pytest.approx(-p.phi**2 / p.q, rel=1e-12)

    def test_single_site_one_particle(self, generic_params):
        """Test M = 1, l = 1 against the summed geometric series."""
        p = generic_params
        q, zeta, phi, lam = p.q, p.zeta, p.phi, p.lam
        expected = (-q * zeta**2 / lam * (1 - zeta**-4) / (1 - zeta**2 / phi**2)
                    - q * phi**2 / lam * (1 - lam**2 / zeta**2))
        entry = build_aplus_trace(p, enumerate_basis(1, 1)).matrix.entries[0, 0]
        assert entry == pytest.approx(expected, rel=1e-12)

    def test_normalization(self, generic_params):
        """Test the trace normalization 1 - phi^2M q^2l zeta^-2M."""
        p = generic_params
        assert trace_normalization(p, 2, 1) == pytest.approx(1 - p.phi**4 * p.q**2 / p.zeta**4)

    @pytest.mark.parametrize("M,l", [(2, 1), (2, 2), (3, 2)])
    def test_truncated_matches_continued(self, generic_params, M, l):
        """Test the truncated trace against its closed-form sum."""
        basis = enumerate_basis(M, l)
        for lam in LAMBDAS:
            p = generic_params.with_lambda(lam)
            result = build_aplus_trace(p, basis)
            continued = build_aplus_continued(p, basis)
            assert relative_difference(result.matrix, continued) < 1e-10

    def test_aminus_truncated_matches_continued(self, spin_params, small_phi):
        """Test the A- trace in its convergence region against the continued sum."""
        for spin in (1, 2):
            p = spin_params(spin, phi=small_phi)
            for l in range(2 * spin + 1):
                basis = enumerate_basis(2, l, spin)
                result = build_aminus(p, basis)
                assert relative_difference(result.matrix, build_aminus_continued(p, basis)) < 1e-10

    def test_tail_bound_is_sound(self, generic_params):
        """Test the truncated entries stay within the tail bound of the exact sum."""
        basis = enumerate_basis(2, 2)
        result = build_aplus_trace(generic_params, basis)
        exact = build_aplus_continued(generic_params, basis).entries
        error = max_norm(result.matrix.entries - exact) / max_norm(exact)
        assert error <= result.tail_bound + 1e-12
        longer = build_aplus_trace(generic_params, basis, TruncationPolicy(n_max=1024))
        assert np.array_equal(longer.matrix.entries, result.matrix.entries)

    def test_divergent_phi(self, generic_params, small_phi):
        """Test a small phi reports divergence with both ratios."""
        p = generic_params.with_phi(small_phi)
        with pytest.raises(DivergenceError) as excinfo:
            build_aplus_trace(p, enumerate_basis(2, 1))
        assert excinfo.value.observed_ratio > 1
        assert excinfo.value.predicted_ratio == pytest.approx(abs(p.aplus_trace_ratio(2, 1)))

    def test_truncation_limit_exhausted(self, generic_params):
        """Test running out of terms is reported as divergence."""
        with pytest.raises(DivergenceError):
            build_aplus_trace(generic_params, enumerate_basis(2, 1), TruncationPolicy(n_min=1, n_max=2))

    def test_basis_must_match_spin_mode(self, generic_params, spin_params):
        """Test capped bases need integer spin and integer spin needs the cap."""
        with pytest.raises(DomainError):
            build_aplus_trace(generic_params, enumerate_basis(2, 1, 1))
        with pytest.raises(DomainError):
            build_aplus_continued(spin_params(1), enumerate_basis(2, 1))


@pytest.mark.unit
class TestClosedFormAtZeta:
    """Test A+(zeta), the factorization and the inversion."""

    def test_vacuum(self, generic_params):
        """Test l = 0: A+(zeta) = -phi^2M zeta^-2M."""
        p = generic_params
        entries = aplus_at_zeta(p, enumerate_basis(2, 0)).entries
        assert entries[0, 0] == pytest.approx(-p.phi**4 / p.zeta**4, rel=1e-13)

    def test_single_site_one_particle(self, generic_params):
        """Test M = 1, l = 1: A+(zeta) = -q zeta (1 - zeta^-4) / (1 - zeta^2 phi^-2)."""
        p = generic_params
        expected = -p.q * p.zeta * (1 - p.zeta**-4) / (1 - p.zeta**2 / p.phi**2)
        assert aplus_at_zeta(p, enumerate_basis(1, 1)).entries[0, 0] == pytest.approx(expected, rel=1e-13)

    @pytest.mark.parametrize("M,l", [(2, 0), (2, 1), (2, 2), (2, 3), (3, 1), (3, 2), (3, 3)])
    def test_matches_trace_generic(self, generic_params, M, l):
        """Test the closed form against the trace at lambda = zeta."""
        p = generic_params.with_lambda(generic_params.zeta)
        basis = enumerate_basis(M, l)
        assert relative_difference(aplus_at_zeta(p, basis), build_aplus_trace(p, basis).matrix) < 1e-9

    @pytest.mark.parametrize("spin,M", [(1, 2), (1, 3), (2, 2)])
    def test_matches_trace_integer(self, spin_params, spin, M):
        """Test the closed form against the trace at lambda = zeta, integer spin."""
        p = spin_params(spin)
        p = p.with_lambda(p.zeta)
        for l in range(min(spin * M, 3) + 1):
            basis = enumerate_basis(M, l, spin)
            assert relative_difference(aplus_at_zeta(p, basis), build_aplus_trace(p, basis).matrix) < 1e-9

    def test_resonance(self, generic_params):
        """Test phi^2M zeta^-2M = 1 is reported with its shift s = 0."""
        p = generic_params.with_phi(generic_params.zeta)
        with pytest.raises(SingularityError) as excinfo:
            aplus_at_zeta(p, enumerate_basis(2, 1))
        assert excinfo.value.s == 0

    @pytest.mark.parametrize("M,l", [(2, 2), (2, 3)])
    def test_factorized_matches_trace(self, generic_params, M, l):
        """Test A+(zeta) Q_f(lam) against the Fock trace."""
        basis = enumerate_basis(M, l)
        for lam in LAMBDAS:
            p = generic_params.with_lambda(lam)
            assert relative_difference(build_aplus_factorized(p, basis),
                                       build_aplus_trace(p, basis).matrix) < 1e-9

    @pytest.mark.parametrize("spin", [1, 2])
    def test_factorized_integer_spin(self, spin_params, spin):
        """Test the cancelled integer-spin product against the trace."""
        for lam in LAMBDAS:
            p = spin_params(spin, lam=lam)
            for l in range(2 * spin + 1):
                basis = enumerate_basis(2, l, spin)
                assert relative_difference(build_aplus_factorized(p, basis),
                                           build_aplus_trace(p, basis).matrix) < 1e-9

    def test_factorized_at_zeta(self, generic_params):
        """Test the factorized form reduces to A+(zeta) at lambda = zeta."""
        p = generic_params.with_lambda(generic_params.zeta)
        basis = enumerate_basis(3, 2)
        assert relative_difference(build_aplus_factorized(p, basis), aplus_at_zeta(p, basis)) < 1e-12

    def test_order_irrelevant(self, generic_params):
        """Test A+(zeta) commutes with Q_f(lam)."""
        basis = enumerate_basis(3, 2)
        for lam in LAMBDAS:
            p = generic_params.with_lambda(lam)
            assert commutator_residual(aplus_at_zeta(p, basis), build_qf(p, basis)) < 1e-10

    @pytest.mark.parametrize("M,l", [(2, 0), (2, 1), (2, 2), (2, 3), (3, 2)])
    def test_inversion(self, generic_params, M, l):
        """Test A+(zeta) Q_inf is the leading constant times the identity."""
        assert inversion_residual(generic_params, enumerate_basis(M, l)) < 1e-10


@pytest.mark.unit
class TestAminus:
    """Test A- constructions at integer spin."""

    @pytest.mark.parametrize("spin", [1, 2])
    def test_factorized_matches_continued(self, spin_params, spin):
        """Test the mirrored factorized A- against the continued trace."""
        for lam in LAMBDAS:
            p = spin_params(spin, lam=lam)
            for l in range(2 * spin + 1):
                basis = enumerate_basis(2, l, spin)
                assert relative_difference(build_aminus_factorized(p, basis),
                                           build_aminus_continued(p, basis)) < 1e-9

    def test_at_zeta(self, spin_params):
        """Test A-(zeta) against the continued trace at lambda = zeta."""
        p = spin_params(1)
        p = p.with_lambda(p.zeta)
        for l in range(3):
            basis = enumerate_basis(2, l, 1)
            assert relative_difference(aminus_at_zeta(p, basis), build_aminus_continued(p, basis)) < 1e-9

    def test_mirror_symmetry(self, spin_params):
        """Test A-(phi) on l = -phi^2M q^{2l-IM} R A+(1/phi) on IM - l R."""
        p = spin_params(1)
        M = 2
        for l in range(3):
            basis = enumerate_basis(M, l, 1)
            mirrored = mirror_basis(basis)
            perm = mirror_permutation(basis, mirrored)
            aplus = build_aplus_continued(p.with_phi(1 / p.phi), mirrored).entries[np.ix_(perm, perm)]
            scale = -p.phi**(2 * M) * p.q**(2 * l - M)
            assert relative_difference(build_aminus_continued(p, basis).entries, scale * aplus) < 1e-12

    def test_single_site_vacuum(self, spin_params):
        """Test M = 1, I = 1, l = 0 against the summed trace."""
        p = spin_params(1)
        q, phi, lam = p.q, p.phi, p.lam
        expected = -lam / q + (1 - phi**2 / q) / (lam * (1 - phi**2 * q))
        entry = build_aminus_continued(p, enumerate_basis(1, 0, 1)).entries[0, 0]
        assert entry == pytest.approx(expected, rel=1e-12)


@pytest.mark.unit
class TestRelations:
    """Test TQ relations, the Wronskian and the asymptotics."""

    @pytest.mark.parametrize("M,l", [(1, 1), (2, 2), (2, 3), (3, 2)])
    def test_tq_aplus_generic(self, generic_params, M, l):
        """Test T A+ = phi^M [lam/zeta]^M A+(q lam) + phi^-M [lam zeta]^M A+(lam/q)."""
        basis = enumerate_basis(M, l)
        for lam in LAMBDAS:
            assert tq_residual(generic_params.with_lambda(lam), basis, "Aplus") < 1e-9

    @pytest.mark.parametrize("spin", [1, 2])
    def test_tq_integer(self, spin_params, small_phi, spin):
        """Test both TQ relations at integer spin, A- on its own trace region."""
        for l in range(2 * spin + 1):
            basis = enumerate_basis(2, l, spin)
            assert tq_residual(spin_params(spin), basis, "Aplus") < 1e-9
            assert tq_residual(spin_params(spin, phi=small_phi), basis, "Aminus") < 1e-9
            assert tq_residual(spin_params(spin), basis, "Aminus") < 1e-9

    @pytest.mark.parametrize("M,l", [(2, 2), (3, 3)])
    def test_tq_aplus_random_lambdas(self, generic_params, M, l):
        """Test the A+ TQ relation on the trace path at ten seeded random lambdas."""
        basis = enumerate_basis(M, l)
        assert trace_path(generic_params, basis, "Aplus") == "trace"
        for lam in ParamGenerator.random_lambdas(count=10):
            assert tq_residual(generic_params.with_lambda(lam), basis, "Aplus") < 1e-9

    @pytest.mark.parametrize("spin", [1, 2])
    def test_tq_integer_random_lambdas(self, spin_params, small_phi, spin):
        """Test A+ and A- TQ relations on their trace paths at ten seeded random lambdas."""
        for lam in ParamGenerator.random_lambdas(count=10, seed=17):
            for l in range(2 * spin + 1):
                basis = enumerate_basis(2, l, spin)
                large, small = spin_params(spin, lam=lam), spin_params(spin, phi=small_phi, lam=lam)
                assert trace_path(large, basis, "Aplus") == "trace"
                assert trace_path(small, basis, "Aminus") == "trace"
                assert tq_residual(large, basis, "Aplus") < 1e-9
                assert tq_residual(small, basis, "Aminus") < 1e-9

    def test_commutes_random_pairs(self, generic_params, spin_params):
        """Test the A family commutes with itself and with T at twenty seeded random pairs."""
        basis = enumerate_basis(2, 2)
        capped = enumerate_basis(2, 1, 1)
        integer = spin_params(1)
        for lam, mu in ParamGenerator.random_pairs(count=20):
            left = build_aplus_trace(generic_params.with_lambda(lam), basis).matrix
            right = build_aplus_trace(generic_params.with_lambda(mu), basis).matrix
            assert commutator_residual(left, right) < 1e-9
            assert commutator_residual(left, build_transfer(generic_params.with_lambda(mu), basis)) < 1e-9
            mixed = (build_aplus_continued(integer.with_lambda(lam), capped),
                     build_aminus_continued(integer.with_lambda(mu), capped))
            assert commutator_residual(*mixed) < 1e-9

    @pytest.mark.parametrize("spin,M", [(1, 1), (1, 2), (2, 2)])
    def test_wronskian(self, spin_params, spin, M):
        """Test phi^M A+(q lam) A-(lam) - phi^-M A-(q lam) A+(lam) against its scalar."""
        for lam in LAMBDAS:
            p = spin_params(spin, lam=lam)
            for l in range(spin * M + 1):
                assert wronskian_residual(p, enumerate_basis(M, l, spin), lam) < 1e-8

    def test_wronskian_scalar_single_site(self, spin_params):
        """Test M = 1, I = 1, l = 0 by hand: -phi q^-1 (1 - phi^2/q) (lam - 1/(q lam))."""
        p = spin_params(1)
        q, phi, lam = p.q, p.phi, p.lam
        expected = -phi / q * (1 - phi**2 / q) * (lam - 1 / (q * lam))
        assert wronskian_scalar(p, 1, 0, lam) == pytest.approx(expected, rel=1e-13)

    def test_mixed_commutator(self, spin_params):
        """Test A+(lam) and A-(mu) commute."""
        p = spin_params(1)
        basis = enumerate_basis(3, 1, 1)
        left = build_aplus_continued(p.with_lambda(LAMBDAS[0]), basis)
        right = build_aminus_continued(p.with_lambda(LAMBDAS[1]), basis)
        assert commutator_residual(left, right) < 1e-9

    def test_leading_constants(self, generic_params, spin_params):
        """Test the lambda -> infinity constants of A+ and A-."""
        p = generic_params
        assert leading_constant(p, 2, 1, "aplus") == pytest.approx(p.phi**4 * p.q / p.zeta**4)
        s = spin_params(1)
        assert leading_constant(s, 2, 1, "aminus") == pytest.approx(-1 / s.q)
        with pytest.raises(UnsupportedSpinError):
            leading_constant(p, 2, 1, "aminus")

    @pytest.mark.parametrize("l", [1, 2, 3])
    def test_aplus_asymptotics(self, generic_params, l):
        """Test lam^-l A+(lam) -> leading constant with an O(lam^-2) deviation."""
        basis = enumerate_basis(2, l)
        near = asymptotic_deviation(generic_params, basis, "Aplus", 1e3)
        far = asymptotic_deviation(generic_params, basis, "Aplus", 1e4)
        assert near < 1e-4
        assert 50 < near / far < 200

    def test_aminus_asymptotics(self, spin_params):
        """Test lam^-(IM-l) A-(lam) -> (-1)^(IM-l) q^(l-IM)."""
        p = spin_params(1)
        for l in range(2):
            basis = enumerate_basis(2, l, 1)
            near = asymptotic_deviation(p, basis, "Aminus", 1e3)
            far = asymptotic_deviation(p, basis, "Aminus", 1e4)
            assert near < 1e-4
            assert 50 < near / far < 200

    def test_random_generic_point(self):
        """Test factorization and TQ at a seeded random generic point."""
        p = ParamGenerator.random_generic(seed=5)
        basis = enumerate_basis(2, 2)
        assert relative_difference(build_aplus_factorized(p, basis),
                                   build_aplus_continued(p, basis)) < 1e-9
        assert tq_residual(p, basis, "Aplus") < 1e-9
