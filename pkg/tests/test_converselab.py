"""Quantitative lemma checks: derived constants, tail sets, telescoping."""

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from ucrlab.converselab import (
    TelescopingInstance,
    derive_params,
    interval_lemma_check,
    set_bound_checks,
    spectrum_mass_margin,
    telescoping_identity_check,
    variance_bound_check,
)
from ucrlab.errors import DimensionError, ValidationError
from ucrlab.protocol import ProtocolConfig, exact_analyze
from ucrlab.ucrcap import AuxiliaryChannel
from support import dsbs


@pytest.fixture(scope="module")
def reference_joint():
    """Exact (K, Y-block) law of the small reference run (n = 8)."""
    cfg = ProtocolConfig(n=8, mu=0.3, theta=0.0, eps_typ=0.15,
                         aux=AuxiliaryChannel.identity(2), source=dsbs(0.1),
                         seed=0, allow_degenerate_rate=True)
    return exact_analyze(cfg)


class TestDerivedConstants:
    def test_small_parameter_golden(self):
        p = derive_params(0.01, 0.001, 2.0)
        assert p.mu_beta == pytest.approx(0.005001, abs=1e-15)

    def test_closed_form_gamma_golden(self):
        # beta chosen so mu = beta * (1 + beta) = 1/4; alpha = 0.81
        beta = (math.sqrt(2.0) - 1.0) / 2.0
        p = derive_params(0.81, beta, 0.0)
        assert p.mu_beta == pytest.approx(0.25, abs=1e-12)
        assert p.gamma_ab == pytest.approx(2.0 * math.sqrt(5.0), abs=1e-12)
        assert p.kappa_ab == pytest.approx(0.81 + 1.0 - 0.95**2, abs=1e-12)

    def test_validation(self):
        for bad in (dict(alpha=0.0), dict(beta=0.0), dict(c=-0.1),
                    dict(epsilon=0.0)):
            kwargs = dict(alpha=0.1, beta=0.1, c=1.0)
            kwargs.update(bad)
            with pytest.raises(ValidationError):
                derive_params(**kwargs)

    def test_alpha_above_one_has_no_real_gamma(self):
        p = derive_params(1.5, 0.1, 1.0)
        assert math.isnan(p.gamma_ab)
        assert not p.alpha_in_range

    @given(st.floats(1e-4, 1.0 - 1e-4), st.floats(1e-5, 0.4),
           st.floats(0.0, 2.0))
    @settings(max_examples=200)
    def test_ratio_identity(self, alpha, beta, c):
        p = derive_params(alpha, beta, c)
        expected = math.sqrt(p.mu_beta) * (1.0 - math.sqrt(alpha))
        assert p.chebyshev_ratio == pytest.approx(expected, abs=1e-12)


class TestIntervalLemma:
    @given(st.floats(1e-4, 1.0 - 1e-4), st.floats(1e-5, 0.4),
           st.floats(0.0, 2.0))
    @settings(max_examples=300)
    def test_holds_on_the_valid_region(self, alpha, beta, c):
        p = derive_params(alpha, beta, c)
        assume(p.mu_in_range)
        assert interval_lemma_check(p)

    def test_fails_when_mu_saturates(self):
        p = derive_params(0.5, 2.0, 1.0)  # mu = 2 + 4 + 4 = 10
        assert not p.mu_in_range
        assert not interval_lemma_check(p)

    def test_fails_without_a_real_gamma(self):
        assert not interval_lemma_check(derive_params(1.2, 0.1, 1.0))


class TestVarianceBound:
    def test_uniform_support_is_applicable_and_holds(self):
        report = variance_bound_check(np.full(16, 1.0 / 16.0), n=8,
                                      beta=0.05, c=1.0)
        assert report.applicable
        assert report.holds is True
        assert report.lhs == pytest.approx(0.0, abs=1e-12)
        assert report.margin > 0.0

    def test_two_point_support_is_not_applicable(self):
        report = variance_bound_check(np.array([0.5, 0.5]), n=4, beta=0.2,
                                      c=1.0)
        assert not report.applicable
        assert report.holds is None
        assert report.support_size == 2

    def test_reference_run_variance_golden(self, reference_joint):
        k_pmf = reference_joint.joint_ky.sum(axis=1)
        report = variance_bound_check(k_pmf, n=8, beta=0.001, c=2.0)
        assert report.lhs == pytest.approx(0.1764399244403802, abs=1e-12)
        assert not report.applicable  # far from uniform at this small n


class TestSetBounds:
    def test_uniform_law_is_applicable_and_meets_its_floors(self):
        joint = np.full((16, 1), 1.0 / 16.0)
        report = set_bound_checks(joint, 8, derive_params(0.01, 0.001, 2.0))
        assert report.applicable
        assert report.l_holds is True and report.d_holds is True
        assert report.p_in_l == pytest.approx(1.0, abs=1e-12)
        assert report.p_in_d == pytest.approx(1.0, abs=1e-12)
        assert report.l_lower_bound == pytest.approx(0.9363540260503462,
                                                     abs=1e-12)
        assert report.d_lower_bound == pytest.approx(0.8767588621006924,
                                                     abs=1e-12)

    def test_reference_law_masses_clear_the_floors_but_gate_closed(
            self, reference_joint):
        # same loose parameters; the near-uniformity precondition fails
        # (H(K)/n = 0.315 vs log2|K|/n = 1.369 with beta = 0.001), so the
        # verdicts stay None even though the raw masses clear the floors
        p = derive_params(0.01, 0.001, 2.0)
        report = set_bound_checks(reference_joint.joint_ky, 8, p,
                                  reference_joint.log2_k_cardinality)
        assert report.p_in_l == pytest.approx(1.0, abs=1e-9)
        assert report.p_in_d == pytest.approx(1.0, abs=1e-9)
        assert report.p_in_l >= report.l_lower_bound
        assert report.p_in_d >= report.d_lower_bound
        assert not report.uniformity_ok
        assert not report.applicable
        assert report.l_holds is None and report.d_holds is None

    def test_tight_parameters_expose_the_small_n_gap(self, reference_joint):
        # gamma pinned to 0.05 via mu = (gamma/2)^4 * (1 - sqrt(alpha))^2
        mu_target = (0.05 / 2.0) ** 4 * 0.25
        beta = (-1.0 + math.sqrt(1.0 + 4.0 * mu_target)) / 2.0
        p = derive_params(0.25, beta, 0.0)
        assert p.gamma_ab == pytest.approx(0.05, abs=1e-9)
        report = set_bound_checks(reference_joint.joint_ky, 8, p,
                                  reference_joint.log2_k_cardinality)
        assert report.p_in_l == pytest.approx(70 / 256, abs=1e-12)
        assert report.p_in_d == pytest.approx(0.4052691835937501, abs=1e-12)
        assert report.p_in_l < report.l_lower_bound
        assert report.p_in_d < report.d_lower_bound
        assert report.l_holds is None and report.d_holds is None

    def test_rejects_non_probability_input(self):
        with pytest.raises(ValidationError):
            set_bound_checks(np.array([[0.7, 0.7]]), 4,
                             derive_params(0.1, 0.01, 1.0))

    def test_rejects_complex_gamma(self, reference_joint):
        with pytest.raises(ValidationError):
            set_bound_checks(reference_joint.joint_ky, 8,
                             derive_params(2.0, 0.01, 1.0))


class TestTelescoping:
    def test_identity_on_random_instances(self):
        for t in range(20):
            inst = TelescopingInstance.random(seed=t, n=2 + (t % 2))
            lhs, rhs, gap = telescoping_identity_check(inst)
            assert gap <= 1e-10
            assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_ternary_alphabets(self):
        inst = TelescopingInstance.random(seed=5, n=2, x_card=3, y_card=3)
        _, _, gap = telescoping_identity_check(inst)
        assert gap <= 1e-10

    def test_random_is_deterministic(self):
        a = TelescopingInstance.random(seed=9, n=2)
        b = TelescopingInstance.random(seed=9, n=2)
        assert np.array_equal(a.joint, b.joint)

    def test_block_length_cap(self):
        with pytest.raises(ValidationError):
            TelescopingInstance(np.full((2, 2) + (2,) * 10, 1.0 / 2**12), 5)

    def test_alphabet_cap(self):
        shape = (2, 2, 4, 4, 4, 4)
        with pytest.raises(ValidationError):
            TelescopingInstance(np.full(shape, 1.0 / np.prod(shape)), 2)

    def test_axis_shape_mismatch(self):
        shape = (2, 2, 2, 3, 2, 2)
        with pytest.raises(DimensionError):
            TelescopingInstance(np.full(shape, 1.0 / np.prod(shape)), 2)


class TestSpectrumMargin:
    def test_margin_formula(self):
        p = derive_params(0.01, 0.001, 2.0)
        assert spectrum_mass_margin(p, 0.9) == pytest.approx(
            0.9 - 2.0 * p.kappa_ab, abs=1e-12)

    def test_mass_validation(self):
        p = derive_params(0.01, 0.001, 2.0)
        with pytest.raises(ValidationError):
            spectrum_mass_margin(p, 1.2)
