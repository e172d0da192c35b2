"""Capacity iteration, information density, and spectrum estimation."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from support import h2
from ucrlab.channelcap import (
    DmcProduct,
    MixedChannel,
    SpectrumEstimate,
    bec,
    bsc,
    dmc_capacity,
    information_density,
    inf_info_rate_estimate,
    spectrum_samples,
)
from ucrlab.errors import (
    DimensionError,
    UndefinedDensityError,
    ValidationError,
)
from ucrlab.probspace import ConditionalPmf, Pmf

UNIFORM2 = Pmf(np.array([0.5, 0.5]))
IDENTITY2 = DmcProduct(ConditionalPmf(np.eye(2)))


class TestCapacity:
    def test_bsc_golden(self):
        res = dmc_capacity(bsc(0.11))
        assert res.value_bits == pytest.approx(1.0 - h2(0.11), abs=1e-6)
        assert res.input_pmf.probs == pytest.approx(np.array([0.5, 0.5]), abs=1e-3)

    def test_bec_golden(self):
        assert dmc_capacity(bec(0.3)).value_bits == pytest.approx(0.7, abs=1e-6)

    def test_extremes(self):
        assert dmc_capacity(bsc(0.0)).value_bits == pytest.approx(1.0, abs=1e-9)
        assert dmc_capacity(bsc(0.5)).value_bits == pytest.approx(0.0, abs=1e-9)
        assert dmc_capacity(bec(1.0)).value_bits == pytest.approx(0.0, abs=1e-9)

    def test_bracket_certificate(self):
        res = dmc_capacity(bsc(0.2), tol=1e-7)
        assert res.upper_bits - res.lower_bits <= 1e-7
        assert res.lower_bits - 1e-12 <= res.value_bits <= res.upper_bits + 1e-12

    def test_tolerance_must_be_positive(self):
        with pytest.raises(ValidationError):
            dmc_capacity(bsc(0.2), tol=0.0)

    def test_matches_fine_input_grid_on_2x2(self):
        rng = np.random.default_rng(14)
        for _ in range(5):
            w = ConditionalPmf(rng.dirichlet(np.ones(2), size=2))
            cap = dmc_capacity(w, tol=1e-9).value_bits
            grid = np.linspace(0.0, 1.0, 1001)
            best = 0.0
            for a in grid:
                r = np.array([a, 1.0 - a])
                q = r @ w.rows
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratio = np.where(w.rows > 0, w.rows / q[None, :], 1.0)
                    mi = float(np.sum(r[:, None] * np.where(
                        w.rows > 0, w.rows * np.log2(ratio), 0.0)))
                best = max(best, mi)
            assert cap == pytest.approx(best, abs=1e-5)

    @pytest.mark.parametrize("p", [-0.1, 1.2])
    def test_bsc_crossover_validation(self, p):
        with pytest.raises(ValidationError):
            bsc(p)


class TestBlockKernels:
    def test_dmc_block_likelihood_normalizes(self):
        k = DmcProduct(bsc(0.3))
        t = np.array([0, 1, 1, 0])
        total = sum(k.block_likelihood(t, np.array(z))
                    for z in itertools.product((0, 1), repeat=4))
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_mixed_block_likelihood_normalizes(self):
        k = MixedChannel(((0.5, DmcProduct(bsc(0.0))),
                          (0.5, DmcProduct(bsc(0.5)))))
        t = np.array([0, 1, 0])
        total = sum(k.block_likelihood(t, np.array(z))
                    for z in itertools.product((0, 1), repeat=3))
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_mixed_weights_must_form_a_pmf(self):
        with pytest.raises(ValidationError):
            MixedChannel(((0.5, IDENTITY2), (0.4, IDENTITY2)))

    def test_mixed_components_must_share_alphabets(self):
        with pytest.raises(DimensionError):
            MixedChannel(((0.5, IDENTITY2),
                          (0.5, DmcProduct(bec(0.3)))))

    def test_sample_output_matches_alphabet(self):
        k = DmcProduct(bec(0.3))
        z = k.sample_output(np.array([0, 1, 0, 1]), seed=3)
        assert z.shape == (4,)
        assert set(z.tolist()) <= {0, 1, 2}


class TestInformationDensity:
    def test_identity_channel_is_one_bit(self):
        t = np.array([0, 1, 1, 0, 1])
        assert information_density(IDENTITY2, UNIFORM2, t, t) == pytest.approx(
            1.0, abs=1e-12)

    def test_output_independent_channel_is_zero(self):
        k = DmcProduct(ConditionalPmf(np.array([[0.4, 0.6], [0.4, 0.6]])))
        val = information_density(k, UNIFORM2, np.array([0, 1]), np.array([1, 1]))
        assert val == pytest.approx(0.0, abs=1e-12)

    def test_bsc_two_point_golden(self):
        k = DmcProduct(bsc(0.1))
        same = information_density(k, UNIFORM2, np.array([0]), np.array([0]))
        diff = information_density(k, UNIFORM2, np.array([0]), np.array([1]))
        assert same == pytest.approx(0.8479969065549501, abs=1e-12)
        assert diff == pytest.approx(-2.321928094887362, abs=1e-12)

    def test_zero_likelihood_is_undefined(self):
        k = DmcProduct(bsc(0.0))
        with pytest.raises(UndefinedDensityError):
            information_density(k, UNIFORM2, np.array([0]), np.array([1]))

    def test_block_length_mismatch(self):
        with pytest.raises(DimensionError):
            information_density(IDENTITY2, UNIFORM2, np.array([0, 1]),
                                np.array([0]))

    def test_mean_matches_mutual_information(self):
        # sample mean within 3 standard errors of I(input; W)
        k = DmcProduct(bsc(0.2))
        est = spectrum_samples(k, UNIFORM2, 40, 400, seed=8)
        target = 1.0 - h2(0.2)
        se = est.std() / 20.0
        assert abs(est.mean() - target) <= 3.0 * se


class TestSpectrum:
    def test_identity_spectrum_is_a_point_mass(self):
        est = spectrum_samples(IDENTITY2, UNIFORM2, 16, 64, seed=0)
        assert np.all(est.values_bits == 1.0)

    def test_seed_determinism_and_thread_invariance(self):
        k = DmcProduct(bsc(0.15))
        a = spectrum_samples(k, UNIFORM2, 32, 80, seed=21, threads=1)
        b = spectrum_samples(k, UNIFORM2, 32, 80, seed=21, threads=4)
        assert np.array_equal(a.values_bits, b.values_bits)

    def test_sample_count_validation(self):
        with pytest.raises(ValidationError):
            spectrum_samples(IDENTITY2, UNIFORM2, 8, 0, seed=0)

    def test_input_alphabet_validation(self):
        with pytest.raises(DimensionError):
            spectrum_samples(IDENTITY2, Pmf(np.array([0.2, 0.3, 0.5])), 8, 4,
                             seed=0)

    def test_quantile_and_mass_below_are_monotone(self):
        est = spectrum_samples(DmcProduct(bsc(0.25)), UNIFORM2, 20, 200, seed=5)
        qs = [est.quantile(q) for q in np.linspace(0.0, 1.0, 21)]
        assert all(a <= b + 1e-12 for a, b in zip(qs, qs[1:]))
        rs = np.linspace(qs[0] - 0.1, qs[-1] + 0.1, 31)
        ms = [est.mass_below(r) for r in rs]
        assert all(a <= b + 1e-12 for a, b in zip(ms, ms[1:]))
        assert ms[0] == 0.0 and ms[-1] == 1.0

    @given(st.lists(st.floats(-5.0, 5.0), min_size=1, max_size=40))
    @settings(max_examples=40)
    def test_mass_below_is_a_cdf_on_any_sample(self, values):
        est = SpectrumEstimate(np.array(values), n=4)
        lo, hi = est.values_bits[0], est.values_bits[-1]
        assert est.mass_below(lo - 1.0) == 0.0
        assert est.mass_below(hi) == 1.0
        assert 0.0 <= est.mass_below(0.5 * (lo + hi)) <= 1.0


class TestInfRateEstimate:
    def test_identity_estimate(self):
        sp = [spectrum_samples(IDENTITY2, UNIFORM2, n, 100, seed=4)
              for n in (10, 20)]
        est = inf_info_rate_estimate(sp)
        assert est.value_bits == pytest.approx(0.99, abs=1e-12)
        assert est.conclusive

    def test_useless_channel_estimate(self):
        sp = [spectrum_samples(DmcProduct(bsc(0.5)), UNIFORM2, n, 100, seed=4)
              for n in (10, 20)]
        assert inf_info_rate_estimate(sp).value_bits <= 0.01

    def test_needs_two_block_lengths(self):
        one = spectrum_samples(IDENTITY2, UNIFORM2, 8, 16, seed=0)
        with pytest.raises(ValidationError):
            inf_info_rate_estimate([one])

    def test_block_lengths_must_increase(self):
        sp = [spectrum_samples(IDENTITY2, UNIFORM2, n, 16, seed=0)
              for n in (20, 10)]
        with pytest.raises(ValidationError):
            inf_info_rate_estimate(sp)
