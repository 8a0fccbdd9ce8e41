import math

import numpy as np
import pytest

from ifm_lab.robustness import (
    CANONICAL_FRACTIONS,
    RobustnessConfig,
    _chain_eta_vectorized,
    build_chain,
    chain_eta_from_circuit,
    robustness_histogram,
    summarize_std,
    target_reflectivity,
)
from ifm_lab.optics import compose, single_photon_distribution
from ifm_lab.schemes import build_ev, eta_ev


class TestTargetReflectivity:
    def test_two_mode_oracle(self):
        # eta = 0.45 inverts to T_eff = 2/11, so R = 9/11 exactly
        assert target_reflectivity(2, 0.45).value == pytest.approx(9 / 11, abs=1e-15)

    def test_three_mode_oracle(self):
        # the same T_eff split over two couplers: R = 1 - sqrt(2/11)
        r = target_reflectivity(3, 0.45).value
        assert r == pytest.approx(1 - math.sqrt(2 / 11), abs=1e-15)
        assert r == pytest.approx(0.5735985672887791, abs=1e-15)

    @pytest.mark.parametrize("m", [2, 3, 4, 5, 6])
    @pytest.mark.parametrize("frac", CANONICAL_FRACTIONS)
    def test_round_trip_through_circuit(self, m, frac):
        eta_target = 0.5 * frac
        r = target_reflectivity(m, eta_target).value
        eta = chain_eta_from_circuit(m, (r,) * (m - 1))
        assert eta == pytest.approx(eta_target, abs=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            target_reflectivity(1, 0.4)
        with pytest.raises(ValueError):
            target_reflectivity(2, 0.5)
        with pytest.raises(ValueError):
            target_reflectivity(2, 0.0)


class TestBuildChain:
    def test_two_modes_is_the_basic_interferometer(self):
        assert build_chain(2, (0.37,), True) == build_ev(0.37, True)
        assert build_chain(2, (0.37,), False) == build_ev(0.37, False)

    def test_effective_reflectivity_three_modes(self, rng):
        # two couplers compound to R_eff = R1 + R2 - R1 R2
        r1, r2 = rng.uniform(0.2, 0.9, size=2)
        r_eff = r1 + r2 - r1 * r2
        eta = chain_eta_from_circuit(3, (r1, r2))
        assert eta == pytest.approx(eta_ev(r_eff), abs=1e-12)

    @pytest.mark.parametrize("m", [2, 4, 6])
    def test_forward_transmission_reaches_last_mode(self, m, rng):
        from ifm_lab.optics import BeamSplitter, CircuitSpec, Reflectivity

        rs = rng.uniform(0.3, 0.8, size=m - 1)
        forward = CircuitSpec(
            m,
            tuple(BeamSplitter((i, i + 1), Reflectivity(r)) for i, r in enumerate(rs)),
        )
        u = compose(forward).mat
        t_eff = float(np.prod(1.0 - rs))
        assert abs(u[m - 1, 0]) ** 2 == pytest.approx(t_eff, abs=1e-12)

    def test_absent_object_refocuses_exactly(self, rng):
        rs = rng.uniform(0.3, 0.8, size=4)
        circuit = build_chain(5, rs, object_present=False)
        dist = single_photon_distribution(compose(circuit), 0)
        assert dist[0] == pytest.approx(1.0, abs=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            build_chain(1, (), True)
        with pytest.raises(ValueError):
            build_chain(3, (0.5,), True)
        with pytest.raises(ValueError):
            build_chain(3, (0.5, 0.5), True, inverse_reflectivities=(0.5,))


class TestVectorizedChain:
    @pytest.mark.parametrize("m", [2, 3, 4, 6])
    def test_matches_circuit_route(self, m, rng):
        trials = 25
        fwd = rng.uniform(0.2, 0.95, size=(trials, m - 1))
        inv = rng.uniform(0.2, 0.95, size=(trials, m - 1))
        fast = _chain_eta_vectorized(fwd, inv)
        for k in range(trials):
            slow = chain_eta_from_circuit(m, fwd[k], inverse_reflectivities=inv[k])
            assert fast[k] == pytest.approx(slow, abs=1e-12)

    def test_matched_halves_recover_target(self):
        r = target_reflectivity(4, 0.45).value
        draws = np.full((3, 3), r)
        eta = _chain_eta_vectorized(draws, draws)
        assert np.allclose(eta, 0.45, atol=1e-12)


class TestRobustnessHistogram:
    def test_zero_noise_hits_target(self):
        config = RobustnessConfig(3, 0.95, 0.0, 100, seed=1)
        samples = robustness_histogram(config)
        assert samples.shape == (100,)
        assert np.allclose(samples, config.eta_target, atol=1e-12)

    def test_deterministic_in_seed(self):
        a = robustness_histogram(RobustnessConfig(2, 0.95, 0.03, 500, seed=9))
        b = robustness_histogram(RobustnessConfig(2, 0.95, 0.03, 500, seed=9))
        c = robustness_histogram(RobustnessConfig(2, 0.95, 0.03, 500, seed=10))
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_samples_stay_in_range(self):
        for m in (2, 6):
            samples = robustness_histogram(RobustnessConfig(m, 0.99, 0.03, 2000, seed=5))
            assert samples.min() >= 0.0
            assert samples.max() <= 0.5

    def test_small_interferometer_fluctuates_more(self):
        small = robustness_histogram(RobustnessConfig(2, 0.99, 0.03, 4000, seed=21))
        large = robustness_histogram(RobustnessConfig(6, 0.99, 0.03, 4000, seed=21))
        assert summarize_std(small) > summarize_std(large)

    def test_spread_grows_near_ceiling(self):
        stds = [
            summarize_std(
                robustness_histogram(RobustnessConfig(2, frac, 0.03, 4000, seed=33))
            )
            for frac in CANONICAL_FRACTIONS
        ]
        assert stds[0] < stds[1] < stds[2]


class TestConfigAndStd:
    def test_eta_target_property(self):
        assert RobustnessConfig(2, 0.99, 0.03, 10, seed=0).eta_target == pytest.approx(0.495)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(m=1, eta_target_fraction=0.9, sigma_r=0.03, trials=10, seed=0),
            dict(m=7, eta_target_fraction=0.9, sigma_r=0.03, trials=10, seed=0),
            dict(m=2, eta_target_fraction=0.0, sigma_r=0.03, trials=10, seed=0),
            dict(m=2, eta_target_fraction=1.0, sigma_r=0.03, trials=10, seed=0),
            dict(m=2, eta_target_fraction=0.9, sigma_r=-0.01, trials=10, seed=0),
            dict(m=2, eta_target_fraction=0.9, sigma_r=0.03, trials=0, seed=0),
        ],
    )
    def test_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            RobustnessConfig(**kwargs)

    def test_summarize_std_closed_form(self):
        assert summarize_std([0.0, 1.0]) == pytest.approx(math.sqrt(0.5), abs=1e-15)
        assert summarize_std([0.3, 0.3, 0.3]) == 0.0

    def test_summarize_std_needs_two(self):
        with pytest.raises(ValueError):
            summarize_std([0.5])
