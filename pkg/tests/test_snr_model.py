import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcocdr.errors import InvalidParameterError
from pcocdr.scan import flux_from_power
from pcocdr.snr_model import (
    ConventionalSnrParams,
    NoiseRegime,
    acquisition_plan,
    counting_bandwidth,
    crossover_powers,
    min_detectable_flux,
    optimal_reference_power,
    responsivity_to_eta,
    snr_conventional,
    snr_photon_counting,
    snr_shot_limit,
    sweep_reference_power,
)

# exact SI values, typed in rather than imported
K_B = 1.380649e-23
Q_E = 1.602176634e-19
H = 6.62607015e-34
C = 299792458.0

P = ConventionalSnrParams()


def _terms(p):
    thermal = 4 * K_B * p.temperature * p.bandwidth / p.feedback_resistance
    shot = 2 * Q_E * p.bandwidth * p.responsivity * p.reference_power
    excess = ((1 + p.polarization_degree ** 2) * p.bandwidth * p.responsivity ** 2
              * p.reference_power ** 2 / p.source_bandwidth)
    signal = p.responsivity ** 2 * p.reference_power * p.sample_power
    return signal, thermal, shot, excess


params_strategy = st.builds(
    ConventionalSnrParams,
    responsivity=st.floats(0.05, 1.2),
    reference_power=st.floats(1e-12, 1e-2),
    sample_power=st.floats(1e-16, 1e-6),
    temperature=st.floats(4, 400),
    bandwidth=st.floats(1e-2, 1e7),
    feedback_resistance=st.floats(1e3, 1e10),
    polarization_degree=st.floats(0, 1),
    source_bandwidth=st.floats(1e9, 1e15),
)


class TestConventional:
    def test_terms_match_hand_formula(self):
        bud = snr_conventional(P)
        signal, thermal, shot, excess = _terms(P)
        assert bud.signal_term == pytest.approx(signal, rel=1e-12)
        assert bud.thermal_noise == pytest.approx(thermal, rel=1e-12)
        assert bud.shot_noise == pytest.approx(shot, rel=1e-12)
        assert bud.excess_noise == pytest.approx(excess, rel=1e-12)
        assert bud.snr == pytest.approx(signal / (thermal + shot + excess), rel=1e-12)

    def test_thermal_shot_crossover_10nw(self):
        oracle = 2 * K_B * 300 / (Q_E * 0.8 * 6.46e6)
        assert oracle == pytest.approx(1.0e-8, rel=0.02)
        x = crossover_powers(P)["thermal_shot"]
        assert x == pytest.approx(oracle, rel=1e-9)
        bud = snr_conventional(P.with_(reference_power=x))
        assert bud.thermal_noise == pytest.approx(bud.shot_noise, rel=1e-9)

    def test_other_crossovers(self):
        x = crossover_powers(P)
        b = snr_conventional(P.with_(reference_power=x["shot_excess"]))
        assert b.shot_noise == pytest.approx(b.excess_noise, rel=1e-9)
        b = snr_conventional(P.with_(reference_power=x["thermal_excess"]))
        assert b.thermal_noise == pytest.approx(b.excess_noise, rel=1e-9)

    def test_vanishing_reference(self):
        assert snr_conventional(P.with_(reference_power=1e-30)).snr < 1e-12

    def test_shot_limit_example(self):
        p = P.with_(feedback_resistance=1e40, source_bandwidth=1e40)
        oracle = 0.8 * 1e-12 / (2 * Q_E * 1e4)
        assert snr_conventional(p).snr == pytest.approx(oracle, rel=1e-6)
        assert snr_shot_limit(0.8, 1e-12, 1e4) == pytest.approx(oracle, rel=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(params_strategy)
    def test_limit_consistency(self, p):
        lim = p.with_(feedback_resistance=1e40, source_bandwidth=1e40)
        shot = snr_shot_limit(p.responsivity, p.sample_power, p.bandwidth)
        assert snr_conventional(lim).snr == pytest.approx(shot, rel=1e-6)

    def test_invalid(self):
        with pytest.raises(InvalidParameterError):
            ConventionalSnrParams(temperature=0)
        with pytest.raises(InvalidParameterError):
            ConventionalSnrParams(polarization_degree=1.5)

    def test_regime_labels_random(self):
        rng = np.random.default_rng(0)
        for _ in range(10_000):
            p = ConventionalSnrParams(
                responsivity=rng.uniform(0.05, 1.2),
                reference_power=10 ** rng.uniform(-12, -2),
                sample_power=10 ** rng.uniform(-16, -6),
                temperature=rng.uniform(4, 400),
                bandwidth=10 ** rng.uniform(-2, 7),
                feedback_resistance=10 ** rng.uniform(3, 10),
                polarization_degree=rng.uniform(0, 1),
                source_bandwidth=10 ** rng.uniform(9, 15),
            )
            _, thermal, shot, excess = _terms(p)
            expected = ("thermal", "shot", "excess")[int(np.argmax([thermal, shot, excess]))]
            assert snr_conventional(p).dominant_regime == NoiseRegime(expected)

    def test_sweep_rows(self):
        rows = sweep_reference_power(P, [1e-10, 1e-8, 1e-4])
        assert rows[0]["regime"] == "thermal" and rows[-1]["regime"] == "excess"
        assert rows[1]["snr"] == pytest.approx(snr_conventional(P).snr)


class TestOptimalReference:
    def test_closed_form(self):
        oracle = math.sqrt(4 * K_B * 300 * 10e12 / (6.46e6 * 2 * 0.8 ** 2))
        assert optimal_reference_power(P) == pytest.approx(oracle, rel=1e-12)

    def test_grid_search(self):
        grid = np.logspace(-12, -2, 10_000)
        snr = [snr_conventional(P.with_(reference_power=float(x))).snr for x in grid]
        best = grid[int(np.argmax(snr))]
        assert best == pytest.approx(optimal_reference_power(P), rel=0.01)

    def test_scalings(self):
        base = optimal_reference_power(P)
        assert optimal_reference_power(P.with_(source_bandwidth=20e12)) == pytest.approx(
            base * math.sqrt(2), rel=1e-12)
        unpolarized = optimal_reference_power(P.with_(polarization_degree=0.0))
        assert base == pytest.approx(unpolarized / math.sqrt(2), rel=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(params_strategy)
    def test_unimodal(self, p):
        grid = np.logspace(-14, 2, 2000)
        a, b, c = _terms(p.with_(reference_power=1.0))[1:]
        # at P_R = 1 W the three noise terms are the coefficients of a + b P + c P^2
        snr = grid / (a + b * grid + c * grid ** 2)
        implementation = np.array(
            [snr_conventional(p.with_(reference_power=float(x))).snr for x in grid[::50]]
        )
        assert np.allclose(implementation / implementation.max(),
                           snr[::50] / snr[::50].max(), rtol=1e-9)
        inner = (snr[1:-1] > snr[:-2]) & (snr[1:-1] >= snr[2:])
        assert inner.sum() == 1
        i = int(np.flatnonzero(inner)[0]) + 1
        step = grid[1] / grid[0]
        opt = optimal_reference_power(p)
        assert grid[i] / step <= opt <= grid[i] * step


class TestPhotonCounting:
    def test_weak_sample_example(self):
        snr, db = snr_photon_counting(0.05, 1170, 1 / 40)
        assert snr == pytest.approx(1170, rel=1e-12)
        assert db == pytest.approx(30.7, abs=0.05)

    def test_unit(self):
        assert snr_photon_counting(1.0, 2 * 3.0, 3.0)[0] == pytest.approx(1.0)

    def test_linear(self):
        assert snr_photon_counting(0.05, 2340, 1 / 40)[0] == pytest.approx(2340)

    def test_invalid(self):
        with pytest.raises(InvalidParameterError):
            snr_photon_counting(0.05, 0.0, 1.0)

    @settings(max_examples=200, deadline=None)
    @given(
        resp=st.floats(0.01, 0.7),
        lam=st.floats(400, 1700),
        ps=st.floats(1e-18, 1e-6),
        bw=st.floats(1e-3, 1e7),
    )
    def test_matches_shot_limit(self, resp, lam, ps, bw):
        eta = resp * H * C / (lam * 1e-9) / Q_E
        assert responsivity_to_eta(resp, lam) == pytest.approx(eta, rel=1e-9)
        pc, _ = snr_photon_counting(eta, flux_from_power(ps, lam), bw)
        assert pc == pytest.approx(snr_shot_limit(resp, ps, bw), rel=1e-6)


class TestMinDetectable:
    def test_examples(self):
        assert min_detectable_flux(1.0, 1.0) == 2.0
        assert min_detectable_flux(0.05, 1 / 40) == pytest.approx(1.0, rel=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(eta=st.floats(1e-4, 1.0), bw=st.floats(1e-4, 1e8))
    def test_inverse(self, eta, bw):
        snr, _ = snr_photon_counting(eta, min_detectable_flux(eta, bw), bw)
        assert snr == pytest.approx(1.0, rel=1e-12)

    def test_invalid(self):
        with pytest.raises(InvalidParameterError):
            min_detectable_flux(1.5, 1.0)
        with pytest.raises(InvalidParameterError):
            min_detectable_flux(0.5, 0.0)


class TestCountingBandwidth:
    def test_examples(self):
        assert counting_bandwidth(1.0) == 0.5
        assert counting_bandwidth(1.0, 1 / 40) == 0.025
        assert counting_bandwidth(10e-6) == pytest.approx(5e4)

    def test_invalid(self):
        with pytest.raises(InvalidParameterError):
            counting_bandwidth(0.0)


class TestAcquisitionPlan:
    def test_silica_plan(self):
        plan = acquisition_plan(1.0, 1.0, 10e-6, 5e6, 10e-9)
        assert plan.scan_time == 1.0
        assert plan.n_bins == 100_000
        assert plan.counts_per_bin == pytest.approx(50.0)
        assert plan.observed_counts_per_bin == pytest.approx(50 / 1.05, rel=1e-12)
        assert round(plan.observed_counts_per_bin, 1) == 47.6
        assert not plan.saturation_warning

    def test_tenfold_plan(self, caplog):
        with caplog.at_level(logging.WARNING, logger="pcocdr.snr_model"):
            plan = acquisition_plan(1.0, 10.0, 1e-6, 50e6, 10e-9)
        assert plan.scan_time == pytest.approx(0.1)
        assert plan.counts_per_bin == pytest.approx(50.0)
        assert plan.n_bins == 100_000
        # 1 / (1 + 0.5): a third of the counts lost
        assert plan.dead_time_loss == pytest.approx(1 / 3, rel=1e-12)
        assert plan.saturation_warning
        assert "dead time" in caplog.text

    def test_degenerate(self):
        plan = acquisition_plan(0.0, 1.0, 10e-6, 5e6, 10e-9)
        assert plan.n_bins == 0 and plan.scan_time == 0.0

    @settings(max_examples=100, deadline=None)
    @given(
        length=st.floats(0, 100), speed=st.floats(1e-3, 100),
        t=st.floats(1e-7, 1e-2), rate=st.floats(0, 1e9),
    )
    def test_invariants(self, length, speed, t, rate):
        plan = acquisition_plan(length, speed, t, rate, 10e-9)
        assert plan.scan_time == pytest.approx(length / speed)
        assert plan.counts_per_bin == pytest.approx(rate * t)
        bin_len = speed * t
        # floor up to rounding of the ratio itself
        assert plan.n_bins * bin_len <= length * (1 + 1e-9)
        assert (plan.n_bins + 1) * bin_len > length * (1 - 1e-9)
        assert plan.observed_counts_per_bin <= plan.counts_per_bin
