"""Acceptance criteria, one test each, every verdict printed as PASS/FAIL.

Tolerances are the stated ones; nothing here is loosened to make a run pass.
"""

import math
import time

import numpy as np
import pytest

from pcocdr import io as pio
from pcocdr.config import default_config
from pcocdr.errors import CorruptRecordError
from pcocdr.psf import gaussian_fwhm_closed_form
from pcocdr.runner import run_experiment
from pcocdr.scan import dead_time_rate, flux_from_power, sample_arm_power
from pcocdr.snr_model import snr_photon_counting


def _within(x, target, rel):
    return abs(x - target) <= rel * abs(target)


def test_01_flux_conversion(criterion):
    phi = flux_from_power(2.5e-16, 930.0)
    criterion(1, "flux conversion", _within(phi, 1170.0, 0.005),
              f"flux_from_power(2.5e-16 W, 930 nm) = {phi:.2f} photons/s (1170 +- 0.5%)")


def test_02_sample_arm_power(criterion):
    ps = sample_arm_power(10e-9, 70.0)
    criterion(2, "sample-arm power chain", ps == 2.5e-16,
              f"P_S = {ps!r} W (exactly 2.5e-16)")


def test_03_photon_counting_prediction(criterion):
    snr, db = snr_photon_counting(0.05, 1170.0, 1 / 40)
    ok = math.isclose(snr, 1170.0, rel_tol=1e-12) and abs(db - 30.7) <= 0.05
    criterion(3, "photon-counting SNR prediction", ok,
              f"SNR = {snr:.2f} ({db:.3f} dB; 1170 and 30.7 +- 0.05 dB)")


def test_04_simulated_snr(criterion):
    cfg = default_config("snr_run")
    t0 = time.perf_counter()
    rep = run_experiment(cfg)
    elapsed = time.perf_counter() - t0
    median = rep.value("simulated_snr")
    n = rep.value("n_seeds")
    ok = n >= 20 and 1170 / 2 <= median <= 1170 * 2 and elapsed < 30
    criterion(4, "simulated SNR", ok,
              f"median over {n} seeds = {median:.0f} ({10 * math.log10(median):.1f} dB), "
              f"predicted {rep.value('predicted_snr'):.0f}; band [585, 2340]; {elapsed:.1f} s")


def test_05_fano_statistics(criterion):
    cfg = default_config("fano_run")
    t0 = time.perf_counter()
    rep = run_experiment(cfg)
    elapsed = time.perf_counter() - t0
    mean, std = rep.value("mean_f_hat"), rep.value("std_f_hat")
    target = math.sqrt(2 / 100)
    ok = (rep.value("n_trials") >= 10_000 and rep.value("n_samples") == 100
          and abs(mean - 1) <= 0.02 and _within(std, target, 0.15) and elapsed < 30)
    criterion(5, "Fano statistics", ok,
              f"mean F = {mean:.4f} (1 +- 0.02), std F = {std:.4f} "
              f"(0.141 +- 15%) over {rep.value('n_trials')} trials; {elapsed:.1f} s")


def test_06_sld_resolution(criterion):
    rep = run_experiment(default_config("psf"))
    fwhm = rep.value("fwhm_um")
    oracle = gaussian_fwhm_closed_form(930.0, 70.0)
    # hand value of (2 ln 2 / pi) * 0.93^2 / 0.07
    hand = 2 * math.log(2) / math.pi * 0.93 ** 2 / 0.07
    ok = (math.isclose(oracle, hand, rel_tol=1e-12) and _within(fwhm, hand, 0.02)
          and _within(fwhm, 6.0, 0.15))
    criterion(6, "SLD resolution", ok,
              f"FWHM = {fwhm:.3f} um vs closed form {hand:.3f} um (+-2%), "
              f"{100 * (fwhm / 6 - 1):+.1f}% from l_c 6 um (+-15%)")


def test_07_detector_comparison(criterion):
    rep = run_experiment(default_config("compare_detectors"))
    f_sspd, f_spad = rep.value("fwhm_sspd_um"), rep.value("fwhm_spad_um")
    m_sspd = rep.value("spectral_mass_beyond_1100nm_sspd")
    m_spad = rep.value("spectral_mass_beyond_1100nm_spad")
    ok = (_within(f_sspd, 3.3, 0.02) and 4.3 <= f_spad <= 6.5
          and m_spad < 0.01 and m_sspd >= 0.10)
    criterion(7, "detector comparison", ok,
              f"SSPD FWHM {f_sspd:.3f} um (3.3 +- 2%), SPAD FWHM {f_spad:.3f} um ([4.3, 6.5]); "
              f"recovered mass > 1100 nm: SPAD {m_spad:.4f} (< 0.01), SSPD {m_sspd:.3f} (>= 0.10)")


def test_08_silica_window(criterion):
    rep = run_experiment(default_config("silica_scan"))
    plan = run_experiment(default_config("acq_plan"))
    sep = rep.value("peak_separation_um")
    cpb = rep.value("counts_per_bin_pre_dead_time")
    t_scan = rep.value("scan_time_s")
    t_fast, cpb_fast = plan.value("fast_scan_time_s"), plan.value("fast_counts_per_bin")
    ok = (abs(sep - 135.0) <= 1.0 and _within(cpb, 50.0, 0.05)
          and math.isclose(t_scan, 1.0) and math.isclose(t_fast, 0.1)
          and math.isclose(cpb_fast, plan.value("counts_per_bin")))
    criterion(8, "silica window", ok,
              f"separation {sep:.3f} um (135 +- 1), {cpb:.2f} counts/bin pre-dead-time "
              f"(50 +- 5%), scan {t_scan:g} s; x10 plan {t_fast:g} s at {cpb_fast:g} counts/bin")


def test_09_dead_time_saturation(criterion):
    rates = np.logspace(6, 18, 13)
    observed = dead_time_rate(rates, 10e-9)
    limit = observed[-1]
    ok = _within(limit, 1e8, 1e-4) and np.all(np.diff(observed) > 0) and np.all(observed < 1e8)
    criterion(9, "dead-time saturation", ok,
              f"observed rate at 1e18/s true = {limit:.6e}/s (1e8 +- 0.01%), monotone below 1/tau")


def test_10_conventional_landscape(criterion):
    rep = run_experiment(default_config("snr_budget"))
    cross = rep.value("crossover_thermal_shot_w")
    grid_err = rep.value("grid_optimum_relative_error")
    lim_err = rep.value("shot_limit_relative_error")
    ok = _within(cross, 1.0e-8, 0.02) and abs(grid_err) < 0.01 and abs(lim_err) < 1e-6
    criterion(10, "conventional SNR landscape", ok,
              f"thermal/shot crossover {cross:.4e} W (1e-8 +- 2%), grid optimum off by "
              f"{100 * grid_err:+.3f}% (< 1%), shot limit off by {lim_err:.1e} (< 1e-6)")


def test_11_determinism_and_persistence(criterion, tmp_path):
    cfg = default_config("silica_scan").with_overrides(output={"write_scan": True}, rng_seed=31)
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b")
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    identical = all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
                    for n in names)

    src = tmp_path / "a" / "scan.csv"
    rec = pio.read_scan_record(src)
    again = pio.write_scan_record(rec, tmp_path / "again.csv")
    back = pio.read_scan_record(again)
    bit_exact = (again.read_bytes() == src.read_bytes()
                 and np.array_equal(back.counts, rec.counts)
                 and np.array_equal(back.positions, rec.positions)
                 and back.config == rec.config)

    rejected = 0
    text = src.read_text()
    for i, damaged in enumerate((text[: len(text) // 2], text[:-3],
                                 text.replace("# n_rows = ", "# n_rows = 1"))):
        bad = tmp_path / f"bad{i}.csv"
        bad.write_text(damaged)
        try:
            pio.read_scan_record(bad)
        except CorruptRecordError:
            rejected += 1
    ok = identical and bit_exact and rejected == 3
    criterion(11, "determinism and persistence", ok,
              f"{len(names)} files byte-identical across reruns: {identical}; "
              f"roundtrip bit-exact: {bit_exact}; damaged files rejected: {rejected}/3")
