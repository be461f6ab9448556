"""Scenario pipelines: config in, metrics and data files out.

Each scenario builds its objects from an :class:`ExperimentConfig`, runs the
spectra -> psf -> scan -> dsp -> model chain it needs, and returns a
:class:`RunReport`. Output is deterministic for a given config and seed;
reports carry no timestamps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from . import io as pio
from .config import ExperimentConfig, serialize_config
from .dsp import (
    design_bandpass,
    fano_factors,
    passband_width,
    process_scan,
    speed_for_bandwidth,
)
from .errors import ConfigError, OcdrError
from .psf import (
    Psf,
    calibrate_spdc_bandwidth,
    gaussian_fwhm_closed_form,
    point_spread,
    spectrum_from_interferogram,
)
from .scan import (
    PowerChain,
    Reflector,
    SampleModel,
    ScanConfig,
    mean_rate,
    repeat_at_position,
    simulate_scan,
)
from .snr_model import (
    ConventionalSnrParams,
    acquisition_plan,
    crossover_powers,
    min_detectable_flux,
    optimal_reference_power,
    snr_conventional,
    snr_photon_counting,
    snr_shot_limit,
    sweep_reference_power,
)
from .spectra import (
    DetectorModel,
    FrequencyGrid,
    SpectralDensity,
    make_detector,
    make_gaussian_source,
    make_spdc_source,
    system_spectrum,
)

REPORT_VERSION = 1


@dataclass
class RunReport:
    scenario: str
    metrics: dict[str, dict[str, Any]] = field(default_factory=dict)
    files: list[str] = field(default_factory=list)
    config: dict[str, Any] = field(default_factory=dict)
    version: str = __version__

    def add(self, name: str, value, unit: str = ""):
        if isinstance(value, (np.floating, np.integer, np.bool_)):
            value = value.item()
        self.metrics[name] = {"value": value, "unit": unit}

    def value(self, name: str):
        return self.metrics[name]["value"]

    def to_dict(self) -> dict[str, Any]:
        return {
            "report_version": REPORT_VERSION,
            "scenario": self.scenario,
            "toolkit_version": self.version,
            "metrics": self.metrics,
            "files": self.files,
            "config": self.config,
        }


class _Outputs:
    """Collects emitted files under one directory (or none)."""

    def __init__(self, out_dir):
        self.dir = Path(out_dir) if out_dir else None
        self.files: list[str] = []
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)

    def emit(self, name: str, writer: Callable[[Path], Any]):
        if self.dir is None:
            return
        written = writer(self.dir / name)
        if isinstance(written, tuple):
            self.files.extend(Path(w).name for w in written)
        else:
            self.files.append(name)


# builders


def build_grid(cfg: ExperimentConfig) -> FrequencyGrid:
    g = cfg["grid"]
    return FrequencyGrid(g["nu_min_hz"], g["nu_max_hz"], g["n_points"])


def build_source(cfg: ExperimentConfig, grid: FrequencyGrid, bandwidth: float | None = None):
    s = cfg["source"]
    if s["kind"] == "gaussian":
        return make_gaussian_source(s["center_nm"], s["fwhm_nm"], grid)
    if s["kind"] == "spdc":
        bw = s["bandwidth_hz"] if bandwidth is None else bandwidth
        return make_spdc_source(s["pump_nm"], bw, s["shape"], grid)
    return pio.read_spectrum(s["path"])


def build_detector(cfg: ExperimentConfig, grid: FrequencyGrid, kind: str | None = None,
                   params: dict | None = None) -> DetectorModel:
    d = cfg["detector"]
    if kind is None:
        kind, params = d["kind"], d["params"]
    return make_detector(kind, grid, params or {})


def build_sample(cfg: ExperimentConfig) -> SampleModel:
    s = cfg["sample"]
    if s["kind"] == "mirror":
        return SampleModel.mirror(s["depth_um"])
    if s["kind"] == "slab":
        return SampleModel.slab(s["thickness_um"], s["index"], s["depth_um"])
    return SampleModel(
        tuple(Reflector(d, r, p) for d, r, p in
              zip(s["depths_um"], s["reflectances"], s["phases_rad"])),
        "configured reflectors",
    )


def build_psf(cfg: ExperimentConfig, sys_spec: SpectralDensity) -> Psf:
    p = cfg["psf"]
    return point_spread(sys_spec, p["z_range_um"], p["z_points"])


def build_scan_config(
    cfg: ExperimentConfig,
    sys_spec: SpectralDensity,
    sample: SampleModel,
    seed: int | None = None,
    mirror_speed: float | None = None,
) -> ScanConfig:
    """Scan settings with fluxes from the power chain and/or a target count rate."""
    s = cfg["scan"]
    lam0 = s["center_wavelength_nm"] or sys_spec.center_wavelength
    phi_r, phi_s = s["reference_flux"], s["sample_flux"]
    pc = cfg["power_chain"]
    if pc["enabled"]:
        phi_r, phi_s = PowerChain(
            pc["source_power_w"], pc["sample_attenuation_db"],
            pc["reference_attenuation_db"], pc["bs_factor"], lam0,
        ).fluxes()
    if s["count_rate_hz"] > 0:
        base = s["eta"] * (phi_r + phi_s * sample.power_reflectance)
        signal_rate = s["count_rate_hz"] - s["dark_rate_hz"]
        if not base > 0 or not signal_rate > 0:
            raise ConfigError(
                "scan.count_rate_hz cannot be reached with zero flux or a dark rate above it",
                field="scan.count_rate_hz",
            )
        scale = signal_rate / base
        phi_r, phi_s = phi_r * scale, phi_s * scale
    return ScanConfig(
        z_start=s["z_start_um"],
        z_end=s["z_end_um"],
        mirror_speed=s["mirror_speed_mm_s"] if mirror_speed is None else mirror_speed,
        counting_time=s["counting_time_s"],
        reference_flux=phi_r,
        sample_flux_peak=phi_s,
        eta=s["eta"],
        dark_rate=s["dark_rate_hz"],
        dead_time=s["dead_time_s"],
        rng_seed=cfg.rng_seed if seed is None else seed,
        center_wavelength=lam0,
    )


def spawn_seeds(root: int, n: int) -> list[int]:
    """Independent 63-bit seeds derived from ``root``."""
    children = np.random.SeedSequence(root).spawn(n)
    return [int(c.generate_state(1, np.uint64)[0] >> np.uint64(1)) for c in children]


def _system(cfg: ExperimentConfig, grid=None):
    grid = grid or build_grid(cfg)
    return system_spectrum(build_source(cfg, grid), build_detector(cfg, grid))


# scenarios


def _run_psf(cfg, rep: RunReport, out: _Outputs):
    sys_spec = _system(cfg)
    psf = build_psf(cfg, sys_spec)
    rep.add("fwhm_um", psf.fwhm, "um")
    rep.add("center_wavelength_nm", psf.center_wavelength, "nm")
    rep.add("eta_effective", sys_spec.eta_effective, "")
    src = cfg["source"]
    if src["kind"] == "gaussian" and cfg["detector"]["kind"] == "IdealFlat":
        ref = gaussian_fwhm_closed_form(src["center_nm"], src["fwhm_nm"])
        rep.add("closed_form_fwhm_um", ref, "um")
        rep.add("fwhm_relative_error", psf.fwhm / ref - 1, "")
    out.emit("system_spectrum.csv", lambda p: pio.write_spectrum(sys_spec, p))
    out.emit("psf.csv", lambda p: pio.write_psf(psf, p))


def _recovered_spectrum(cfg, sys_spec, psf, use_truth):
    sample = SampleModel.mirror(0.0)
    scfg = build_scan_config(cfg, sys_spec, sample)
    rec = simulate_scan(scfg, sample, psf)
    return spectrum_from_interferogram(
        rec, use_truth=use_truth,
        band=(cfg["grid"]["nu_min_hz"], cfg["grid"]["nu_max_hz"]),
    )


def _run_compare(cfg, rep, out):
    grid = build_grid(cfg)
    cmp_ = cfg["compare"]
    cutoff = cmp_["cutoff_nm"]
    src_cfg = cfg["source"]
    det1 = build_detector(cfg, grid)
    bw = calibrate_spdc_bandwidth(
        cmp_["target_fwhm_sspd_um"], det1, grid, src_cfg["pump_nm"], src_cfg["shape"]
    )
    source = build_source(cfg, grid, bandwidth=bw)
    second = cmp_["second_detector"]
    det2_params = {"cutoff_nm": cutoff} if second in ("SPAD", "InGaAs") else {}
    det2 = build_detector(cfg, grid, second, det2_params)

    rep.add("calibrated_bandwidth_hz", bw, "Hz")
    rep.add("source_mass_beyond_cutoff", source.mass_beyond(cutoff), "")
    labels = {cfg["detector"]["kind"].lower(): det1, second.lower(): det2}
    for label, det in labels.items():
        sys_spec = system_spectrum(source, det)
        psf = build_psf(cfg, sys_spec)
        rec = _recovered_spectrum(cfg, sys_spec, psf, cmp_["recover_from_truth"])
        rep.add(f"fwhm_{label}_um", psf.fwhm, "um")
        rep.add(f"center_wavelength_{label}_nm", psf.center_wavelength, "nm")
        rep.add(f"eta_effective_{label}", sys_spec.eta_effective, "")
        rep.add(f"system_mass_beyond_{cutoff:g}nm_{label}", sys_spec.mass_beyond(cutoff), "")
        rep.add(f"spectral_mass_beyond_{cutoff:g}nm_{label}", rec.mass_beyond(cutoff), "")
        out.emit(f"system_spectrum_{label}.csv", lambda p, s=sys_spec: pio.write_spectrum(s, p))
        out.emit(f"recovered_spectrum_{label}.csv", lambda p, s=rec: pio.write_spectrum(s, p))
        out.emit(f"psf_{label}.csv", lambda p, s=psf: pio.write_psf(s, p))


def _snr_setup(cfg):
    """System spectrum, PSF, sample, filter and scan config shared by the SNR seeds."""
    sys_spec = _system(cfg)
    psf = build_psf(cfg, sys_spec)
    sample = build_sample(cfg)
    f = cfg["filter"]
    s = cfg["scan"]
    speed = None
    if f["target_bandwidth_hz"] > 0:
        width = passband_width(sys_spec, f["margin"], s["z_end_um"] - s["z_start_um"])
        speed = speed_for_bandwidth(f["target_bandwidth_hz"], width)
    scfg = build_scan_config(cfg, sys_spec, sample, mirror_speed=speed)
    scfg.check_nyquist()
    spec = design_bandpass(scfg, sys_spec, f["margin"], f["window"])
    return sys_spec, psf, sample, scfg, spec


def _run_snr(cfg, rep, out):
    from dataclasses import replace

    sys_spec, psf, sample, scfg, spec = _snr_setup(cfg)
    f = cfg["filter"]
    mc = cfg["monte_carlo"]
    bandwidth = spec.effective_bandwidth_hz(scfg.mirror_speed)
    predicted, predicted_db = snr_photon_counting(scfg.eta, scfg.sample_flux_peak, bandwidth)
    seeds = spawn_seeds(cfg.rng_seed, mc["n_seeds"])
    noise = [tuple(r) for r in f["noise_regions_um"]]
    rows, first = [], None
    for i, seed in enumerate(seeds):
        rec = simulate_scan(replace(scfg, rng_seed=seed), sample, psf,
                            keep_truth=i == 0, mode=cfg["scan"]["mode"])
        res = process_scan(rec, spec, f["threshold_fraction"],
                           tuple(f["signal_region_um"]), noise)
        rows.append({"seed": seed, "snr": res.snr_estimate, "snr_db": res.snr_db})
        if i == 0:
            first = (rec, res)
    snrs = np.array([r["snr"] for r in rows])
    median = float(np.median(snrs))
    rep.add("predicted_snr", predicted, "")
    rep.add("predicted_snr_db", predicted_db, "dB")
    rep.add("simulated_snr", median, "")
    rep.add("simulated_snr_db", 10 * math.log10(median), "dB")
    rep.add("simulated_snr_p10", float(np.percentile(snrs, 10)), "")
    rep.add("simulated_snr_p90", float(np.percentile(snrs, 90)), "")
    rep.add("simulated_to_predicted_ratio", median / predicted, "")
    rep.add("n_seeds", len(seeds), "")
    rep.add("effective_bandwidth_hz", bandwidth, "Hz")
    rep.add("filter_bandwidth_cycles_per_um", spec.bandwidth, "1/um")
    rep.add("filter_taps", spec.n_taps, "")
    rep.add("mirror_speed_mm_s", scfg.mirror_speed, "mm/s")
    rep.add("bin_spacing_um", scfg.bin_spacing, "um")
    rep.add("sample_flux", scfg.sample_flux_peak, "photons/s")
    rep.add("reference_flux", scfg.reference_flux, "photons/s")
    rep.add("min_detectable_flux", min_detectable_flux(scfg.eta, bandwidth), "photons/s")
    rec, res = first
    out.emit("snr_seeds.csv", lambda p: pio.write_table(rows, p, ["seed", "snr", "snr_db"]))
    out.emit("envelope_seed0.csv", lambda p: pio.write_envelope(res, p))
    if cfg["output"]["write_scan"]:
        out.emit("scan_seed0.csv", lambda p: pio.write_scan_record(rec, p))


def _run_fano(cfg, rep, out):
    sys_spec = _system(cfg)
    psf = build_psf(cfg, sys_spec)
    sample = build_sample(cfg)
    scfg = build_scan_config(cfg, sys_spec, sample)
    mc = cfg["monte_carlo"]
    n_trials, n = mc["n_trials"], mc["n_samples"]
    rng = np.random.default_rng(cfg.rng_seed)
    counts = repeat_at_position(scfg, sample, psf, mc["position_um"], n_trials * n, rng)
    f_hat = fano_factors(counts.reshape(n_trials, n))
    rep.add("mean_f_hat", float(f_hat.mean()), "")
    rep.add("std_f_hat", float(f_hat.std(ddof=1)), "")
    rep.add("expected_std", math.sqrt(2 / n), "")
    rep.add("mean_counts", float(counts.mean()), "counts")
    rep.add("n_trials", n_trials, "")
    rep.add("n_samples", n, "")
    out.emit("fano_trials.csv",
             lambda p: pio.write_columns(p, trial=np.arange(n_trials), f_hat=f_hat))


def _run_silica(cfg, rep, out):
    sys_spec = _system(cfg)
    psf = build_psf(cfg, sys_spec)
    sample = build_sample(cfg)
    scfg = build_scan_config(cfg, sys_spec, sample)
    f = cfg["filter"]
    spec = design_bandpass(scfg, sys_spec, f["margin"], f["window"])
    rec = simulate_scan(scfg, sample, psf, mode=cfg["scan"]["mode"])
    res = process_scan(rec, spec, f["threshold_fraction"])
    peaks = sorted(sorted(res.peaks, key=lambda p: p.height)[-2:], key=lambda p: p.position)
    sep = peaks[1].position - peaks[0].position if len(peaks) == 2 else float("nan")
    true_rate = mean_rate(scfg, sample, psf, rec.positions)
    length_mm = (scfg.z_end - scfg.z_start) * 1e-3
    plan = acquisition_plan(length_mm, scfg.mirror_speed, scfg.counting_time,
                            float(true_rate.mean()), scfg.dead_time)
    rep.add("peak_separation_um", sep, "um")
    rep.add("n_peaks", len(res.peaks), "")
    rep.add("peak_positions_um", [p.position for p in res.peaks], "um")
    rep.add("peak_fwhm_um", [p.fwhm for p in res.peaks], "um")
    rep.add("counts_per_bin_mean", float(rec.counts.mean()), "counts")
    rep.add("counts_per_bin_pre_dead_time", float(true_rate.mean() * scfg.counting_time), "counts")
    rep.add("scan_time_s", plan.scan_time, "s")
    rep.add("n_bins", scfg.n_bins, "")
    rep.add("bin_spacing_um", scfg.bin_spacing, "um")
    rep.add("filter_taps", spec.n_taps, "")
    out.emit("envelope.csv", lambda p: pio.write_envelope(res, p))
    out.emit("peaks.csv", lambda p: pio.write_table(
        [{"position_um": pk.position, "height": pk.height, "fwhm_um": pk.fwhm} for pk in res.peaks],
        p, ["position_um", "height", "fwhm_um"]))
    if cfg["output"]["write_scan"]:
        out.emit("scan.csv", lambda p: pio.write_scan_record(rec, p))


def _budget_params(cfg) -> ConventionalSnrParams:
    b = cfg["snr_budget"]
    return ConventionalSnrParams(
        responsivity=b["responsivity"],
        reference_power=b["reference_power_w"],
        sample_power=b["sample_power_w"],
        temperature=b["temperature_k"],
        bandwidth=b["bandwidth_hz"],
        feedback_resistance=b["feedback_resistance_ohm"],
        polarization_degree=b["polarization_degree"],
        source_bandwidth=b["source_bandwidth_hz"],
    )


def _run_budget(cfg, rep, out):
    b = cfg["snr_budget"]
    params = _budget_params(cfg)
    cross = crossover_powers(params)
    p_opt = optimal_reference_power(params)
    powers = np.logspace(math.log10(b["sweep_min_w"]), math.log10(b["sweep_max_w"]),
                         b["sweep_points"])
    rows = sweep_reference_power(params, powers)
    snr = np.array([r["snr"] for r in rows])
    p_grid = float(powers[int(np.argmax(snr))])
    at_ref = snr_conventional(params)
    shot_only = snr_conventional(params.with_(feedback_resistance=1e30, source_bandwidth=1e30))
    shot = snr_shot_limit(params.responsivity, params.sample_power, params.bandwidth)
    rep.add("crossover_thermal_shot_w", cross["thermal_shot"], "W")
    rep.add("crossover_shot_excess_w", cross["shot_excess"], "W")
    rep.add("optimal_reference_power_w", p_opt, "W")
    rep.add("grid_optimum_w", p_grid, "W")
    rep.add("grid_optimum_relative_error", p_grid / p_opt - 1, "")
    rep.add("snr_at_optimum_db", snr_conventional(params.with_(reference_power=p_opt)).snr_db, "dB")
    rep.add("snr_at_reference_power_db", at_ref.snr_db, "dB")
    rep.add("regime_at_reference_power", at_ref.dominant_regime.value, "")
    rep.add("shot_limit_snr", shot, "")
    rep.add("shot_limit_relative_error", shot_only.snr / shot - 1, "")
    out.emit("snr_budget_sweep.csv", lambda p: pio.write_table(rows, p))


def _plan_fields(plan, prefix=""):
    return {
        f"{prefix}n_bins": (plan.n_bins, ""),
        f"{prefix}scan_time_s": (plan.scan_time, "s"),
        f"{prefix}counts_per_bin": (plan.counts_per_bin, "counts"),
        f"{prefix}observed_counts_per_bin": (plan.observed_counts_per_bin, "counts"),
        f"{prefix}dead_time_loss": (plan.dead_time_loss, ""),
        f"{prefix}saturation_warning": (plan.saturation_warning, ""),
    }


def _run_acq(cfg, rep, out):
    a = cfg["acq_plan"]
    k = a["speedup"]
    base = acquisition_plan(a["scan_length_mm"], a["mirror_speed_mm_s"], a["counting_time_s"],
                            a["count_rate_hz"], a["dead_time_s"])
    fast = acquisition_plan(a["scan_length_mm"], a["mirror_speed_mm_s"] * k,
                            a["counting_time_s"] / k, a["count_rate_hz"] * k, a["dead_time_s"])
    for prefix, plan in (("", base), ("fast_", fast)):
        for name, (value, unit) in _plan_fields(plan, prefix).items():
            rep.add(name, value, unit)
    rep.add("speedup", k, "")
    cols = ["plan", "scan_length_mm", "mirror_speed_mm_s", "counting_time_s", "count_rate_hz",
            "n_bins", "counts_per_bin", "observed_counts_per_bin", "scan_time_s"]
    rows = [
        {"plan": name, "scan_length_mm": p.scan_length, "mirror_speed_mm_s": p.mirror_speed,
         "counting_time_s": p.counting_time, "count_rate_hz": p.count_rate, "n_bins": p.n_bins,
         "counts_per_bin": p.counts_per_bin, "observed_counts_per_bin": p.observed_counts_per_bin,
         "scan_time_s": p.scan_time}
        for name, p in (("base", base), ("fast", fast))
    ]
    out.emit("acq_plan.csv", lambda p: pio.write_table(rows, p, cols))


_SCENARIOS = {
    "psf": _run_psf,
    "compare_detectors": _run_compare,
    "snr_run": _run_snr,
    "fano_run": _run_fano,
    "silica_scan": _run_silica,
    "snr_budget": _run_budget,
    "acq_plan": _run_acq,
}


def run_experiment(config: ExperimentConfig, out_dir=None) -> RunReport:
    """Run ``config.scenario``; files go to ``out_dir`` (or ``output.dir``) when set."""
    out = _Outputs(out_dir or config["output"]["dir"] or None)
    rep = RunReport(scenario=config.scenario, config=config.to_dict())
    try:
        _SCENARIOS[config.scenario](config, rep, out)
    except ConfigError:
        raise
    except OcdrError as exc:
        raise type(exc)(f"{config.scenario}: {exc}") from exc
    out.emit("config.toml", lambda p: p.write_text(serialize_config(config), encoding="utf-8"))
    rep.files = list(out.files)
    if out.dir is not None:
        rep.files.append("report.json")
        pio.write_json(rep.to_dict(), out.dir / "report.json")
    return rep
