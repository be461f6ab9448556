"""Experiment configuration: TOML text with strict keys and scenario presets.

A config names a ``scenario``; the preset for that scenario supplies every
parameter that the file leaves out. Unknown sections or keys, wrong types
and out-of-range values raise :class:`ConfigError` before any computation.
"""

from __future__ import annotations

import copy
import math
import sys
from dataclasses import dataclass, field
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import tomli_w

from .errors import ConfigError
from .spectra import DETECTOR_DEFAULTS, DetectorKind

SCENARIOS = (
    "psf",
    "compare_detectors",
    "snr_run",
    "fano_run",
    "silica_scan",
    "snr_budget",
    "acq_plan",
)

# Base defaults shared by all scenarios. Scalars only, except explicit lists.
BASE: dict[str, dict[str, Any]] = {
    "grid": {"nu_min_hz": 150e12, "nu_max_hz": 1000e12, "n_points": 16384},
    "source": {
        "kind": "gaussian",  # gaussian | spdc | file
        "center_nm": 930.0,
        "fwhm_nm": 70.0,
        "pump_nm": 532.0,
        "bandwidth_hz": 40e12,
        "shape": "gaussian",
        "path": "",
    },
    "detector": {"kind": "IdealFlat", "params": {}},
    "psf": {"z_range_um": 50.0, "z_points": 8193},
    "sample": {
        "kind": "mirror",  # mirror | slab | reflectors
        "depth_um": 0.0,
        "thickness_um": 100.0,
        "index": 1.45,
        "depths_um": [0.0],
        "reflectances": [1.0],
        "phases_rad": [0.0],
    },
    "scan": {
        "z_start_um": -50.0,
        "z_end_um": 50.0,
        "mirror_speed_mm_s": 1.0,
        "counting_time_s": 10e-6,
        "reference_flux": 1e8,
        "sample_flux": 1e8,
        "count_rate_hz": 0.0,  # > 0 rescales both fluxes to this mean detected rate
        "eta": 0.05,
        "dark_rate_hz": 0.0,
        "dead_time_s": 0.0,
        "mode": "rate",
        "center_wavelength_nm": 0.0,  # 0 takes the system-spectrum centroid
    },
    "power_chain": {
        "enabled": False,
        "source_power_w": 10e-9,
        "sample_attenuation_db": 70.0,
        "reference_attenuation_db": 40.0,
        "bs_factor": 0.25,
    },
    "filter": {
        "margin": 1.5,
        "window": "hamming",
        "target_bandwidth_hz": 0.0,  # > 0 sets the mirror speed so B matches
        "threshold_fraction": 0.5,
        "signal_region_um": [-5.0, 5.0],
        "noise_regions_um": [[-100.0, -15.0], [15.0, 100.0]],
    },
    "monte_carlo": {"n_seeds": 1, "n_trials": 10000, "n_samples": 100, "position_um": 40.0},
    "compare": {
        "target_fwhm_sspd_um": 3.3,
        "cutoff_nm": 1100.0,
        "second_detector": "SPAD",
        "recover_from_truth": True,
    },
    "snr_budget": {
        "responsivity": 0.8,
        "reference_power_w": 1e-8,
        "sample_power_w": 1e-12,
        "temperature_k": 300.0,
        "bandwidth_hz": 1e4,
        "feedback_resistance_ohm": 6.46e6,
        "polarization_degree": 1.0,
        "source_bandwidth_hz": 10e12,
        "sweep_min_w": 1e-12,
        "sweep_max_w": 1e-2,
        "sweep_points": 10000,
    },
    "acq_plan": {
        "scan_length_mm": 1.0,
        "mirror_speed_mm_s": 1.0,
        "counting_time_s": 10e-6,
        "count_rate_hz": 5e6,
        "dead_time_s": 10e-9,
        "speedup": 10.0,
    },
    "output": {"dir": "", "format": "csv", "write_scan": False},
}

# Fresnel amplitude reflectance of fused silica (n = 1.45) at normal incidence
_R_SILICA = (1.45 - 1) / (1.45 + 1)

PRESETS: dict[str, dict[str, dict[str, Any]]] = {
    "psf": {},
    "compare_detectors": {
        "source": {"kind": "spdc"},
        "detector": {"kind": "SSPD"},
        "psf": {"z_range_um": 60.0},
        "scan": {"z_start_um": -40.0, "z_end_um": 40.0},
    },
    "snr_run": {
        "detector": {"kind": "SSPD"},
        "psf": {"z_range_um": 110.0, "z_points": 16385},
        "scan": {"z_start_um": -100.0, "z_end_um": 100.0, "counting_time_s": 1.0},
        "power_chain": {"enabled": True},
        "filter": {"target_bandwidth_hz": 0.025},
        "monte_carlo": {"n_seeds": 100},
    },
    "fano_run": {
        "sample": {"kind": "mirror"},
        "scan": {"count_rate_hz": 5e6},
    },
    "silica_scan": {
        "detector": {"kind": "SSPD"},
        "psf": {"z_range_um": 600.0, "z_points": 16385},
        "sample": {
            "kind": "reflectors",
            "depths_um": [0.0, 135.0],
            "reflectances": [_R_SILICA, _R_SILICA * (1 - _R_SILICA**2)],
            "phases_rad": [0.0, math.pi],
        },
        "scan": {
            "z_start_um": -432.5,
            "z_end_um": 567.5,
            "count_rate_hz": 5e6,
            "dead_time_s": 10e-9,
        },
        "filter": {"margin": 1.5},
    },
    "snr_budget": {},
    "acq_plan": {},
}

# (lo, hi, lo_inclusive, hi_inclusive); None means unbounded
_RANGES = {
    ("grid", "nu_min_hz"): (0, None, False, True),
    ("grid", "n_points"): (16, None, True, True),
    ("source", "center_nm"): (0, None, False, True),
    ("source", "fwhm_nm"): (0, None, False, True),
    ("source", "pump_nm"): (0, None, False, True),
    ("source", "bandwidth_hz"): (0, None, False, True),
    ("psf", "z_range_um"): (0, None, False, True),
    ("psf", "z_points"): (256, None, True, True),
    ("sample", "thickness_um"): (0, None, False, True),
    ("sample", "index"): (1, None, True, True),
    ("scan", "mirror_speed_mm_s"): (0, None, False, True),
    ("scan", "counting_time_s"): (0, None, False, True),
    ("scan", "reference_flux"): (0, None, True, True),
    ("scan", "sample_flux"): (0, None, True, True),
    ("scan", "count_rate_hz"): (0, None, True, True),
    ("scan", "eta"): (0, 1, True, True),
    ("scan", "dark_rate_hz"): (0, None, True, True),
    ("scan", "dead_time_s"): (0, None, True, True),
    ("scan", "center_wavelength_nm"): (0, None, True, True),
    ("power_chain", "source_power_w"): (0, None, False, True),
    ("power_chain", "sample_attenuation_db"): (0, None, True, True),
    ("power_chain", "reference_attenuation_db"): (0, None, True, True),
    ("power_chain", "bs_factor"): (0, 1, False, True),
    ("filter", "margin"): (1, None, True, True),
    ("filter", "target_bandwidth_hz"): (0, None, True, True),
    ("filter", "threshold_fraction"): (0, 1, False, False),
    ("monte_carlo", "n_seeds"): (1, None, True, True),
    ("monte_carlo", "n_trials"): (1, None, True, True),
    ("monte_carlo", "n_samples"): (2, None, True, True),
    ("compare", "target_fwhm_sspd_um"): (0, None, False, True),
    ("compare", "cutoff_nm"): (0, None, False, True),
    ("snr_budget", "responsivity"): (0, None, False, True),
    ("snr_budget", "reference_power_w"): (0, None, False, True),
    ("snr_budget", "sample_power_w"): (0, None, False, True),
    ("snr_budget", "temperature_k"): (0, None, False, True),
    ("snr_budget", "bandwidth_hz"): (0, None, False, True),
    ("snr_budget", "feedback_resistance_ohm"): (0, None, False, True),
    ("snr_budget", "polarization_degree"): (0, 1, True, True),
    ("snr_budget", "source_bandwidth_hz"): (0, None, False, True),
    ("snr_budget", "sweep_min_w"): (0, None, False, True),
    ("snr_budget", "sweep_points"): (3, None, True, True),
    ("acq_plan", "scan_length_mm"): (0, None, True, True),
    ("acq_plan", "mirror_speed_mm_s"): (0, None, False, True),
    ("acq_plan", "counting_time_s"): (0, None, False, True),
    ("acq_plan", "count_rate_hz"): (0, None, True, True),
    ("acq_plan", "dead_time_s"): (0, None, True, True),
    ("acq_plan", "speedup"): (0, None, False, True),
}

_CHOICES = {
    ("source", "kind"): ("gaussian", "spdc", "file"),
    ("source", "shape"): ("gaussian", "sinc2"),
    ("detector", "kind"): tuple(k.value for k in DetectorKind if k is not DetectorKind.CUSTOM),
    ("sample", "kind"): ("mirror", "slab", "reflectors"),
    ("scan", "mode"): ("rate", "event"),
    ("filter", "window"): ("hamming", "blackman"),
    ("compare", "second_detector"): ("SPAD", "InGaAs", "IdealFlat", "SSPD"),
    ("output", "format"): ("csv",),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved configuration: scenario, seed and one dict per section."""

    scenario: str
    rng_seed: int = 0
    sections: dict[str, dict[str, Any]] = field(default_factory=dict)

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.sections[section]

    def to_dict(self) -> dict[str, Any]:
        return {"scenario": self.scenario, "rng_seed": self.rng_seed, **copy.deepcopy(self.sections)}

    def with_overrides(self, **top) -> "ExperimentConfig":
        """Copy with top-level fields (``rng_seed``) or ``section={key: value}`` changes."""
        data = self.to_dict()
        for key, value in top.items():
            if isinstance(value, Mapping):
                data.setdefault(key, {}).update(value)
            else:
                data[key] = value
        return build_config(data)


def default_config(scenario: str) -> ExperimentConfig:
    return build_config({"scenario": scenario})


def _type_ok(default, value) -> bool:
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, str):
        return isinstance(value, str)
    if isinstance(default, list):
        return isinstance(value, list)
    if isinstance(default, dict):
        return isinstance(value, dict)
    return False


def _coerce(default, value):
    if isinstance(default, float) and not isinstance(default, bool):
        return float(value)
    if isinstance(default, list):
        return copy.deepcopy(value)
    return value


def _check_range(section: str, key: str, value):
    name = f"{section}.{key}"
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError(f"{name} must be finite", field=name)
    rng = _RANGES.get((section, key))
    if rng is not None:
        lo, hi, lo_inc, hi_inc = rng
        bad_lo = lo is not None and (value < lo if lo_inc else value <= lo)
        bad_hi = hi is not None and (value > hi if hi_inc else value >= hi)
        if bad_lo or bad_hi:
            lo_s = "-inf" if lo is None else f"{lo:g}"
            hi_s = "inf" if hi is None else f"{hi:g}"
            brackets = ("[" if lo_inc else "(") + lo_s + ", " + hi_s + ("]" if hi_inc else ")")
            raise ConfigError(f"{name} = {value!r} is outside {brackets}", field=name)
    choices = _CHOICES.get((section, key))
    if choices is not None and value not in choices:
        raise ConfigError(f"{name} must be one of {list(choices)}, got {value!r}", field=name)


def _validate_cross(sections: dict[str, dict[str, Any]]):
    g = sections["grid"]
    if not g["nu_max_hz"] > g["nu_min_hz"]:
        raise ConfigError("grid.nu_max_hz must exceed grid.nu_min_hz", field="grid.nu_max_hz")
    s = sections["scan"]
    if not s["z_end_um"] > s["z_start_um"]:
        raise ConfigError("scan.z_end_um must exceed scan.z_start_um", field="scan.z_end_um")
    smp = sections["sample"]
    n = len(smp["depths_um"])
    for key in ("reflectances", "phases_rad"):
        if len(smp[key]) != n:
            raise ConfigError(f"sample.{key} must have as many entries as sample.depths_um",
                              field=f"sample.{key}")
    for key in ("depths_um", "reflectances", "phases_rad"):
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in smp[key]):
            raise ConfigError(f"sample.{key} must be a list of numbers", field=f"sample.{key}")
    if any(not 0 <= r <= 1 for r in smp["reflectances"]):
        raise ConfigError("sample.reflectances must lie in [0, 1]", field="sample.reflectances")
    f = sections["filter"]
    sig = f["signal_region_um"]
    if len(sig) != 2 or not sig[1] > sig[0]:
        raise ConfigError("filter.signal_region_um must be [lo, hi] with hi > lo",
                          field="filter.signal_region_um")
    for reg in f["noise_regions_um"]:
        if not isinstance(reg, list) or len(reg) != 2 or not reg[1] > reg[0]:
            raise ConfigError("filter.noise_regions_um entries must be [lo, hi] with hi > lo",
                              field="filter.noise_regions_um")
    b = sections["snr_budget"]
    if not b["sweep_max_w"] > b["sweep_min_w"]:
        raise ConfigError("snr_budget.sweep_max_w must exceed sweep_min_w",
                          field="snr_budget.sweep_max_w")
    if sections["source"]["kind"] == "file" and not sections["source"]["path"]:
        raise ConfigError("source.path is required when source.kind = 'file'", field="source.path")
    det = sections["detector"]
    allowed = set(DETECTOR_DEFAULTS[DetectorKind(det["kind"])]) - {"bias_law", "qe"}
    for key, value in det["params"].items():
        if key not in allowed:
            raise ConfigError(
                f"unknown detector.params key {key!r} for {det['kind']}; "
                f"allowed: {sorted(allowed)}",
                field=f"detector.params.{key}",
            )
        if not isinstance(value, (int, float)) or isinstance(value, bool) or value < 0:
            raise ConfigError(f"detector.params.{key} must be a number >= 0",
                              field=f"detector.params.{key}")


def build_config(data: Mapping[str, Any]) -> ExperimentConfig:
    """Validate a nested mapping (as produced by a TOML parser) into a config."""
    data = dict(data)
    scenario = data.pop("scenario", None)
    if scenario is None:
        raise ConfigError("missing top-level key 'scenario'", field="scenario")
    if scenario not in SCENARIOS:
        raise ConfigError(f"scenario must be one of {list(SCENARIOS)}, got {scenario!r}",
                          field="scenario")
    seed = data.pop("rng_seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**63:
        raise ConfigError("rng_seed must be an integer in [0, 2**63)", field="rng_seed")

    sections = copy.deepcopy(BASE)
    for sec, values in PRESETS[scenario].items():
        sections[sec].update(copy.deepcopy(values))

    for sec, values in data.items():
        if sec not in BASE:
            raise ConfigError(f"unknown section or key {sec!r}", field=sec)
        if not isinstance(values, Mapping):
            raise ConfigError(f"{sec} must be a table", field=sec)
        for key, value in values.items():
            name = f"{sec}.{key}"
            if key not in BASE[sec]:
                raise ConfigError(f"unknown key {name!r}", field=name)
            default = BASE[sec][key]
            if not _type_ok(default, value):
                raise ConfigError(
                    f"{name} must be of type {type(default).__name__}, got {type(value).__name__}",
                    field=name,
                )
            sections[sec][key] = _coerce(default, value)

    for sec, values in sections.items():
        for key, value in values.items():
            _check_range(sec, key, value)
    _validate_cross(sections)
    return ExperimentConfig(scenario=scenario, rng_seed=seed, sections=sections)


def parse_config(text: str) -> ExperimentConfig:
    """Parse TOML config text; syntax errors carry the line number."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        if line is None:
            import re

            m = re.search(r"line (\d+)", str(exc))
            line = int(m.group(1)) if m else None
        raise ConfigError(f"syntax error: {exc}", line=line) from exc
    return build_config(data)


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"config is not valid UTF-8: {exc}") from exc
    return parse_config(text)


def serialize_config(config: ExperimentConfig) -> str:
    """Fully resolved TOML text that reparses to an equal config."""
    return tomli_w.dumps(config.to_dict())
