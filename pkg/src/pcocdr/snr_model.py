"""Analytic sensitivity models for photodiode and photon-counting OCDR.

The conventional budget is

    SNR = R^2 P_R P_S / (4kTB/R_f + 2eBR P_R + (1 + Pi^2) B R^2 P_R^2 / dnu)

with thermal, shot and source-excess noise in the denominator. Photon
counting removes the thermal term and leaves SNR = eta Phi_S / (2B).
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import Boltzmann, c as SPEED_OF_LIGHT, e as ELECTRON_CHARGE, h as PLANCK

from .errors import InvalidParameterError
from .scan import dead_time_rate

log = logging.getLogger(__name__)

SATURATION_WARNING_FRACTION = 0.10


@dataclass(frozen=True)
class ConventionalSnrParams:
    """Inputs of the conventional budget.

    Defaults are representative photodiode-receiver values that put the
    thermal/shot crossover at 10 nW of reference power.
    """

    responsivity: float = 0.8  # A/W
    reference_power: float = 1e-8  # W
    sample_power: float = 1e-12  # W
    temperature: float = 300.0  # K
    bandwidth: float = 1e4  # Hz
    feedback_resistance: float = 6.46e6  # ohm
    polarization_degree: float = 1.0
    source_bandwidth: float = 10e12  # Hz

    def __post_init__(self):
        for name in (
            "responsivity", "reference_power", "sample_power", "temperature",
            "bandwidth", "feedback_resistance", "source_bandwidth",
        ):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be > 0")
        if not 0 <= self.polarization_degree <= 1:
            raise InvalidParameterError("polarization_degree must lie in [0, 1]")

    def with_(self, **changes) -> "ConventionalSnrParams":
        from dataclasses import replace

        return replace(self, **changes)


class NoiseRegime(str, enum.Enum):
    THERMAL = "thermal"
    SHOT = "shot"
    EXCESS = "excess"


@dataclass(frozen=True)
class SnrBudget:
    signal_term: float
    thermal_noise: float
    shot_noise: float
    excess_noise: float

    @property
    def total_noise(self) -> float:
        return self.thermal_noise + self.shot_noise + self.excess_noise

    @property
    def snr(self) -> float:
        return self.signal_term / self.total_noise

    @property
    def snr_db(self) -> float:
        return 10 * math.log10(self.snr) if self.snr > 0 else -math.inf

    @property
    def dominant_regime(self) -> NoiseRegime:
        terms = {
            NoiseRegime.THERMAL: self.thermal_noise,
            NoiseRegime.SHOT: self.shot_noise,
            NoiseRegime.EXCESS: self.excess_noise,
        }
        return max(terms, key=terms.get)


def _coefficients(p: ConventionalSnrParams):
    # noise = a + b P_R + c P_R^2, per unit bandwidth removed later
    a = 4 * Boltzmann * p.temperature * p.bandwidth / p.feedback_resistance
    b = 2 * ELECTRON_CHARGE * p.bandwidth * p.responsivity
    c = (1 + p.polarization_degree**2) * p.bandwidth * p.responsivity**2 / p.source_bandwidth
    return a, b, c


def snr_conventional(params: ConventionalSnrParams) -> SnrBudget:
    a, b, c = _coefficients(params)
    pr = params.reference_power
    return SnrBudget(
        signal_term=params.responsivity**2 * pr * params.sample_power,
        thermal_noise=a,
        shot_noise=b * pr,
        excess_noise=c * pr**2,
    )


def snr_shot_limit(responsivity: float, sample_power: float, bandwidth: float) -> float:
    """Shot-noise-limited photodiode SNR, R P_S / (2 e B)."""
    return responsivity * sample_power / (2 * ELECTRON_CHARGE * bandwidth)


def optimal_reference_power(params: ConventionalSnrParams) -> float:
    """Reference power maximizing the conventional SNR, sqrt(4kT dnu / (R_f (1 + Pi^2) R^2))."""
    a, _, c = _coefficients(params)
    return math.sqrt(a / c)


def crossover_powers(params: ConventionalSnrParams) -> dict[str, float]:
    """Reference powers (W) at which pairs of noise terms are equal."""
    a, b, c = _coefficients(params)
    return {
        "thermal_shot": a / b,
        "shot_excess": b / c,
        "thermal_excess": math.sqrt(a / c),
    }


def sweep_reference_power(params: ConventionalSnrParams, powers) -> list[dict]:
    rows = []
    for pr in np.asarray(powers, dtype=float):
        bud = snr_conventional(params.with_(reference_power=float(pr)))
        rows.append(
            {
                "reference_power_w": float(pr),
                "signal_a2": bud.signal_term,
                "thermal_a2": bud.thermal_noise,
                "shot_a2": bud.shot_noise,
                "excess_a2": bud.excess_noise,
                "snr": bud.snr,
                "snr_db": bud.snr_db,
                "regime": bud.dominant_regime.value,
            }
        )
    return rows


def snr_photon_counting(eta: float, sample_flux: float, bandwidth: float) -> tuple[float, float]:
    """Shot-noise-limited photon-counting SNR, eta Phi_S / (2B), and its value in dB."""
    if not (eta > 0 and sample_flux > 0 and bandwidth > 0):
        raise InvalidParameterError("eta, sample_flux and bandwidth must be > 0")
    snr = eta * sample_flux / (2 * bandwidth)
    return snr, 10 * math.log10(snr)


def min_detectable_flux(eta: float, bandwidth: float) -> float:
    """Sample flux giving unit SNR, 2B / eta.

    Equivalent to detecting 1/eta photons per resolution time 1/(2B).
    """
    if not 0 < eta <= 1:
        raise InvalidParameterError("eta must lie in (0, 1]")
    if not bandwidth > 0:
        raise InvalidParameterError("bandwidth must be > 0")
    return 2 * bandwidth / eta


def counting_bandwidth(counting_time: float, digital_filter_bandwidth: float | None = None) -> float:
    """Bandwidth of a counting record, 1/(2T), narrowed by any digital filter."""
    if not counting_time > 0:
        raise InvalidParameterError("counting_time must be > 0")
    b = 1 / (2 * counting_time)
    if digital_filter_bandwidth is not None:
        b = min(b, digital_filter_bandwidth)
    return b


def responsivity_to_eta(responsivity: float, wavelength: float) -> float:
    """Quantum efficiency equivalent to a responsivity (A/W) at ``wavelength`` nm."""
    return responsivity * PLANCK * SPEED_OF_LIGHT / (wavelength * 1e-9) / ELECTRON_CHARGE


@dataclass(frozen=True)
class AcquisitionPlan:
    scan_length: float  # mm
    mirror_speed: float  # mm/s
    counting_time: float  # s
    count_rate: float  # counts/s before dead time
    dead_time: float  # s
    n_bins: int
    counts_per_bin: float  # before dead time
    scan_time: float  # s
    observed_count_rate: float
    observed_counts_per_bin: float
    saturation_warning: bool

    @property
    def dead_time_loss(self) -> float:
        if self.count_rate == 0:
            return 0.0
        return 1 - self.observed_count_rate / self.count_rate


def acquisition_plan(
    scan_length: float,
    mirror_speed: float,
    counting_time: float,
    count_rate: float,
    dead_time: float = 0.0,
) -> AcquisitionPlan:
    """Bins, counts per bin and scan duration for a continuous mirror sweep."""
    if scan_length < 0 or not mirror_speed > 0 or not counting_time > 0:
        raise InvalidParameterError("need scan_length >= 0 and positive speed and counting time")
    if count_rate < 0 or dead_time < 0:
        raise InvalidParameterError("count_rate and dead_time must be >= 0")
    n_bins = math.floor(scan_length / (mirror_speed * counting_time) + 1e-9)
    observed = dead_time_rate(count_rate, dead_time)
    loss = 0.0 if count_rate == 0 else 1 - observed / count_rate
    warn = loss > SATURATION_WARNING_FRACTION
    if warn:
        log.warning(
            "dead time removes %.1f%% of counts at %.3g counts/s", 100 * loss, count_rate
        )
    return AcquisitionPlan(
        scan_length=scan_length,
        mirror_speed=mirror_speed,
        counting_time=counting_time,
        count_rate=count_rate,
        dead_time=dead_time,
        n_bins=int(n_bins),
        counts_per_bin=count_rate * counting_time,
        scan_time=scan_length / mirror_speed,
        observed_count_rate=observed,
        observed_counts_per_bin=observed * counting_time,
        saturation_warning=warn,
    )
