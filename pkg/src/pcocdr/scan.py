"""Synthetic photon-counting axial scans.

Count rates follow the heterodyne model

    rate(z) = eta * [Phi_R + Phi_S * sum r_i**2
                     + 2 sqrt(Phi_R Phi_S) * sum r_i Re{g(z - z_i) exp(i(4 pi (z - z_i)/lambda0 + phi_i))}]
              + dark_rate

where g is the complex baseband coherence of the system spectrum (its
magnitude is the PSF envelope). Dead time compresses the mean rate with
the nonparalyzable law before Poisson sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import h as PLANCK

from .errors import InvalidParameterError, UndersampledError
from .psf import Psf

FORMAT_VERSION = 1
DEFAULT_BS_FACTOR = 0.25  # two passes through a 50/50 splitter


@dataclass(frozen=True)
class Reflector:
    depth: float  # optical depth, um
    reflectance: float  # amplitude reflectance
    phase: float = 0.0  # radians


@dataclass(frozen=True)
class SampleModel:
    reflectors: tuple[Reflector, ...]
    description: str = ""

    def __post_init__(self):
        refl = tuple(r if isinstance(r, Reflector) else Reflector(*r) for r in self.reflectors)
        object.__setattr__(self, "reflectors", refl)
        depths = [r.depth for r in refl]
        if any(b <= a for a, b in zip(depths, depths[1:])):
            raise InvalidParameterError("reflector depths must be strictly increasing")
        if any(not 0 <= r.reflectance <= 1 for r in refl):
            raise InvalidParameterError("amplitude reflectances must lie in [0, 1]")
        if sum(r.reflectance**2 for r in refl) > 1 + 1e-12:
            raise InvalidParameterError("sum of squared reflectances exceeds 1")

    @property
    def power_reflectance(self) -> float:
        return float(sum(r.reflectance**2 for r in self.reflectors))

    @classmethod
    def mirror(cls, depth: float = 0.0) -> "SampleModel":
        return cls((Reflector(depth, 1.0),), "mirror")

    @classmethod
    def slab(cls, thickness: float, index: float, front_depth: float = 0.0) -> "SampleModel":
        """Both faces of a dielectric window in air, Fresnel normal incidence.

        The optical separation is index * thickness; the rear reflection is
        weighted by the double-pass transmission of the front face.
        """
        r = (index - 1) / (index + 1)
        t2 = 1 - r**2
        return cls(
            (Reflector(front_depth, r), Reflector(front_depth + index * thickness, r * t2, math.pi)),
            f"{thickness:g} um window, n={index:g}",
        )


@dataclass(frozen=True)
class ScanConfig:
    """Acquisition settings for one axial scan.

    Units: z in um, mirror_speed in mm/s, counting_time in s, fluxes in
    photons/s at the detector, dark_rate in counts/s, dead_time in s,
    center_wavelength (fringe carrier) in nm.
    """

    z_start: float = -50.0
    z_end: float = 50.0
    mirror_speed: float = 1.0
    counting_time: float = 10e-6
    reference_flux: float = 1.0e8
    sample_flux_peak: float = 1.0e8
    eta: float = 0.05
    dark_rate: float = 0.0
    dead_time: float = 0.0
    rng_seed: int = 0
    center_wavelength: float = 930.0

    def __post_init__(self):
        if not self.z_end > self.z_start:
            raise InvalidParameterError("z_end must exceed z_start")
        for name in ("mirror_speed", "counting_time", "center_wavelength"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be > 0")
        for name in ("reference_flux", "sample_flux_peak", "dark_rate", "dead_time"):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"{name} must be >= 0")
        if not 0 <= self.eta <= 1:
            raise InvalidParameterError("eta must lie in [0, 1]")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise InvalidParameterError("rng_seed must be a 64-bit unsigned integer")

    @property
    def bin_spacing(self) -> float:
        """Mirror travel per counting bin (um)."""
        return self.mirror_speed * 1e3 * self.counting_time

    @property
    def n_bins(self) -> int:
        return int(math.floor((self.z_end - self.z_start) / self.bin_spacing + 1e-9))

    def positions(self) -> np.ndarray:
        """Bin-centre mirror positions (um)."""
        return self.z_start + (np.arange(self.n_bins) + 0.5) * self.bin_spacing

    def check_nyquist(self):
        limit = self.center_wavelength * 1e-3 / 4
        if self.bin_spacing >= limit:
            raise UndersampledError(
                f"bin spacing {self.bin_spacing:.4g} um must be below lambda0/4 = {limit:.4g} um"
            )

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass(frozen=True, eq=False)
class ScanRecord:
    config: ScanConfig
    positions: np.ndarray
    counts: np.ndarray
    truth: np.ndarray | None = None  # noiseless observed rate, counts/s
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        if len(self.positions) != len(self.counts):
            raise InvalidParameterError("positions and counts differ in length")
        if self.truth is not None and len(self.truth) != len(self.counts):
            raise InvalidParameterError("truth and counts differ in length")

    def __eq__(self, other):
        if not isinstance(other, ScanRecord):
            return NotImplemented
        same_truth = (self.truth is None and other.truth is None) or (
            self.truth is not None
            and other.truth is not None
            and np.array_equal(self.truth, other.truth)
        )
        return (
            self.config == other.config
            and self.format_version == other.format_version
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.counts, other.counts)
            and same_truth
        )

    __hash__ = None


def flux_from_power(power: float, wavelength: float) -> float:
    """Photon flux (photons/s) carried by ``power`` W at ``wavelength`` nm."""
    if power < 0 or wavelength <= 0:
        raise InvalidParameterError("need power >= 0 and wavelength > 0")
    return power / (PLANCK * SPEED_OF_LIGHT / (wavelength * 1e-9))


def sample_arm_power(
    source_power: float, attenuation_db: float, bs_factor: float = DEFAULT_BS_FACTOR
) -> float:
    """Power returned from an interferometer arm: P * bs_factor * 10**(-dB/10).

    The same loss chain serves for the reference arm with its own attenuation.
    """
    if attenuation_db < 0:
        raise InvalidParameterError("attenuation_db must be >= 0")
    return source_power * bs_factor / 10 ** (attenuation_db / 10)


def mean_rate(config: ScanConfig, sample: SampleModel, system_psf: Psf, z) -> np.ndarray:
    """Expected detector count rate (counts/s, before dead time) at mirror position(s) z."""
    z = np.asarray(z, dtype=float)
    k_carrier = 4 * np.pi / (config.center_wavelength * 1e-3)
    cross = np.zeros_like(z)
    for r in sample.reflectors:
        dz = z - r.depth
        g = system_psf.coherence(dz)
        cross += r.reflectance * np.real(g * np.exp(1j * (k_carrier * dz + r.phase)))
    phi_r, phi_s = config.reference_flux, config.sample_flux_peak
    rate = phi_r + phi_s * sample.power_reflectance + 2 * math.sqrt(phi_r * phi_s) * cross
    return config.eta * np.maximum(rate, 0.0) + config.dark_rate


def dead_time_rate(true_rate, dead_time: float):
    """Nonparalyzable dead-time compression: observed = rate / (1 + rate * dead_time)."""
    rate = np.asarray(true_rate, dtype=float)
    if np.any(rate < 0):
        raise InvalidParameterError("true_rate must be >= 0")
    out = rate / (1 + rate * dead_time)
    return float(out) if out.ndim == 0 else out


def nonparalyzable_filter(times: np.ndarray, dead_time: float) -> np.ndarray:
    """Boolean mask of the sorted arrival ``times`` that survive a nonparalyzable dead time."""
    keep = np.zeros(times.size, dtype=bool)
    last = -np.inf
    for i, t in enumerate(times.tolist()):
        if t - last >= dead_time:
            keep[i] = True
            last = t
    return keep


def _event_level_counts(true_rate, counting_time, dead_time, rng) -> np.ndarray:
    n_arrivals = rng.poisson(np.asarray(true_rate) * counting_time)
    bins = np.repeat(np.arange(n_arrivals.size), n_arrivals)
    times = (bins + rng.random(bins.size)) * counting_time
    order = np.argsort(times, kind="stable")
    times, bins = times[order], bins[order]
    keep = nonparalyzable_filter(times, dead_time) if dead_time > 0 else np.ones(times.size, bool)
    return np.bincount(bins[keep], minlength=n_arrivals.size)


def simulate_scan(
    config: ScanConfig,
    sample: SampleModel,
    system_psf: Psf,
    keep_truth: bool = True,
    mode: str = "rate",
) -> ScanRecord:
    """Draw one seeded photon-count scan.

    ``mode="rate"`` samples Poisson counts from the dead-time-compressed
    mean rate. ``mode="event"`` instead simulates individual arrivals and
    drops those within ``dead_time`` of the previous registered count,
    which checks the rate approximation at high fluxes.
    """
    config.check_nyquist()
    z = config.positions()
    true_rate = mean_rate(config, sample, system_psf, z)
    observed = dead_time_rate(true_rate, config.dead_time)
    rng = np.random.default_rng(config.rng_seed)
    if mode == "rate":
        counts = rng.poisson(observed * config.counting_time)
    elif mode == "event":
        counts = _event_level_counts(true_rate, config.counting_time, config.dead_time, rng)
    else:
        raise InvalidParameterError(f"unknown scan mode {mode!r}")
    return ScanRecord(
        config=config,
        positions=z,
        counts=counts.astype(np.int64),
        truth=np.asarray(observed, dtype=float) if keep_truth else None,
    )


def repeat_at_position(
    config: ScanConfig,
    sample: SampleModel,
    system_psf: Psf,
    z: float,
    n_repeats: int,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """``n_repeats`` independent counting windows with the mirror held at ``z``."""
    if n_repeats < 2:
        raise InvalidParameterError("n_repeats must be >= 2")
    rate = dead_time_rate(mean_rate(config, sample, system_psf, z), config.dead_time)
    rng = rng if rng is not None else np.random.default_rng(config.rng_seed)
    return rng.poisson(float(rate) * config.counting_time, size=n_repeats).astype(np.int64)


@dataclass(frozen=True)
class PowerChain:
    """Source power split into reference and sample arms with ND attenuation."""

    source_power: float = 10e-9
    sample_attenuation_db: float = 70.0
    reference_attenuation_db: float = 40.0
    bs_factor: float = DEFAULT_BS_FACTOR
    wavelength: float = 930.0

    def fluxes(self) -> tuple[float, float]:
        p_r = sample_arm_power(self.source_power, self.reference_attenuation_db, self.bs_factor)
        p_s = sample_arm_power(self.source_power, self.sample_attenuation_db, self.bs_factor)
        return flux_from_power(p_r, self.wavelength), flux_from_power(p_s, self.wavelength)
