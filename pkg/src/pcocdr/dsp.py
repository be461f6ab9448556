"""Axial-profile recovery from photon-count records.

Chain: mean removal -> linear-phase FIR bandpass around the fringe carrier
-> analytic-signal envelope -> peaks / widths / SNR. Statistics always skip
``n_taps // 2`` bins at each end, where the filter is not fully supported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .errors import (
    AmbiguousPeakError,
    DegenerateNoiseError,
    FilterDesignError,
    InputTooShortError,
    InvalidParameterError,
    NoPeakError,
    RegionError,
    ZeroMeanError,
)
from .psf import C_UM_PER_S, measure_fwhm
from .scan import ScanConfig, ScanRecord
from .spectra import SpectralDensity

MIN_TAPS = 31
TAPS_PER_INVERSE_BANDWIDTH = 8.0
WINDOWS = ("hamming", "blackman")
# envelope FWHM of the impulse response of an ideal band of width W is 1.2067 / W
IMPULSE_FWHM_TIMES_BANDWIDTH = 1.2067


@dataclass(frozen=True)
class FilterSpec:
    """Bandpass in spatial frequency (cycles/um of mirror travel)."""

    center_spatial_frequency: float
    bandwidth: float
    n_taps: int
    window: str = "hamming"

    def __post_init__(self):
        if not 0 < self.bandwidth < 2 * self.center_spatial_frequency:
            raise FilterDesignError("need 0 < bandwidth < 2 * center")
        if self.n_taps < MIN_TAPS or self.n_taps % 2 == 0:
            raise FilterDesignError(f"n_taps must be odd and >= {MIN_TAPS}")
        if self.window not in WINDOWS:
            raise FilterDesignError(f"window must be one of {WINDOWS}")

    @property
    def edge(self) -> int:
        return self.n_taps // 2

    def effective_bandwidth_hz(self, mirror_speed: float) -> float:
        """Electrical bandwidth B per quadrature component for a mirror speed in mm/s."""
        return self.bandwidth * mirror_speed * 1e3 / 2

    def broadening_bound(self, true_fwhm: float) -> float:
        """Upper bound (um) on the envelope FWHM after filtering a peak of width ``true_fwhm``.

        The filtered envelope is the true one convolved with the filter's
        impulse-response envelope, so widths at most add.
        """
        return true_fwhm + IMPULSE_FWHM_TIMES_BANDWIDTH / self.bandwidth


@dataclass(frozen=True)
class Peak:
    position: float
    height: float
    fwhm: float


@dataclass(frozen=True, eq=False)
class EnvelopeResult:
    z: np.ndarray
    envelope: np.ndarray
    peaks: list[Peak] = field(default_factory=list)
    snr_estimate: float | None = None
    filtered: np.ndarray | None = None

    @property
    def fwhm_per_peak(self) -> list[float]:
        return [p.fwhm for p in self.peaks]

    @property
    def snr_db(self) -> float | None:
        return None if self.snr_estimate is None else 10 * math.log10(self.snr_estimate)


@dataclass(frozen=True)
class FanoEstimate:
    f_hat: float
    n_samples: int

    @property
    def expected_std(self) -> float:
        """Spread of the estimator under Poisson statistics, sqrt(2/N)."""
        return math.sqrt(2 / self.n_samples)


def passband_width(system_spectrum: SpectralDensity, margin: float, scan_length: float) -> float:
    """Filter width (cycles/um) used by :func:`design_bandpass`."""
    if margin < 1:
        raise InvalidParameterError("margin must be >= 1")
    width = margin * 2 * system_spectrum.fwhm_frequency() / C_UM_PER_S
    return max(width, 2 / scan_length)


def speed_for_bandwidth(target_bandwidth: float, passband: float) -> float:
    """Mirror speed (mm/s) at which a passband of ``passband`` cycles/um spans ``target_bandwidth`` Hz."""
    if not target_bandwidth > 0 or not passband > 0:
        raise InvalidParameterError("target bandwidth and passband must be > 0")
    return 2 * target_bandwidth / passband * 1e-3


def design_bandpass(
    config: ScanConfig,
    system_spectrum: SpectralDensity,
    margin: float = 1.5,
    window: str = "hamming",
) -> FilterSpec:
    """Bandpass matched to the fringe band of ``system_spectrum``.

    The centre is 2 / lambda0 with lambda0 the spectral centroid; the width is
    ``margin`` times the spectral FWHM mapped through nu -> 2 nu / c, but never
    less than two Fourier bins of the scan.
    """
    dz = config.bin_spacing
    center = 2 / (system_spectrum.center_wavelength * 1e-3)
    width = passband_width(system_spectrum, margin, config.z_end - config.z_start)
    nyquist = 1 / (2 * dz)
    if center + width / 2 >= nyquist:
        raise FilterDesignError(
            f"passband edge {center + width / 2:.4g} cycles/um reaches the "
            f"Nyquist limit {nyquist:.4g} cycles/um of the bin spacing"
        )
    n_taps = max(MIN_TAPS, math.ceil(TAPS_PER_INVERSE_BANDWIDTH / (width * dz)))
    n_taps += 1 - n_taps % 2
    return FilterSpec(center, width, n_taps, window)


def filter_taps(spec: FilterSpec, bin_spacing: float) -> np.ndarray:
    """Windowed-sinc taps with zero DC gain and unit gain at the passband centre."""
    fs = 1 / bin_spacing
    lo = spec.center_spatial_frequency - spec.bandwidth / 2
    hi = spec.center_spatial_frequency + spec.bandwidth / 2
    if hi >= fs / 2:
        raise FilterDesignError("passband exceeds the Nyquist limit of the bin spacing")
    h = signal.firwin(spec.n_taps, [lo, hi], pass_zero=False, window=spec.window, fs=fs)
    w = signal.get_window(spec.window, spec.n_taps, fftbins=False)
    h = h - h.sum() * w / w.sum()
    gain = np.abs(frequency_response(h, bin_spacing, spec.center_spatial_frequency))
    return h / gain


def frequency_response(taps: np.ndarray, bin_spacing: float, spatial_frequency) -> np.ndarray:
    """Complex response of centred ``taps`` at spatial frequencies in cycles/um."""
    n = np.arange(taps.size) - taps.size // 2
    f = np.atleast_1d(np.asarray(spatial_frequency, dtype=float))
    resp = np.exp(-2j * np.pi * np.outer(f, n) * bin_spacing) @ taps
    return resp if np.ndim(spatial_frequency) else resp[0]


def bandpass_filter(counts, spec: FilterSpec, bin_spacing: float) -> np.ndarray:
    """Zero-phase bandpass of a count sequence (its mean is removed first)."""
    x = np.asarray(counts, dtype=float)
    if x.size <= spec.n_taps:
        raise InputTooShortError(
            f"sequence of {x.size} samples is not longer than the {spec.n_taps}-tap filter"
        )
    h = filter_taps(spec, bin_spacing)
    return signal.fftconvolve(x - x.mean(), h, mode="same")


def demodulate_envelope(filtered, spec: FilterSpec | None = None, bin_spacing: float | None = None):
    """Magnitude of the analytic signal of a bandpassed sequence."""
    x = np.asarray(filtered, dtype=float)
    if not np.any(x):
        return np.zeros_like(x)
    return np.abs(signal.hilbert(x))


def _parabolic_vertex(y, i):
    if 0 < i < len(y) - 1:
        a, b, c = y[i - 1], y[i], y[i + 1]
        denom = a - 2 * b + c
        if denom < 0:
            off = 0.5 * (a - c) / denom
            return off, b - 0.25 * (a - c) * off
    return 0.0, y[i]


def find_peaks(envelope, z, threshold_fraction: float = 0.5) -> list[Peak]:
    """Peaks of an envelope above ``threshold_fraction`` of its global maximum.

    Each contiguous run above threshold contributes its highest sample,
    refined by a 3-point parabola. Widths come from :func:`measure_fwhm` on
    the stretch between the midpoints to neighbouring peaks (NaN when the
    half-maximum is not reached inside that stretch).
    """
    if not 0 < threshold_fraction < 1:
        raise InvalidParameterError("threshold_fraction must lie in (0, 1)")
    y = np.asarray(envelope, dtype=float)
    z = np.asarray(z, dtype=float)
    if y.size == 0 or not y.max() > 0:
        return []
    thr = threshold_fraction * y.max()
    above = np.concatenate(([False], y > thr, [False]))
    starts = np.flatnonzero(~above[:-1] & above[1:])
    stops = np.flatnonzero(above[:-1] & ~above[1:])
    idx = [s + int(np.argmax(y[s:e])) for s, e in zip(starts, stops)]

    dz = z[1] - z[0] if z.size > 1 else 0.0
    peaks = []
    for j, i in enumerate(idx):
        lo = 0 if j == 0 else (idx[j - 1] + i) // 2
        hi = y.size if j == len(idx) - 1 else (i + idx[j + 1]) // 2 + 1
        try:
            width = measure_fwhm(y[lo:hi], z[lo:hi])
        except (NoPeakError, AmbiguousPeakError):
            width = float("nan")
        off, height = _parabolic_vertex(y, i)
        if height > thr:
            peaks.append(Peak(float(z[i] + off * dz), float(height), width))
    return peaks


def _mask(z, region):
    regions = [region] if np.ndim(region[0]) == 0 else list(region)
    m = np.zeros(z.shape, dtype=bool)
    for lo, hi in regions:
        m |= (z >= lo) & (z <= hi)
    return m


def estimate_snr(filtered, envelope, z, signal_region, noise_region) -> tuple[float, float]:
    """Peak envelope squared over the variance of the filtered signal in the noise region.

    Regions are ``(lo, hi)`` intervals in um; ``noise_region`` may also be a
    list of intervals (typically one either side of the signal).
    """
    filtered = np.asarray(filtered, dtype=float)
    envelope = np.asarray(envelope, dtype=float)
    z = np.asarray(z, dtype=float)
    sig = _mask(z, signal_region)
    noise = _mask(z, noise_region)
    if np.any(sig & noise):
        raise RegionError("signal and noise regions overlap")
    if not sig.any() or noise.sum() < 2:
        raise RegionError("signal or noise region selects too few samples")
    var = float(np.var(filtered[noise], ddof=1))
    if var < 1e-300:
        raise DegenerateNoiseError("noise variance vanishes; SNR is undefined")
    snr = float(envelope[sig].max() ** 2 / var)
    return snr, 10 * math.log10(snr)


def fano_factor(counts) -> FanoEstimate:
    """Normalized variance var(n) / <n> with the unbiased (N - 1) variance."""
    x = np.asarray(counts, dtype=float)
    if x.size < 2:
        raise InvalidParameterError("need at least two samples")
    mean = x.mean()
    if not mean > 0:
        raise ZeroMeanError("count mean is zero; the Fano factor is undefined")
    return FanoEstimate(float(x.var(ddof=1) / mean), int(x.size))


def fano_factors(counts_2d) -> np.ndarray:
    """Row-wise Fano estimates for an array of shape (trials, N)."""
    x = np.asarray(counts_2d, dtype=float)
    mean = x.mean(axis=1)
    if np.any(mean <= 0):
        raise ZeroMeanError("a trial has zero mean")
    return x.var(axis=1, ddof=1) / mean


def process_scan(
    record: ScanRecord,
    spec: FilterSpec,
    threshold_fraction: float = 0.5,
    signal_region=None,
    noise_region=None,
    use_truth: bool = False,
) -> EnvelopeResult:
    """Filter, demodulate and analyse a scan; edge bins are trimmed from the result."""
    dz = record.config.bin_spacing
    x = record.truth * record.config.counting_time if use_truth else record.counts
    filtered = bandpass_filter(x, spec, dz)
    env = demodulate_envelope(filtered, spec, dz)
    keep = slice(spec.edge, len(env) - spec.edge)
    z = np.asarray(record.positions)[keep]
    env, filtered = env[keep], filtered[keep]
    snr = None
    if signal_region is not None and noise_region is not None:
        snr, _ = estimate_snr(filtered, env, z, signal_region, noise_region)
    return EnvelopeResult(
        z=z,
        envelope=env,
        peaks=find_peaks(env, z, threshold_fraction),
        snr_estimate=snr,
        filtered=filtered,
    )
