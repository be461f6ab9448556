"""Source spectra and detector spectral responses on a shared frequency grid.

Everything is sampled uniformly in optical frequency so that the axial
point-spread function is a plain Fourier transform of the sampled
spectrum. Wavelength views are derived quantities.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping

import numpy as np
from scipy import special
from scipy.constants import c as SPEED_OF_LIGHT

from .errors import (
    GridError,
    GridMismatchError,
    InvalidParameterError,
    ZeroOverlapError,
)

MAX_CLIPPED_MASS = 1e-6
SINC2_HALF_MAX = 0.4429046114  # np.sinc(x)**2 == 0.5


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.flags.writeable = False
    return arr


def nm_to_hz(wavelength_nm):
    return SPEED_OF_LIGHT / (np.asarray(wavelength_nm, dtype=float) * 1e-9)


def hz_to_nm(nu_hz):
    return SPEED_OF_LIGHT / np.asarray(nu_hz, dtype=float) * 1e9


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform optical-frequency grid, ``n_points`` samples in [nu_min, nu_max] (Hz)."""

    nu_min: float = 150e12
    nu_max: float = 1000e12
    n_points: int = 2**14

    def __post_init__(self):
        if not self.nu_min > 0:
            raise InvalidParameterError("nu_min must be > 0")
        if not self.nu_max > self.nu_min:
            raise InvalidParameterError("nu_max must exceed nu_min")
        if int(self.n_points) != self.n_points or self.n_points < 16:
            raise InvalidParameterError("n_points must be an integer >= 16")

    @property
    def dnu(self) -> float:
        return (self.nu_max - self.nu_min) / (self.n_points - 1)

    @cached_property
    def nu(self) -> np.ndarray:
        return _frozen(np.linspace(self.nu_min, self.nu_max, self.n_points))

    @cached_property
    def wavelength_nm(self) -> np.ndarray:
        return _frozen(hz_to_nm(self.nu))


@dataclass(frozen=True, eq=False)
class SpectralDensity:
    """Unit-area power spectral density sampled on ``grid``.

    ``values`` are renormalized on construction so the trapezoidal
    integral over frequency is 1. ``eta_effective`` is set by
    :func:`system_spectrum` and holds the band-averaged quantum efficiency.
    """

    grid: FrequencyGrid
    values: np.ndarray
    label: str = ""
    eta_effective: float | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_points,):
            raise GridMismatchError(
                f"expected {self.grid.n_points} values, got shape {v.shape}"
            )
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise InvalidParameterError("spectral density must be finite and >= 0")
        area = np.trapezoid(v, dx=self.grid.dnu)
        if not area > 0:
            raise GridError("spectral density has zero integral on its grid")
        object.__setattr__(self, "values", _frozen(v / area))

    @property
    def nu(self) -> np.ndarray:
        return self.grid.nu

    @cached_property
    def centroid_frequency(self) -> float:
        return float(np.trapezoid(self.nu * self.values, dx=self.grid.dnu))

    @property
    def center_wavelength(self) -> float:
        """Centroid of the spectrum expressed as a wavelength (nm)."""
        return float(hz_to_nm(self.centroid_frequency))

    def integral(self) -> float:
        return float(np.trapezoid(self.values, dx=self.grid.dnu))

    def wavelength_view(self):
        """Return ``(wavelength_nm, density_per_nm)`` in ascending wavelength.

        Uses the Jacobian |dnu/dlambda| = c / lambda**2.
        """
        lam = self.grid.wavelength_nm[::-1]
        dens = self.values[::-1] * SPEED_OF_LIGHT / (lam * 1e-9) ** 2 * 1e-9
        return lam, dens

    def mass_beyond(self, wavelength_nm: float) -> float:
        """Fraction of the spectral mass at wavelengths longer than ``wavelength_nm``."""
        nu_cut = float(nm_to_hz(wavelength_nm))
        v = np.where(self.nu < nu_cut, self.values, 0.0)
        return float(np.trapezoid(v, dx=self.grid.dnu))

    def fwhm_frequency(self) -> float:
        """Full width at half maximum in Hz (outermost half-max crossings)."""
        v = self.values / self.values.max()
        above = np.flatnonzero(v >= 0.5)
        lo, hi = above[0], above[-1]
        nu = self.nu

        def cross(i_in, i_out):
            if i_out < 0 or i_out >= len(v):
                return nu[i_in]
            a, b = v[i_in], v[i_out]
            return nu[i_in] + (a - 0.5) / (a - b) * (nu[i_out] - nu[i_in])

        return float(cross(hi, hi + 1) - cross(lo, lo - 1))


@dataclass(frozen=True, eq=False)
class ResponseCurve:
    """Per-photon detection probability on a frequency grid."""

    grid: FrequencyGrid
    qe: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.qe, dtype=float)
        if q.shape != (self.grid.n_points,):
            raise GridMismatchError(
                f"expected {self.grid.n_points} qe values, got shape {q.shape}"
            )
        if not np.all(np.isfinite(q)) or q.min() < 0 or q.max() > 1:
            raise InvalidParameterError("qe must lie in [0, 1]")
        object.__setattr__(self, "qe", _frozen(q))

    def at_wavelength(self, wavelength_nm):
        """Linear interpolation of qe at the given wavelength(s)."""
        return np.interp(nm_to_hz(wavelength_nm), self.grid.nu, self.qe)


class DetectorKind(str, enum.Enum):
    SSPD = "SSPD"
    SPAD = "SPAD"
    INGAAS = "InGaAs"
    IDEAL_FLAT = "IdealFlat"
    CUSTOM = "Custom"


@dataclass(frozen=True, eq=False)
class DetectorModel:
    response: ResponseCurve
    dark_rate: float = 0.0
    dead_time: float = 0.0
    kind: DetectorKind = DetectorKind.CUSTOM

    def __post_init__(self):
        if self.dark_rate < 0:
            raise InvalidParameterError("dark_rate must be >= 0")
        if self.dead_time < 0:
            raise InvalidParameterError("dead_time must be >= 0")

    @property
    def grid(self) -> FrequencyGrid:
        return self.response.grid


@dataclass(frozen=True)
class SspdBiasLaw:
    """Phenomenological SSPD efficiency and dark-count law versus bias.

    eta(b)  = eta_saturation[T] / (1 + exp(-(b - bias_half[T]) / bias_width))
    dark(b) = dark_at_critical[T] * exp((b - 1) / dark_slope)

    with b = I_b / I_c. The per-temperature tables are keyed by the
    temperatures (K) the law supports; the device must sit well below its
    critical temperature T_c for these to mean anything. Constants are
    representative values chosen to reproduce the measured trends, and the
    default operating point (2.0 K, b = 0.9) gives eta = 0.05.
    """

    bias_ratio: float = 0.9
    temperature: float = 2.0
    eta_saturation: Mapping[float, float] = field(
        default_factory=lambda: {2.0: 0.10, 4.2: 0.08}
    )
    bias_half: Mapping[float, float] = field(
        default_factory=lambda: {2.0: 0.90, 4.2: 0.93}
    )
    bias_width: float = 0.05
    dark_at_critical: Mapping[float, float] = field(
        default_factory=lambda: {2.0: 1.0e3, 4.2: 3.0e4}
    )
    dark_slope: float = 0.04

    @property
    def supported_temperatures(self) -> tuple[float, ...]:
        return tuple(sorted(self.eta_saturation))


def sspd_bias_point(law: SspdBiasLaw) -> tuple[float, float]:
    """Return ``(eta, dark_rate)`` for the law's bias ratio and temperature."""
    b = law.bias_ratio
    if not 0 < b < 1:
        raise InvalidParameterError(f"bias_ratio must be in (0, 1), got {b}")
    t = law.temperature
    tables = (law.eta_saturation, law.bias_half, law.dark_at_critical)
    if any(t not in tab for tab in tables):
        raise InvalidParameterError(
            f"temperature {t} K not in supported set {law.supported_temperatures}"
        )
    if law.bias_width <= 0 or law.dark_slope <= 0:
        raise InvalidParameterError("bias_width and dark_slope must be > 0")
    eta = law.eta_saturation[t] / (1.0 + math.exp(-(b - law.bias_half[t]) / law.bias_width))
    dark = law.dark_at_critical[t] * math.exp((b - 1.0) / law.dark_slope)
    if not 0 < eta <= 1:
        raise InvalidParameterError(f"bias law yields eta={eta} outside (0, 1]")
    return eta, dark


def _clip_check(clipped: float, max_clipped: float):
    if clipped > max_clipped:
        raise GridError(
            f"grid too narrow: {clipped:.3g} of the spectral mass lies outside it "
            f"(limit {max_clipped:.1g})"
        )


def _gaussian_clipped_mass(grid: FrequencyGrid, nu0: float, sigma: float) -> float:
    lo = special.ndtr((grid.nu_min - nu0) / sigma)
    hi = special.ndtr(-(grid.nu_max - nu0) / sigma)
    return float(lo + hi)


def _sinc2_cumulative(x):
    # integral of np.sinc(t)**2 from 0 to x, odd in x
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    si, _ = special.sici(2 * np.pi * ax)
    with np.errstate(invalid="ignore", divide="ignore"):
        tail = np.where(ax > 0, np.sin(np.pi * ax) ** 2 / (np.pi * ax), 0.0)
    return np.sign(x) * (si - tail) / np.pi


def make_gaussian_source(
    center_wavelength: float,
    fwhm_wavelength: float,
    grid: FrequencyGrid | None = None,
    max_clipped_mass: float = MAX_CLIPPED_MASS,
) -> SpectralDensity:
    """Gaussian (in frequency) source such as a superluminescent diode.

    The wavelength FWHM is converted with dnu = c * dlambda / lambda0**2.
    """
    grid = grid or FrequencyGrid()
    if center_wavelength <= 0 or fwhm_wavelength <= 0:
        raise InvalidParameterError("wavelengths must be > 0")
    nu0 = float(nm_to_hz(center_wavelength))
    dnu_fwhm = SPEED_OF_LIGHT * fwhm_wavelength * 1e-9 / (center_wavelength * 1e-9) ** 2
    sigma = dnu_fwhm / (2 * math.sqrt(2 * math.log(2)))
    _clip_check(_gaussian_clipped_mass(grid, nu0, sigma), max_clipped_mass)
    values = np.exp(-0.5 * ((grid.nu - nu0) / sigma) ** 2)
    return SpectralDensity(
        grid, values, label=f"gaussian {center_wavelength:g}/{fwhm_wavelength:g} nm"
    )


def make_spdc_source(
    pump_wavelength: float = 532.0,
    bandwidth_parameter: float = 40e12,
    shape: str = "gaussian",
    grid: FrequencyGrid | None = None,
    max_clipped_mass: float = MAX_CLIPPED_MASS,
) -> SpectralDensity:
    """Degenerate collinear downconversion spectrum centred on half the pump frequency.

    ``bandwidth_parameter`` is the FWHM in Hz for either line shape.
    The sinc2 shape has slowly decaying tails and usually needs a wide
    grid or a relaxed ``max_clipped_mass``.
    """
    grid = grid or FrequencyGrid()
    if pump_wavelength <= 0 or bandwidth_parameter <= 0:
        raise InvalidParameterError("pump wavelength and bandwidth must be > 0")
    nu_c = float(nm_to_hz(pump_wavelength)) / 2
    if not grid.nu_min < nu_c < grid.nu_max:
        raise GridError("degenerate SPDC centre lies outside the grid")
    delta = np.abs(grid.nu - nu_c)
    if shape == "gaussian":
        sigma = bandwidth_parameter / (2 * math.sqrt(2 * math.log(2)))
        clipped = _gaussian_clipped_mass(grid, nu_c, sigma)
        values = np.exp(-0.5 * (delta / sigma) ** 2)
    elif shape == "sinc2":
        scale = 2 * SINC2_HALF_MAX / bandwidth_parameter
        x_lo = (grid.nu_min - nu_c) * scale
        x_hi = (grid.nu_max - nu_c) * scale
        inside = float(_sinc2_cumulative(x_hi) - _sinc2_cumulative(x_lo))
        clipped = max(0.0, 1.0 - inside)
        values = np.sinc(delta * scale) ** 2
    else:
        raise InvalidParameterError(f"unknown SPDC shape {shape!r}")
    _clip_check(clipped, max_clipped_mass)
    return SpectralDensity(grid, values, label=f"spdc {shape} {bandwidth_parameter:.4g} Hz")


def _raised_cosine_edge(lam, start, stop):
    """1 at lam <= start, 0 at lam >= stop, raised-cosine in between."""
    t = np.clip((lam - start) / (stop - start), 0.0, 1.0)
    return 0.5 * (1 + np.cos(np.pi * t))


def _spad_qe(lam, qe_max, cutoff_nm, transition_nm):
    qe = qe_max * _raised_cosine_edge(lam, cutoff_nm - transition_nm, cutoff_nm)
    qe[lam >= cutoff_nm] = 0.0
    return qe


DETECTOR_DEFAULTS = {
    DetectorKind.SSPD: dict(
        qe_ref=None, lambda_ref_nm=930.0, lambda_decay_nm=1000.0,
        bias_law=None, dark_rate=None, dead_time=10e-9,
    ),
    DetectorKind.SPAD: dict(
        qe_max=0.5, cutoff_nm=1100.0, transition_nm=60.0,
        dark_rate=100.0, dead_time=50e-9,
    ),
    DetectorKind.INGAAS: dict(
        qe_max=0.2, cut_on_nm=900.0, cutoff_nm=1700.0, transition_nm=60.0,
        dark_rate=1.0e4, dead_time=10e-6,
    ),
    DetectorKind.IDEAL_FLAT: dict(dark_rate=0.0, dead_time=0.0),
    DetectorKind.CUSTOM: dict(qe=None, dark_rate=0.0, dead_time=0.0),
}


def make_detector(
    kind: DetectorKind | str,
    grid: FrequencyGrid | None = None,
    params: Mapping | None = None,
) -> DetectorModel:
    """Build a detector model of the given kind.

    Parameters per kind (defaults in ``DETECTOR_DEFAULTS``):

    SSPD
        ``qe_ref`` at ``lambda_ref_nm``, decaying as
        exp(-(lambda - lambda_ref) / lambda_decay). When ``qe_ref`` is None it
        comes from ``bias_law`` (a :class:`SspdBiasLaw`, default operating
        point), which also supplies the dark rate unless given.
    SPAD
        flat ``qe_max`` with a raised-cosine roll-off over ``transition_nm``
        that reaches exactly zero at ``cutoff_nm``.
    InGaAs
        flat ``qe_max`` between raised-cosine edges rising from ``cut_on_nm``
        and falling to zero at ``cutoff_nm``.
    IdealFlat
        qe = 1 everywhere.
    Custom
        ``qe``: array on the grid or callable of wavelength (nm).
    """
    grid = grid or FrequencyGrid()
    kind = DetectorKind(kind)
    p = dict(DETECTOR_DEFAULTS[kind])
    params = dict(params or {})
    unknown = set(params) - set(p)
    if unknown:
        raise InvalidParameterError(f"unknown {kind.value} parameters: {sorted(unknown)}")
    p.update(params)
    lam = grid.wavelength_nm

    if kind is DetectorKind.SSPD:
        dark = p["dark_rate"]
        qe_ref = p["qe_ref"]
        if qe_ref is None or dark is None:
            eta, law_dark = sspd_bias_point(p["bias_law"] or SspdBiasLaw())
            qe_ref = eta if qe_ref is None else qe_ref
            dark = law_dark if dark is None else dark
        if p["lambda_decay_nm"] <= 0:
            raise InvalidParameterError("lambda_decay_nm must be > 0")
        if not 0 < qe_ref <= 1:
            raise InvalidParameterError("qe_ref must be in (0, 1]")
        qe = qe_ref * np.exp(-(lam - p["lambda_ref_nm"]) / p["lambda_decay_nm"])
        if qe.max() > 1:
            raise InvalidParameterError(
                "SSPD qe exceeds 1 at the short-wavelength end of the grid"
            )
    elif kind is DetectorKind.SPAD:
        _check_qe_max(p["qe_max"])
        if not 0 < p["transition_nm"] < p["cutoff_nm"]:
            raise InvalidParameterError("need 0 < transition_nm < cutoff_nm")
        qe = _spad_qe(lam, p["qe_max"], p["cutoff_nm"], p["transition_nm"])
        dark = p["dark_rate"]
    elif kind is DetectorKind.INGAAS:
        _check_qe_max(p["qe_max"])
        if not p["cut_on_nm"] + 2 * p["transition_nm"] < p["cutoff_nm"]:
            raise InvalidParameterError("InGaAs band edges overlap")
        rise = 1 - _raised_cosine_edge(lam, p["cut_on_nm"], p["cut_on_nm"] + p["transition_nm"])
        fall = _raised_cosine_edge(lam, p["cutoff_nm"] - p["transition_nm"], p["cutoff_nm"])
        qe = p["qe_max"] * rise * fall
        dark = p["dark_rate"]
    elif kind is DetectorKind.IDEAL_FLAT:
        qe = np.ones(grid.n_points)
        dark = p["dark_rate"]
    else:
        src = p["qe"]
        if src is None:
            raise InvalidParameterError("Custom detector needs a 'qe' array or callable")
        qe = np.asarray(src(lam) if callable(src) else src, dtype=float)
        dark = p["dark_rate"]

    return DetectorModel(
        ResponseCurve(grid, qe), dark_rate=float(dark), dead_time=float(p["dead_time"]), kind=kind
    )


def _check_qe_max(qe_max):
    if not 0 < qe_max <= 1:
        raise InvalidParameterError(f"qe_max must be in (0, 1], got {qe_max}")


def system_spectrum(source: SpectralDensity, detector: DetectorModel) -> SpectralDensity:
    """Overall spectral response: source spectrum times detector response."""
    if source.grid != detector.grid:
        raise GridMismatchError("source and detector are sampled on different grids")
    product = source.values * detector.response.qe
    retained = float(np.trapezoid(product, dx=source.grid.dnu))
    if retained < 1e-12:
        raise ZeroOverlapError("source and detector responses do not overlap")
    # source is unit-area, so the retained mass is the band-averaged qe
    return SpectralDensity(
        source.grid,
        product,
        label=f"{source.label} x {detector.kind.value}",
        eta_effective=retained,
    )


def custom_response(grid: FrequencyGrid, qe_of_wavelength: Callable) -> ResponseCurve:
    return ResponseCurve(grid, np.asarray(qe_of_wavelength(grid.wavelength_nm), dtype=float))
