"""Axial point-spread functions and resolution measurement.

The interferometric point-spread function is the Fourier transform of the
system spectrum evaluated at delay tau = 2 z / c, z being the
reference-mirror displacement. Internally we keep the complex coherence
function referred to the spectral centroid (the "baseband" coherence), so
that asymmetric spectra keep their fringe chirp when scans are synthesized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, signal
from scipy.constants import c as SPEED_OF_LIGHT

from .errors import (
    AmbiguousPeakError,
    InvalidParameterError,
    NoPeakError,
    PsfRangeError,
    TruncatedEnvelopeError,
    UndersampledError,
)
from .spectra import (
    DetectorModel,
    FrequencyGrid,
    SpectralDensity,
    hz_to_nm,
    make_spdc_source,
    system_spectrum,
)

C_UM_PER_S = SPEED_OF_LIGHT * 1e6
MIN_Z_POINTS = 256


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Psf:
    """Peak-normalized axial point-spread function.

    ``z`` is the mirror displacement in um, ``envelope`` the magnitude of the
    coherence function and ``phase`` its argument relative to a carrier at
    ``center_wavelength`` (nm). ``fwhm`` (um) is measured on the envelope.
    """

    z: np.ndarray
    envelope: np.ndarray
    phase: np.ndarray
    fwhm: float
    center_wavelength: float

    @property
    def coherence_length(self) -> float:
        return self.fwhm

    @property
    def z_max(self) -> float:
        return float(min(-self.z[0], self.z[-1]))

    def coherence(self, dz) -> np.ndarray:
        """Complex baseband coherence at displacement(s) ``dz`` (um), linearly interpolated."""
        dz = np.asarray(dz, dtype=float)
        if dz.size and (dz.min() < self.z[0] or dz.max() > self.z[-1]):
            raise PsfRangeError(
                f"|dz| up to {np.abs(dz).max():.4g} um exceeds the tabulated "
                f"range [{self.z[0]:.4g}, {self.z[-1]:.4g}] um"
            )
        g = self.envelope * np.exp(1j * self.phase)
        return np.interp(dz, self.z, g.real) + 1j * np.interp(dz, self.z, g.imag)


def _canonical(values: np.ndarray) -> np.ndarray:
    # peak-normalize then round to single precision, making the transform
    # independent of any overall scale factor down to the last bit
    v = values / values.max()
    return v.astype(np.float32).astype(np.float64)


def baseband_coherence(spectrum: SpectralDensity, pad_factor: int = 4):
    """Dense complex coherence of ``spectrum`` from a zero-padded FFT.

    Returns ``(z_um, g, nu_c)``: ``g`` is normalized to 1 at z = 0 and
    referred to the spectral centroid ``nu_c`` (Hz). The pad length is the next power of two at or
    above ``pad_factor`` times the number of spectral samples.
    """
    grid = spectrum.grid
    s = _canonical(spectrum.values)
    n_pad = 1 << math.ceil(math.log2(pad_factor * grid.n_points))
    g = np.fft.ifft(s, n_pad) * n_pad
    g = np.fft.fftshift(g)
    m = np.arange(n_pad) - n_pad // 2
    tau = m / (n_pad * grid.dnu)
    nu_c = float(np.sum(grid.nu * s) / np.sum(s))
    g = g * np.exp(2j * np.pi * (grid.nu_min - nu_c) * tau)
    g = g / g[n_pad // 2].real
    z = tau * C_UM_PER_S / 2
    return z, g, nu_c


def point_spread(
    spectrum: SpectralDensity,
    z_range: float = 100.0,
    z_points: int = 8193,
) -> Psf:
    """Axial PSF of ``spectrum`` sampled on ``z_points`` uniform points in [-z_range, z_range] um."""
    if z_points < MIN_Z_POINTS:
        raise InvalidParameterError(f"z_points must be >= {MIN_Z_POINTS}")
    if z_range <= 0:
        raise InvalidParameterError("z_range must be > 0")
    z_dense, g_dense, nu_c = baseband_coherence(spectrum)
    lam0_um = SPEED_OF_LIGHT / nu_c * 1e6
    dz = 2 * z_range / (z_points - 1)
    if dz >= lam0_um / 8:
        raise UndersampledError(
            f"z spacing {dz:.4g} um is not finer than lambda0/8 = {lam0_um / 8:.4g} um"
        )
    z_alias = C_UM_PER_S / (4 * spectrum.grid.dnu)
    if z_range > z_alias:
        raise UndersampledError(
            f"z_range {z_range:g} um exceeds the alias-free range {z_alias:.4g} um "
            "of the frequency grid"
        )
    z = np.linspace(-z_range, z_range, z_points)
    g = np.interp(z, z_dense, g_dense.real) + 1j * np.interp(z, z_dense, g_dense.imag)
    env = np.abs(g)
    peak = env.max()
    fwhm = measure_fwhm(np.abs(g_dense), z_dense)
    return Psf(
        z=_frozen(z),
        envelope=_frozen(env / peak),
        phase=_frozen(np.angle(g)),
        fwhm=fwhm,
        center_wavelength=float(hz_to_nm(nu_c)),
    )


def measure_fwhm(envelope, z) -> float:
    """Full width at half maximum of the dominant peak.

    Half-maximum crossings nearest the global peak are located by linear
    interpolation between the bracketing samples; a sample sitting exactly
    at half maximum is used as is.
    """
    y = np.asarray(envelope, dtype=float)
    z = np.asarray(z, dtype=float)
    if y.shape != z.shape or y.size < 3:
        raise NoPeakError("need matching envelope and z arrays with >= 3 samples")
    if not np.all(np.isfinite(y)):
        raise NoPeakError("envelope contains non-finite values")
    i_pk = int(np.argmax(y))
    peak = y[i_pk]
    if not peak > 0:
        raise NoPeakError("envelope has no positive peak")
    half = 0.5 * peak

    below = np.flatnonzero(y[:i_pk] <= half)
    above = np.flatnonzero(y[i_pk + 1:] <= half)
    if below.size == 0 or above.size == 0:
        raise AmbiguousPeakError("half-maximum crossing not bracketed on both sides of the peak")
    i_l = below[-1]
    i_r = i_pk + 1 + above[0]

    def crossing(i_out, i_in):
        if y[i_out] == half:
            return z[i_out]
        return z[i_out] + (half - y[i_out]) / (y[i_in] - y[i_out]) * (z[i_in] - z[i_out])

    return float(abs(crossing(i_r, i_r - 1) - crossing(i_l, i_l + 1)))


def gaussian_fwhm_closed_form(center_wavelength: float, fwhm_wavelength: float) -> float:
    """Envelope FWHM (um of mirror travel) for a Gaussian source: (2 ln2 / pi) lambda0**2 / dlambda."""
    return 2 * math.log(2) / math.pi * (center_wavelength * 1e-3) ** 2 / (fwhm_wavelength * 1e-3)


def spectrum_from_interferogram(
    data,
    bin_spacing: float | None = None,
    center_wavelength: float | None = None,
    band: tuple[float, float] = (150e12, 1000e12),
    edge_fraction: float = 0.25,
    use_truth: bool = False,
) -> SpectralDensity:
    """Recover the system spectrum from an interferogram.

    ``data`` is a ScanRecord (counts, or the noiseless truth when
    ``use_truth``) or a uniformly sampled sequence with ``bin_spacing`` in um.
    The magnitude of the Fourier transform of the mean-subtracted sequence
    is mapped from spatial frequency k (cycles/um) to optical frequency
    nu = c k / 2 and returned on the bins falling inside ``band`` (Hz).
    """
    if hasattr(data, "counts"):
        cfg = data.config
        bin_spacing = cfg.bin_spacing
        center_wavelength = center_wavelength or cfg.center_wavelength
        if use_truth:
            if data.truth is None:
                raise InvalidParameterError("record carries no truth sequence")
            x = np.asarray(data.truth, dtype=float)
        else:
            x = np.asarray(data.counts, dtype=float)
    else:
        if bin_spacing is None:
            raise InvalidParameterError("bin_spacing is required for raw sequences")
        x = np.asarray(data, dtype=float)
    if x.size < 16:
        raise InvalidParameterError("interferogram too short")
    x = x - x.mean()

    k_nyq = 1 / (2 * bin_spacing)
    if center_wavelength is not None and bin_spacing >= center_wavelength * 1e-3 / 4:
        raise UndersampledError(
            f"bin spacing {bin_spacing:g} um violates the carrier Nyquist limit "
            f"lambda0/4 = {center_wavelength * 1e-3 / 4:g} um"
        )

    env = np.abs(signal.hilbert(x))
    n_edge = max(1, x.size // 20)
    edge_level = max(env[:n_edge].mean(), env[-n_edge:].mean())
    if env.max() > 0 and edge_level > edge_fraction * env.max():
        raise TruncatedEnvelopeError(
            "interferogram does not decay at the scan edges; the coherence "
            "envelope appears truncated"
        )

    n_fft = 1 << math.ceil(math.log2(x.size))
    spec = np.abs(np.fft.rfft(x, n_fft))
    k = np.fft.rfftfreq(n_fft, d=bin_spacing)
    if center_wavelength is None:
        k_peak = k[np.argmax(spec)]
        if k_peak > 0.95 * k_nyq:
            raise UndersampledError("spectral peak sits at the Nyquist limit")
    nu = k * C_UM_PER_S / 2
    lo, hi = band
    sel = np.flatnonzero((nu >= lo) & (nu <= hi) & (k > 0))
    if sel.size < 16:
        raise InvalidParameterError("fewer than 16 spectral bins fall inside the band")
    grid = FrequencyGrid(float(nu[sel[0]]), float(nu[sel[-1]]), int(sel.size))
    return SpectralDensity(grid, spec[sel], label="recovered from interferogram")


def calibrate_spdc_bandwidth(
    target_fwhm: float,
    detector: DetectorModel,
    grid: FrequencyGrid | None = None,
    pump_wavelength: float = 532.0,
    shape: str = "gaussian",
    bracket: tuple[float, float] = (2e12, 60e12),
    max_clipped_mass: float = 1e-6,
    xtol: float = 1e6,
) -> float:
    """Bandwidth parameter (Hz) for which the SPDC x detector PSF has FWHM ``target_fwhm`` um.

    Root-finds on the PSF width, which shrinks monotonically as the source
    broadens over the bracket.
    """
    grid = grid or detector.grid

    def residual(bw):
        src = make_spdc_source(pump_wavelength, bw, shape, grid, max_clipped_mass)
        sys = system_spectrum(src, detector)
        return point_spread(sys, z_range=10.0, z_points=MIN_Z_POINTS + 1).fwhm - target_fwhm

    lo, hi = bracket
    return float(optimize.brentq(residual, lo, hi, xtol=xtol))
