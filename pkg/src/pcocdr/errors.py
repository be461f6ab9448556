"""Exception hierarchy shared by all modules."""


class OcdrError(ValueError):
    """Base class for every error raised by this package."""


class GridError(OcdrError):
    """A spectrum does not fit on (or is not resolved by) its frequency grid."""


class GridMismatchError(OcdrError):
    pass


class ZeroOverlapError(OcdrError):
    """Source and detector spectra do not overlap."""


class InvalidParameterError(OcdrError):
    pass


class UndersampledError(OcdrError):
    """Sampling violates the Nyquist condition for the fringe carrier."""


class TruncatedEnvelopeError(OcdrError):
    pass


class PsfRangeError(OcdrError):
    """A requested delay lies outside the tabulated point-spread function."""


class NoPeakError(OcdrError):
    pass


class AmbiguousPeakError(OcdrError):
    pass


class FilterDesignError(OcdrError):
    pass


class InputTooShortError(OcdrError):
    pass


class RegionError(OcdrError):
    """SNR signal/noise regions overlap or select no samples."""


class DegenerateNoiseError(OcdrError):
    pass


class ZeroMeanError(OcdrError):
    pass


class FormatVersionError(OcdrError):
    pass


class CorruptRecordError(OcdrError):
    pass


class ConfigError(OcdrError):
    """Invalid experiment configuration.

    ``field`` names the offending key (``section.key``) when known and
    ``line`` carries the 1-based line number for syntax errors.
    """

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line
