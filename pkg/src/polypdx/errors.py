"""Exception types raised across the pipeline."""


class PolypDxError(Exception):
    """Base class for all errors raised by this package."""


class SlideTooSmall(PolypDxError, ValueError):
    """Slide is smaller than one patch window in at least one axis."""


class WindowOutOfBounds(PolypDxError, ValueError):
    """A patch window extends past the slide boundary."""


class BadPatchShape(PolypDxError, ValueError):
    """Patch pixels do not form a square RGB array of the expected side."""


class BackendFailure(PolypDxError, RuntimeError):
    """A classifier backend could not be loaded or produced invalid output."""


class EmptyEnsemble(PolypDxError, ValueError):
    """An ensemble was constructed with no member backends."""


class NoTissue(PolypDxError, ValueError):
    """A slide summary contains no tissue patches to diagnose."""


class EmptyDataset(PolypDxError, ValueError):
    """Calibration was requested on an empty dataset."""


class WrongPanelSize(PolypDxError, ValueError):
    """A rater panel does not contain exactly five diagnoses."""


class LengthMismatch(PolypDxError, ValueError):
    """Two label sequences that must align have different lengths."""


class WrongArity(PolypDxError, ValueError):
    """An aggregate was given the wrong number of per-class entries."""


class BadProportion(PolypDxError, ValueError):
    """A proportion lies outside [0, 1] or a sample size is not positive."""


class ManifestError(PolypDxError, ValueError):
    """A slide manifest or configuration file is malformed."""
