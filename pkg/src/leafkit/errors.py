"""Exception hierarchy.

Every error raised by leafkit derives from :class:`LeafkitError`.  The
``category`` attribute drives the CLI exit code and the HTTP status of the
service layer: ``"validation"`` means the caller handed us something
malformed (exit 1 / HTTP 400), ``"runtime"`` means the computation itself
failed (exit 2 / HTTP 500).
"""


class LeafkitError(Exception):
    category = "runtime"


class ConfigError(LeafkitError):
    """Bad experiment configuration (unknown key, unparsable value)."""

    category = "validation"


class SpecError(LeafkitError):
    """Invalid task/scene/filterbank specification."""

    category = "validation"


class DomainError(LeafkitError):
    """Argument outside the mathematical domain of an operation."""

    category = "validation"


class ParamError(LeafkitError):
    """Infeasible filter parameters (e.g. non-positive Gaussian width)."""

    category = "validation"


class FormatError(LeafkitError):
    """Malformed file header or structure."""

    category = "validation"


class UnsupportedError(LeafkitError):
    """Well-formed but unsupported encoding."""

    category = "validation"


class DegenerateSignalError(LeafkitError):
    """Signal carries no usable content (all zero, empty mask, ...)."""


class InputTooShortError(LeafkitError):
    """Clip shorter than the convolution kernel."""


class NumericsError(LeafkitError):
    """Non-finite value encountered; carries the offending stage."""

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage


class SupportError(LeafkitError):
    """KL divergence undefined: A(x) > 0 where B(x) = 0."""


class SnapshotError(LeafkitError):
    """Snapshot sequence unusable (missing or inconsistent)."""


class UndefinedMetricError(LeafkitError):
    """Metric undefined for this label set (e.g. AUC with one class)."""
