"""Exception types raised across the package."""


class DlmacError(Exception):
    """Base class; `kind` is the machine-readable tag printed by the CLI."""

    kind = "error"


class TraceFormatError(DlmacError):
    kind = "trace-format"

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InsufficientDataError(DlmacError):
    kind = "insufficient-data"


class EmptyOutputError(DlmacError):
    kind = "empty-output"


class DimensionError(DlmacError):
    kind = "dimension"


class DegenerateDataError(DlmacError):
    kind = "degenerate-data"


class DivergenceError(DlmacError):
    kind = "divergence"

    def __init__(self, epoch, message="non-finite loss"):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


class ChecksumError(DlmacError):
    kind = "checksum"


class SchemaError(DlmacError):
    kind = "schema"


class ConfigError(DlmacError):
    kind = "config"


class MissingArtifactError(DlmacError):
    kind = "missing-artifact"


class StaleNormalizationError(DlmacError):
    kind = "stale-normalization"


class OutputError(DlmacError):
    kind = "io"
