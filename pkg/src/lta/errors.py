"""Exception types shared across the package.

Each exception carries a short machine-parseable ``code`` that the CLI prints
as ``CODE: message`` before exiting nonzero.
"""

from __future__ import annotations


class LtaError(Exception):
    code = "E_INTERNAL"


class DimensionError(LtaError):
    """Tensor/operand shapes are incompatible."""

    code = "E_DIM"


class ConfigurationError(LtaError):
    """Invalid option value, missing checkpoint, or malformed run config."""

    code = "E_CONFIG"


class UsageError(LtaError):
    """API called outside its contract (non-scalar backward, empty set, ...)."""

    code = "E_USAGE"


class FormatError(LtaError):
    """Malformed on-disk artifact (checkpoint, PPM, raw image)."""

    code = "E_FORMAT"


class TrainingError(LtaError):
    """Training diverged or failed to meet its contract."""

    code = "E_TRAIN"


class NumericsError(LtaError):
    """NaN/Inf encountered where finite values are required."""

    code = "E_NUMERIC"


class MissingArtifactError(LtaError):
    """A pipeline stage needs outputs of an earlier stage."""

    code = "E_MISSING_ARTIFACT"
