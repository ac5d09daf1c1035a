"""Exception types shared across the package.

Each error carries a short machine-readable ``code`` used by the CLI to
print ``ERR:<code>:`` diagnostics and choose an exit status.
"""


class MlvatError(Exception):
    """Base class for all package errors."""

    code = "internal"
    exit_status = 1


class ConfigError(MlvatError):
    code = "config"
    exit_status = 1


class DataError(MlvatError):
    code = "data"
    exit_status = 2


class ZeroNorm(MlvatError):
    """Vector norm below 1e-12 where a direction is required."""

    code = "zero-norm"


class LengthMismatch(MlvatError):
    code = "length-mismatch"


class ShapeMismatch(MlvatError):
    code = "shape-mismatch"


class EmptyBatch(MlvatError):
    code = "empty-batch"


class MalformedRow(DataError):
    code = "malformed-row"


class BadMagic(DataError):
    code = "bad-magic"


class VersionUnsupported(DataError):
    code = "version-unsupported"


class TruncatedFile(DataError):
    code = "truncated-file"


class DuplicateId(DataError):
    code = "duplicate-id"


class NotFound(DataError):
    code = "not-found"


class MissingEmbedding(DataError):
    code = "missing-embedding"


class InvalidSpec(ConfigError):
    code = "invalid-spec"


class LayerOutOfRange(ConfigError):
    code = "layer-out-of-range"


class ZeroDenominator(MlvatError):
    code = "zero-denominator"
