"""Exception hierarchy shared across the package."""


class DinetError(Exception):
    """Base class for all package errors."""


class ValidationError(DinetError, ValueError):
    """A probability object, symbol vector or argument violates its contract."""


class ConfigError(DinetError, ValueError):
    """An experiment configuration or topology request is invalid."""


class SchemaMismatchError(DinetError, ValueError):
    """A dataset does not match the schema a model or operation expects."""


class DatasetFormatError(DinetError, ValueError):
    """A CSV/ARFF file could not be parsed; message carries line/column."""


class ModelFormatError(DinetError, ValueError):
    """A model file is corrupt or fails its integrity checksum."""


class ModelVersionError(ModelFormatError):
    """A model file was written by an unsupported format version."""
