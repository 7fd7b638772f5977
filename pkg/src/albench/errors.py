"""Exception types shared across the package."""


class AlbenchError(Exception):
    """Base class for all package-specific errors."""


class EmptyClassError(AlbenchError):
    """A class required to have samples has none (or too few)."""


class InsufficientSamplesError(AlbenchError):
    """A pool request asks for more samples of a class than are available."""

    def __init__(self, class_name: str, requested: int, available: int):
        self.class_name = class_name
        self.requested = requested
        self.available = available
        super().__init__(
            f"class {class_name!r}: requested {requested}, only {available} available"
            f" (shortfall {requested - available})"
        )


class NotInUnlabeledError(AlbenchError):
    """An oracle query names a sample that is not in the unlabeled pool."""

    def __init__(self, sample_id: str):
        self.sample_id = sample_id
        super().__init__(f"sample {sample_id!r} is not in the unlabeled pool")


class PoolExhaustedError(AlbenchError):
    """The unlabeled pool is smaller than the requested query size."""


class MissingImageError(AlbenchError):
    """An annotation references an image that does not exist."""


class MalformedAnnotationError(AlbenchError):
    """An annotation record cannot be interpreted."""


class EmptyInputError(AlbenchError):
    """An operation received an empty input where samples are required."""


class BatchTooSmallError(AlbenchError):
    """Batch augmentation needs at least two samples."""


class MissingMinorityError(AlbenchError):
    """Discriminator training found no positive (minority) sample."""


class KTooLargeError(AlbenchError):
    """Top-K selection asked for more items than were scored."""


class LengthMismatchError(AlbenchError):
    """Two parallel sequences differ in length."""


class ShapeMismatchError(AlbenchError):
    """Aggregation inputs do not share the same cycle structure."""


class ConfigError(AlbenchError):
    """A configuration file or dict failed validation."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")
