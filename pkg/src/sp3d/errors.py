"""Exception hierarchy shared across the pipeline."""


class Sp3dError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(Sp3dError):
    """A configuration value is outside its declared range."""


class DataError(Sp3dError):
    """Scene data on disk is missing or malformed."""


class ProviderError(Sp3dError):
    """A mask provider cannot serve the requested frame."""


# scene-io
class MalformedPly(DataError):
    pass


class NonFiniteCoordinate(DataError):
    pass


class EmptyCloud(DataError):
    pass


class MissingPose(DataError):
    pass


class MissingDepth(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class BadTransform(DataError):
    pass


class IoError(DataError):
    pass


# projection
class IndexOutOfRange(Sp3dError):
    pass


# prompt proposal
class CountOutOfRange(ConfigError):
    pass


class BadRatio(ConfigError):
    pass


# mask provider
class ProviderUnavailable(ProviderError):
    pass


class RleOverrun(DataError):
    pass


# selection
class SelectionNotSubset(Sp3dError):
    pass


# segmentation
class AllUnlabeled(Sp3dError):
    pass


# synthetic
class DegeneratePrimitive(ConfigError):
    pass
