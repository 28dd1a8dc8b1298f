"""Exception hierarchy shared by every stage of the pipeline."""


class ShipBowError(Exception):
    """Base class for all errors raised by shipbow."""


# image I/O and geometry
class ImageNotFound(ShipBowError, FileNotFoundError):
    pass


class UnsupportedFormat(ShipBowError):
    pass


class CorruptImage(ShipBowError):
    pass


class ImageTooSmall(ShipBowError):
    pass


class CenterOutOfBounds(ShipBowError):
    pass


class PointOutOfBounds(ShipBowError):
    pass


# descriptors
class ModelFileMissing(ShipBowError, FileNotFoundError):
    pass


class ModelFormatInvalid(ShipBowError):
    pass


class DimensionMismatch(ShipBowError, ValueError):
    pass


class PatchTooSmall(ShipBowError):
    pass


class InferenceFailure(ShipBowError):
    pass


# codebook / classifier
class TooFewDescriptors(ShipBowError):
    pass


class EmptyDescriptorSet(ShipBowError):
    pass


class SingleClassInput(ShipBowError):
    pass


# pipeline
class ZeroKeypoints(ShipBowError):
    """Keypoint detection returned nothing for an image."""


class EmptySplit(ShipBowError):
    pass


class EmptyGrid(ShipBowError):
    pass


class EmptyClass(ShipBowError):
    pass


class NoClasses(ShipBowError):
    pass


class BundleFormatError(ShipBowError):
    pass


class ConfigError(ShipBowError, ValueError):
    pass
