"""Exception hierarchy shared by every module."""


class LocalSegError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(LocalSegError, ValueError):
    pass


class EmptyMask(LocalSegError, ValueError):
    """A support mask has no foreground, so its right inverse does not exist."""


class EmptyList(LocalSegError, ValueError):
    pass


class InvalidArgument(LocalSegError, ValueError):
    pass


class InvalidConfig(InvalidArgument):
    pass


class InvalidSplit(InvalidArgument):
    pass


class InsufficientImages(LocalSegError):
    pass


class ClassLeakage(LocalSegError):
    """Evaluation classes overlap the classes used for training."""


class IoError(LocalSegError, OSError):
    pass


class FormatError(LocalSegError, ValueError):
    pass


class NonBinaryMask(FormatError):
    pass
