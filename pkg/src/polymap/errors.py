"""Exception types raised across the package."""


class PolymapError(Exception):
    """Base class for all package errors."""


class RejectedInputError(PolymapError, ValueError):
    """An argument violates an operation's precondition."""


class UndefinedLossError(RejectedInputError):
    """A loss or metric has no valid pixels to average over."""


class BehindCameraError(RejectedInputError):
    pass


class NoDataError(RejectedInputError):
    pass


class NotFoundError(PolymapError, KeyError):
    pass


class DegenerateRegionError(PolymapError):
    """A contour collapses to fewer than three distinct points."""


class DegenerateGeometryError(PolymapError):
    pass


class FormatError(PolymapError, ValueError):
    """A file does not match the expected on-disk layout."""
