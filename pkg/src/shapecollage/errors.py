"""Exception and warning types shared across the pipeline."""


class CollageError(Exception):
    """Base class for all pipeline errors."""


class InvalidShape(CollageError):
    """Shape input is unusable (self-intersecting ring, empty mask, ...)."""


class DegenerateGeometry(CollageError):
    """A geometric primitive collapsed below working tolerances."""


class InvalidSplit(CollageError):
    """Split point is not strictly interior to the polygon."""


class InvalidManifest(CollageError):
    """Image manifest is empty, unreadable, or has duplicate ids."""


class PreconditionViolated(CollageError):
    """A caller broke an operation's documented precondition."""


class SliceFailure(CollageError):
    """Recursive slicing failed at a tree node; message carries the node path."""


class ThinRegionWarning(UserWarning):
    """Shape is thinner than two raster cells somewhere."""


class NonConvexResidualWarning(UserWarning):
    """Greedy cut selection left a reflex corner; patch was force-split."""


class CornerUnresolvableWarning(UserWarning):
    """No valid cut could be generated for a concave corner."""
