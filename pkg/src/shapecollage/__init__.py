"""Saliency-aware image collages on arbitrary planar shapes.

Pipeline: shape ingestion -> medial axes -> convex decomposition -> slicing
trees -> image assignment + configuration search -> cell filling -> metrics.
"""

__version__ = "0.1.0"

from .errors import (
    CollageError,
    DegenerateGeometry,
    InvalidManifest,
    InvalidShape,
    InvalidSplit,
    PreconditionViolated,
    SliceFailure,
)

__all__ = [
    "CollageError",
    "DegenerateGeometry",
    "InvalidManifest",
    "InvalidShape",
    "InvalidSplit",
    "PreconditionViolated",
    "SliceFailure",
    "__version__",
]
