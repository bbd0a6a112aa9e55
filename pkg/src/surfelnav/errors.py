"""Exception hierarchy shared by all surfelnav modules."""

from __future__ import annotations


class SurfelNavError(Exception):
    """Base class for every domain error raised by the library."""


# point-cloud I/O
class ParseError(SurfelNavError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedFormat(SurfelNavError):
    pass


class InvalidCloud(SurfelNavError, ValueError):
    """A PointCloud invariant does not hold (NaN coordinates, color length mismatch)."""


class CloudIOError(SurfelNavError, OSError):
    pass


class EmptyVolume(SurfelNavError):
    pass


# spatial index
class NonPositiveRadius(SurfelNavError, ValueError):
    pass


class NonPositiveVoxelSize(SurfelNavError, ValueError):
    pass


# surfel map
class InsufficientPoints(SurfelNavError):
    pass


class DegenerateGeometry(SurfelNavError):
    pass


class EmptyCloud(SurfelNavError):
    pass


class EmptyNeighborhood(SurfelNavError):
    pass


class AllZeroWeights(SurfelNavError, ValueError):
    pass


class NoTraversableSurfels(SurfelNavError):
    pass


class InvalidConfig(SurfelNavError, ValueError):
    pass


# state space
class OffSurface(SurfelNavError):
    pass


class NoValidSamples(SurfelNavError):
    pass


class InvalidPathState(SurfelNavError):
    pass


# planners / bench
class InvalidStartOrGoal(SurfelNavError):
    pass


class UnsatisfiableSpec(SurfelNavError):
    pass


class EmptyConfigList(SurfelNavError, ValueError):
    pass
