"""Exception types shared across the package."""


class NetsenseError(Exception):
    """Base class for all domain errors raised by netsense."""


class GeometryError(NetsenseError):
    """Degenerate geometry: collinear anchors, coincident circle centers, ..."""


class NoIntersectionError(GeometryError):
    """Bearing rays are parallel or antiparallel and never meet."""


class BehindRayError(GeometryError):
    """Bearing lines meet, but behind at least one ray origin."""


class SceneGenerationError(NetsenseError):
    """Random scene rejection sampling exceeded its attempt budget."""


class InvalidRootError(NetsenseError, ValueError):
    """Zadoff-Chu root is out of range or not coprime with the length."""


class InconsistentMeasurementError(NetsenseError):
    """Path-length bookkeeping produced a physically impossible value."""


class UnequalCardinalityError(NetsenseError, ValueError):
    """Distance profiles do not all report the same number of targets."""


class InfeasibleAssociationError(NetsenseError):
    """No data association hypothesis met the feasibility tolerance.

    Carries the smallest max-residual found so the caller can see how far
    the best candidate was from feasibility.
    """

    def __init__(self, message: str, best_residual_m: float):
        super().__init__(message)
        self.best_residual_m = best_residual_m
