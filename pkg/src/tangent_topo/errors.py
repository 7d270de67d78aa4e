"""Exception types shared across the library."""


class TangentTopoError(Exception):
    """Base class for all errors raised by this package."""


# --- geometry ---------------------------------------------------------------

class GeometryError(TangentTopoError):
    """Invalid polyhedron data or a failed geometric invariant."""


class SeparationViolation(GeometryError):
    """A cut plane does not isolate its vertex from the others."""


class DegenerateCut(GeometryError):
    """A cut plane grazes a vertex or cuts interact with each other."""


class BasePointOutside(GeometryError):
    """Requested chart base point is not strictly inside the face."""


# --- sphere -----------------------------------------------------------------

class SphereError(TangentTopoError):
    """Degenerate input to a spherical primitive."""


class AntipodalEndpoints(SphereError):
    """Geodesic endpoints are antipodal; the arc is not unique."""


class AntipodalPair(SphereError):
    """Two triangle vertices are antipodal; the area is ill-defined."""


class OnBoundary(SphereError):
    """Reference direction lies on a triangle boundary within tolerance."""


class NotInPlane(SphereError):
    """Path samples are not orthogonal to the rotation axis."""


class MaxRefinement(SphereError):
    """Adaptive refinement budget exhausted."""


class NotClosed(SphereError):
    """Triangulation is not a closed oriented surface."""


class ResolutionTooCoarse(SphereError):
    """Discretization too coarse to trust an integer invariant."""


# --- fields -----------------------------------------------------------------

class FieldError(TangentTopoError):
    """Invalid tangent-field data."""


class CoarseSampling(FieldError):
    """Sampled data violates the step bound and cannot be refined."""


class TangencyViolation(FieldError):
    """Field is not tangent where tangency is required."""


# --- invariants -------------------------------------------------------------

class InvariantError(TangentTopoError):
    """Failure while extracting or combining invariants."""


class NonConstantEdge(InvariantError):
    """Field is not constant along a truncated edge."""


class ParallelEndpoints(InvariantError):
    """Endpoint values on a cleaved edge are parallel; corrupt input."""


class ResidualTooLarge(InvariantError):
    """Winding residual too far from an integer to snap safely."""


class NotRegularValue(InvariantError):
    """Reference direction is not a regular value of the face map."""


class SOnBoundaryImage(InvariantError):
    """Reference direction lies on the image of a face boundary."""


class NoAdmissibleS(InvariantError):
    """No reference direction clears the face-normal margin."""


class DualRouteMismatch(InvariantError):
    """Integral and preimage wrapping routes disagree."""


class AntipodalFanPair(InvariantError):
    """Fan triangulation hit an antipodal or coincident vertex pair."""


class SOnTriangleBoundary(InvariantError):
    """Reference direction sits on a fan-triangle boundary."""


# --- synthesis --------------------------------------------------------------

class SynthesisError(TangentTopoError):
    """Representative construction failed."""


class SumRuleViolation(SynthesisError):
    """Requested invariants violate a sum rule."""


class GeodesicAntipodal(SynthesisError):
    """A boundary value coincides with the reference direction."""


class NonzeroWinding(SynthesisError):
    """Face boundary loop has nonzero winding; not contractible in S1."""
