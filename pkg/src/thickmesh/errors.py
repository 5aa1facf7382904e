"""Exception types raised by the thickmesh kernel and pipeline."""


class GeometryError(Exception):
    """Base class for all thickmesh errors."""


class InvalidGeometry(GeometryError):
    """Constructor input violates a type invariant (off-hyperboloid point,
    non-unit plane normal, coincident line anchors, off-plane circle center)."""


class BallBoundary(GeometryError):
    """Poincare-ball coordinates at or beyond the unit sphere."""


class DegenerateFace(GeometryError):
    """Triangle is collinear within tolerance, or has no circumcircle."""


class DegenerateTet(GeometryError):
    """Tetrahedron is coplanar within tolerance, or has no circumsphere."""


class NegativeRadius(GeometryError):
    """Ball volume requested for r < 0."""


class OutOfDomain(GeometryError):
    """A lemma bound was evaluated outside the region where it is defined
    (e.g. sinh(sigma*a/2) > sinh(b), or J >= pi/2)."""


class BadParams(GeometryError):
    """Parameter bundle violates the ThickParams invariants."""


class NoFeasibleSigma(GeometryError):
    """The sigma ladder reached its depth limit without meeting the
    volume budget."""


class DegenerateInput(GeometryError):
    """Triangulation input has fewer than 4 points or is fully coplanar."""


class TooManyPoints(GeometryError):
    """Brute-force triangulation guard: n > 64."""


class MoveTooFar(GeometryError):
    """Vertex displacement exceeds the perturbation radius delta."""


class ExhaustedAttempts(GeometryError):
    """A vertex rejected max_attempts consecutive candidate positions."""

    def __init__(self, vid, attempts):
        super().__init__(f"vertex {vid} exhausted {attempts} perturbation attempts")
        self.vid = vid
        self.attempts = attempts


class BadLemmaId(GeometryError):
    """Lemma audit id not in {L1..L5}."""
