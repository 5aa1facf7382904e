"""Hyperbolic geometry kernel in the hyperboloid model.

Points live on the upper sheet of -x0^2 + x1^2 + x2^2 + x3^2 = -1 (Minkowski
signature -+++).  Distances come from cosh d = -<p,q>, planes are spacelike
unit covectors, and the Poincare ball is used only as a transfer model (the
Delaunay predicate and an independent distance oracle).

Every operation here is a pure function; nothing holds mutable state.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels as K
from .errors import (BallBoundary, DegenerateFace, DegenerateTet,
                     InvalidGeometry, NegativeRadius)
from .tolerances import (BALL_BOUNDARY_TOL, CIRCLE_ON_PLANE_TOL,
                         DEGENERATE_TOL, HPOINT_NORM_TOL, LINE_ANCHOR_SEP,
                         PLANE_NORM_TOL)

__all__ = [
    "HPoint", "HPlane", "HLine", "HCircle", "ORIGIN",
    "hyp_distance", "to_poincare_ball", "from_poincare_ball",
    "poincare_distance", "project_to_plane", "project_to_line",
    "tri_circumcircle", "tet_circumsphere", "dihedral_angle", "ball_volume",
    "exp_map", "tangent_basis", "random_isometry", "apply_isometry",
    "point_circle_distance", "regular_tetrahedron",
]


@dataclass(frozen=True)
class HPoint:
    """A point of H^3 as a hyperboloid 4-vector."""

    vec: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vec, dtype=np.float64)
        if v.shape != (4,):
            raise InvalidGeometry(f"HPoint needs 4 coordinates, got {v.shape}")
        object.__setattr__(self, "vec", v)
        if abs(K.mink_dot(v, v) + 1.0) > HPOINT_NORM_TOL or v[0] < 1.0 - HPOINT_NORM_TOL:
            raise InvalidGeometry("coordinates do not lie on the upper hyperboloid sheet")

    @classmethod
    def from_raw(cls, vec):
        """Renormalize a timelike 4-vector onto the sheet (drift control)."""
        v = K.normalize_point(np.asarray(vec, dtype=np.float64))
        if not np.isfinite(v[0]):
            raise InvalidGeometry("vector is not timelike")
        return cls(v)


ORIGIN = HPoint(np.array([1.0, 0.0, 0.0, 0.0]))


@dataclass(frozen=True)
class HPlane:
    """Geodesic plane {p : <p,n> = 0} with a unit spacelike normal n."""

    normal: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64)
        if n.shape != (4,):
            raise InvalidGeometry("HPlane normal needs 4 coordinates")
        object.__setattr__(self, "normal", n)
        if abs(K.mink_dot(n, n) - 1.0) > PLANE_NORM_TOL:
            raise InvalidGeometry("plane normal is not unit spacelike")

    @classmethod
    def through(cls, q: HPoint, r: HPoint, s: HPoint):
        ok, n = K.plane_unit_normal(q.vec, r.vec, s.vec)
        if not ok:
            raise DegenerateFace("points are collinear; no unique plane")
        return cls(n)


@dataclass(frozen=True)
class HLine:
    """Geodesic line through two anchors, stored as (point, unit tangent)."""

    anchor: HPoint
    tangent: np.ndarray

    @classmethod
    def through(cls, p: HPoint, q: HPoint):
        d = hyp_distance(p, q)
        if d < LINE_ANCHOR_SEP:
            raise InvalidGeometry("line anchors are closer than 1e-9")
        t = (q.vec + K.mink_dot(p.vec, q.vec) * p.vec) / np.sinh(d)
        return cls(p, t)

    def at(self, t: float) -> HPoint:
        return HPoint.from_raw(np.cosh(t) * self.anchor.vec + np.sinh(t) * self.tangent)


@dataclass(frozen=True)
class HCircle:
    """Circle in a geodesic plane: center, radius, carrier plane."""

    center: HPoint
    radius: float
    plane: HPlane

    def __post_init__(self):
        if self.radius <= 0.0:
            raise InvalidGeometry("circle radius must be positive")
        if abs(K.mink_dot(self.center.vec, self.plane.normal)) > np.sinh(CIRCLE_ON_PLANE_TOL):
            raise InvalidGeometry("circle center does not lie on its plane")


def hyp_distance(p: HPoint, q: HPoint) -> float:
    """Geodesic distance; cosh d = -<p,q>, evaluated in a cancellation-safe
    arcsinh form."""
    return float(K.hyp_dist(p.vec, q.vec))


def to_poincare_ball(p: HPoint) -> np.ndarray:
    return p.vec[1:] / (1.0 + p.vec[0])


def from_poincare_ball(u) -> HPoint:
    u = np.asarray(u, dtype=np.float64)
    nn = float(u @ u)
    if nn >= (1.0 - BALL_BOUNDARY_TOL) ** 2:
        raise BallBoundary("ball coordinates at or beyond the unit sphere")
    return HPoint.from_raw(np.concatenate(([1.0 + nn], 2.0 * u)) / (1.0 - nn))


def poincare_distance(u, v) -> float:
    """Ball-model distance; independent oracle against hyp_distance."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    du = float((u - v) @ (u - v))
    s = du / ((1.0 - u @ u) * (1.0 - v @ v))
    return 2.0 * float(np.arcsinh(np.sqrt(s)))


def project_to_plane(p: HPoint, plane: HPlane):
    """Orthogonal projection onto a plane: (foot, distance).

    The distance satisfies sinh(d) = |<p,n>|; the foot is the Minkowski
    projection renormalized to the sheet.
    """
    a = float(K.mink_dot(p.vec, plane.normal))
    foot = HPoint.from_raw(p.vec - a * plane.normal)
    return foot, float(np.arcsinh(abs(a)))


def project_to_line(p: HPoint, line: HLine):
    """Orthogonal projection onto a geodesic line: (foot, distance)."""
    alpha = -float(K.mink_dot(p.vec, line.anchor.vec))
    beta = -float(K.mink_dot(p.vec, line.tangent))
    # cosh d = sqrt(alpha^2 - beta^2); the foot sits at tanh t = -beta/alpha
    # along the line.  alpha^2 - beta^2 >= 1 always (timelike decomposition).
    t = float(np.arctanh(-beta / alpha))
    foot = line.at(t)
    w = alpha * alpha - beta * beta - 1.0
    if w < 0.0:
        w = 0.0
    return foot, float(np.arcsinh(np.sqrt(w)))


def tri_circumcircle(q: HPoint, r: HPoint, s: HPoint) -> HCircle:
    """Circumcircle of a geodesic triangle.

    Raises DegenerateFace when the points are collinear within 1e-10 or admit
    no equidistant point in their plane.
    """
    ok, n = K.plane_unit_normal(q.vec, r.vec, s.vec)
    if not ok:
        raise DegenerateFace("collinear points")
    _assert_not_collinear(q, r, s)
    ok, c = K.timelike_center(q.vec - r.vec, q.vec - s.vec, n)
    if not ok:
        raise DegenerateFace("triangle has no circumcircle in H^3")
    center = HPoint(c)
    return HCircle(center, float(K.hyp_dist(c, q.vec)), HPlane(n))


def _assert_not_collinear(q, r, s):
    line = HLine.through(q, r)
    _, d = project_to_line(s, line)
    if d < DEGENERATE_TOL:
        raise DegenerateFace("points are collinear within 1e-10")


def tet_circumsphere(p: HPoint, q: HPoint, r: HPoint, s: HPoint):
    """Circumsphere of a geodesic tetrahedron: (center, R_t).

    Raises DegenerateTet when the vertices are coplanar within 1e-10 or the
    equidistant locus leaves H^3 (no circumscribing sphere).
    """
    plane = HPlane.through(q, r, s)
    _, d = project_to_plane(p, plane)
    if d < DEGENERATE_TOL:
        raise DegenerateTet("vertices are coplanar within 1e-10")
    ok, c = K.timelike_center(p.vec - q.vec, p.vec - r.vec, p.vec - s.vec)
    if not ok:
        raise DegenerateTet("tetrahedron has no circumsphere in H^3")
    center = HPoint(c)
    return center, float(K.hyp_dist(c, p.vec))


def dihedral_angle(tet, edge) -> float:
    """Interior dihedral angle of tet (sequence of 4 HPoint) along an edge
    given as a pair of vertex indices."""
    i, j = edge
    rest = [v for v in range(4) if v not in (i, j)]
    if len(rest) != 2:
        raise InvalidGeometry("edge must name two distinct tet vertices")
    P = np.stack([t.vec for t in tet])
    angs = _dihedral_angles_all(P)
    key = tuple(sorted((i, j)))
    order = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    return angs[order.index(key)]


def _dihedral_angles_all(P):
    qual = K.tet_quality_core(P, DEGENERATE_TOL)
    if qual[0] != K.TQ_OK:
        raise DegenerateTet("degenerate tetrahedron")
    # Recompute the six angles (tet_quality_core keeps only the minimum).
    normals = []
    for v in range(4):
        idx = [u for u in range(4) if u != v]
        ok, n = K.plane_unit_normal(P[idx[0]], P[idx[1]], P[idx[2]])
        if not ok:
            raise DegenerateTet("degenerate face")
        if K.mink_dot(n, P[v]) < 0:
            n = -n
        normals.append(n)
    out = []
    for (i, j) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]:
        a, b = [v for v in range(4) if v not in (i, j)]
        c = float(np.clip(-K.mink_dot(normals[a], normals[b]), -1.0, 1.0))
        out.append(float(np.arccos(c)))
    return out


def ball_volume(r: float) -> float:
    """Volume of a hyperbolic ball: pi * (sinh(2r) - 2r)."""
    if r < 0.0:
        raise NegativeRadius(f"r = {r}")
    return float(np.pi * K.sinh_minus_x(2.0 * r))


def exp_map(base: HPoint, w) -> HPoint:
    """Exponential map: w is a tangent vector at base (<base,w> = 0)."""
    w = np.asarray(w, dtype=np.float64)
    t = float(K.mink_dot(w, w))
    if t <= 0.0:
        return base
    t = np.sqrt(t)
    return HPoint.from_raw(np.cosh(t) * base.vec + np.sinh(t) * (w / t))


def tangent_basis(base: HPoint) -> np.ndarray:
    """Orthonormal spacelike basis (3,4) of the tangent space at base."""
    b = base.vec
    basis = []
    for i in (1, 2, 3, 0):
        e = np.zeros(4)
        e[i] = 1.0
        v = e + K.mink_dot(e, b) * b
        for u in basis:
            v = v - K.mink_dot(v, u) * u
        nn = K.mink_dot(v, v)
        if nn > 1e-12:
            basis.append(v / np.sqrt(nn))
        if len(basis) == 3:
            break
    return np.stack(basis)


def random_isometry(rng, max_boost: float = 2.0) -> np.ndarray:
    """Random element of SO+(1,3): rotation . boost . rotation."""

    def rot():
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        w, x, y, z = q
        R = np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ])
        M = np.eye(4)
        M[1:, 1:] = R
        return M

    t = rng.uniform(0.0, max_boost)
    B = np.eye(4)
    B[0, 0] = B[1, 1] = np.cosh(t)
    B[0, 1] = B[1, 0] = np.sinh(t)
    return rot() @ B @ rot()


def apply_isometry(M: np.ndarray, p: HPoint) -> HPoint:
    return HPoint.from_raw(M @ p.vec)


def point_circle_distance(p: HPoint, circle: HCircle) -> float:
    """Distance from a point to a circle.

    Decomposes through the circle's plane: with f the foot of p and right
    angles at f, cosh d(p, x) = cosh d(p,f) * cosh d(f,x) for x in the plane,
    so the minimum over the circle is attained at in-plane distance
    |d(f, center) - radius|.
    """
    foot, d1 = project_to_plane(p, circle.plane)
    d2 = abs(hyp_distance(foot, circle.center) - circle.radius)
    # cosh(d1)cosh(d2) - 1, assembled from 2 sinh^2(x/2) terms to keep small
    # distances exact.
    c1 = 2.0 * np.sinh(0.5 * d1) ** 2
    c2 = 2.0 * np.sinh(0.5 * d2) ** 2
    s = c1 + c2 + c1 * c2
    return float(np.arcsinh(np.sqrt(s * (2.0 + s))))


def regular_tetrahedron(edge: float, center: HPoint = ORIGIN) -> list:
    """Regular geodesic tetrahedron with the given edge length.

    Vertices sit at equal distance rho from the center along the four
    symmetric directions; sinh^2(rho) = (3/4)(cosh(edge) - 1).
    """
    dirs = np.array([[1.0, 1.0, 1.0], [1.0, -1.0, -1.0],
                     [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]) / np.sqrt(3.0)
    rho = float(np.arcsinh(np.sqrt(0.75 * (np.cosh(edge) - 1.0))))
    basis = tangent_basis(center)
    return [exp_map(center, rho * (d @ basis)) for d in dirs]
