"""Maximal separated sampling and geodesic Delaunay triangulation.

Construction route: points are mapped to the Poincare ball, where hyperbolic
spheres are Euclidean spheres, so the empty-circumsphere predicate transfers
verbatim.  An incremental Bowyer-Watson builder with cavity retriangulation
runs on the ball coordinates (exact-rational fallback when a determinant is
within 1e-10 of zero); a 4-tuple is exposed as a mesh tetrahedron only when
its equidistant point exists in H^3 (timelike circumcenter), which is exactly
when the Euclidean circumsphere stays inside the unit ball.
"""

import json
import math
from collections import deque
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import kernels as K
from .errors import (DegenerateInput, GeometryError, InvalidGeometry,
                     MoveTooFar, TooManyPoints)
from .hyperbolic import HPoint, tangent_basis
from .tolerances import (DEGENERATE_TOL, JITTER_FRACTION, MAXIMALITY_PROBES,
                         MOVE_TOL, PREDICATE_EXACT_TOL,
                         PREDICATE_FILTER_FACTOR)

__all__ = [
    "SampleDomain", "PointSet", "DelaunayMesh", "sample_maximal",
    "build_delaunay", "brute_force_delaunay", "update_vertex",
    "interior_tets", "save_points", "load_points", "save_mesh", "load_mesh",
    "empty_circumsphere_margin",
]

_SUPER_BASE = 1 << 30          # super-vertex ids sort after any real id
_PROBE_BATCH = 8192


@dataclass(frozen=True)
class SampleDomain:
    """Ball domain of H^3 standing in for the thick part."""

    center: HPoint
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidGeometry("domain radius must be positive")


@dataclass(frozen=True)
class PointSet:
    """Sampled vertices: (n,4) hyperboloid coordinates plus provenance."""

    coords: np.ndarray
    eps: float
    seed: int
    domain: SampleDomain | None = None

    def __post_init__(self):
        c = np.ascontiguousarray(self.coords, dtype=np.float64)
        if c.ndim != 2 or c.shape[1] != 4:
            raise InvalidGeometry("PointSet coords must be (n,4)")
        object.__setattr__(self, "coords", c)

    def __len__(self):
        return self.coords.shape[0]

    def point(self, i) -> HPoint:
        return HPoint(self.coords[i])

    @property
    def points(self):
        return [HPoint(v) for v in self.coords]


# ---------------------------------------------------------------------------
# Uniform draws in hyperbolic balls
# ---------------------------------------------------------------------------

def radius_from_uniform(u, r_max):
    """Radial inverse CDF for volume-uniform sampling: density ~ sinh^2(t).

    Solves sinh_minus_x(2t)/2 = u * sinh_minus_x(2 r_max)/2 by guarded
    Newton iteration (the Euclidean-limit cube root is the starting point).
    """
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    target = u * (_smx(2.0 * r_max) / 2.0)
    t = r_max * np.cbrt(u)
    lo = np.zeros_like(t)
    hi = np.full_like(t, r_max)
    done = np.zeros(t.shape, dtype=bool)
    for _ in range(60):
        g = _smx(2.0 * t) / 2.0 - target
        above = g > 0
        hi = np.where(~done & above, t, hi)
        lo = np.where(~done & ~above, t, lo)
        dg = 2.0 * np.sinh(t) ** 2
        step = np.where(dg > 0, g / np.where(dg > 0, dg, 1.0), 0.0)
        nt = t - step
        bad = (nt < lo) | (nt > hi) | ~np.isfinite(nt)
        # converged rows are frozen so batch results match single draws
        t = np.where(done, t, np.where(bad, 0.5 * (lo + hi), nt))
        done |= (np.abs(step) < 1e-15 * r_max) | ((hi - lo) < 1e-14 * r_max)
        if bool(done.all()):
            break
    return t


def _morton_order(ball):
    """Spatially coherent insertion order (short point-location walks); the
    resulting complex is order-independent for generic points."""
    lo = ball.min(axis=0)
    span = ball.max(axis=0) - lo
    span[span <= 0] = 1.0
    q = np.clip(((ball - lo) / span * 1023.0).astype(np.int64), 0, 1023)
    code = np.zeros(len(ball), dtype=np.int64)
    for bit in range(10):
        for axis in range(3):
            code |= ((q[:, axis] >> bit) & 1) << (3 * bit + axis)
    return np.argsort(code, kind="stable")


def _smx(x):
    x = np.asarray(x, dtype=np.float64)
    small = x <= 0.2
    x2 = x * x
    series = (x * x2 / 6.0) * (1.0 + x2 / 20.0 * (1.0 + x2 / 42.0 * (
        1.0 + x2 / 72.0 * (1.0 + x2 / 110.0))))
    with np.errstate(over="ignore"):
        direct = np.sinh(x) - x
    return np.where(small, series, direct)


def _unit_directions(rng, n):
    v = rng.normal(size=(n, 3))
    norms = np.linalg.norm(v, axis=1)
    bad = norms < 1e-12
    if bad.any():
        v[bad] = np.array([1.0, 0.0, 0.0])
        norms[bad] = 1.0
    return v / norms[:, None]


def ball_points(rng, center: HPoint, radius: float, n: int) -> np.ndarray:
    """n volume-uniform points in B(center, radius), as (n,4) coordinates."""
    dirs = _unit_directions(rng, n)
    t = radius_from_uniform(rng.uniform(size=n), radius)
    basis = tangent_basis(center)
    w = dirs * t[:, None]
    tang = w @ basis
    return np.cosh(t)[:, None] * center.vec[None, :] + np.sinh(t)[:, None] * (
        tang / np.where(t > 0, t, 1.0)[:, None])


# ---------------------------------------------------------------------------
# Incremental Bowyer-Watson complex on ball coordinates
# ---------------------------------------------------------------------------

class _CavityError(GeometryError):
    pass


class _BallTriangulation:
    """Euclidean Delaunay complex of the ball-model images, including a far
    super-tetrahedron; purely internal."""

    def __init__(self, coords_ball):
        coords_ball = np.asarray(coords_ball, dtype=np.float64)
        self.coords = [np.array(c) for c in coords_ball]
        span = 1.0
        if len(self.coords):
            span = max(1.0, float(np.abs(coords_ball).max()))
        s = 200.0 * span
        self.super_coords = [
            np.array([s, s, s]), np.array([s, -s, -s]),
            np.array([-s, s, -s]), np.array([-s, -s, s]),
        ]
        st = tuple(range(_SUPER_BASE, _SUPER_BASE + 4))
        self.tets = set([st])
        self.face_map = {}
        for f in combinations(st, 3):
            self.face_map[f] = [st]
        self.v2t = {}
        self.last_tet = st

    # -- basic access -------------------------------------------------------

    def pt(self, i):
        if i >= _SUPER_BASE:
            return self.super_coords[i - _SUPER_BASE]
        return self.coords[i]

    def add_coord(self, c):
        self.coords.append(np.asarray(c, dtype=np.float64))
        return len(self.coords) - 1

    def real_tets(self):
        return [t for t in self.tets if t[3] < _SUPER_BASE]

    @staticmethod
    def _faces(t):
        return ((t[0], t[1], t[2]), (t[0], t[1], t[3]),
                (t[0], t[2], t[3]), (t[1], t[2], t[3]))

    def _neighbor(self, face, t):
        lst = self.face_map.get(face)
        if lst is None:
            return None
        for o in lst:
            if o != t:
                return o
        return None

    # -- predicates ---------------------------------------------------------

    def _orient(self, i, j, k, l):
        return K.orient3d_sign(self.pt(i), self.pt(j), self.pt(k), self.pt(l),
                               PREDICATE_FILTER_FACTOR)

    def _conflicts_point(self, tet, x):
        """x strictly inside the circumsphere of tet (calibrated so that for a
        positively oriented tet, inside means insphere_det < 0)."""
        pa, pb, pc, pd = (self.pt(tet[0]), self.pt(tet[1]), self.pt(tet[2]),
                          self.pt(tet[3]))
        o = K.orient3d_sign(pa, pb, pc, pd, PREDICATE_FILTER_FACTOR)
        if o == 0:
            return False
        s = K.insphere_sign(pa, pb, pc, pd, x, PREDICATE_FILTER_FACTOR)
        return s * o < 0

    # -- point location -----------------------------------------------------

    def locate(self, x, hint=None):
        t = hint if hint in self.tets else self.last_tet
        if t not in self.tets:
            t = next(iter(self.tets))
        limit = 40 * len(self.tets) + 1000
        steps = 0
        while True:
            steps += 1
            if steps > limit:
                raise _CavityError("point location walk did not terminate")
            moved = False
            for w in t:
                face = tuple(v for v in t if v != w)
                s_w = self._orient(face[0], face[1], face[2], w)
                if s_w == 0:
                    continue
                s_x = K.orient3d_sign(self.pt(face[0]), self.pt(face[1]),
                                      self.pt(face[2]), x, PREDICATE_FILTER_FACTOR)
                if s_w * s_x < 0:
                    nxt = self._neighbor(face, t)
                    if nxt is None:
                        raise _CavityError("walk exited the super-tet hull")
                    t = nxt
                    moved = True
                    break
            if not moved:
                self.last_tet = t
                return t

    # -- conflict regions and cavities ---------------------------------------

    def _conflict_region(self, x, seed):
        if not self._conflicts_point(seed, x):
            for f in self._faces(seed):
                o = self._neighbor(f, seed)
                if o is not None and self._conflicts_point(o, x):
                    seed = o
                    break
            else:
                raise _CavityError("query point conflicts with no tet")
        region = {seed}
        queue = deque([seed])
        while queue:
            t = queue.popleft()
            for f in self._faces(t):
                o = self._neighbor(f, t)
                if o is None or o in region:
                    continue
                if self._conflicts_point(o, x):
                    region.add(o)
                    queue.append(o)
        return region

    def _remove_tets(self, dead):
        for t in dead:
            self.tets.discard(t)
            for f in self._faces(t):
                lst = self.face_map.get(f)
                if lst is not None:
                    try:
                        lst.remove(t)
                    except ValueError:
                        pass
                    if not lst:
                        del self.face_map[f]

    def _add_tet(self, t):
        self.tets.add(t)
        for f in self._faces(t):
            self.face_map.setdefault(f, []).append(t)
        for v in t:
            self.v2t[v] = t
        self.last_tet = t

    def insert(self, i):
        """Standard cavity insertion of point id i (already in coords)."""
        x = self.pt(i)
        seed = self.locate(x)
        dead = self._conflict_region(x, seed)
        boundary = []
        for t in dead:
            for f in self._faces(t):
                o = self._neighbor(f, t)
                if o is None or o not in dead:
                    boundary.append(f)
        self._remove_tets(dead)
        for f in boundary:
            self._add_tet(tuple(sorted(f + (i,))))

    # -- vertex relocation ---------------------------------------------------

    def star(self, v):
        t0 = self.v2t.get(v)
        if t0 is None or t0 not in self.tets:
            t0 = next((t for t in self.tets if v in t), None)
            if t0 is None:
                raise _CavityError(f"vertex {v} has no incident tet")
        out = {t0}
        queue = deque([t0])
        while queue:
            t = queue.popleft()
            for f in self._faces(t):
                if v not in f:
                    continue
                o = self._neighbor(f, t)
                if o is not None and o not in out:
                    out.add(o)
                    queue.append(o)
        return out

    def move_vertex(self, v, new_coord):
        """Relocate vertex v.

        The retriangulated region is star(v) united with the conflict region
        of the new position; its fill is recovered from the Delaunay
        triangulation of the region's boundary vertices plus v, flood-filled
        inward from the boundary faces.
        """
        new_coord = np.asarray(new_coord, dtype=np.float64)
        star = self.star(v)
        hint = next(iter(star))
        seed = self.locate(new_coord, hint=hint)
        confl = self._conflict_region(new_coord, seed)
        dead = star | confl

        boundary = {}
        for t in dead:
            for f in self._faces(t):
                o = self._neighbor(f, t)
                if o is None or o not in dead:
                    if f in boundary:
                        raise _CavityError("cavity boundary face repeated")
                    boundary[f] = t if o is None else o
        if any(v in f for f in boundary):
            raise _CavityError("moved vertex on cavity boundary")

        cavity_ids = sorted({u for t in dead for u in t if u != v})
        self.coords[v] = new_coord
        fill = self._fill_cavity(dead, boundary, cavity_ids + [v])
        self._remove_tets(dead)
        for t in fill:
            self._add_tet(t)

    def _fill_cavity(self, dead, boundary, ids):
        """Delaunay fill of the cavity: local DT of the candidate ids,
        flood-filled inward across each boundary face."""
        local_of = {g: i for i, g in enumerate(ids)}
        local = _BallTriangulation([self.pt(g) for g in ids])
        for i in range(len(ids)):
            local.insert(i)

        def to_local_face(f):
            return tuple(sorted(local_of[u] for u in f))

        fill = set()
        queue = deque()
        consumed = set()
        for f, outside in boundary.items():
            if any(u not in local_of for u in f):
                raise _CavityError("boundary face vertex missing from cavity")
            lf = to_local_face(f)
            lst = local.face_map.get(lf)
            if not lst:
                raise _CavityError("boundary face absent from local DT")
            w_out = next(u for u in outside if u not in f)
            fa, fb, fc = (self.pt(u) for u in f)
            s_out = K.orient3d_sign(fa, fb, fc, self.pt(w_out),
                                    PREDICATE_FILTER_FACTOR)
            inner = None
            for lt in lst:
                w_in = next(u for u in lt if u not in lf)
                if w_in >= _SUPER_BASE:
                    continue
                s_in = K.orient3d_sign(fa, fb, fc, local.pt(w_in),
                                       PREDICATE_FILTER_FACTOR)
                if s_in * s_out < 0:
                    inner = lt
                    break
            if inner is None:
                raise _CavityError("no inner fill tet across a boundary face")
            consumed.add(lf)
            if inner not in fill:
                fill.add(inner)
                queue.append(inner)

        boundary_local = {to_local_face(f) for f in boundary}
        while queue:
            lt = queue.popleft()
            for lf in _BallTriangulation._faces(lt):
                if lf in boundary_local:
                    consumed.add(lf)
                    continue
                o = local._neighbor(lf, lt)
                if o is None or max(lt) >= _SUPER_BASE:
                    raise _CavityError("flood fill leaked out of the cavity")
                if o not in fill:
                    if max(o) >= _SUPER_BASE:
                        raise _CavityError("flood fill reached a local super tet")
                    fill.add(o)
                    queue.append(o)
        if consumed != boundary_local:
            raise _CavityError("flood fill did not consume every boundary face")

        out = []
        for lt in fill:
            out.append(tuple(sorted(ids[u] for u in lt)))
        return out


# ---------------------------------------------------------------------------
# Public mesh value
# ---------------------------------------------------------------------------

@dataclass
class DelaunayMesh:
    """Geodesic Delaunay triangulation (hyperbolically valid tets only).

    tets rows are ascending vertex ids, lexicographically sorted;
    orient_positive records the sign of the ball-model orientation of each
    row.  Value semantics: update_vertex returns a new mesh.
    """

    vertices: PointSet
    tets: np.ndarray
    orient_positive: np.ndarray
    circumcenters: np.ndarray
    circumradii: np.ndarray
    adjacency: dict
    interior: np.ndarray | None = None
    _tri: _BallTriangulation | None = field(default=None, repr=False)

    @property
    def num_tets(self):
        return self.tets.shape[0]

    def tet_coords(self, i):
        return self.vertices.coords[self.tets[i]]


def _valid_tets_centers(tri: _BallTriangulation, coords: np.ndarray):
    """Hyperbolically valid tets with their circumcenters and radii."""
    real = tri.real_tets()
    tets = np.array(sorted(real), dtype=np.int64).reshape(-1, 4)
    if tets.shape[0]:
        P = coords[tets]
        ok, centers = K.batch_timelike_center(P[:, 0] - P[:, 1],
                                              P[:, 0] - P[:, 2],
                                              P[:, 0] - P[:, 3])
        tets = tets[ok]
        centers = centers[ok]
        radii = K.batch_hyp_dist(centers, coords[tets[:, 0]])
    else:
        centers = np.zeros((0, 4))
        radii = np.zeros(0)
    return tets, centers, radii


def _mesh_from_tri(tri: _BallTriangulation, points: PointSet) -> DelaunayMesh:
    coords = points.coords
    tets, centers, radii = _valid_tets_centers(tri, coords)

    ball = K.hyperboloid_to_ball(coords)
    if tets.shape[0]:
        B = ball[tets]
        diffs = B[:, 1:] - B[:, :1]
        dets = K._batch_det3(diffs)
        orient = dets > 0
        scale = np.abs(diffs).max(axis=1).prod(axis=1)
        near = np.abs(dets) < PREDICATE_EXACT_TOL * np.maximum(scale, 1e-300)
        for i in np.flatnonzero(near):
            t = tets[i]
            orient[i] = K.orient3d_sign(ball[t[0]], ball[t[1]], ball[t[2]],
                                        ball[t[3]], PREDICATE_FILTER_FACTOR) > 0
    else:
        orient = np.zeros(0, dtype=bool)
    adjacency = {}
    for i, t in enumerate(tets):
        for f in combinations(map(int, t), 3):
            adjacency.setdefault(f, []).append(i)
    return DelaunayMesh(vertices=points, tets=tets, orient_positive=orient,
                        circumcenters=centers, circumradii=radii,
                        adjacency=adjacency, _tri=tri)


def build_delaunay(points: PointSet) -> DelaunayMesh:
    """Geodesic Delaunay triangulation of a point set.

    A 4-subset is a tetrahedron iff its circumscribing sphere exists and
    contains no other point strictly inside; construction runs Bowyer-Watson
    on the Poincare-ball coordinates and keeps the hyperbolically valid tets.
    """
    n = len(points)
    if n < 4:
        raise DegenerateInput("need at least 4 points")
    ball = K.hyperboloid_to_ball(points.coords)
    if np.linalg.matrix_rank(ball - ball.mean(axis=0), tol=1e-9) < 3:
        raise DegenerateInput("points are coplanar")
    tri = _BallTriangulation(ball)
    for i in _morton_order(ball):
        tri.insert(int(i))
    return _mesh_from_tri(tri, points)


def brute_force_delaunay(points: PointSet) -> frozenset:
    """O(n^5) transcription of the Delaunay definition.

    Includes a 4-subset iff its circumsphere exists (timelike equidistant
    point) and no fifth point lies strictly inside; the containment predicate
    is the same exact ball-model test the builder uses.
    """
    n = len(points)
    if n > 64:
        raise TooManyPoints(f"n = {n} > 64")
    ball = K.hyperboloid_to_ball(points.coords)
    coords = points.coords
    tri = _BallTriangulation(ball)  # predicate host only; no insertions
    out = []
    for combo in combinations(range(n), 4):
        P = coords[list(combo)]
        ok, _ = K.batch_timelike_center(P[0:1] - P[1], P[0:1] - P[2],
                                        P[0:1] - P[3])
        if not ok[0]:
            continue
        empty = True
        for e in range(n):
            if e in combo:
                continue
            if tri._conflicts_point(combo, ball[e]):
                empty = False
                break
        if empty:
            out.append(combo)
    return frozenset(out)


def update_vertex(mesh: DelaunayMesh, vid: int, newpos: HPoint) -> DelaunayMesh:
    """Move one vertex by at most delta = eps/10, keeping the mesh Delaunay.

    Returns a new mesh; tets away from the move are untouched (the
    retriangulated region is the old star plus the new position's conflict
    region).
    """
    old = mesh.vertices.point(vid)
    delta = mesh.vertices.eps / 10.0
    disp = float(K.hyp_dist(old.vec, newpos.vec))
    if disp > delta + MOVE_TOL:
        raise MoveTooFar(f"displacement {disp} exceeds delta {delta}")

    tri = _clone_tri(mesh._tri)
    coords = mesh.vertices.coords.copy()
    coords[vid] = newpos.vec
    _move_in_tri(tri, vid, newpos.vec, coords)
    pts = PointSet(coords, mesh.vertices.eps, mesh.vertices.seed,
                   mesh.vertices.domain)
    return _mesh_from_tri(tri, pts)


def _clone_tri(tri: _BallTriangulation) -> _BallTriangulation:
    new = _BallTriangulation.__new__(_BallTriangulation)
    new.coords = [c for c in tri.coords]
    new.super_coords = tri.super_coords
    new.tets = set(tri.tets)
    new.face_map = {f: list(ts) for f, ts in tri.face_map.items()}
    new.v2t = dict(tri.v2t)
    new.last_tet = tri.last_tet
    return new


def _move_in_tri(tri: _BallTriangulation, vid: int, newpos_h, coords_h):
    """Apply a vertex move to the internal complex, with a rebuild fallback
    if the local cavity fill reports an inconsistency."""
    new_ball = K.hyperboloid_to_ball(newpos_h[None])[0]
    try:
        tri.move_vertex(vid, new_ball)
    except _CavityError:
        ball = K.hyperboloid_to_ball(coords_h)
        fresh = _BallTriangulation(ball)
        for i in _morton_order(ball):
            fresh.insert(int(i))
        tri.coords = fresh.coords
        tri.super_coords = fresh.super_coords
        tri.tets = fresh.tets
        tri.face_map = fresh.face_map
        tri.v2t = fresh.v2t
        tri.last_tet = fresh.last_tet


def interior_tets(mesh: DelaunayMesh, domain: SampleDomain, eps: float) -> np.ndarray:
    """Flags: circumball (center, R_t) inside the domain shrunk by eps."""
    if mesh.num_tets == 0:
        return np.zeros(0, dtype=bool)
    d = K.batch_hyp_dist(mesh.circumcenters, domain.center.vec[None, :])
    return (d + mesh.circumradii) <= (domain.radius - eps)


def empty_circumsphere_margin(mesh: DelaunayMesh) -> float:
    """Worst slack of the Delaunay property over all tets, in cosh units:
    min over (tet, outside vertex) of cosh(d(center, v)) - cosh(R_t)."""
    if mesh.num_tets == 0:
        return np.inf
    C = mesh.circumcenters
    V = mesh.vertices.coords
    worst = np.inf
    chunk = max(1, int(2e7) // max(1, len(mesh.vertices)))
    coshR = np.cosh(mesh.circumradii)
    for s in range(0, mesh.num_tets, chunk):
        e = min(mesh.num_tets, s + chunk)
        D = -K.batch_mink_dot(C[s:e, None, :], V[None, :, :])
        for row, t in enumerate(range(s, e)):
            D[row, mesh.tets[t]] = np.inf
        worst = min(worst, float((D - coshR[s:e, None]).min()))
    return worst


# ---------------------------------------------------------------------------
# Maximal separated sampling
# ---------------------------------------------------------------------------

def sample_maximal(domain: SampleDomain, eps: float, seed: int) -> PointSet:
    """Maximal eps-separated sample of a ball domain.

    Dart throwing with volume-uniform probes until 50,000 consecutive probes
    land within eps of an existing sample; every accepted probe carries a
    genericity jitter (<= 1e-7 * eps, applied before the separation test, so
    stored points satisfy the separation bound exactly).  Interior coverage
    is then tightened to the exact size window: any interior-flagged
    circumball with radius >= eps gets its circumcenter inserted (legal, the
    center has clearance >= eps) until none remains; the probe certificate
    stays valid since added samples only improve coverage.
    Deterministic for a fixed seed.
    """
    if not eps > 0:
        raise InvalidGeometry("eps must be positive")
    rng = np.random.default_rng(seed)
    jitter_max = JITTER_FRACTION * eps
    r_prop = domain.radius - 1.000001 * jitter_max
    if r_prop <= 0:
        raise InvalidGeometry("domain radius must exceed the jitter radius")

    center = domain.center
    basis = tangent_basis(center)

    # Grid sized from the smallest Euclidean extent of an eps-ball in the
    # domain (extents shrink toward the sphere boundary).
    rho_max = math.tanh(0.5 * (domain.radius + eps))
    t_eps = math.tanh(0.5 * eps)
    cell = t_eps * (1.0 - rho_max ** 2) / (1.0 - (t_eps * rho_max) ** 2)
    dims = int(math.ceil(2.0 * (rho_max + 2.0 * cell) / cell)) + 1
    origin = -0.5 * dims * cell
    grid_count = np.zeros(dims ** 3, dtype=np.int64)
    grid_items = np.zeros(dims ** 3 * K.GRID_BUCKET, dtype=np.int64)

    cap = 4096
    pts_h = np.zeros((cap, 4))
    pts_b = np.zeros((cap, 3))
    n_pts = 0
    streak = 0
    cosh_eps = math.cosh(eps)

    def draw_batch(m):
        dirs = _unit_directions(rng, m)
        t = radius_from_uniform(rng.uniform(size=m), r_prop)
        jd = _unit_directions(rng, m)
        jt = jitter_max * np.cbrt(rng.uniform(size=m))
        w = dirs * t[:, None] + jd * jt[:, None]
        wn = np.linalg.norm(w, axis=1)
        tang = (w / np.where(wn > 0, wn, 1.0)[:, None]) @ basis
        ph = (np.cosh(wn)[:, None] * center.vec[None, :]
              + np.sinh(wn)[:, None] * tang)
        return np.ascontiguousarray(ph), np.ascontiguousarray(
            K.hyperboloid_to_ball(ph))

    while streak < MAXIMALITY_PROBES:
        if n_pts + _PROBE_BATCH > cap:
            cap *= 2
            pts_h = np.vstack([pts_h, np.zeros_like(pts_h)])
            pts_b = np.vstack([pts_b, np.zeros_like(pts_b)])
        ph, pb = draw_batch(_PROBE_BATCH)
        n_pts, streak, _, overflow = K.run_darts(
            ph, pb, pts_h, pts_b, n_pts, grid_count, grid_items, origin, cell,
            dims, cosh_eps, t_eps, streak, MAXIMALITY_PROBES)
        if overflow:
            raise GeometryError("sampler grid bucket overflow")

    coords = pts_h[:n_pts].copy()

    # Interior repair: insert circumcenters of flagged tets violating the
    # eps circumradius bound until the window is exact.  A violating center
    # has clearance R_t >= eps from every existing sample (empty circumball),
    # so insertion preserves the separation invariant; centers accepted in
    # the same round are additionally checked against each other.
    if len(coords) >= 4 and domain.radius > eps:
        ball0 = K.hyperboloid_to_ball(coords)
        tri = _BallTriangulation(ball0)
        for i in _morton_order(ball0):
            tri.insert(int(i))
        for _ in range(1000):
            _, centers, radii = _valid_tets_centers(tri, coords)
            dctr = K.batch_hyp_dist(centers, domain.center.vec[None, :])
            flags = (dctr + radii) <= (domain.radius - eps)
            bad = np.flatnonzero(flags & (radii >= eps))
            if bad.size == 0:
                break
            order = bad[np.argsort(-radii[bad])]
            accepted = []
            for idx in order:
                c = centers[idx]
                if accepted:
                    d = K.batch_hyp_dist(np.asarray(accepted), c[None, :])
                    if d.min() < eps:
                        continue
                accepted.append(c)
            block = np.asarray(accepted)
            start = len(coords)
            coords = np.vstack([coords, block])
            ball_block = K.hyperboloid_to_ball(block)
            for j in range(block.shape[0]):
                tri.add_coord(ball_block[j])
                tri.insert(start + j)
        else:
            raise GeometryError("interior repair did not converge")

    return PointSet(coords, eps, seed, domain)


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def save_points(points: PointSet, path):
    obj = {
        "model": "hyperboloid",
        "eps": points.eps,
        "seed": points.seed,
        "points": [list(map(float, row)) for row in points.coords],
    }
    if points.domain is not None:
        obj["domain"] = {
            "center": list(map(float, points.domain.center.vec)),
            "radius": points.domain.radius,
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh)
        fh.write("\n")


def load_points(path) -> PointSet:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if obj.get("model") != "hyperboloid":
        raise InvalidGeometry("points file must declare hyperboloid model")
    domain = None
    if "domain" in obj:
        domain = SampleDomain(HPoint(np.array(obj["domain"]["center"])),
                              float(obj["domain"]["radius"]))
    return PointSet(np.array(obj["points"], dtype=np.float64),
                    float(obj["eps"]), int(obj["seed"]), domain)


def save_mesh(mesh: DelaunayMesh, path):
    obj = {
        "points": {
            "model": "hyperboloid",
            "eps": mesh.vertices.eps,
            "seed": mesh.vertices.seed,
            "points": [list(map(float, row)) for row in mesh.vertices.coords],
        },
        "tets": [list(map(int, t)) for t in mesh.tets],
        # without domain information every tet counts as interior for
        # certification purposes (matches the report convention)
        "interior": ([bool(x) for x in mesh.interior]
                     if mesh.interior is not None else
                     [True] * mesh.num_tets),
    }
    if mesh.vertices.domain is not None:
        obj["points"]["domain"] = {
            "center": list(map(float, mesh.vertices.domain.center.vec)),
            "radius": mesh.vertices.domain.radius,
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh)
        fh.write("\n")


def load_mesh(path) -> DelaunayMesh:
    """Load a mesh file; the triangulation is re-derived from the points and
    cross-checked against the stored tets (cheap integrity audit)."""
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    pobj = obj.get("points")
    if pobj is None and "points_ref" in obj:
        points = load_points(obj["points_ref"])
    else:
        domain = None
        if "domain" in pobj:
            domain = SampleDomain(HPoint(np.array(pobj["domain"]["center"])),
                                  float(pobj["domain"]["radius"]))
        points = PointSet(np.array(pobj["points"], dtype=np.float64),
                          float(pobj["eps"]), int(pobj["seed"]), domain)
    mesh = build_delaunay(points)
    stored = sorted(tuple(t) for t in obj["tets"])
    derived = sorted(tuple(map(int, t)) for t in mesh.tets)
    if stored != derived:
        raise InvalidGeometry("mesh file tets disagree with the rebuilt "
                              "triangulation of its points")
    interior = obj.get("interior")
    if interior is not None and len(interior) == mesh.num_tets:
        mesh.interior = np.array(interior, dtype=bool)
    return mesh
