"""Sliver removal by vertex perturbation.

Each vertex is visited once in ascending id order and relocated within its
delta-ball to a position outside the sliver region of every candidate
triangle nearby.  Candidates over-approximate the triangles that could face
the vertex in any good perturbation: all triples of vertices within
2*eps + 3*delta of it (the extra delta covers the vertex's own move).
Rejection sampling is volume-uniform on the delta-ball; the current position
is tested first and kept when already clear.
"""

import json
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import kernels as K
from .delaunay import (DelaunayMesh, PointSet, _clone_tri, _mesh_from_tri,
                       _move_in_tri, ball_points)
from .errors import BadParams, ExhaustedAttempts
from .hyperbolic import HPoint
from .quality import SliverRegionSpec, ThickParams, with_sigma
from .tolerances import (DEGENERATE_TOL, MAX_PERTURB_ATTEMPTS,
                         MAX_SIGMA_HALVINGS)

__all__ = [
    "PerturbRecord", "candidate_triangles", "sample_delta_ball",
    "perturb_vertex", "desliver_pass", "save_perturb_log",
]

_DRAW_BLOCK = 64
_COMBO_CACHE = {}


@dataclass(frozen=True)
class PerturbRecord:
    vid: int
    old: np.ndarray
    new: np.ndarray
    attempts: int
    candidates: int
    outcome: str  # moved | kept | failed


def _combo_idx(k):
    if k not in _COMBO_CACHE:
        _COMBO_CACHE[k] = np.array(list(combinations(range(k), 3)),
                                   dtype=np.int64).reshape(-1, 3)
    return _COMBO_CACHE[k]


def _neighbor_ids(coords, vid, radius):
    d = K.batch_hyp_dist(coords, coords[vid][None, :])
    ids = np.flatnonzero(d <= radius)
    return ids[ids != vid]


def candidate_triangles(mesh: DelaunayMesh, vid: int, params: ThickParams):
    """Every triple of distinct vertices lying within 2*eps + 3*delta of the
    vertex's current position, as sorted id triples in lexicographic order."""
    radius = 2.0 * params.eps + 3.0 * params.delta
    ids = _neighbor_ids(mesh.vertices.coords, vid, radius)
    if len(ids) < 3:
        return []
    combos = _combo_idx(len(ids))
    return [tuple(t) for t in ids[combos]]


def _conforming_triangles(coords, ids, params):
    """Triangle coordinate stack for the triples whose own geometry fits the
    window (edges in [a,b], circumradius <= R); the rest bound empty sliver
    regions and drop out of the rejection test."""
    k = len(ids)
    if k < 3:
        return np.zeros((0, 3, 4))
    pts = coords[ids]
    combos = _combo_idx(k)
    d = K.batch_hyp_dist(pts[:, None, :], pts[None, :, :])
    e01 = d[combos[:, 0], combos[:, 1]]
    e02 = d[combos[:, 0], combos[:, 2]]
    e12 = d[combos[:, 1], combos[:, 2]]
    loch = np.minimum(np.minimum(e01, e02), e12) >= params.a
    hich = np.maximum(np.maximum(e01, e02), e12) <= params.b
    keep = loch & hich
    if not keep.any():
        return np.zeros((0, 3, 4))
    tris = pts[combos[keep]]
    ok, rad = K.batch_tri_circumradius(tris)
    keep2 = ok & (rad <= params.R)
    return np.ascontiguousarray(tris[keep2])


def sample_delta_ball(center: HPoint, delta: float, rng) -> HPoint:
    """Volume-uniform draw from B(center, delta): uniform tangent direction,
    radius by inverse CDF of the sinh^2 density."""
    if not delta > 0:
        raise BadParams("delta must be positive")
    return HPoint.from_raw(ball_points(rng, center, delta, 1)[0])


def _clear(pos, tris, params):
    if tris.shape[0] == 0:
        return True
    return not K.region_any(pos, tris, params.a, params.b, params.R,
                            params.R / params.a, params.sigma, DEGENERATE_TOL)


def _search_position(center_vec, tris, params, rng):
    """Current position first, then rejection draws from the delta-ball.

    Returns (position, attempts); raises ExhaustedAttempts after
    MAX_PERTURB_ATTEMPTS rejected draws.
    """
    if _clear(center_vec, tris, params):
        return center_vec, 0
    center = HPoint(center_vec)
    attempts = 0
    while attempts < MAX_PERTURB_ATTEMPTS:
        block = ball_points(rng, center, params.delta,
                            min(_DRAW_BLOCK, MAX_PERTURB_ATTEMPTS - attempts))
        for j in range(block.shape[0]):
            attempts += 1
            if _clear(block[j], tris, params):
                return block[j], attempts
    raise ExhaustedAttempts(-1, attempts)


def perturb_vertex(mesh: DelaunayMesh, vid: int, specs, params: ThickParams,
                   rng):
    """Find a good perturbation of one vertex clear of every spec's sliver
    region.  Returns (new position, attempts); attempts = 0 means the current
    position was already clear and is kept."""
    if params.sigma is None:
        raise BadParams("params.sigma is unset")
    if specs:
        tris = np.ascontiguousarray(
            np.stack([s.triangle for s in specs]))
    else:
        tris = np.zeros((0, 3, 4))
    try:
        pos, attempts = _search_position(mesh.vertices.coords[vid], tris,
                                         params, rng)
    except ExhaustedAttempts as exc:
        raise ExhaustedAttempts(vid, exc.attempts) from None
    return HPoint(pos.copy()), attempts


def desliver_pass(mesh: DelaunayMesh, params: ThickParams, seed: int):
    """Perturb every vertex once, in ascending id order.

    Each vertex is tested against the sliver regions of its conforming
    candidate triangles at the positions current when it is visited;
    accepted moves update the Delaunay structure immediately.  If any vertex
    exhausts its rejection budget the whole pass restarts from the input
    mesh with sigma halved (up to MAX_SIGMA_HALVINGS times; the volume-budget
    argument guarantees feasibility for small enough sigma).

    Returns (new mesh, log, effective params).  Deterministic per
    (mesh, params, seed).
    """
    if params.sigma is None:
        raise BadParams("params.sigma is unset: call choose_sigma first")
    last_exc = None
    for halving in range(MAX_SIGMA_HALVINGS + 1):
        eff = with_sigma(params, params.sigma * 0.5 ** halving)
        rng = np.random.default_rng(np.random.SeedSequence((seed, halving)))
        try:
            out, log = _single_pass(mesh, eff, rng)
            return out, log, eff
        except ExhaustedAttempts as exc:
            last_exc = exc
    raise last_exc


def _single_pass(mesh, params, rng):
    tri = _clone_tri(mesh._tri)
    coords = mesh.vertices.coords.copy()
    radius = 2.0 * params.eps + 3.0 * params.delta
    log = []
    n = len(mesh.vertices)
    for vid in range(n):
        ids = _neighbor_ids(coords, vid, radius)
        n_candidates = len(_combo_idx(len(ids))) if len(ids) >= 3 else 0
        tris = _conforming_triangles(coords, ids, params)
        old = coords[vid].copy()
        try:
            pos, attempts = _search_position(old, tris, params, rng)
        except ExhaustedAttempts as exc:
            log.append(PerturbRecord(vid, old, old, exc.attempts,
                                     n_candidates, "failed"))
            raise ExhaustedAttempts(vid, exc.attempts) from None
        if attempts == 0:
            log.append(PerturbRecord(vid, old, old, 0, n_candidates, "kept"))
            continue
        coords[vid] = pos
        _move_in_tri(tri, vid, pos, coords)
        log.append(PerturbRecord(vid, old, pos.copy(), attempts,
                                 n_candidates, "moved"))
    src = mesh.vertices
    out = _mesh_from_tri(tri, PointSet(coords, src.eps, src.seed, src.domain))
    return out, log


def save_perturb_log(log, path):
    """One JSON object per line, fields mirroring PerturbRecord."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in log:
            fh.write(json.dumps({
                "vid": rec.vid,
                "old": [float(x) for x in rec.old],
                "new": [float(x) for x in rec.new],
                "attempts": rec.attempts,
                "candidates": rec.candidates,
                "outcome": rec.outcome,
            }))
            fh.write("\n")
