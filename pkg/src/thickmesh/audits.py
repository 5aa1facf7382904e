"""Randomized audits of the five bound lemmas.

Each audit draws instances of the lemma's hypothesis (conforming random
tetrahedra or triangles, constructed near-circular slivers, or Monte Carlo
volume samples) and checks the conclusion with slack no worse than -1e-9.
Both generators are documented here so the audits are falsifiable:

* conforming objects: rejection sampling of uniform points in a ball of
  radius R, accepted when all edges lie in [a,b] and the circumradius is at
  most R;
* constructed slivers: four points near a circle of radius in
  [max(0.6a, 1.02a/sqrt(2)), 0.9R], angular gaps at least the chord-length
  minimum plus a Dirichlet-distributed remainder, with radial and normal
  jitter of 0.05 * sigma * a/2, accepted when the result verifies as a
  conforming (sigma, R/a)-sliver.

A random isometry is applied to every accepted instance.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels as K
from .delaunay import ball_points, radius_from_uniform
from .errors import BadLemmaId, BadParams
from .hyperbolic import ORIGIN, ball_volume, random_isometry
from .quality import (K_bound, ThickParams, V_bound, h0_bound, n_bound,
                      theta_bound)
from .tolerances import AUDIT_SLACK, DEGENERATE_TOL

__all__ = ["AuditResult", "audit_lemma", "random_conforming_tets",
           "random_conforming_triangles", "constructed_slivers",
           "mc_tube_volume"]

LEMMA_IDS = ("L1", "L2", "L3", "L4", "L5")


@dataclass(frozen=True)
class AuditResult:
    lemma_id: str
    trials: int
    failures: int
    worst_margin: float
    seed: int

    @property
    def passed(self):
        return self.failures == 0 and self.worst_margin >= -AUDIT_SLACK


def _require_sigma(params):
    if params.sigma is None:
        raise BadParams("audit needs params.sigma")
    return params.sigma


# ---------------------------------------------------------------------------
# Instance generators
# ---------------------------------------------------------------------------

def random_conforming_tets(params: ThickParams, count: int, rng,
                           max_batches: int = 4000):
    """(count,4,4) tetrahedra with edges in [a,b] and circumradius <= R."""
    out = []
    got = 0
    for _ in range(max_batches):
        m = 4096
        pts = ball_points(rng, ORIGIN, params.R, 4 * m).reshape(m, 4, 4)
        q = K.batch_tet_quality(pts, DEGENERATE_TOL)
        edges = q[:, 11:17]
        keep = ((q[:, 0] == 0)
                & (edges.min(axis=1) >= params.a)
                & (edges.max(axis=1) <= params.b)
                & (q[:, 1] <= params.R))
        sel = pts[keep]
        for tet in sel:
            iso = random_isometry(rng, max_boost=1.0)
            out.append(tet @ iso.T)
            got += 1
            if got == count:
                return np.array(out)
    raise BadParams("conforming-tet generator acceptance rate too low")


def random_conforming_triangles(params: ThickParams, count: int, rng,
                                max_batches: int = 4000):
    """(count,3,4) triangles with edges in [a,b] and circumradius <= R."""
    out = []
    got = 0
    for _ in range(max_batches):
        m = 8192
        pts = ball_points(rng, ORIGIN, params.R, 3 * m).reshape(m, 3, 4)
        d01 = K.batch_hyp_dist(pts[:, 0], pts[:, 1])
        d02 = K.batch_hyp_dist(pts[:, 0], pts[:, 2])
        d12 = K.batch_hyp_dist(pts[:, 1], pts[:, 2])
        emin = np.minimum(np.minimum(d01, d02), d12)
        emax = np.maximum(np.maximum(d01, d02), d12)
        ok, rad = K.batch_tri_circumradius(pts)
        keep = ok & (emin >= params.a) & (emax <= params.b) & (rad <= params.R)
        for tri in pts[keep]:
            iso = random_isometry(rng, max_boost=1.0)
            out.append(tri @ iso.T)
            got += 1
            if got == count:
                return np.array(out)
    raise BadParams("conforming-triangle generator acceptance rate too low")


def constructed_slivers(params: ThickParams, count: int, rng,
                        max_tries: int = 400000):
    """(count,4,4) verified conforming (sigma, R/a)-slivers near circles."""
    sigma = _require_sigma(params)
    a, b, R = params.a, params.b, params.R
    rho = R / a
    r_lo = max(0.6 * a, 1.02 * a / np.sqrt(2.0))
    r_hi = 0.9 * R
    if r_lo >= r_hi:
        raise BadParams("no feasible sliver circle radius")
    jit = 0.05 * sigma * (a / 2.0)
    out = []
    for _ in range(max_tries):
        r = rng.uniform(r_lo, r_hi)
        # minimum angular gap so every chord is at least a
        cmin = 1.0 - (np.cosh(a) - 1.0) / np.sinh(r) ** 2
        if cmin <= -1.0:
            continue
        gap_min = 1.001 * np.arccos(cmin)
        slack = 2.0 * np.pi - 4.0 * gap_min
        if slack <= 0:
            continue
        gaps = gap_min + slack * rng.dirichlet(np.ones(4))
        angles = np.cumsum(gaps) + rng.uniform(0.0, 2.0 * np.pi)
        rad = r + rng.uniform(-jit, jit, size=4)
        height = rng.uniform(-jit, jit, size=4)
        P = np.empty((4, 4))
        for i in range(4):
            w = np.array([rad[i] * np.cos(angles[i]),
                          rad[i] * np.sin(angles[i]),
                          height[i]])
            t = np.linalg.norm(w)
            P[i, 0] = np.cosh(t)
            P[i, 1:] = np.sinh(t) * w / t
        q = K.tet_quality_core(P, DEGENERATE_TOL)
        if q[0] != 0:
            continue
        edges = q[11:17]
        if edges.min() < a or edges.max() > b or q[1] > R:
            continue
        if q[1] > rho * q[2]:
            continue
        flat = (q[3:7] / q[7:11]).min()
        if flat > sigma:
            continue
        iso = random_isometry(rng, max_boost=1.0)
        out.append(P @ iso.T)
        if len(out) == count:
            return np.array(out)
    raise BadParams("constructed-sliver generator acceptance rate too low")


# ---------------------------------------------------------------------------
# Per-lemma checks
# ---------------------------------------------------------------------------

def _audit_L1(params, trials, rng):
    """Edges in [a,b], circumradius <= R, dihedral below theta => sliver;
    audited in contrapositive form: every non-sliver clears theta."""
    sigma = _require_sigma(params)
    theta = theta_bound(params.a, params.b, sigma)
    tets = random_conforming_tets(params, trials, rng)
    q = K.batch_tet_quality(tets, DEGENERATE_TOL)
    ratio = q[:, 1] / q[:, 2]
    flat = (q[:, 3:7] / q[:, 7:11]).min(axis=1)
    sliver = (ratio <= params.R / params.a) & (flat <= sigma)
    margins = np.where(sliver, np.inf, q[:, 17] - theta)
    worst = float(margins.min()) if trials else np.inf
    failures = int((margins < -AUDIT_SLACK).sum())
    return failures, worst


def _audit_L2(params, trials, rng):
    """Every altitude of a conforming triangle is at least h0(a,b,R)."""
    h0 = h0_bound(params.a, params.b, params.R)
    tris = random_conforming_triangles(params, trials, rng)
    worst = np.inf
    failures = 0
    for v in range(3):
        i, j = [u for u in range(3) if u != v][:2]
        A = tris[:, i]
        d = K.batch_hyp_dist(tris[:, i], tris[:, j])
        tang = (tris[:, j] + K.batch_mink_dot(A, tris[:, j])[:, None] * A
                ) / np.sinh(d)[:, None]
        alpha = -K.batch_mink_dot(tris[:, v], A)
        beta = -K.batch_mink_dot(tris[:, v], tang)
        w2 = np.clip(alpha * alpha - beta * beta - 1.0, 0.0, None)
        alt = np.arcsinh(np.sqrt(w2))
        margins = alt - h0
        worst = min(worst, float(margins.min()))
        failures += int((margins < -AUDIT_SLACK).sum())
    return failures, worst


def _audit_L3(params, trials, rng):
    """Constructed slivers: every vertex has d_v/c_v <= n(sigma,a,b,R)."""
    sigma = _require_sigma(params)
    n = n_bound(sigma, params.a, params.b, params.R)
    tets = constructed_slivers(params, trials, rng)
    q = K.batch_tet_quality(tets, DEGENERATE_TOL)
    margins = n - (q[:, 3:7] / q[:, 7:11]).max(axis=1)
    return int((margins < -AUDIT_SLACK).sum()), float(margins.min())


def _audit_L4(params, trials, rng):
    """Constructed slivers: every vertex is within K of the opposite face's
    circumcircle."""
    sigma = _require_sigma(params)
    Kb = K_bound(sigma, params.a, params.b, params.R)
    tets = constructed_slivers(params, trials, rng)
    worst = np.inf
    failures = 0
    for v in range(4):
        idx = [u for u in range(4) if u != v]
        tri = tets[:, idx]
        ok_n, nrm = K.batch_plane_normal(tri[:, 0], tri[:, 1], tri[:, 2])
        ok_c, ctr = K.batch_timelike_center(tri[:, 0] - tri[:, 1],
                                            tri[:, 0] - tri[:, 2], nrm)
        if not (ok_n & ok_c).all():
            failures += int((~(ok_n & ok_c)).sum())
            continue
        rad = K.batch_hyp_dist(ctr, tri[:, 0])
        sgn = K.batch_mink_dot(tets[:, v], nrm)
        d1 = np.arcsinh(np.abs(sgn))
        foot = K.batch_normalize_point(tets[:, v] - sgn[:, None] * nrm)
        d2 = np.abs(K.batch_hyp_dist(foot, ctr) - rad)
        c1 = 2.0 * np.sinh(0.5 * d1) ** 2
        c2 = 2.0 * np.sinh(0.5 * d2) ** 2
        s = c1 + c2 + c1 * c2
        dist = np.arcsinh(np.sqrt(s * (2.0 + s)))
        margins = Kb - dist
        worst = min(worst, float(margins.min()))
        failures += int((margins < -AUDIT_SLACK).sum())
    return failures, worst


def mc_tube_volume(params: ThickParams, samples: int, rng):
    """Monte Carlo estimate of the volume of the K-neighborhood of a circle
    of radius R (the sliver-region hull of Lemma 5)."""
    sigma = _require_sigma(params)
    Kb = K_bound(sigma, params.a, params.b, params.R)
    R = params.R
    r_ball = R + Kb
    hits = 0
    chunk = 200_000
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        X = ball_points(rng, ORIGIN, r_ball, m)
        # circle of radius R at the origin in the (e1,e2) tangent plane
        s3 = X[:, 3]
        d1 = np.arcsinh(np.abs(s3))
        nrm = np.zeros(4)
        nrm[3] = 1.0
        foot = K.batch_normalize_point(X - s3[:, None] * nrm[None, :])
        dctr = np.arccosh(np.clip(foot[:, 0], 1.0, None))
        d2 = np.abs(dctr - R)
        c1 = 2.0 * np.sinh(0.5 * d1) ** 2
        c2 = 2.0 * np.sinh(0.5 * d2) ** 2
        s = c1 + c2 + c1 * c2
        dist = np.arcsinh(np.sqrt(s * (2.0 + s)))
        hits += int((dist <= Kb).sum())
        done += m
    return hits / samples * ball_volume(r_ball)


def _audit_L5(params, trials, rng):
    """Monte Carlo tube volume does not exceed the covering bound V."""
    sigma = _require_sigma(params)
    v_bound = V_bound(sigma, params.a, params.b, params.R)
    estimate = mc_tube_volume(params, trials, rng)
    margin = v_bound - estimate
    return int(margin < -AUDIT_SLACK), float(margin)


_AUDITS = {"L1": _audit_L1, "L2": _audit_L2, "L3": _audit_L3,
           "L4": _audit_L4, "L5": _audit_L5}


def audit_lemma(lemma_id: str, params: ThickParams, trials: int,
                seed: int) -> AuditResult:
    """Run `trials` randomized checks of one lemma; deterministic per seed."""
    if lemma_id not in _AUDITS:
        raise BadLemmaId(f"unknown lemma id {lemma_id!r}")
    if trials < 1:
        raise BadParams("trials must be >= 1")
    rng = np.random.default_rng(
        np.random.SeedSequence((LEMMA_IDS.index(lemma_id), seed)))
    failures, worst = _AUDITS[lemma_id](params, trials, rng)
    return AuditResult(lemma_id=lemma_id, trials=trials, failures=failures,
                       worst_margin=worst, seed=seed)
