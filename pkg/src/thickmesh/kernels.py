"""Numeric kernels for the hyperboloid model.

Scalar cores (Minkowski products, stable distances, tetrahedron quality,
Euclidean orientation/insphere determinants, the dart-throwing sampler loop,
sliver-region membership) are written in an njit-compatible subset of NumPy.
When numba is importable and ``THICKMESH_DISABLE_NUMBA`` is unset they are
JIT-compiled; otherwise the same functions run as plain Python, and the
vectorized NumPy implementations below stand in for the batch paths.
``benchmarks/bench_kernels.py`` times both.

All inputs are float64.  Points are hyperboloid 4-vectors unless a function
name says otherwise ("ball" = Poincare-ball 3-vectors).
"""

import os
from fractions import Fraction

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via env flag instead
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("THICKMESH_DISABLE_NUMBA", "0") != "1"


def maybe_njit(func):
    """Compile with numba when enabled, otherwise return the function as-is."""
    if USE_NUMBA:
        return numba.njit(cache=True)(func)
    return func


# ---------------------------------------------------------------------------
# Scalar Minkowski primitives
# ---------------------------------------------------------------------------

@maybe_njit
def mink_dot(u, v):
    return -u[0] * v[0] + u[1] * v[1] + u[2] * v[2] + u[3] * v[3]


@maybe_njit
def hyp_dist(p, q):
    # arcsinh form of arccosh(-<p,q>), computed from coordinate differences;
    # stable down to distances ~1e-8 where the direct dot loses all digits.
    d0 = p[0] - q[0]
    d1 = p[1] - q[1]
    d2 = p[2] - q[2]
    d3 = p[3] - q[3]
    s = 0.5 * (-d0 * d0 + d1 * d1 + d2 * d2 + d3 * d3)
    if s < 0.0:
        s = 0.0
    return np.arcsinh(np.sqrt(s * (2.0 + s)))


@maybe_njit
def sinh_minus_x(x):
    """sinh(x) - x without cancellation (underflows to 0 in the direct form
    for x below ~2e-8)."""
    if x > 0.2:
        return np.sinh(x) - x
    x2 = x * x
    return (x * x2 / 6.0) * (1.0 + x2 / 20.0 * (1.0 + x2 / 42.0 * (
        1.0 + x2 / 72.0 * (1.0 + x2 / 110.0))))


@maybe_njit
def normalize_point(v):
    """Scale a timelike vector onto the upper hyperboloid sheet."""
    nn = -mink_dot(v, v)
    out = np.empty(4)
    if nn <= 0.0:
        out[0] = np.nan
        return out
    f = 1.0 / np.sqrt(nn)
    if v[0] < 0.0:
        f = -f
    for i in range(4):
        out[i] = v[i] * f
    return out


@maybe_njit
def _det3(a00, a01, a02, a10, a11, a12, a20, a21, a22):
    return (a00 * (a11 * a22 - a12 * a21)
            - a01 * (a10 * a22 - a12 * a20)
            + a02 * (a10 * a21 - a11 * a20))


@maybe_njit
def orth4(u, v, w):
    """Minkowski-orthogonal complement of three 4-vectors.

    Returns x with <x,u> = <x,v> = <x,w> = 0 (Minkowski), up to scale.
    """
    m0 = _det3(u[1], u[2], u[3], v[1], v[2], v[3], w[1], w[2], w[3])
    m1 = _det3(u[0], u[2], u[3], v[0], v[2], v[3], w[0], w[2], w[3])
    m2 = _det3(u[0], u[1], u[3], v[0], v[1], v[3], w[0], w[1], w[3])
    m3 = _det3(u[0], u[1], u[2], v[0], v[1], v[2], w[0], w[1], w[2])
    out = np.empty(4)
    out[0] = m0
    out[1] = m1
    out[2] = -m2
    out[3] = m3
    return out


@maybe_njit
def plane_unit_normal(q, r, s):
    """Unit spacelike normal of the geodesic plane through q, r, s.

    Returns (ok, n); ok = False when the points are collinear (no unique
    plane) at the working scale.
    """
    u = np.empty(4)
    v = np.empty(4)
    for i in range(4):
        u[i] = r[i] - q[i]
        v[i] = s[i] - q[i]
    n = orth4(q, u, v)
    nn = mink_dot(n, n)
    scale = n[0] * n[0] + n[1] * n[1] + n[2] * n[2] + n[3] * n[3]
    if scale <= 0.0 or nn <= 1e-28 * scale:
        return False, n
    f = 1.0 / np.sqrt(nn)
    for i in range(4):
        n[i] *= f
    return True, n


@maybe_njit
def timelike_center(d1, d2, d3):
    """Normalize the orthogonal complement of three difference vectors to a
    hyperboloid point.  Returns (ok, center); ok = False when the complement
    is not timelike (no equidistant point in H^3)."""
    c = orth4(d1, d2, d3)
    cc = mink_dot(c, c)
    scale = c[0] * c[0] + c[1] * c[1] + c[2] * c[2] + c[3] * c[3]
    if scale <= 0.0 or -cc <= 1e-28 * scale:
        return False, c
    f = 1.0 / np.sqrt(-cc)
    if c[0] < 0.0:
        f = -f
    out = np.empty(4)
    for i in range(4):
        out[i] = c[i] * f
    return True, out


# Tet quality status codes
TQ_OK = 0
TQ_COPLANAR = 1
TQ_NO_CIRCUMSPHERE = 2
TQ_BAD_FACE = 3

_EDGE_PAIRS = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]],
                       dtype=np.int64)
_FACE_OPP = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]],
                     dtype=np.int64)


@maybe_njit
def tet_quality_core(P, degenerate_tol):
    """All per-tetrahedron quality quantities in one pass.

    P is a (4,4) array of hyperboloid points.  Returns a (18,) array:
    [status, R_t, l_t, d_0..d_3, c_0..c_3, e_01 e_02 e_03 e_12 e_13 e_23,
    min_dihedral].  On status != 0 the remaining entries are undefined.
    """
    out = np.zeros(18)

    # Edge lengths and shortest edge.
    l_t = np.inf
    for k in range(6):
        i = _EDGE_PAIRS[k, 0]
        j = _EDGE_PAIRS[k, 1]
        e = hyp_dist(P[i], P[j])
        out[11 + k] = e
        if e < l_t:
            l_t = e
    out[2] = l_t

    # Face planes (normal oriented toward the opposite vertex) and vertex
    # heights d_v = arcsinh(|<p, n>|).
    normals = np.empty((4, 4))
    for v in range(4):
        q = P[_FACE_OPP[v, 0]]
        r = P[_FACE_OPP[v, 1]]
        s = P[_FACE_OPP[v, 2]]
        ok, n = plane_unit_normal(q, r, s)
        if not ok:
            out[0] = TQ_BAD_FACE
            return out
        sgn = mink_dot(n, P[v])
        if sgn < 0.0:
            for i in range(4):
                n[i] = -n[i]
            sgn = -sgn
        normals[v] = n
        out[3 + v] = np.arcsinh(sgn)

    dmin = out[3]
    for v in range(1, 4):
        if out[3 + v] < dmin:
            dmin = out[3 + v]
    if dmin < degenerate_tol:
        out[0] = TQ_COPLANAR
        return out

    # Circumsphere.
    d1 = np.empty(4)
    d2 = np.empty(4)
    d3 = np.empty(4)
    for i in range(4):
        d1[i] = P[0][i] - P[1][i]
        d2[i] = P[0][i] - P[2][i]
        d3[i] = P[0][i] - P[3][i]
    ok, center = timelike_center(d1, d2, d3)
    if not ok:
        out[0] = TQ_NO_CIRCUMSPHERE
        return out
    out[1] = hyp_dist(center, P[0])

    # Face circumcircles c_v.
    for v in range(4):
        q = P[_FACE_OPP[v, 0]]
        r = P[_FACE_OPP[v, 1]]
        s = P[_FACE_OPP[v, 2]]
        for i in range(4):
            d1[i] = q[i] - r[i]
            d2[i] = q[i] - s[i]
        ok, fc = timelike_center(d1, d2, normals[v])
        if not ok:
            out[0] = TQ_BAD_FACE
            return out
        out[7 + v] = hyp_dist(fc, q)

    # Dihedral angles: along edge (i,j) the incident faces are those opposite
    # the other two vertices; with inward normals cos(theta) = -<n_a, n_b>.
    min_dih = np.inf
    for k in range(6):
        i = _EDGE_PAIRS[k, 0]
        j = _EDGE_PAIRS[k, 1]
        a = -1
        b = -1
        for v in range(4):
            if v != i and v != j:
                if a < 0:
                    a = v
                else:
                    b = v
        c = -mink_dot(normals[a], normals[b])
        if c > 1.0:
            c = 1.0
        if c < -1.0:
            c = -1.0
        ang = np.arccos(c)
        if ang < min_dih:
            min_dih = ang
    out[17] = min_dih
    out[0] = TQ_OK
    return out


@maybe_njit
def tet_quality_batch_loop(Ps, degenerate_tol, out):
    for i in range(Ps.shape[0]):
        out[i] = tet_quality_core(Ps[i], degenerate_tol)


# ---------------------------------------------------------------------------
# Sliver-region membership
# ---------------------------------------------------------------------------

@maybe_njit
def _region_any_loop(p, tris, lo, hi, cap_r, rho, sigma, degenerate_tol):
    P = np.empty((4, 4))
    for i in range(4):
        P[0, i] = p[i]
    for k in range(tris.shape[0]):
        skip = False
        for j in range(3):
            d = hyp_dist(p, tris[k, j])
            if d < lo or d > hi:
                skip = True
                break
        if skip:
            continue
        for j in range(3):
            for i in range(4):
                P[1 + j, i] = tris[k, j, i]
        q = tet_quality_core(P, degenerate_tol)
        if q[0] != 0.0:
            continue
        if q[1] > cap_r:
            continue
        if q[1] > rho * q[2]:
            continue
        ratio_min = np.inf
        for v in range(4):
            rr = q[3 + v] / q[7 + v]
            if rr < ratio_min:
                ratio_min = rr
        if ratio_min <= sigma:
            return True
    return False


def _region_any_numpy(p, tris, lo, hi, cap_r, rho, sigma, degenerate_tol):
    if tris.shape[0] == 0:
        return False
    d = batch_hyp_dist(tris, p[None, None, :])
    mask = np.all((d >= lo) & (d <= hi), axis=1)
    if not mask.any():
        return False
    cand = tris[mask]
    Ps = np.empty((cand.shape[0], 4, 4))
    Ps[:, 0] = p
    Ps[:, 1:] = cand
    q = batch_tet_quality(Ps, degenerate_tol)
    ok = q[:, 0] == 0.0
    ok &= q[:, 1] <= cap_r
    ok &= q[:, 1] <= rho * q[:, 2]
    ok &= (q[:, 3:7] / q[:, 7:11]).min(axis=1) <= sigma
    return bool(ok.any())


def region_any(p, tris, lo, hi, cap_r, rho, sigma, degenerate_tol):
    """True when apex p falls in the sliver region of any listed triangle.

    tris is (m,3,4); triangles are assumed to already satisfy the edge and
    circumradius window (triangles that do not bound an empty region)."""
    if USE_NUMBA:
        return bool(_region_any_loop(p, tris, lo, hi, cap_r, rho, sigma,
                                     degenerate_tol))
    return _region_any_numpy(p, tris, lo, hi, cap_r, rho, sigma,
                             degenerate_tol)


# ---------------------------------------------------------------------------
# Euclidean predicates (Poincare-ball coordinates)
# ---------------------------------------------------------------------------

@maybe_njit
def orient3d_det(pa, pb, pc, pd):
    return _det3(pb[0] - pa[0], pb[1] - pa[1], pb[2] - pa[2],
                 pc[0] - pa[0], pc[1] - pa[1], pc[2] - pa[2],
                 pd[0] - pa[0], pd[1] - pa[1], pd[2] - pa[2])


@maybe_njit
def insphere_det(pa, pb, pc, pd, pe):
    aex = pa[0] - pe[0]
    aey = pa[1] - pe[1]
    aez = pa[2] - pe[2]
    bex = pb[0] - pe[0]
    bey = pb[1] - pe[1]
    bez = pb[2] - pe[2]
    cex = pc[0] - pe[0]
    cey = pc[1] - pe[1]
    cez = pc[2] - pe[2]
    dex = pd[0] - pe[0]
    dey = pd[1] - pe[1]
    dez = pd[2] - pe[2]
    alift = aex * aex + aey * aey + aez * aez
    blift = bex * bex + bey * bey + bez * bez
    clift = cex * cex + cey * cey + cez * cez
    dlift = dex * dex + dey * dey + dez * dez
    ab = aex * bey - bex * aey
    ac = aex * cey - cex * aey
    ad = aex * dey - dex * aey
    bc = bex * cey - cex * bey
    bd = bex * dey - dex * bey
    cd = cex * dey - dex * cey
    abc = aez * bc - bez * ac + cez * ab
    abd = aez * bd - bez * ad + dez * ab
    acd = aez * cd - cez * ad + dez * ac
    bcd = bez * cd - cez * bd + dez * bc
    return dlift * abc - clift * abd + blift * acd - alift * bcd


def _orient3d_exact(pa, pb, pc, pd):
    a = [Fraction(float(x)) for x in pa]
    b = [Fraction(float(x)) for x in pb]
    c = [Fraction(float(x)) for x in pc]
    d = [Fraction(float(x)) for x in pd]
    m = [[b[i] - a[i] for i in range(3)],
         [c[i] - a[i] for i in range(3)],
         [d[i] - a[i] for i in range(3)]]
    det = (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
           - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
           + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))
    return 1 if det > 0 else (-1 if det < 0 else 0)


def _insphere_exact(pa, pb, pc, pd, pe):
    rows = []
    e = [Fraction(float(x)) for x in pe]
    for p in (pa, pb, pc, pd):
        r = [Fraction(float(x)) - e[i] for i, x in enumerate(p)]
        r.append(r[0] * r[0] + r[1] * r[1] + r[2] * r[2])
        rows.append(r)

    def det4(m):
        total = Fraction(0)
        for j in range(4):
            minor = [[m[r][c] for c in range(4) if c != j] for r in (1, 2, 3)]
            d3 = (minor[0][0] * (minor[1][1] * minor[2][2] - minor[1][2] * minor[2][1])
                  - minor[0][1] * (minor[1][0] * minor[2][2] - minor[1][2] * minor[2][0])
                  + minor[0][2] * (minor[1][0] * minor[2][1] - minor[1][1] * minor[2][0]))
            total += (-1) ** j * m[0][j] * d3
        return total

    # Same cofactor structure as the float path: det of rows
    # [a-e|alift; b-e|blift; c-e|clift; d-e|dlift].
    det = det4(rows)
    return 1 if det > 0 else (-1 if det < 0 else 0)


@maybe_njit
def _orient3d_filtered(pa, pb, pc, pd, tol_factor):
    """Sign of orient3d, or 0 when the float value is within the forward
    error bound of zero (static filter; the bound is tol_factor times the
    permanent of the determinant, with tol_factor >> machine epsilon)."""
    ax = pb[0] - pa[0]
    ay = pb[1] - pa[1]
    az = pb[2] - pa[2]
    bx = pc[0] - pa[0]
    by = pc[1] - pa[1]
    bz = pc[2] - pa[2]
    cx = pd[0] - pa[0]
    cy = pd[1] - pa[1]
    cz = pd[2] - pa[2]
    det = (ax * (by * cz - bz * cy)
           - ay * (bx * cz - bz * cx)
           + az * (bx * cy - by * cx))
    perm = (abs(ax) * (abs(by * cz) + abs(bz * cy))
            + abs(ay) * (abs(bx * cz) + abs(bz * cx))
            + abs(az) * (abs(bx * cy) + abs(by * cx)))
    bound = tol_factor * perm
    if det > bound:
        return 1
    if det < -bound:
        return -1
    return 0


@maybe_njit
def _insphere_filtered(pa, pb, pc, pd, pe, tol_factor):
    aex = pa[0] - pe[0]
    aey = pa[1] - pe[1]
    aez = pa[2] - pe[2]
    bex = pb[0] - pe[0]
    bey = pb[1] - pe[1]
    bez = pb[2] - pe[2]
    cex = pc[0] - pe[0]
    cey = pc[1] - pe[1]
    cez = pc[2] - pe[2]
    dex = pd[0] - pe[0]
    dey = pd[1] - pe[1]
    dez = pd[2] - pe[2]
    alift = aex * aex + aey * aey + aez * aez
    blift = bex * bex + bey * bey + bez * bez
    clift = cex * cex + cey * cey + cez * cez
    dlift = dex * dex + dey * dey + dez * dez
    ab = aex * bey - bex * aey
    ac = aex * cey - cex * aey
    ad = aex * dey - dex * aey
    bc = bex * cey - cex * bey
    bd = bex * dey - dex * bey
    cd = cex * dey - dex * cey
    abc = aez * bc - bez * ac + cez * ab
    abd = aez * bd - bez * ad + dez * ab
    acd = aez * cd - cez * ad + dez * ac
    bcd = bez * cd - cez * bd + dez * bc
    det = dlift * abc - clift * abd + blift * acd - alift * bcd
    ab_m = abs(aex * bey) + abs(bex * aey)
    ac_m = abs(aex * cey) + abs(cex * aey)
    ad_m = abs(aex * dey) + abs(dex * aey)
    bc_m = abs(bex * cey) + abs(cex * bey)
    bd_m = abs(bex * dey) + abs(dex * bey)
    cd_m = abs(cex * dey) + abs(dex * cey)
    abc_m = abs(aez) * bc_m + abs(bez) * ac_m + abs(cez) * ab_m
    abd_m = abs(aez) * bd_m + abs(bez) * ad_m + abs(dez) * ab_m
    acd_m = abs(aez) * cd_m + abs(cez) * ad_m + abs(dez) * ac_m
    bcd_m = abs(bez) * cd_m + abs(cez) * bd_m + abs(dez) * bc_m
    perm = dlift * abc_m + clift * abd_m + blift * acd_m + alift * bcd_m
    bound = tol_factor * perm
    if det > bound:
        return 1
    if det < -bound:
        return -1
    return 0


def orient3d_sign(pa, pb, pc, pd, exact_tol):
    """Sign of orient3d; exact rational fallback when the float determinant
    is within the (scale-relative) exact_tol filter of zero."""
    s = _orient3d_filtered(pa, pb, pc, pd, exact_tol)
    if s != 0:
        return s
    return _orient3d_exact(pa, pb, pc, pd)


def insphere_sign(pa, pb, pc, pd, pe, exact_tol):
    s = _insphere_filtered(pa, pb, pc, pd, pe, exact_tol)
    if s != 0:
        return s
    return _insphere_exact(pa, pb, pc, pd, pe)


# ---------------------------------------------------------------------------
# Dart-throwing sampler loop
# ---------------------------------------------------------------------------

GRID_BUCKET = 24


@maybe_njit
def _cell_index(x, y, z, origin, cell, dims):
    i = int((x - origin) / cell)
    j = int((y - origin) / cell)
    k = int((z - origin) / cell)
    if i < 0:
        i = 0
    if j < 0:
        j = 0
    if k < 0:
        k = 0
    if i >= dims:
        i = dims - 1
    if j >= dims:
        j = dims - 1
    if k >= dims:
        k = dims - 1
    return (i * dims + j) * dims + k


@maybe_njit
def _covered(ph, pb, pts_h, grid_count, grid_items, origin, cell, dims,
             cosh_eps, tanh_half_eps):
    """True when a probe lies within eps of a stored sample.

    The hyperbolic eps-ball around ball-model point u is the Euclidean ball
    with center u*(1-t^2)/(1-t^2|u|^2) and radius t*(1-|u|^2)/(1-t^2|u|^2),
    t = tanh(eps/2); the scan covers exactly the grid cells meeting it.
    """
    t = tanh_half_eps
    uu = pb[0] * pb[0] + pb[1] * pb[1] + pb[2] * pb[2]
    denom = 1.0 - t * t * uu
    f = (1.0 - t * t) / denom
    cx = pb[0] * f
    cy = pb[1] * f
    cz = pb[2] * f
    r_e = t * (1.0 - uu) / denom

    i0 = int((cx - r_e - origin) / cell)
    i1 = int((cx + r_e - origin) / cell)
    j0 = int((cy - r_e - origin) / cell)
    j1 = int((cy + r_e - origin) / cell)
    k0 = int((cz - r_e - origin) / cell)
    k1 = int((cz + r_e - origin) / cell)
    if i0 < 0:
        i0 = 0
    if j0 < 0:
        j0 = 0
    if k0 < 0:
        k0 = 0
    if i1 >= dims:
        i1 = dims - 1
    if j1 >= dims:
        j1 = dims - 1
    if k1 >= dims:
        k1 = dims - 1
    for i in range(i0, i1 + 1):
        for j in range(j0, j1 + 1):
            base = (i * dims + j) * dims
            for k in range(k0, k1 + 1):
                c = base + k
                cnt = grid_count[c]
                for b in range(cnt):
                    idx = grid_items[c * GRID_BUCKET + b]
                    q = pts_h[idx]
                    if -mink_dot(ph, q) < cosh_eps:
                        return True
    return False


@maybe_njit
def run_darts(probes_h, probes_b, pts_h, pts_b, n_pts, grid_count, grid_items,
              origin, cell, dims, cosh_eps, tanh_half_eps, streak,
              target_streak):
    """Process a batch of probes; insert uncovered probes as samples.

    Returns (n_pts, streak, consumed, overflow).  Stops early once the streak
    of consecutive covered (rejected) probes reaches target_streak or the
    point storage fills.
    """
    n = probes_h.shape[0]
    consumed = 0
    for m in range(n):
        if streak >= target_streak:
            break
        if n_pts >= pts_h.shape[0]:
            break
        consumed = m + 1
        ph = probes_h[m]
        pb = probes_b[m]
        if _covered(ph, pb, pts_h, grid_count, grid_items, origin, cell, dims,
                    cosh_eps, tanh_half_eps):
            streak += 1
        else:
            for i in range(4):
                pts_h[n_pts, i] = ph[i]
            for i in range(3):
                pts_b[n_pts, i] = pb[i]
            c = _cell_index(pb[0], pb[1], pb[2], origin, cell, dims)
            cnt = grid_count[c]
            if cnt >= GRID_BUCKET:
                return n_pts, streak, consumed, True
            grid_items[c * GRID_BUCKET + cnt] = n_pts
            grid_count[c] = cnt + 1
            n_pts += 1
            streak = 0
    return n_pts, streak, consumed, False


# ---------------------------------------------------------------------------
# Batch (vectorized NumPy) paths -- shared by audits, reports and the
# no-numba fallbacks.
# ---------------------------------------------------------------------------

_METRIC = np.array([-1.0, 1.0, 1.0, 1.0])


def batch_mink_dot(A, B):
    return np.einsum("...i,...i->...", A * _METRIC, B)


def batch_hyp_dist(A, B):
    D = A - B
    s = 0.5 * batch_mink_dot(D, D)
    np.clip(s, 0.0, None, out=s)
    return np.arcsinh(np.sqrt(s * (2.0 + s)))


def batch_normalize_point(V):
    nn = -batch_mink_dot(V, V)
    out = V / np.sqrt(nn)[..., None]
    return out * np.sign(out[..., :1])


def _batch_det3(M):
    # M: (..., 3, 3); explicit cofactors mirror the scalar kernel.
    return (M[..., 0, 0] * (M[..., 1, 1] * M[..., 2, 2] - M[..., 1, 2] * M[..., 2, 1])
            - M[..., 0, 1] * (M[..., 1, 0] * M[..., 2, 2] - M[..., 1, 2] * M[..., 2, 0])
            + M[..., 0, 2] * (M[..., 1, 0] * M[..., 2, 1] - M[..., 1, 1] * M[..., 2, 0]))


def batch_orth4(U, V, W):
    """Vectorized orth4: U, V, W are (...,4); returns (...,4)."""
    M = np.stack([U, V, W], axis=-2)
    cols = np.arange(4)
    out = np.empty(U.shape)
    sign = np.array([1.0, 1.0, -1.0, 1.0])
    for j in range(4):
        keep = cols != j
        out[..., j] = sign[j] * _batch_det3(M[..., keep])
    return out


def batch_timelike_center(D1, D2, D3):
    C = batch_orth4(D1, D2, D3)
    cc = batch_mink_dot(C, C)
    scale = np.einsum("...i,...i->...", C, C)
    ok = (scale > 0.0) & (-cc > 1e-28 * scale)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = C / np.sqrt(np.where(ok, -cc, 1.0))[..., None]
        out = out * np.sign(out[..., :1])
    return ok, out


def batch_plane_normal(Q, R, S):
    N = batch_orth4(Q, R - Q, S - Q)
    nn = batch_mink_dot(N, N)
    scale = np.einsum("...i,...i->...", N, N)
    ok = (scale > 0.0) & (nn > 1e-28 * scale)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = N / np.sqrt(np.where(ok, nn, 1.0))[..., None]
    return ok, out


def batch_tet_quality(Ps, degenerate_tol):
    """Vectorized mirror of tet_quality_core; Ps is (n,4,4), returns (n,18)."""
    n = Ps.shape[0]
    out = np.zeros((n, 18))
    if n == 0:
        return out

    for k in range(6):
        i, j = _EDGE_PAIRS[k]
        out[:, 11 + k] = batch_hyp_dist(Ps[:, i], Ps[:, j])
    out[:, 2] = out[:, 11:17].min(axis=1)

    normals = np.empty((n, 4, 4))
    bad_face = np.zeros(n, dtype=bool)
    for v in range(4):
        q, r, s = (Ps[:, _FACE_OPP[v, 0]], Ps[:, _FACE_OPP[v, 1]],
                   Ps[:, _FACE_OPP[v, 2]])
        ok, nrm = batch_plane_normal(q, r, s)
        bad_face |= ~ok
        sgn = batch_mink_dot(nrm, Ps[:, v])
        nrm = nrm * np.sign(sgn)[:, None]
        normals[:, v] = nrm
        out[:, 3 + v] = np.arcsinh(np.abs(sgn))
    coplanar = out[:, 3:7].min(axis=1) < degenerate_tol

    ok_c, centers = batch_timelike_center(Ps[:, 0] - Ps[:, 1],
                                          Ps[:, 0] - Ps[:, 2],
                                          Ps[:, 0] - Ps[:, 3])
    out[:, 1] = np.where(ok_c, batch_hyp_dist(centers, Ps[:, 0]), np.nan)

    for v in range(4):
        q, r, s = (Ps[:, _FACE_OPP[v, 0]], Ps[:, _FACE_OPP[v, 1]],
                   Ps[:, _FACE_OPP[v, 2]])
        ok_f, fc = batch_timelike_center(q - r, q - s, normals[:, v])
        bad_face |= ~ok_f
        out[:, 7 + v] = np.where(ok_f, batch_hyp_dist(fc, q), np.nan)

    min_dih = np.full(n, np.inf)
    for k in range(6):
        i, j = _EDGE_PAIRS[k]
        a, b = [v for v in range(4) if v != i and v != j]
        c = -batch_mink_dot(normals[:, a], normals[:, b])
        np.clip(c, -1.0, 1.0, out=c)
        min_dih = np.minimum(min_dih, np.arccos(c))
    out[:, 17] = min_dih

    out[:, 0] = np.where(bad_face, TQ_BAD_FACE,
                         np.where(coplanar, TQ_COPLANAR,
                                  np.where(~ok_c, TQ_NO_CIRCUMSPHERE, TQ_OK)))
    return out


def batch_tet_quality_dispatch(Ps, degenerate_tol):
    """Scalar-loop path under numba, vectorized path otherwise."""
    if USE_NUMBA:
        out = np.empty((Ps.shape[0], 18))
        tet_quality_batch_loop(np.ascontiguousarray(Ps), degenerate_tol, out)
        return out
    return batch_tet_quality(Ps, degenerate_tol)


def batch_tri_circumradius(T):
    """Circumradius of each triangle in T (m,3,4).

    Returns (ok, radius); ok = False where no circumcircle exists."""
    q, r, s = T[:, 0], T[:, 1], T[:, 2]
    ok_n, n = batch_plane_normal(q, r, s)
    ok_c, c = batch_timelike_center(q - r, q - s, n)
    ok = ok_n & ok_c
    with np.errstate(invalid="ignore"):
        rad = np.where(ok, batch_hyp_dist(c, q), np.nan)
    return ok, rad


def ball_to_hyperboloid(U):
    """Poincare-ball (...,3) -> hyperboloid (...,4)."""
    uu = np.einsum("...i,...i->...", U, U)
    denom = 1.0 - uu
    out = np.empty(U.shape[:-1] + (4,))
    out[..., 0] = (1.0 + uu) / denom
    out[..., 1:] = 2.0 * U / denom[..., None]
    return out


def hyperboloid_to_ball(P):
    """Hyperboloid (...,4) -> Poincare-ball (...,3)."""
    return P[..., 1:] / (1.0 + P[..., :1])
