"""Quality bounds and sliver predicates.

Houses the parameter bundle (mu, eps, delta, a, b, R, rho, sigma), the
explicit constants theta, h0/h1, n, J, K, V, the neighbor cap (m, N), the
sigma ladder, and the sliver predicates used by the perturbation pass.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels as K
from .errors import BadParams, DegenerateTet, NoFeasibleSigma, OutOfDomain
from .hyperbolic import HPoint, ball_volume
from .tolerances import BISECTION_TOL, DEGENERATE_TOL, SIGMA_LADDER_MAX_K

__all__ = [
    "ThickParams", "derive_params", "with_sigma", "theta_bound", "h1_altitude",
    "h0_bound", "n_bound", "J_bound", "K_bound", "V_bound", "neighbor_cap",
    "choose_sigma", "TetQuality", "tet_quality", "is_sliver",
    "SliverRegionSpec", "in_sliver_region",
]


@dataclass(frozen=True)
class ThickParams:
    """Parameter bundle tying the bounds together.

    eps is the sample separation, delta the perturbation radius; the derived
    window is a = eps - 2*delta, b = 2*eps + 2*delta, R = eps + delta, and
    rho = (eps + delta)/(eps - 2*delta).  sigma is the sliver flatness
    threshold (may be unset until chosen).
    """

    mu: float
    eps: float
    delta: float
    a: float
    b: float
    R: float
    rho: float
    sigma: float | None
    mode: str

    def __post_init__(self):
        if not (self.eps > 0 and self.delta > 0):
            raise BadParams("eps and delta must be positive")
        if self.delta > self.eps / 10 * (1 + 1e-12):
            raise BadParams("delta must not exceed eps/10")
        if not (self.a > 0 and self.a < self.b and self.R < self.b):
            raise BadParams("window constants out of order")
        if abs(self.rho - (self.eps + self.delta) / (self.eps - 2 * self.delta)) > 1e-12 * self.rho:
            raise BadParams("rho must equal (eps + delta)/(eps - 2*delta)")
        if self.sigma is not None and not self.sigma > 0:
            raise BadParams("sigma must be positive")


def derive_params(mu=None, sigma=None, mode="paper", *, eps=None, delta=None):
    """Build ThickParams.

    In paper mode eps := mu/100; geometry mode takes eps directly (and
    records mu = 100*eps).  delta defaults to eps/10 and may only be
    overridden downward.
    """
    if mode == "paper":
        if mu is None or not mu > 0:
            raise BadParams("paper mode needs mu > 0")
        eps = mu / 100.0
    elif mode == "geometry":
        if eps is None or not eps > 0:
            raise BadParams("geometry mode needs eps > 0")
        mu = 100.0 * eps
    else:
        raise BadParams(f"unknown mode {mode!r}")
    if delta is None:
        delta = eps / 10.0
    return ThickParams(
        mu=mu, eps=eps, delta=delta,
        a=eps - 2.0 * delta, b=2.0 * eps + 2.0 * delta, R=eps + delta,
        rho=(eps + delta) / (eps - 2.0 * delta),
        sigma=sigma, mode=mode,
    )


def with_sigma(params: ThickParams, sigma: float) -> ThickParams:
    return replace(params, sigma=sigma)


def _require_sigma(params):
    if params.sigma is None:
        raise BadParams("params.sigma is unset")
    return params.sigma


# ---------------------------------------------------------------------------
# Explicit constants
# ---------------------------------------------------------------------------

def theta_bound(a: float, b: float, sigma: float) -> float:
    """Dihedral-angle floor: arcsin(sinh(sigma*a/2) / sinh(b))."""
    if not (0 < a <= b and sigma > 0):
        raise OutOfDomain("need 0 < a <= b and sigma > 0")
    x = math.sinh(sigma * a / 2.0) / math.sinh(b)
    if x > 1.0:
        raise OutOfDomain("sinh(sigma*a/2) exceeds sinh(b)")
    return math.asin(x)


def h1_altitude(a: float, r0: float) -> float:
    """Altitude proxy of the extremal inscribed isosceles triangle.

    Legs of length a inscribed in a circle of radius r0; the altitude foot x
    splits two right triangles, giving cosh(a) = cosh(h) cosh(u) and
    cosh(r0) = cosh(r0 - h) cosh(u) for the altitude h and half-base u.
    Eliminating u collapses the system to tanh(h) = (cosh a - 1)/(cosh a
    tanh r0), solved directly (the 1-D root is unique; bisection to 1e-12
    reproduces the same value and remains as a test oracle).  The returned
    bound is |a - u|, the law-of-cosines estimate with the cosine dropped.
    """
    if not (a > 0 and r0 > 0) or a > 2.0 * r0:
        raise OutOfDomain("no isosceles triangle with legs a inscribes in radius r0")
    cosh_a_m1 = 2.0 * math.sinh(0.5 * a) ** 2
    h = math.atanh(cosh_a_m1 / (math.cosh(a) * math.tanh(r0)))
    # u from cosh(u) = cosh(a)/cosh(h), in product form for small arguments:
    # sinh^2(u) = (cosh a - cosh h)(cosh a + cosh h) / cosh^2 h.
    num = 2.0 * math.sinh(0.5 * (a + h)) * math.sinh(0.5 * (a - h))
    u = math.asinh(math.sqrt(num * (math.cosh(a) + math.cosh(h))) / math.cosh(h))
    return abs(a - u)


def h0_bound(a: float, b: float, R: float) -> float:
    """Altitude floor for triangles with edges in [a,b], circumradius <= R."""
    if not (0 < a <= b):
        raise OutOfDomain("need 0 < a <= b")
    if a > 2.0 * R:
        raise OutOfDomain("need a/2 <= R")
    return math.asinh(math.sinh(a) / math.sinh(b) * math.sinh(h1_altitude(a, R)))


def n_bound(sigma: float, a: float, b: float, R: float) -> float:
    """Uniform d_v/c_v cap over the vertices of a conforming sliver."""
    if sigma <= 0:
        raise OutOfDomain("sigma must be positive")
    h0 = h0_bound(a, b, R)
    return 2.0 * math.asinh(math.sinh(b) * math.sinh(sigma * R) / math.sinh(h0)) / a


def J_bound(sigma: float, a: float, b: float, R: float) -> float:
    """Half-space opening angle pi - 4*arctan(e^(-n*R)), evaluated in the
    equivalent stable form 4*arctan(tanh(n*R/2))."""
    return 4.0 * math.atan(math.tanh(0.5 * n_bound(sigma, a, b, R) * R))


def K_bound(sigma: float, a: float, b: float, R: float) -> float:
    """Distance cap from a sliver vertex to the opposite face's circumcircle."""
    n = n_bound(sigma, a, b, R)
    J = 4.0 * math.atan(math.tanh(0.5 * n * R))
    if J >= math.pi / 2.0:
        raise OutOfDomain("J >= pi/2: sigma too large for the bound to mean anything")
    return n * R + 2.0 * math.tan(J) * math.cosh(R) * math.sinh(R) / math.sinh(a / 2.0)


def V_bound(sigma: float, a: float, b: float, R: float) -> float:
    """Covering bound for the volume of the sliver region of one triangle.

    ceil(2*pi*sinh(R)/K) balls of radius 2K cover the K-neighborhood of any
    circle of radius <= R (centers spaced <= K along the circle reach every
    tube point within 3K/2).
    """
    Kv = K_bound(sigma, a, b, R)
    count = math.ceil(2.0 * math.pi * math.sinh(R) / Kv)
    return count * ball_volume(2.0 * Kv)


def neighbor_cap(params: ThickParams):
    """Ball-packing cap (m, N): m disjoint (eps/2 - delta)-balls fit in a
    (2*eps + 2*delta)-ball; N = C(m, 3) caps the relevant triangle count."""
    small = params.eps / 2.0 - params.delta
    if small <= 0:
        raise BadParams("eps/2 - delta must be positive")
    m = int(math.floor(ball_volume(2.0 * params.eps + 2.0 * params.delta)
                       / ball_volume(small)))
    n_cap = m * (m - 1) * (m - 2) // 6 if m >= 3 else 0
    return m, n_cap


def choose_sigma(params: ThickParams) -> float:
    """Largest sigma on the ladder {2^-k} whose total sliver-region volume
    budget N*V fits in half a delta-ball."""
    _, n_cap = neighbor_cap(params)
    budget = 0.5 * ball_volume(params.delta)
    for k in range(SIGMA_LADDER_MAX_K + 1):
        sigma = 2.0 ** (-k)
        try:
            v = V_bound(sigma, params.a, params.b, params.R)
        except OutOfDomain:
            continue
        if n_cap * v <= budget:
            return sigma
    raise NoFeasibleSigma(f"no feasible sigma within 2^-{SIGMA_LADDER_MAX_K}")


# ---------------------------------------------------------------------------
# Sliver predicates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TetQuality:
    """Measured quantities of one tetrahedron."""

    R_t: float
    l_t: float
    d: np.ndarray            # per-vertex distance to the opposite plane
    c: np.ndarray            # per-vertex circumradius of the opposite face
    min_dihedral: float
    edge_lengths: np.ndarray  # order (0,1),(0,2),(0,3),(1,2),(1,3),(2,3)

    @property
    def radius_edge_ratio(self):
        return self.R_t / self.l_t

    @property
    def min_flatness(self):
        return float((self.d / self.c).min())


def _tet_array(tet):
    if isinstance(tet, np.ndarray):
        return np.ascontiguousarray(tet, dtype=np.float64)
    return np.stack([p.vec if isinstance(p, HPoint) else np.asarray(p, float)
                     for p in tet])


def tet_quality(tet) -> TetQuality:
    """Measure a tetrahedron (4 HPoint, or a (4,4) coordinate array)."""
    q = K.tet_quality_core(_tet_array(tet), DEGENERATE_TOL)
    status = int(q[0])
    if status == K.TQ_COPLANAR:
        raise DegenerateTet("vertices are coplanar within 1e-10")
    if status == K.TQ_NO_CIRCUMSPHERE:
        raise DegenerateTet("no circumsphere in H^3")
    if status != K.TQ_OK:
        raise DegenerateTet("degenerate face")
    return TetQuality(R_t=float(q[1]), l_t=float(q[2]), d=q[3:7].copy(),
                      c=q[7:11].copy(), min_dihedral=float(q[17]),
                      edge_lengths=q[11:17].copy())


def _sliver_flag(quality: TetQuality, rho: float, sigma: float) -> bool:
    return (quality.radius_edge_ratio <= rho) and (quality.min_flatness <= sigma)


def is_sliver(tet, params: ThickParams):
    """(sigma, rho)-sliver test: R_t/l_t <= rho and d_v/c_v <= sigma for some
    vertex.  Returns (flag, quality)."""
    sigma = _require_sigma(params)
    quality = tet_quality(tet)
    return _sliver_flag(quality, params.rho, sigma), quality


@dataclass(frozen=True)
class SliverRegionSpec:
    """A triangle whose sliver region an apex must avoid.

    The triangle itself must satisfy the window (edges in [a,b], circumradius
    <= R); a triangle that does not bounds an empty region.
    """

    triangle: np.ndarray     # (3,4) hyperboloid coordinates
    params: ThickParams

    def __post_init__(self):
        tri = _tet_array(self.triangle)[:3]
        object.__setattr__(self, "triangle", tri)
        _require_sigma(self.params)
        a, b, R = self.params.a, self.params.b, self.params.R
        e = [float(K.hyp_dist(tri[i], tri[j]))
             for i, j in ((0, 1), (0, 2), (1, 2))]
        if min(e) < a or max(e) > b:
            raise BadParams("triangle edges outside [a, b]")
        ok, rad = K.batch_tri_circumradius(tri[None])
        if not ok[0] or rad[0] > R:
            raise BadParams("triangle circumradius exceeds R")


def in_sliver_region(p, spec: SliverRegionSpec) -> bool:
    """True when [p, q, r, s] is a (sigma, R/a)-sliver with edges in [a, b]
    and circumradius at most R.  Degenerate apex placements are not in the
    region."""
    params = spec.params
    pv = p.vec if isinstance(p, HPoint) else np.asarray(p, dtype=np.float64)
    return bool(K.region_any(pv, spec.triangle[None], params.a, params.b,
                             params.R, params.R / params.a, params.sigma,
                             DEGENERATE_TOL))
