"""Global epsilon registry.

Every tolerance used by the kernel or asserted by a test lives here, so the
two can never drift apart.  Values are fixed by the operation contracts.
"""

# Type invariants
HPOINT_NORM_TOL = 1e-12     # |<p,p> + 1| for hyperboloid points
PLANE_NORM_TOL = 1e-12      # |<n,n> - 1| for plane normals
CIRCLE_ON_PLANE_TOL = 1e-10  # circle center must lie on its plane
LINE_ANCHOR_SEP = 1e-9      # minimum distance between line anchors

# Degeneracy thresholds (one order below the smallest pipeline feature)
DEGENERATE_TOL = 1e-10      # collinear / coplanar cutoff

# Predicate robustness: float determinants smaller than this (at unit
# coordinate scale) are recomputed with exact rational arithmetic.  The
# adaptive filter multiplies the determinant's permanent by
# PREDICATE_FILTER_FACTOR (about 1000x machine epsilon, so every genuinely
# ambiguous sign is exactified with two orders of safety margin).
PREDICATE_EXACT_TOL = 1e-10
PREDICATE_FILTER_FACTOR = 1e-13

# Empty-circumsphere slack, applied to cosh distances.
EMPTY_SPHERE_COSH_TOL = 1e-10

# Equidistance check for circumcenters.
EQUIDISTANT_TOL = 1e-10

# Separation slack for stored point sets.
SEPARATION_TOL = 1e-12

# Good-perturbation displacement slack.
MOVE_TOL = 1e-12

# Size-window slack (circumradius / edge-length checks on interior tets).
WINDOW_TOL = 1e-9

# Randomized lemma audits: most-negative admissible margin.
AUDIT_SLACK = 1e-9

# Isometry equivariance checks.
ISOMETRY_TOL = 1e-9

# 1-D bisection tolerance for the inscribed-isosceles altitude solve.
BISECTION_TOL = 1e-12

# Poincare-ball inverse map rejects norms >= 1 - this.
BALL_BOUNDARY_TOL = 1e-12

# Genericity jitter radius, as a fraction of the sample separation.
JITTER_FRACTION = 1e-7

# Consecutive rejected probes required to certify sample maximality.
MAXIMALITY_PROBES = 50_000

# Rejection cap for a single vertex perturbation.
MAX_PERTURB_ATTEMPTS = 10_000

# Sigma-halving restarts allowed before a desliver pass gives up.
MAX_SIGMA_HALVINGS = 5

# Sigma ladder depth for choose_sigma.
SIGMA_LADDER_MAX_K = 200
