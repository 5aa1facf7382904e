"""thickmesh: thick geodesic Delaunay triangulations of bounded domains in
hyperbolic 3-space, via sliver-removing vertex perturbation."""

from .audits import AuditResult, audit_lemma
from .delaunay import (DelaunayMesh, PointSet, SampleDomain,
                       brute_force_delaunay, build_delaunay, interior_tets,
                       load_mesh, load_points, sample_maximal, save_mesh,
                       save_points, update_vertex)
from .desliver import (PerturbRecord, candidate_triangles, desliver_pass,
                       perturb_vertex, sample_delta_ball)
from .hyperbolic import (HCircle, HLine, HPlane, HPoint, ORIGIN, ball_volume,
                         dihedral_angle, hyp_distance, project_to_line,
                         project_to_plane, tet_circumsphere, tri_circumcircle)
from .quality import (SliverRegionSpec, TetQuality, ThickParams, choose_sigma,
                      derive_params, h0_bound, in_sliver_region, is_sliver,
                      K_bound, n_bound, neighbor_cap, theta_bound, V_bound,
                      with_sigma)
from .report import QualityReport, quality_report

__version__ = "0.1.0"
