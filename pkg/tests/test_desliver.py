"""Perturbation pass: candidates, delta-ball sampling, rejection, certificates."""

import numpy as np
import pytest

from thickmesh import delaunay as D
from thickmesh import desliver as P
from thickmesh import hyperbolic as H
from thickmesh import kernels as K
from thickmesh import quality as Q
from thickmesh import desliver
from thickmesh.errors import ExhaustedAttempts
from thickmesh.report import interior_sliver_indices


@pytest.fixture(scope="module")
def geometry_mesh():
    dom = D.SampleDomain(H.ORIGIN, 1.0)
    pts = D.sample_maximal(dom, 0.2, 1)
    mesh = D.build_delaunay(pts)
    mesh.interior = D.interior_tets(mesh, dom, 0.2)
    return mesh


@pytest.fixture(scope="module")
def gparams():
    return Q.derive_params(eps=0.2, mode="geometry", sigma=0.05)


class TestCandidateTriangles:
    def test_isolated_vertex_empty(self, gparams):
        dom = D.SampleDomain(H.ORIGIN, 3.0)
        basis = H.tangent_basis(H.ORIGIN)
        # 4 clustered + 1 far-away vertex
        coords = np.stack([H.exp_map(H.ORIGIN, w).vec for w in (
            0.00 * basis[0], 0.22 * basis[0], 0.22 * basis[1],
            0.20 * basis[2], 2.5 * basis[0])])
        mesh = D.build_delaunay(D.PointSet(coords, 0.2, 0, dom))
        assert P.candidate_triangles(mesh, 4, gparams) == []

    def test_count_below_cap(self, geometry_mesh, gparams):
        _, n_cap = Q.neighbor_cap(gparams)
        for vid in range(0, len(geometry_mesh.vertices), 37):
            tris = P.candidate_triangles(geometry_mesh, vid, gparams)
            assert len(tris) <= n_cap

    def test_superset_of_incident_window_faces(self, geometry_mesh, gparams):
        # after an accepted perturbation, every window-conforming tet of the
        # new mesh incident to the vertex has its opposite face in the list
        mesh = geometry_mesh
        rng = np.random.default_rng(4)
        for vid in (10, 100, 250):
            tris = set(P.candidate_triangles(mesh, vid, gparams))
            new = H.HPoint.from_raw(
                D.ball_points(rng, mesh.vertices.point(vid),
                              0.9 * gparams.delta, 1)[0])
            moved = D.update_vertex(mesh, vid, new)
            coords = moved.vertices.coords
            for t in moved.tets:
                if vid not in t:
                    continue
                Pc = coords[t]
                edges = [float(K.hyp_dist(Pc[i], Pc[j]))
                         for i in range(4) for j in range(i + 1, 4)]
                if min(edges) < gparams.a or max(edges) > gparams.b:
                    continue  # boundary-fringe tet, exempt from the window
                face = tuple(sorted(int(v) for v in t if v != vid))
                assert face in tris


class TestSampleDeltaBall:
    def test_support(self, rng):
        c = H.ORIGIN
        for _ in range(200):
            p = P.sample_delta_ball(c, 0.02, rng)
            assert H.hyp_distance(c, p) <= 0.02 + 1e-12

    def test_radial_cdf(self, rng):
        # Kolmogorov-Smirnov against (sinh(2t)/2 - t)/(sinh(2d)/2 - d)
        delta = 0.4
        radii = np.sort([H.hyp_distance(H.ORIGIN,
                                        P.sample_delta_ball(H.ORIGIN, delta, rng))
                         for _ in range(10000)])
        cdf = (np.sinh(2 * radii) / 2 - radii) / (np.sinh(2 * delta) / 2 - delta)
        emp = np.arange(1, len(radii) + 1) / len(radii)
        ks = np.abs(emp - cdf).max()
        assert ks < 0.02

    def test_euclidean_limit_cube_law(self, rng):
        delta = 1e-3
        radii = np.sort([H.hyp_distance(H.ORIGIN,
                                        P.sample_delta_ball(H.ORIGIN, delta, rng))
                         for _ in range(10000)])
        cdf = (radii / delta) ** 3
        emp = np.arange(1, len(radii) + 1) / len(radii)
        assert np.abs(emp - cdf).max() < 0.02


class TestPerturbVertex:
    def test_empty_specs_keeps(self, geometry_mesh, gparams, rng):
        pos, attempts = P.perturb_vertex(geometry_mesh, 0, [], gparams, rng)
        assert attempts == 0
        assert np.array_equal(pos.vec, geometry_mesh.vertices.coords[0])

    def test_clear_vertex_kept(self, geometry_mesh, rng):
        params = Q.derive_params(eps=0.2, mode="geometry",
                                 sigma=Q.choose_sigma(
                                     Q.derive_params(eps=0.2, mode="geometry")))
        tris = P.candidate_triangles(geometry_mesh, 3, params)
        specs = []
        coords = geometry_mesh.vertices.coords
        for t in tris[:200]:
            try:
                specs.append(Q.SliverRegionSpec(coords[list(t)], params))
            except Exception:
                continue
        pos, attempts = P.perturb_vertex(geometry_mesh, 3, specs, params, rng)
        assert attempts == 0

    def test_blocked_vertex_moves_clear(self, gparams, rng):
        # place the vertex on the circumcircle of a conforming triangle: it
        # starts inside the sliver region and must move out within delta
        basis = H.tangent_basis(H.ORIGIN)
        r = 0.9 * gparams.R
        tri_pts = [H.exp_map(H.ORIGIN, r * (np.cos(a) * basis[0]
                                            + np.sin(a) * basis[1]))
                   for a in (0.0, 2.2, 4.2)]
        apex = H.exp_map(H.ORIGIN, r * (np.cos(1.1) * basis[0]
                                        + np.sin(1.1) * basis[1])
                         + 1e-6 * basis[2])
        far = H.exp_map(H.ORIGIN, 2.0 * basis[2])
        coords = np.stack([apex.vec] + [t.vec for t in tri_pts] + [far.vec])
        dom = D.SampleDomain(H.ORIGIN, 3.0)
        mesh = D.build_delaunay(D.PointSet(coords, 0.2, 0, dom))
        spec = Q.SliverRegionSpec(np.stack([t.vec for t in tri_pts]), gparams)
        assert Q.in_sliver_region(apex, spec)
        pos, attempts = P.perturb_vertex(mesh, 0, [spec], gparams, rng)
        assert attempts >= 1
        assert H.hyp_distance(apex, pos) <= gparams.delta + 1e-12
        assert not Q.in_sliver_region(pos, spec)


class TestDesliverPass:
    def test_idempotent_when_clear(self, geometry_mesh):
        params = Q.derive_params(eps=0.2, mode="geometry")
        params = Q.with_sigma(params, Q.choose_sigma(params))
        out, log, eff = P.desliver_pass(geometry_mesh, params, 9)
        assert all(r.outcome == "kept" for r in log)
        assert np.array_equal(out.tets, geometry_mesh.tets)
        assert np.array_equal(out.vertices.coords,
                              geometry_mesh.vertices.coords)

    def test_single_tet_mesh_unchanged(self, rng):
        dom = D.SampleDomain(H.ORIGIN, 1.0)
        coords = D.ball_points(np.random.default_rng(1), H.ORIGIN, 0.15, 4)
        mesh = D.build_delaunay(D.PointSet(coords, 0.2, 1, dom))
        params = Q.derive_params(eps=0.2, mode="geometry")
        params = Q.with_sigma(params, Q.choose_sigma(params))
        out, log, _ = P.desliver_pass(mesh, params, 0)
        assert np.array_equal(out.tets, mesh.tets)
        assert all(r.outcome == "kept" for r in log)

    def test_certificate_at_forcing_sigma(self, geometry_mesh, gparams):
        out, log, eff = P.desliver_pass(geometry_mesh, gparams, 42)
        out.interior = D.interior_tets(out, out.vertices.domain, 0.2)
        # zero-sliver certificate (exact, not statistical)
        assert len(interior_sliver_indices(out, eff)) == 0
        # dihedral floor via the certification rule
        flags = np.asarray(out.interior)
        q = K.batch_tet_quality(out.vertices.coords[out.tets[flags]], 1e-10)
        ok = q[:, 0] == 0
        window = (ok & (q[:, 11:17].min(axis=1) >= eff.a - 1e-9)
                  & (q[:, 11:17].max(axis=1) <= eff.b + 1e-9)
                  & (q[:, 1] <= eff.R + 1e-9))
        theta = Q.theta_bound(eff.a, eff.b, eff.sigma)
        assert q[window, 17].min() >= theta - 1e-9
        # displacement bound
        disp = K.batch_hyp_dist(out.vertices.coords,
                                geometry_mesh.vertices.coords)
        assert disp.max() <= gparams.delta + 1e-12
        # every vertex visited exactly once, ascending order
        assert [r.vid for r in log] == list(range(len(out.vertices)))

    def test_determinism(self, geometry_mesh, gparams):
        out1, log1, _ = P.desliver_pass(geometry_mesh, gparams, 42)
        out2, log2, _ = P.desliver_pass(geometry_mesh, gparams, 42)
        assert np.array_equal(out1.vertices.coords, out2.vertices.coords)
        assert np.array_equal(out1.tets, out2.tets)
        assert all(a.attempts == b.attempts and a.outcome == b.outcome
                   for a, b in zip(log1, log2))

    def test_result_is_delaunay(self, geometry_mesh, gparams):
        out, _, _ = P.desliver_pass(geometry_mesh, gparams, 42)
        v = out.vertices
        rebuilt = D.build_delaunay(D.PointSet(v.coords, v.eps, v.seed,
                                              v.domain))
        assert set(map(tuple, out.tets.tolist())) == set(
            map(tuple, rebuilt.tets.tolist()))

    def test_volume_budget_at_sigma_star(self, gparams):
        params = Q.derive_params(eps=0.2, mode="geometry")
        sigma = Q.choose_sigma(params)
        _, n_cap = Q.neighbor_cap(params)
        assert (n_cap * Q.V_bound(sigma, params.a, params.b, params.R)
                <= 0.5 * H.ball_volume(params.delta))

    def test_exhaustion_halves_then_raises(self, gparams, monkeypatch):
        # a vertex sitting on a conforming circumcircle stays inside the
        # region at every halving; with a zero-draw budget the pass must
        # surface ExhaustedAttempts for it
        monkeypatch.setattr(desliver, "MAX_PERTURB_ATTEMPTS", 0)
        basis = H.tangent_basis(H.ORIGIN)
        r = 0.9 * gparams.R
        tri_pts = [H.exp_map(H.ORIGIN, r * (np.cos(a) * basis[0]
                                            + np.sin(a) * basis[1]))
                   for a in (0.0, 2.2, 4.2)]
        apex = H.exp_map(H.ORIGIN, r * (np.cos(1.1) * basis[0]
                                        + np.sin(1.1) * basis[1])
                         + 1e-6 * basis[2])
        coords = np.stack([apex.vec] + [t.vec for t in tri_pts])
        dom = D.SampleDomain(H.ORIGIN, 1.0)
        mesh = D.build_delaunay(D.PointSet(coords, 0.2, 0, dom))
        params = Q.with_sigma(gparams, 0.01)
        with pytest.raises(ExhaustedAttempts) as exc:
            P.desliver_pass(mesh, params, 3)
        assert exc.value.vid == 0

    def test_log_roundtrip(self, geometry_mesh, gparams, tmp_path):
        import json
        _, log, _ = P.desliver_pass(geometry_mesh, gparams, 42)
        path = tmp_path / "log.jsonl"
        P.save_perturb_log(log, path)
        lines = path.read_text().splitlines()
        assert len(lines) == len(log)
        rec = json.loads(lines[0])
        assert set(rec) == {"vid", "old", "new", "attempts", "candidates",
                            "outcome"}
