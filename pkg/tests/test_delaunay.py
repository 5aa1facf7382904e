"""Sampling, triangulation, oracle equivalence, vertex moves, file formats."""

import json

import numpy as np
import pytest

from thickmesh import delaunay as D
from thickmesh import hyperbolic as H
from thickmesh import kernels as K
from thickmesh.errors import (DegenerateInput, InvalidGeometry, MoveTooFar,
                              TooManyPoints)

EPS = 0.2
DOMAIN = D.SampleDomain(H.ORIGIN, 1.0)


def _pairwise_min(coords):
    d = K.batch_hyp_dist(coords[:, None, :], coords[None, :, :])
    np.fill_diagonal(d, np.inf)
    return float(d.min())


class TestSampleMaximal:
    def test_tiny_domain_single_point(self):
        pts = D.sample_maximal(D.SampleDomain(H.ORIGIN, 0.09), EPS, 5)
        assert len(pts) == 1

    def test_determinism(self):
        a = D.sample_maximal(D.SampleDomain(H.ORIGIN, 0.5), EPS, 3)
        b = D.sample_maximal(D.SampleDomain(H.ORIGIN, 0.5), EPS, 3)
        assert np.array_equal(a.coords, b.coords)

    def test_separation_exact(self):
        pts = D.sample_maximal(DOMAIN, EPS, 2)
        assert _pairwise_min(pts.coords) >= EPS - 1e-12

    def test_all_in_domain(self):
        pts = D.sample_maximal(DOMAIN, EPS, 2)
        d = K.batch_hyp_dist(pts.coords, H.ORIGIN.vec[None, :])
        assert d.max() <= DOMAIN.radius + 1e-12

    def test_coverage_spot_probes(self, rng):
        # maximality implies eps-coverage; the probe certificate leaves a
        # tiny probabilistic residual which the interior repair eliminates
        # away from the boundary fringe
        pts = D.sample_maximal(DOMAIN, EPS, 2)
        probes = D.ball_points(rng, H.ORIGIN, DOMAIN.radius, 20000)
        dmin = np.full(len(probes), np.inf)
        for s in range(0, len(probes), 4000):
            block = probes[s:s + 4000]
            d = K.batch_hyp_dist(block[:, None, :], pts.coords[None, :, :])
            dmin[s:s + 4000] = d.min(axis=1)
        radial = K.batch_hyp_dist(probes, H.ORIGIN.vec[None, :])
        deep = radial <= DOMAIN.radius - 2.2 * EPS
        assert dmin[deep].max() < EPS            # repaired region: exact
        uncovered = dmin >= EPS
        assert uncovered.mean() < 1e-3           # fringe residual is tiny
        assert dmin.max() < 1.5 * EPS            # and shallow

    def test_count_tracks_volume_ratio(self):
        # packing-density bracket over a radius sweep
        for radius in (0.5, 0.8, 1.2):
            pts = D.sample_maximal(D.SampleDomain(H.ORIGIN, radius), EPS, 4)
            ratio = H.ball_volume(radius) / H.ball_volume(EPS / 2.0)
            assert 0.06 * ratio <= len(pts) <= 1.0 * ratio


class TestBuildDelaunay:
    def test_four_generic_points(self, rng):
        coords = D.ball_points(rng, H.ORIGIN, 0.15, 4)
        mesh = D.build_delaunay(D.PointSet(coords, EPS, 0, DOMAIN))
        assert mesh.num_tets == 1

    def test_too_few_points(self, rng):
        with pytest.raises(DegenerateInput):
            D.build_delaunay(D.PointSet(D.ball_points(rng, H.ORIGIN, 0.3, 3),
                                        EPS, 0, DOMAIN))

    def test_coplanar_rejected(self):
        basis = H.tangent_basis(H.ORIGIN)
        pts = np.stack([H.exp_map(H.ORIGIN, x * basis[0] + y * basis[1]).vec
                        for x, y in ((0, 0), (0.3, 0), (0, 0.3), (0.3, 0.3),
                                     (0.15, 0.2))])
        with pytest.raises(DegenerateInput):
            D.build_delaunay(D.PointSet(pts, EPS, 0, DOMAIN))

    def test_oracle_equivalence(self, rng):
        for seed in range(20):
            r = np.random.default_rng(seed)
            pts = D.PointSet(D.ball_points(r, H.ORIGIN, 1.0, 10), EPS, seed,
                             DOMAIN)
            got = frozenset(tuple(map(int, t)) for t in D.build_delaunay(pts).tets)
            assert got == D.brute_force_delaunay(pts)

    def test_empty_circumsphere_invariant(self, small_mesh):
        assert D.empty_circumsphere_margin(small_mesh) >= -1e-10

    def test_adjacency_structure(self, small_mesh):
        # every face is shared by at most 2 tets; sharing is symmetric
        for face, tets in small_mesh.adjacency.items():
            assert 1 <= len(tets) <= 2
            for ti in tets:
                assert set(face) <= set(map(int, small_mesh.tets[ti]))

    def test_orientation_flags(self, small_mesh, rng):
        ball = K.hyperboloid_to_ball(small_mesh.vertices.coords)
        for i in rng.choice(small_mesh.num_tets, size=50, replace=False):
            t = small_mesh.tets[i]
            det = K.orient3d_det(ball[t[0]], ball[t[1]], ball[t[2]], ball[t[3]])
            assert (det > 0) == bool(small_mesh.orient_positive[i])


class TestBruteForce:
    def test_four_points(self, rng):
        pts = D.PointSet(D.ball_points(rng, H.ORIGIN, 0.15, 4), EPS, 0, DOMAIN)
        assert len(D.brute_force_delaunay(pts)) == 1

    def test_guard(self, rng):
        pts = D.PointSet(D.ball_points(rng, H.ORIGIN, 1.0, 65), EPS, 0, DOMAIN)
        with pytest.raises(TooManyPoints):
            D.brute_force_delaunay(pts)

    def test_interior_point_excludes_hull_tet(self):
        # 4 outer vertices + center: the outer 4-set's circumsphere strictly
        # contains the center, so only the 4 center-tets survive
        tet = H.regular_tetrahedron(0.3)
        coords = np.stack([p.vec for p in tet] + [H.ORIGIN.vec])
        pts = D.PointSet(coords, EPS, 0, DOMAIN)
        out = D.brute_force_delaunay(pts)
        assert (0, 1, 2, 3) not in out
        assert len(out) == 4
        mesh = D.build_delaunay(pts)
        assert frozenset(tuple(map(int, t)) for t in mesh.tets) == out


class TestUpdateVertex:
    @pytest.fixture(scope="class")
    def base(self):
        rng = np.random.default_rng(11)
        pts = D.PointSet(D.ball_points(rng, H.ORIGIN, 1.0, 30), EPS, 11, DOMAIN)
        return pts, D.build_delaunay(pts)

    def test_zero_displacement_identity(self, base):
        pts, mesh = base
        m2 = D.update_vertex(mesh, 5, pts.point(5))
        assert np.array_equal(m2.tets, mesh.tets)

    def test_move_too_far(self, base):
        pts, mesh = base
        basis = H.tangent_basis(pts.point(0))
        far = H.exp_map(pts.point(0), 3.0 * (EPS / 10.0) * basis[0])
        with pytest.raises(MoveTooFar):
            D.update_vertex(mesh, 0, far)

    def test_matches_rebuild(self, base):
        pts, mesh = base
        rng = np.random.default_rng(77)
        for _ in range(12):
            vid = int(rng.integers(0, 30))
            new = H.HPoint.from_raw(
                D.ball_points(rng, pts.point(vid), 0.9 * EPS / 10.0, 1)[0])
            moved = D.update_vertex(mesh, vid, new)
            coords = pts.coords.copy()
            coords[vid] = new.vec
            rebuilt = D.build_delaunay(D.PointSet(coords, EPS, 11, DOMAIN))
            assert set(map(tuple, moved.tets.tolist())) == set(
                map(tuple, rebuilt.tets.tolist()))

    def test_locality(self, base):
        pts, mesh = base
        rng = np.random.default_rng(101)
        delta = EPS / 10.0
        radius = 2.0 * (2 * EPS + 2 * delta + delta)
        for _ in range(6):
            vid = int(rng.integers(0, 30))
            new = H.HPoint.from_raw(
                D.ball_points(rng, pts.point(vid), 0.9 * delta, 1)[0])
            moved = D.update_vertex(mesh, vid, new)
            dist = K.batch_hyp_dist(pts.coords, pts.coords[vid][None, :])
            far_ids = set(np.flatnonzero(dist > radius))
            before = {tuple(t) for t in mesh.tets.tolist()
                      if set(t) <= far_ids}
            after = {tuple(t) for t in moved.tets.tolist()
                     if set(t) <= far_ids}
            assert before == after

    def test_immutability(self, base):
        pts, mesh = base
        snapshot = mesh.vertices.coords.copy()
        new = H.HPoint.from_raw(
            D.ball_points(np.random.default_rng(5), pts.point(3),
                          0.5 * EPS / 10.0, 1)[0])
        D.update_vertex(mesh, 3, new)
        assert np.array_equal(mesh.vertices.coords, snapshot)


class TestInteriorTets:
    def test_window_postcondition(self, small_mesh):
        flags = small_mesh.interior
        assert flags.sum() > 0
        R = small_mesh.circumradii[flags]
        assert (R <= EPS + 1e-9).all()
        P = small_mesh.vertices.coords[small_mesh.tets[flags]]
        for i, j in ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)):
            e = K.batch_hyp_dist(P[:, i], P[:, j])
            assert (e >= EPS - 1e-9).all()
            assert (e <= 2 * EPS + 1e-9).all()

    def test_boundary_tet_not_flagged(self, small_mesh):
        # tets whose circumball pokes out of the shrunken domain are exempt
        flags = small_mesh.interior
        d = K.batch_hyp_dist(small_mesh.circumcenters, H.ORIGIN.vec[None, :])
        outside = d + small_mesh.circumradii > DOMAIN.radius - EPS
        assert not (flags & outside).any()

    def test_shrinking_monotone(self, small_mesh):
        f1 = D.interior_tets(small_mesh, DOMAIN, EPS)
        f2 = D.interior_tets(small_mesh, DOMAIN, 1.5 * EPS)
        assert not (f2 & ~f1).any()


class TestBallModelTransfer:
    def test_predicate_equivalence(self, rng):
        # hyperbolic empty-circumsphere vs Euclidean insphere on random
        # 5-point queries (spheres transfer between the models)
        agree = 0
        total = 0
        for _ in range(2000):
            coords = D.ball_points(rng, H.ORIGIN, 0.8, 5)
            P = coords[:4]
            ok, c = K.batch_timelike_center(P[0:1] - P[1], P[0:1] - P[2],
                                            P[0:1] - P[3])
            if not ok[0]:
                continue
            R = float(K.hyp_dist(c[0], P[0]))
            d = float(K.hyp_dist(c[0], coords[4]))
            if abs(np.cosh(d) - np.cosh(R)) < 1e-12:
                continue
            hyp_inside = d < R
            ball = K.hyperboloid_to_ball(coords)
            o = K.orient3d_sign(ball[0], ball[1], ball[2], ball[3], 1e-13)
            s = K.insphere_sign(ball[0], ball[1], ball[2], ball[3], ball[4],
                                1e-13)
            euc_inside = s * o < 0
            total += 1
            agree += int(hyp_inside == euc_inside)
        assert total > 1200
        assert agree == total


class TestFileFormats:
    def test_points_round_trip(self, tmp_path):
        pts = D.sample_maximal(D.SampleDomain(H.ORIGIN, 0.5), EPS, 3)
        path = tmp_path / "pts.json"
        D.save_points(pts, path)
        loaded = D.load_points(path)
        assert np.array_equal(loaded.coords, pts.coords)
        assert loaded.eps == pts.eps and loaded.seed == pts.seed
        assert loaded.domain.radius == 0.5
        obj = json.loads(path.read_text())
        assert obj["model"] == "hyperboloid"
        assert set(obj) == {"model", "eps", "seed", "points", "domain"}

    def test_mesh_round_trip(self, tmp_path, small_mesh):
        path = tmp_path / "mesh.json"
        D.save_mesh(small_mesh, path)
        loaded = D.load_mesh(path)
        assert np.array_equal(loaded.tets, small_mesh.tets)
        assert np.array_equal(loaded.interior, small_mesh.interior)

    def test_mesh_integrity_check(self, tmp_path, small_mesh):
        path = tmp_path / "mesh.json"
        D.save_mesh(small_mesh, path)
        obj = json.loads(path.read_text())
        obj["tets"] = obj["tets"][:-1]  # drop one tet
        path.write_text(json.dumps(obj))
        with pytest.raises(InvalidGeometry):
            D.load_mesh(path)

    def test_points_ref_mesh(self, tmp_path, small_mesh):
        ppath = tmp_path / "pts.json"
        D.save_points(small_mesh.vertices, ppath)
        mpath = tmp_path / "mesh.json"
        obj = {"points_ref": str(ppath),
               "tets": [list(map(int, t)) for t in small_mesh.tets],
               "interior": [bool(x) for x in small_mesh.interior]}
        mpath.write_text(json.dumps(obj))
        loaded = D.load_mesh(mpath)
        assert np.array_equal(loaded.tets, small_mesh.tets)
