"""Quality reports, serialization round-trips, and the CLI surface."""

import json
import subprocess
import sys

import numpy as np
import pytest

from thickmesh import delaunay as D
from thickmesh import hyperbolic as H
from thickmesh import quality as Q
from thickmesh import report as R
from thickmesh.cli import main


class TestQualityReport:
    def test_single_regular_tet(self):
        # small-scale regular tet: no slivers, dihedral at the Euclidean value
        ell = 2.5e-1
        tet = H.regular_tetrahedron(ell)
        pts = D.PointSet(np.stack([p.vec for p in tet]), 0.2, 0,
                         D.SampleDomain(H.ORIGIN, 1.0))
        mesh = D.build_delaunay(pts)
        params = Q.derive_params(eps=0.2, mode="geometry", sigma=0.01)
        rep = R.quality_report(mesh, params)
        assert rep.tet_total == 1
        assert rep.tet_interior == 1  # no flags set: every tet counts
        assert rep.sliver_count == 0
        assert rep.min_dihedral == pytest.approx(np.arccos(1 / 3), abs=2e-2)

    def test_post_desliver_certificate(self, small_mesh):
        from thickmesh.desliver import desliver_pass
        params = Q.derive_params(eps=0.2, mode="geometry", sigma=0.05)
        out, _, eff = desliver_pass(small_mesh, params, 42)
        out.interior = D.interior_tets(out, out.vertices.domain, 0.2)
        rep = R.quality_report(out, eff)
        assert rep.sliver_count == 0
        assert rep.theta_floor_ok

    def test_empty_interior_vacuous(self):
        # tiny domain: one point is unbuildable, use 4 points with no
        # interior flags set to an empty mask
        coords = D.ball_points(np.random.default_rng(1), H.ORIGIN, 0.15, 4)
        mesh = D.build_delaunay(D.PointSet(coords, 0.2, 1,
                                           D.SampleDomain(H.ORIGIN, 0.3)))
        mesh.interior = np.zeros(mesh.num_tets, dtype=bool)
        params = Q.derive_params(eps=0.2, mode="geometry", sigma=0.01)
        rep = R.quality_report(mesh, params)
        assert rep.tet_interior == 0
        assert rep.theta_floor_ok  # vacuously

    def test_histogram_shape(self, small_mesh):
        params = Q.derive_params(eps=0.2, mode="geometry", sigma=0.01)
        rep = R.quality_report(small_mesh, params)
        assert rep.edge_hist.shape == (32,)
        assert rep.edge_bins.shape == (33,)
        assert rep.edge_bins[0] == 0.0
        assert rep.edge_bins[-1] == pytest.approx(3 * 0.2)
        # interior tets' edges all fall inside the histogram range
        assert rep.edge_hist.sum() == 6 * rep.tet_interior

    def test_roundtrip_bit_exact(self, small_mesh, tmp_path):
        params = Q.derive_params(eps=0.2, mode="geometry", sigma=0.01)
        rep = R.quality_report(small_mesh, params)
        p1 = tmp_path / "rep1.json"
        p2 = tmp_path / "rep2.json"
        R.save_report(rep, p1)
        loaded = R.load_report(p1)
        with open(p2, "w", encoding="utf-8") as fh:
            json.dump(loaded, fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")
        assert p1.read_bytes() == p2.read_bytes()

    def test_csv_columns(self, small_mesh, tmp_path):
        params = Q.derive_params(eps=0.2, mode="geometry", sigma=0.01)
        rep = R.quality_report(small_mesh, params)
        path = tmp_path / "hist.csv"
        R.save_histogram_csv(rep, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "bin_lo,bin_hi,count"
        assert len(lines) == 33
        lo, hi, count = lines[1].split(",")
        float(lo), float(hi), int(count)


class TestCli:
    def _run(self, *args):
        return main(list(args))

    def test_pipeline(self, tmp_path):
        pts = tmp_path / "p.json"
        msh = tmp_path / "m.json"
        out = tmp_path / "m2.json"
        log = tmp_path / "log.jsonl"
        rep = tmp_path / "rep.json"
        assert self._run("sample", "--eps", "0.2", "--domain-radius", "0.8",
                         "--seed", "5", "--out", str(pts)) == 0
        assert self._run("mesh", "--in", str(pts), "--out", str(msh)) == 0
        assert self._run("desliver", "--in", str(msh), "--mu", "20",
                         "--sigma", "0.05", "--seed", "3", "--out", str(out),
                         "--log", str(log)) == 0
        assert self._run("audit", "--mesh", str(out), "--mu", "20",
                         "--sigma", "0.05", "--report", str(rep)) == 0
        report = json.loads(rep.read_text())
        assert report["sliver_count"] == 0
        assert report["theta_floor_ok"] is True
        assert (tmp_path / "rep.json.hist.csv").exists()
        assert len(log.read_text().splitlines()) > 0

    def test_constants_keys(self, capsys):
        assert self._run("constants", "--mu", "0.1", "--sigma", "0.01") == 0
        out = json.loads(capsys.readouterr().out)
        assert set(out) == {"eps", "delta", "a", "b", "R", "rho", "theta",
                            "h0", "n", "J", "K", "V", "m", "N", "sigma_star"}
        assert out["m"] == 166
        assert out["N"] == 748660

    def test_lemma_subcommand(self, capsys):
        assert self._run("lemma", "--id", "L2", "--mu", "0.1", "--sigma",
                         "0.01", "--trials", "500", "--seed", "1") == 0
        out = json.loads(capsys.readouterr().out)
        assert out["failures"] == 0

    def test_oracle_subcommand(self):
        assert self._run("oracle", "delaunay", "--n", "8", "--seeds", "5") == 0

    def test_usage_error_exit_2(self, tmp_path):
        r = subprocess.run(
            [sys.executable, "-m", "thickmesh.cli", "sample",
             "--domain-radius", "1.0", "--seed", "1",
             "--out", str(tmp_path / "x.json")],
            capture_output=True)
        assert r.returncode == 2
        r = subprocess.run([sys.executable, "-m", "thickmesh.cli", "bogus"],
                           capture_output=True)
        assert r.returncode == 2

    def test_mu_eps_mismatch_exit_2(self, tmp_path):
        pts = tmp_path / "p.json"
        msh = tmp_path / "m.json"
        self._run("sample", "--eps", "0.2", "--domain-radius", "0.6",
                  "--seed", "5", "--out", str(pts))
        self._run("mesh", "--in", str(pts), "--out", str(msh))
        assert self._run("desliver", "--in", str(msh), "--mu", "0.1",
                         "--sigma", "0.05", "--seed", "3",
                         "--out", str(tmp_path / "o.json")) == 2

    def test_audit_flags_sliver_mesh_exit_1(self, tmp_path):
        # a lone conforming sliver tet must fail certification
        from thickmesh.audits import constructed_slivers
        params = Q.derive_params(eps=0.2, mode="geometry", sigma=0.05)
        tet = constructed_slivers(params, 1, np.random.default_rng(3))[0]
        pts = tmp_path / "p.json"
        D.save_points(D.PointSet(tet, 0.2, 0, None), pts)
        msh = tmp_path / "m.json"
        assert self._run("mesh", "--in", str(pts), "--out", str(msh)) == 0
        assert self._run("audit", "--mesh", str(msh), "--mu", "20",
                         "--sigma", "0.05",
                         "--report", str(tmp_path / "r.json")) == 1

    def test_desliver_deterministic_bytes(self, tmp_path):
        pts = tmp_path / "p.json"
        msh = tmp_path / "m.json"
        self._run("sample", "--eps", "0.2", "--domain-radius", "0.6",
                  "--seed", "2", "--out", str(pts))
        self._run("mesh", "--in", str(pts), "--out", str(msh))
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / f"out_{tag}.json"
            log = tmp_path / f"log_{tag}.jsonl"
            assert self._run("desliver", "--in", str(msh), "--mu", "20",
                             "--sigma", "0.05", "--seed", "9",
                             "--out", str(out), "--log", str(log)) == 0
            outs.append((out.read_bytes(), log.read_bytes()))
        assert outs[0] == outs[1]
