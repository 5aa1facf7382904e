"""Mesh quality certification reports."""

import json
from dataclasses import dataclass

import numpy as np

from . import kernels as K
from .delaunay import DelaunayMesh
from .errors import BadParams
from .quality import ThickParams, theta_bound
from .tolerances import DEGENERATE_TOL, WINDOW_TOL

__all__ = ["QualityReport", "quality_report", "report_to_dict",
           "save_report", "load_report", "save_histogram_csv",
           "interior_sliver_indices"]

HISTOGRAM_BINS = 32


@dataclass(frozen=True)
class QualityReport:
    """Aggregate certification of one mesh against its parameter bundle.

    Dihedral statistics summarize the per-tet minimum dihedral angle over
    interior tets; the histogram counts interior tet edges (each edge once
    per incident tet) in 32 bins over [0, 3*eps].  theta_floor_ok compares
    the minimum dihedral of window-conforming interior tets (edges in [a,b],
    circumradius <= R) against theta(a,b,sigma) - 1e-9.
    """

    tet_total: int
    tet_interior: int
    sliver_count: int
    min_dihedral: float
    mean_dihedral: float
    edge_min: float
    edge_max: float
    edge_hist: np.ndarray       # (32,) counts
    edge_bins: np.ndarray       # (33,) edges of the bins
    circumradius_max: float
    theta_floor_ok: bool
    params: dict
    seed: int


def _params_echo(params: ThickParams) -> dict:
    return {
        "mu": params.mu, "eps": params.eps, "delta": params.delta,
        "a": params.a, "b": params.b, "R": params.R, "rho": params.rho,
        "sigma": params.sigma, "mode": params.mode,
    }


def _interior_mask(mesh: DelaunayMesh) -> np.ndarray:
    if mesh.interior is not None:
        return np.asarray(mesh.interior, dtype=bool)
    return np.ones(mesh.num_tets, dtype=bool)


def interior_sliver_indices(mesh: DelaunayMesh, params: ThickParams):
    """Indices of interior tets that are (sigma, rho)-slivers."""
    if params.sigma is None:
        raise BadParams("params.sigma is unset")
    mask = _interior_mask(mesh)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return np.zeros(0, dtype=np.int64)
    q = K.batch_tet_quality(mesh.vertices.coords[mesh.tets[idx]],
                            DEGENERATE_TOL)
    ok = q[:, 0] == 0
    ratio = q[:, 1] / q[:, 2]
    flat = (q[:, 3:7] / q[:, 7:11]).min(axis=1)
    sliver = ok & (ratio <= params.rho) & (flat <= params.sigma)
    return idx[sliver]


def quality_report(mesh: DelaunayMesh, params: ThickParams,
                   seed: int | None = None) -> QualityReport:
    """Measure a mesh; interior flags are taken from the mesh (all tets when
    the mesh carries none)."""
    if params.sigma is None:
        raise BadParams("params.sigma is unset")
    mask = _interior_mask(mesh)
    idx = np.flatnonzero(mask)
    bins = np.linspace(0.0, 3.0 * params.eps, HISTOGRAM_BINS + 1)
    if seed is None:
        seed = mesh.vertices.seed

    if idx.size == 0:
        return QualityReport(
            tet_total=mesh.num_tets, tet_interior=0, sliver_count=0,
            min_dihedral=float("nan"), mean_dihedral=float("nan"),
            edge_min=float("nan"), edge_max=float("nan"),
            edge_hist=np.zeros(HISTOGRAM_BINS, dtype=np.int64),
            edge_bins=bins, circumradius_max=float("nan"),
            theta_floor_ok=True, params=_params_echo(params), seed=seed)

    q = K.batch_tet_quality(mesh.vertices.coords[mesh.tets[idx]],
                            DEGENERATE_TOL)
    ok = q[:, 0] == 0
    ratio = q[:, 1] / q[:, 2]
    flat = (q[:, 3:7] / q[:, 7:11]).min(axis=1)
    slivers = ok & (ratio <= params.rho) & (flat <= params.sigma)
    edges = q[:, 11:17]
    min_dih = q[:, 17]

    window = (ok & (edges.min(axis=1) >= params.a - WINDOW_TOL)
              & (edges.max(axis=1) <= params.b + WINDOW_TOL)
              & (q[:, 1] <= params.R + WINDOW_TOL))
    theta = theta_bound(params.a, params.b, params.sigma)
    floor_ok = bool(window.sum() == 0
                    or min_dih[window].min() >= theta - WINDOW_TOL)

    hist, _ = np.histogram(edges.ravel(), bins=bins)
    return QualityReport(
        tet_total=mesh.num_tets,
        tet_interior=int(idx.size),
        sliver_count=int(slivers.sum()),
        min_dihedral=float(min_dih[ok].min()) if ok.any() else float("nan"),
        mean_dihedral=float(min_dih[ok].mean()) if ok.any() else float("nan"),
        edge_min=float(edges.min()),
        edge_max=float(edges.max()),
        edge_hist=hist.astype(np.int64),
        edge_bins=bins,
        circumradius_max=float(q[ok, 1].max()) if ok.any() else float("nan"),
        theta_floor_ok=floor_ok,
        params=_params_echo(params),
        seed=seed,
    )


def report_to_dict(report: QualityReport) -> dict:
    return {
        "tet_total": report.tet_total,
        "tet_interior": report.tet_interior,
        "sliver_count": report.sliver_count,
        "min_dihedral": report.min_dihedral,
        "mean_dihedral": report.mean_dihedral,
        "edge_min": report.edge_min,
        "edge_max": report.edge_max,
        "edge_hist": [int(c) for c in report.edge_hist],
        "edge_bins": [float(x) for x in report.edge_bins],
        "circumradius_max": report.circumradius_max,
        "theta_floor_ok": report.theta_floor_ok,
        "params": report.params,
        "seed": report.seed,
    }


def save_report(report: QualityReport, path):
    """Canonical JSON (sorted keys, fixed separators): write -> read ->
    write reproduces identical bytes."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report), fh, sort_keys=True,
                  separators=(",", ":"), allow_nan=True)
        fh.write("\n")


def load_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def save_histogram_csv(report: QualityReport, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("bin_lo,bin_hi,count\n")
        for i in range(HISTOGRAM_BINS):
            fh.write(f"{float(report.edge_bins[i])!r},"
                     f"{float(report.edge_bins[i + 1])!r},"
                     f"{int(report.edge_hist[i])}\n")
