"""Command-line surface.

Exit codes: 0 success, 1 audit/certification failure, 2 usage error.
"""

import argparse
import json
import sys

import numpy as np

from .audits import audit_lemma
from .delaunay import (SampleDomain, brute_force_delaunay, build_delaunay,
                       interior_tets, load_mesh, sample_maximal, save_mesh,
                       load_points, save_points, PointSet, ball_points)
from .desliver import desliver_pass, save_perturb_log
from .errors import GeometryError
from .hyperbolic import ORIGIN, ball_volume
from .quality import (J_bound, K_bound, V_bound, choose_sigma, derive_params,
                      h0_bound, n_bound, neighbor_cap, theta_bound,
                      with_sigma)
from .report import (interior_sliver_indices, quality_report, save_report,
                     save_histogram_csv)


def _params_from_args(args, eps=None):
    mu = getattr(args, "mu", None)
    if eps is not None:
        return derive_params(eps=eps, mode="geometry")
    if mu is not None:
        return derive_params(mu=mu, mode="paper")
    raise GeometryError("need --mu or --eps")


def _cmd_sample(args):
    if (args.mu is None) == (args.eps is None):
        print("sample: exactly one of --mu / --eps is required",
              file=sys.stderr)
        return 2
    if args.mu is not None:
        params = derive_params(mu=args.mu, mode="paper", delta=args.delta)
    else:
        params = derive_params(eps=args.eps, mode="geometry",
                               delta=args.delta)
    domain = SampleDomain(ORIGIN, args.domain_radius)
    pts = sample_maximal(domain, params.eps, args.seed)
    save_points(pts, args.out)
    print(f"sampled {len(pts)} points (eps={params.eps}) -> {args.out}")
    return 0


def _cmd_mesh(args):
    pts = load_points(args.in_path)
    mesh = build_delaunay(pts)
    if pts.domain is not None:
        mesh.interior = interior_tets(mesh, pts.domain, pts.eps)
    save_mesh(mesh, args.out)
    n_int = int(mesh.interior.sum()) if mesh.interior is not None else 0
    print(f"built {mesh.num_tets} tets ({n_int} interior) -> {args.out}")
    return 0


def _cmd_desliver(args):
    mesh = load_mesh(args.in_path)
    params = derive_params(mu=args.mu, mode="paper")
    if abs(params.eps - mesh.vertices.eps) > 1e-12 * params.eps:
        print(f"desliver: --mu implies eps={params.eps} but the mesh was "
              f"sampled at eps={mesh.vertices.eps}", file=sys.stderr)
        return 2
    sigma = args.sigma if args.sigma is not None else choose_sigma(params)
    params = with_sigma(params, sigma)
    out, log, eff = desliver_pass(mesh, params, args.seed)
    if out.vertices.domain is not None:
        out.interior = interior_tets(out, out.vertices.domain,
                                     out.vertices.eps)
    save_mesh(out, args.out)
    if args.log:
        save_perturb_log(log, args.log)
    moved = sum(1 for r in log if r.outcome == "moved")
    slivers = interior_sliver_indices(out, eff)
    print(f"perturbed {moved}/{len(log)} vertices at sigma={eff.sigma} "
          f"-> {args.out}; interior slivers: {len(slivers)}")
    return 0 if len(slivers) == 0 else 1


def _cmd_audit(args):
    mesh = load_mesh(args.mesh)
    params = derive_params(mu=args.mu, mode="paper")
    if abs(params.eps - mesh.vertices.eps) > 1e-12 * params.eps:
        print(f"audit: --mu implies eps={params.eps} but the mesh was "
              f"sampled at eps={mesh.vertices.eps}", file=sys.stderr)
        return 2
    sigma = args.sigma if args.sigma is not None else choose_sigma(params)
    params = with_sigma(params, sigma)
    rep = quality_report(mesh, params)
    save_report(rep, args.report)
    save_histogram_csv(rep, str(args.report) + ".hist.csv")
    ok = rep.theta_floor_ok and rep.sliver_count == 0
    print(f"report -> {args.report} (histogram CSV alongside); "
          f"slivers={rep.sliver_count} theta_floor_ok={rep.theta_floor_ok}")
    return 0 if ok else 1


def _cmd_constants(args):
    params = derive_params(mu=args.mu, mode="paper")
    a, b, R = params.a, params.b, params.R
    sigma = args.sigma
    m, n_cap = neighbor_cap(params)
    out = {
        "eps": params.eps, "delta": params.delta, "a": a, "b": b, "R": R,
        "rho": params.rho,
        "theta": theta_bound(a, b, sigma),
        "h0": h0_bound(a, b, R),
        "n": n_bound(sigma, a, b, R),
        "J": J_bound(sigma, a, b, R),
        "K": K_bound(sigma, a, b, R),
        "V": V_bound(sigma, a, b, R),
        "m": m, "N": n_cap,
        "sigma_star": choose_sigma(params),
    }
    print(json.dumps(out, sort_keys=True, separators=(",", ":")))
    return 0


def _cmd_lemma(args):
    params = with_sigma(derive_params(mu=args.mu, mode="paper"), args.sigma)
    res = audit_lemma(args.id, params, args.trials, args.seed)
    print(json.dumps({
        "lemma": res.lemma_id, "trials": res.trials,
        "failures": res.failures, "worst_margin": res.worst_margin,
        "seed": res.seed,
    }, sort_keys=True, separators=(",", ":")))
    return 0 if res.passed else 1


def _cmd_oracle(args):
    if args.what != "delaunay":
        print(f"oracle: unknown target {args.what!r}", file=sys.stderr)
        return 2
    eps = 0.2
    domain = SampleDomain(ORIGIN, 5.0 * eps)
    mismatches = 0
    for seed in range(args.seeds):
        rng = np.random.default_rng(seed)
        coords = ball_points(rng, ORIGIN, domain.radius, args.n)
        pts = PointSet(coords, eps, seed, domain)
        got = frozenset(tuple(map(int, t)) for t in build_delaunay(pts).tets)
        want = brute_force_delaunay(pts)
        if got != want:
            mismatches += 1
            print(f"seed {seed}: builder and oracle disagree "
                  f"({len(got)} vs {len(want)} tets)", file=sys.stderr)
    print(f"oracle delaunay: {args.seeds - mismatches}/{args.seeds} seeds agree")
    return 0 if mismatches == 0 else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="thickmesh",
        description="Thick geodesic Delaunay triangulations of bounded "
                    "domains in hyperbolic 3-space.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="maximal separated sample of a ball domain")
    p.add_argument("--mu", type=float, help="thickness scale; eps = mu/100")
    p.add_argument("--eps", type=float, help="separation, set directly")
    p.add_argument("--delta", type=float, default=None,
                   help="perturbation radius override (<= eps/10)")
    p.add_argument("--domain-radius", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("mesh", help="Delaunay triangulation of a point file")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_mesh)

    p = sub.add_parser("desliver", help="run the perturbation pass")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--sigma", type=float, default=None,
                   help="flatness threshold (default: sigma* ladder value)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--log", default=None, help="JSON-lines perturbation log")
    p.set_defaults(func=_cmd_desliver)

    p = sub.add_parser("audit", help="quality report for a mesh file")
    p.add_argument("--mesh", required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--report", required=True)
    p.set_defaults(func=_cmd_audit)

    p = sub.add_parser("constants", help="print every derived bound as JSON")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.set_defaults(func=_cmd_constants)

    p = sub.add_parser("lemma", help="randomized audit of one lemma bound")
    p.add_argument("--id", required=True, choices=["L1", "L2", "L3", "L4", "L5"])
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=_cmd_lemma)

    p = sub.add_parser("oracle", help="builder vs brute-force equivalence")
    p.add_argument("what", choices=["delaunay"])
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--seeds", type=int, default=100)
    p.set_defaults(func=_cmd_oracle)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GeometryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
