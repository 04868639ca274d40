"""Command-line surface: scenario execution plus CSV/JSON emission.

Every subcommand reads an optional JSON config file, runs one scenario
of the library, writes its declared outputs into the output directory,
and always finishes by writing ``manifest.json`` (config echo, package
versions, timings, output list) even when the solve itself fails.

Exit codes: 0 on success, 1 for configuration or validation problems,
2 when a solver reports failure (a diagnostic ``error.json`` is written
alongside the manifest in that case).
"""

import argparse
import json
import logging
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .backend import BACKEND
from .connection_branch import (
    ambient_reclosure,
    branch_sweep,
    hausdorff_to_singular,
    reconstruct_cycle,
    solve_connection,
    write_family_csv,
    write_family_json,
)
from .connection_branch import EPS11_DEFAULT as _SEAM_EPS1
from .hopf_melnikov import hopf_mu, solve_small_branch, write_branch_csv
from .layer_dynamics import periodic_orbit, write_orbit_csv
from .numerics import ConvergenceError, SolverError, SystemValidationError, Tolerances
from .polyops import Poly
from .shilnikov_transition import ShilnikovBC, shilnikov_solve, shilnikov_to_json_dict
from .slow_manifold import (
    invariance_residual,
    manifold_to_json_dict,
    solve_invariant_series,
)
from .system_model import SlowFastSystem

__all__ = ["main", "run"]

log = logging.getLogger("canard_lab.cli")

# Representative passage coefficients for the shilnikov subcommand: the
# solver contract is defined over explicit correction polynomials, not
# over a system, so the CLI exercises it on fixed standing inputs.
L0_STANDING = Poly(3, {(0, 0, 0): 1.0, (1, 0, 0): 0.5, (0, 1, 0): -0.8,
                       (0, 0, 1): 0.3})
L1_STANDING = Poly(4, {(0, 0, 0, 0): 1.0, (1, 0, 0, 0): 1.0,
                       (0, 0, 1, 0): 0.5, (0, 1, 0, 0): -0.2,
                       (0, 0, 0, 1): 0.1})


def _configure_logging():
    level_name = os.environ.get("CANARD_LAB_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(
        level=level, stream=sys.stderr,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


# ---------------------------------------------------------------------
# Argument and config resolution.
# ---------------------------------------------------------------------


def _add_common_options(parser, default):
    """Global options, attachable before or after the subcommand.

    The copy living on each subparser uses argparse.SUPPRESS so a flag
    given before the subcommand is not overwritten by the default.
    """
    parser.add_argument("--config", type=Path, default=default,
                        help="JSON config file; explicit flags override it")
    parser.add_argument("--out", type=Path, default=default,
                        help="output directory (default: current directory)")
    parser.add_argument("--system", type=Path, default=default,
                        help="system definition JSON (default: canonical "
                             "normal form)")
    parser.add_argument("--jobs", type=int, default=default,
                        help="worker processes for independent grid points")
    parser.add_argument("--seed", type=int, default=default,
                        help="recorded in the manifest; no algorithm here "
                             "consumes randomness")
    parser.add_argument("--plot-data", action="store_true", default=default,
                        help="also emit tidy long-format plot_data.csv")
    for name, field in (("abs", "abs_tol"), ("rel", "rel_tol"),
                        ("newton", "newton_tol"), ("event", "event_tol")):
        parser.add_argument(f"--tol-{name}", dest=f"tol_{field}",
                            type=float, default=default,
                            help=f"override Tolerances.{field}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="canard-lab",
        description="Canard-cycle scenarios: layer orbits, slow-manifold "
                    "series, Hopf and small-cycle branches, passage "
                    "diagnostics, the full connection branch, and single "
                    "cycle reconstruction.",
    )
    _add_common_options(parser, default=None)
    common = argparse.ArgumentParser(add_help=False)
    _add_common_options(common, default=argparse.SUPPRESS)

    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=lambda **kw: argparse.ArgumentParser(
                                    parents=[common], **kw))

    p = sub.add_parser("layer", help="closed layer orbits with periods and "
                                     "first-integral drift")
    p.add_argument("--h", type=float, action="append", default=None,
                   help="orbit amplitude; repeatable (default 0.1 0.5 1 2)")

    p = sub.add_parser("slow-manifold", help="invariant-manifold series and "
                                             "its invariance residual")
    p.add_argument("--r2", type=float, default=None)
    p.add_argument("--mu2", type=float, default=None)
    p.add_argument("--nu", type=float, default=None,
                   help="series radius (default 0.2)")
    p.add_argument("--order", type=int, default=None,
                   help="series truncation order (default 30)")

    p = sub.add_parser("hopf", help="Hopf parameter over an r2 grid")
    p.add_argument("--r2", type=float, action="append", default=None,
                   help="scaling-chart radius; repeatable (default 0.05 0.1)")

    p = sub.add_parser("small-branch", help="small-cycle branch over an "
                                            "amplitude grid at fixed r2")
    p.add_argument("--r2", type=float, default=None)
    p.add_argument("--h-min", type=float, default=None)
    p.add_argument("--h-max", type=float, default=None)
    p.add_argument("--n", type=int, default=None)

    p = sub.add_parser("shilnikov", help="passage boundary value problem "
                                         "diagnostics")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--r10", type=float, default=None)
    p.add_argument("--y11", type=float, default=None)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--eps11", type=float, default=None)

    p = sub.add_parser("branch", help="full cycle family over an amplitude "
                                      "grid at fixed eps")
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--h-min", type=float, default=None)
    p.add_argument("--h-max", type=float, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--cycles", action="store_true", default=None,
                   help="also reconstruct every cycle and write family.json")

    p = sub.add_parser("orbit", help="single cycle reconstruction with "
                                     "closure and Hausdorff diagnostics")
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--h", type=float, default=None)

    return parser


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SystemValidationError(f"cannot read config {path}: {exc}")
    if not isinstance(config, dict):
        raise SystemValidationError("config must be a JSON object")
    return config


def _resolve(args, config, name, default=None):
    """Flag value if given, else config value, else the default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in config:
        return config[name]
    return default


def _load_system(args, config):
    if args.system is not None:
        return SlowFastSystem.from_json(args.system)
    if "system" in config:
        return SlowFastSystem.from_config(config["system"])
    return SlowFastSystem.canonical()


def _tolerances(args, config):
    tols = Tolerances()
    overrides = {}
    for field in ("abs_tol", "rel_tol", "newton_tol", "event_tol"):
        value = _resolve(args, config, f"tol_{field}")
        if value is not None:
            if not value > 0.0:
                raise SystemValidationError(
                    f"tolerance {field} must be positive, got {value}")
            overrides[field] = float(value)
    return tols.with_(**overrides) if overrides else tols


def _write_json(payload, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _write_plot_data(series, path):
    """Tidy long-format CSV: one (series, x, y) row per plotted value."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("series,x,y\n")
        for name, xs, ys in series:
            for x, y in zip(xs, ys):
                fh.write(f"{name},{x:.16e},{y:.16e}\n")


# ---------------------------------------------------------------------
# Subcommand bodies.  Each returns (summary dict, output names, plot
# series); workers for process pools live at module level.
# ---------------------------------------------------------------------


def _layer_worker(payload):
    h, tol_kw = payload
    orbit = periodic_orbit(h, tol=Tolerances(**tol_kw))
    return h, orbit.period, orbit.conservation_defect


def _hopf_worker(payload):
    system_config, r2 = payload
    system = SlowFastSystem.from_config(system_config)
    return r2, hopf_mu(system, r2)


def _pool_map(worker, payloads, jobs):
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(worker, payloads))
    return [worker(p) for p in payloads]


def _cmd_layer(args, config, system, tol, out, jobs):
    hs = _resolve(args, config, "h", [0.1, 0.5, 1.0, 2.0])
    hs = [float(h) for h in np.atleast_1d(hs)]
    if any(h <= 0.0 for h in hs):
        raise SystemValidationError(f"amplitudes must be positive, got {hs}")
    rows = _pool_map(_layer_worker, [(h, tol.__dict__) for h in hs], jobs)
    outputs = []
    with open(out / "layer.csv", "w", encoding="utf-8") as fh:
        fh.write("h,period,h_drift_rel\n")
        for row in rows:
            fh.write(",".join(f"{v:.16e}" for v in row) + "\n")
    outputs.append("layer.csv")
    for idx, h in enumerate(hs):
        name = f"layer_orbit_{idx:03d}.csv"
        write_orbit_csv(periodic_orbit(h, tol=tol), out / name)
        outputs.append(name)
    summary = {"rows": [{"h": h, "period": p, "h_drift_rel": d}
                        for h, p, d in rows]}
    plots = [("period", [r[0] for r in rows], [r[1] for r in rows]),
             ("h_drift_rel", [r[0] for r in rows], [r[2] for r in rows])]
    return summary, outputs, plots


def _cmd_slow_manifold(args, config, system, tol, out, jobs):
    r2 = float(_resolve(args, config, "r2", 0.05))
    mu2 = float(_resolve(args, config, "mu2", 0.0))
    nu = float(_resolve(args, config, "nu", 0.2))
    order = int(_resolve(args, config, "order", 30))
    res = solve_invariant_series(system, r2, mu2, nu=nu, N=order)
    residual = invariance_residual(res)
    _write_json(manifold_to_json_dict(res, residual), out / "slow_manifold.json")
    summary = {"r2": r2, "mu2": mu2, "order": order, "residual": residual}
    return summary, ["slow_manifold.json"], []


def _cmd_hopf(args, config, system, tol, out, jobs):
    r2s = _resolve(args, config, "r2", [0.05, 0.1])
    r2s = [float(r) for r in np.atleast_1d(r2s)]
    if any(r2 <= 0.0 for r2 in r2s):
        raise SystemValidationError(
            f"r2 must be positive (the Hopf value is defined for an actual "
            f"scaling radius), got {r2s}")
    system_config = system.to_config()
    rows = _pool_map(_hopf_worker, [(system_config, r2) for r2 in r2s], jobs)
    with open(out / "hopf.csv", "w", encoding="utf-8") as fh:
        fh.write("r2,mu_H\n")
        for r2, mu in rows:
            fh.write(f"{r2:.16e},{mu:.16e}\n")
    summary = {"rows": [{"r2": r2, "mu_H": mu} for r2, mu in rows]}
    plots = [("mu_H", [r for r, _ in rows], [m for _, m in rows])]
    return summary, ["hopf.csv"], plots


def _cmd_small_branch(args, config, system, tol, out, jobs):
    r2 = float(_resolve(args, config, "r2", 0.1))
    h_min = float(_resolve(args, config, "h_min", 0.5))
    h_max = float(_resolve(args, config, "h_max", 3.0))
    n = int(_resolve(args, config, "n", 6))
    if not (r2 > 0.0 and 0.0 < h_min <= h_max and n >= 1):
        raise SystemValidationError(
            f"need r2 > 0, 0 < h_min <= h_max and n >= 1; got r2={r2}, "
            f"h_min={h_min}, h_max={h_max}, n={n}")
    points = [solve_small_branch(system, float(h), r2, tol=tol)
              for h in np.linspace(h_min, h_max, n)]
    write_branch_csv(points, out / "small_branch.csv")
    summary = {"n": len(points),
               "mu_range": [points[0].mu, points[-1].mu]}
    plots = [("mu", [p.h for p in points], [p.mu for p in points]),
             ("y2_bar", [p.h for p in points], [p.y2_bar for p in points])]
    return summary, ["small_branch.csv"], plots


def _cmd_shilnikov(args, config, system, tol, out, jobs):
    bc = ShilnikovBC(
        tau=float(_resolve(args, config, "tau", 10.0)),
        eps11=float(_resolve(args, config, "eps11", 0.25)),
        r10=float(_resolve(args, config, "r10", 0.05)),
        y11=float(_resolve(args, config, "y11", 0.1)),
        mu=float(_resolve(args, config, "mu", 0.05)),
    )
    sol = shilnikov_solve(L0_STANDING, L1_STANDING, bc)
    _write_json(shilnikov_to_json_dict(sol), out / "shilnikov.json")
    summary = {"iterations": sol.iterations, "y_entry": float(sol.y_at(0.0))}
    return summary, ["shilnikov.json"], []


def _cmd_branch(args, config, system, tol, out, jobs):
    eps = float(_resolve(args, config, "eps", 1e-4))
    h_min = float(_resolve(args, config, "h_min", 0.05))
    h_max = float(_resolve(args, config, "h_max", 0.4))
    n = int(_resolve(args, config, "n", 20))
    cycles = bool(_resolve(args, config, "cycles", False))
    family = branch_sweep(system, eps, (h_min, h_max), n,
                          with_cycles=cycles, tol=tol)
    outputs = ["family.csv"]
    write_family_csv(family, out / "family.csv")
    if cycles:
        write_family_json(family, out / "family.json")
        outputs.append("family.json")
    seam_gap = family.seam_gap
    if np.isnan(seam_gap):
        # The grid did not straddle the seam; run both solvers at the
        # seam amplitude anyway so the report is never empty.
        bp = solve_connection(system, _SEAM_EPS1, family.seam_h, tol=tol)
        sb = solve_small_branch(system, 1.0 / _SEAM_EPS1, np.sqrt(eps),
                                tol=tol)
        seam_gap = abs(bp.mu_star - sb.mu)
    summary = {
        "n": len(family.points),
        "seam": {"h": family.seam_h, "mu_gap": seam_gap},
        "mu_range": [family.points[0].mu_star, family.points[-1].mu_star],
    }
    hs = [bp.h for bp in family.points]
    plots = [("mu_bar", hs, [bp.mu_star for bp in family.points]),
             ("residual", hs, [bp.residual for bp in family.points])]
    if cycles:
        plots.append(("hausdorff", hs,
                      [bp.hausdorff for bp in family.points]))
    return summary, outputs, plots


def _cmd_orbit(args, config, system, tol, out, jobs):
    eps = float(_resolve(args, config, "eps", 1e-3))
    h = float(_resolve(args, config, "h", 0.3))
    if not (eps > 0.0 and h > 0.0):
        raise SystemValidationError(
            f"need eps > 0 and h > 0, got eps={eps}, h={h}")
    eps1 = eps / h ** 2
    if eps1 > _SEAM_EPS1:
        raise SystemValidationError(
            f"(eps, h) = ({eps}, {h}) lies below the seam (eps1={eps1:.4g}"
            f" > {_SEAM_EPS1}); use small-branch for that regime")
    bp = solve_connection(system, eps1, h, tol=tol)
    bp = replace(bp, cycle=reconstruct_cycle(system, bp, tol=tol))
    hausdorff = hausdorff_to_singular(system, bp, bp.mu_star)
    reclosure = ambient_reclosure(system, bp, tol=tol)
    with open(out / "orbit.csv", "w", encoding="utf-8") as fh:
        fh.write("x,y,z\n")
        for row in bp.cycle.points:
            fh.write(",".join(f"{v:.16e}" for v in row) + "\n")
    payload = {
        "h": bp.h, "eps": bp.eps, "mu_bar": bp.mu_star,
        "y1_star": bp.y1_star, "residual": bp.residual,
        "closure_gap": bp.cycle.closure_gap,
        "arclength": bp.cycle.arclength,
        "hausdorff": hausdorff, "reclosure_gap": reclosure,
        "orbit": bp.cycle.points.tolist(),
    }
    _write_json(payload, out / "orbit.json")
    summary = {k: payload[k] for k in
               ("h", "eps", "mu_bar", "residual", "closure_gap",
                "hausdorff", "reclosure_gap")}
    arc = np.linspace(0.0, bp.cycle.arclength, len(bp.cycle.points))
    plots = [(name, arc, bp.cycle.points[:, k])
             for k, name in enumerate(("x", "y", "z"))]
    return summary, ["orbit.csv", "orbit.json"], plots


_HANDLERS = {
    "layer": _cmd_layer,
    "slow-manifold": _cmd_slow_manifold,
    "hopf": _cmd_hopf,
    "small-branch": _cmd_small_branch,
    "shilnikov": _cmd_shilnikov,
    "branch": _cmd_branch,
    "orbit": _cmd_orbit,
}


# ---------------------------------------------------------------------
# Entry point.
# ---------------------------------------------------------------------


def _versions():
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "canard_lab": __version__,
        "backend": BACKEND,
    }


def run(argv=None):
    """Execute one subcommand; returns the process exit code."""
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1

    start = time.perf_counter()
    manifest = {
        "command": args.command,
        "argv": list(argv) if argv is not None else sys.argv[1:],
        "versions": _versions(),
        "status": "running",
    }
    try:
        config = _load_config(args.config)
        out = Path(_resolve(args, config, "out", "."))
        out.mkdir(parents=True, exist_ok=True)
    except (SystemValidationError, OSError) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1

    def finish(status, error=None, outputs=(), summary=None):
        manifest["status"] = status
        manifest["error"] = error
        manifest["outputs"] = list(outputs)
        manifest["summary"] = summary
        manifest["timings"] = {"total_s": time.perf_counter() - start}
        _write_json(manifest, out / "manifest.json")

    try:
        system = _load_system(args, config)
        tol = _tolerances(args, config)
        jobs = _resolve(args, config, "jobs", 1)
        seed = _resolve(args, config, "seed")
        manifest["config"] = {
            "system": system.to_config(),
            "tolerances": tol.__dict__,
            "jobs": jobs,
            "seed": seed,
            "out": str(out),
            "params": {k: v for k, v in config.items()
                       if k not in ("system", "out", "jobs", "seed")},
        }
        summary, outputs, plots = _HANDLERS[args.command](
            args, config, system, tol, out, jobs)
        if _resolve(args, config, "plot_data", False) and plots:
            _write_plot_data(plots, out / "plot_data.csv")
            outputs = list(outputs) + ["plot_data.csv"]
    except (SystemValidationError, ValueError) as exc:
        log.error("validation: %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        finish("config-error", error=str(exc))
        return 1
    except (SolverError, ConvergenceError) as exc:
        log.error("solver: %s", exc)
        print(f"solver failure: {exc}", file=sys.stderr)
        _write_json({"type": type(exc).__name__, "message": str(exc),
                     "command": args.command}, out / "error.json")
        finish("solver-error", error=str(exc), outputs=["error.json"])
        return 2

    finish("ok", outputs=outputs, summary=summary)
    log.info("%s finished in %.2fs", args.command,
             time.perf_counter() - start)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
