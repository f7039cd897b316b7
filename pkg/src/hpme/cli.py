"""Command-line front end: ``hpme <command> [options]``.

Every command writes a JSON report and a ``manifest.json`` into the output
directory (``--out``, else ``$HPME_OUT``, else ``./hpme_out``).  Exit codes:
0 all checks pass, 1 a verification failed, 2 bad configuration, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .barriers import (build_backward_barrier, build_barrier_w, build_phi_perturbation,
                       check_log_condition)
from .elliptic import make_separable, solve_sublinear, verify_sandwich
from .errors import (ConstraintError, ConstructionError, DomainError, SolverError,
                     VerificationError)
from .geometry import CATALOG, compute_H, make_grid, model_from_name, stochastic_completeness
from .pme_solver import (PMEConfig, barenblatt, run_blowup_experiment, solve_dirichlet_ball,
                         uniqueness_probe)

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


class ConfigError(Exception):
    pass


# --------------------------------------------------------------------------
# output helpers

def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def dumps(obj):
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


def config_hash(cfg):
    return hashlib.sha256(json.dumps(_plain(cfg), sort_keys=True).encode()).hexdigest()


def write_manifest(out, command, cfg, checks, passed):
    cfg = {k: v for k, v in cfg.items() if k != "out"}
    write_json(out / "manifest.json", {
        "command": command, "config": cfg, "config_hash": config_hash(cfg),
        "config_path": cfg.get("config"), "deterministic": True,
        "version": __version__, "checks": checks, "pass": passed})


# --------------------------------------------------------------------------
# config handling

MODEL_KEYS = {"hyperbolic": ("c",), "quadratic": ("c0",), "power": ("k", "sigma"),
              "superquadratic": ("p",), "euclidean": ()}


def build_model(cfg):
    name = str(cfg.get("model", "hyperbolic")).lower()
    if name not in CATALOG:
        raise ConfigError(f"unknown model {name!r}; catalog: {', '.join(CATALOG)}")
    params = {}
    for key in MODEL_KEYS[name]:
        if cfg.get(key) is not None:
            params["C0" if key == "c0" else key] = float(cfg[key])
    try:
        return model_from_name(name, **params)
    except ConstructionError as exc:
        raise ConfigError(str(exc)) from exc


def build_profile(cfg, R=None):
    model = build_model(cfg)
    N = int(cfg["dim"])
    R = float(cfg["rmax"] if R is None else R)
    h = float(cfg.get("h") or 0.05)
    grid = make_grid(model, N, R, dr0=h, ratio=1.0, h_max=h) if cfg.get("uniform") else \
        make_grid(model, N, R, h_max=h)
    return compute_H(model, N, grid)


def _merge_config(args):
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        for k, v in data.items():
            key = k.replace("-", "_")
            if key not in cfg:
                raise ConfigError(f"unknown config key {k!r}")
            cfg[key] = v
    return cfg


def _outdir(cfg, command):
    base = cfg.get("out") or os.environ.get("HPME_OUT") or "hpme_out"
    out = Path(base)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --------------------------------------------------------------------------
# commands; each returns (report, checks, passed)

def cmd_geom(cfg, out):
    prof = build_profile(cfg)
    prof.to_csv(out / "profile.csv")
    comp = stochastic_completeness(prof, cfg.get("r_probe"))
    res = prof.laplacian_residual()
    report = {"model": prof.model.label(), "N": prof.N, "R": float(prof.r[-1]),
              "completeness": comp.as_dict(), "laplacian_residual_max": float(res.max()),
              "gradient_bound_max": float(np.max(prof.H1**2 - 2 * prof.H))}
    write_json(out / "completeness.json", report)
    return report, ["H-identity", "stochastic-completeness"], comp.status != "undecided"


def cmd_elliptic(cfg, out):
    prof = build_profile(cfg)
    m = float(cfg["m"])
    report, passed = {}, True
    sol = solve_sublinear(prof, m, float(cfg["u0"]))
    try:
        consts = verify_sandwich(sol, b=float(cfg["b"]))
        report["sandwich"] = consts.as_dict()
    except VerificationError as exc:
        report["sandwich"] = {"error": str(exc), "node": exc.report}
        passed = False
    sol.to_csv(out / "elliptic.csv")
    if cfg.get("T") is not None:
        sep = make_separable(prof, m, float(cfg["T"]), float(cfg["alpha"]))
        res = sep.residual()
        report["separable"] = {"T": sep.T, "alpha": sep.alpha, "U0": float(sep.values[0]),
                               "max_relative_residual": float(res.max())}
        passed = passed and float(res.max()) <= 1e-6
    write_json(out / "elliptic.json", report)
    return report, ["sublinear-sandwich", "separable-residual"], passed


def cmd_barrier(cfg, out):
    rmax = float(cfg["rmax"])
    prof = build_profile(cfg, R=max(rmax, float(cfg.get("R0") or 0)) + 5.0)
    report, checks, passed = {}, ["w-barrier"], True
    try:
        bw = build_barrier_w(prof, float(cfg["alpha"]), float(cfg["r0"]), rmax)
        report["w_barrier"] = bw.as_dict()
        passed = bw.passed
    except ConstructionError as exc:
        report["w_barrier"] = {"error": str(exc)}
        passed = False
    if cfg.get("K") is not None:
        checks.append("backward-barrier")
        try:
            bb = build_backward_barrier(prof, float(cfg["K"]), float(cfg["T"]), float(cfg["C2"]),
                                        float(cfg["R0"]), rmax, m=cfg.get("m"), l=cfg.get("l"),
                                        strict=not cfg.get("no_strict"))
            report["backward_barrier"] = bb.as_dict()
            passed = passed and bb.passed
        except ConstraintError as exc:
            report["backward_barrier"] = {"error": str(exc), "margin": exc.margin}
            passed = False
    if cfg.get("l") is not None:
        checks.append("log-condition")
        lc = check_log_condition(prof.model, float(cfg["l"]), rmax)
        report["log_condition"] = lc.as_dict()
        passed = passed and lc.holds
    if cfg.get("phi"):
        checks.append("phi-perturbation")
        c0 = float(cfg.get("c0") or 1.0)
        pp = build_phi_perturbation(c0, float(cfg["kappa"]), float(cfg["K_curv"]),
                                    float(cfg["r0"]), N=int(cfg["dim"]), Rmax=rmax)
        report["phi_perturbation"] = pp.as_dict()
        passed = passed and pp.passed
    write_json(out / "barrier.json", report)
    return report, checks, passed


def _write_snapshots(path, run):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "r", "u"])
        for s in run.snapshots:
            for r, u in zip(run.grid.nodes, s.u):
                w.writerow([repr(float(s.t)), repr(float(r)), repr(float(u))])


def _radius_for_H(prof, target):
    idx = np.nonzero(prof.H >= target)[0]
    if idx.size == 0:
        raise ConfigError(f"profile never reaches H = {target}; raise --rmax")
    return float(prof.r[idx[0]])


def cmd_pme(cfg, out):
    m, N, R, t_end = float(cfg["m"]), int(cfg["dim"]), float(cfg["R"]), float(cfg["t_end"])
    data = cfg.get("data") or "barenblatt"
    times = [t_end * (k + 1) / int(cfg["snapshots"]) for k in range(int(cfg["snapshots"]))]
    if data == "barenblatt":
        model = build_model({**cfg, "model": "euclidean"})
        cfg_p = PMEConfig(m=m, N=N, model=model, R=R, boundary=0.0)
        t0 = 1.0
        u0 = lambda r: barenblatt(r, t0, m, N)
        run = solve_dirichlet_ball(cfg_p, u0, t_end, snapshot_times=times)
        exact = barenblatt(run.grid.nodes, t0 + t_end, m, N)
        extra = {"linf_error": float(np.max(np.abs(run.final.u - exact)))}
    elif data == "separable":
        prof = build_profile(cfg, R=R)
        sep = make_separable(prof, m, float(cfg["T"]), float(cfg["alpha"]))
        ub = float(sep.at(np.array([R]))[0])
        T = sep.T
        cfg_p = PMEConfig(m=m, N=N, model=prof.model, R=R,
                          boundary=lambda t: (1 - t / T) ** (-1 / (m - 1)) * ub)
        run = solve_dirichlet_ball(cfg_p, sep.at, t_end, snapshot_times=times)
        exact = sep.solution(run.grid.nodes, run.final.t)
        extra = {"max_relative_error": float(np.max(np.abs(run.final.u - exact) / exact))}
    else:
        raise ConfigError(f"unknown data family {data!r}; use barenblatt or separable")
    _write_snapshots(out / "snapshots.csv", run)
    report = {"data": data, "steps": run.steps, "final_t": run.final.t, "blew_up": run.blew_up,
              "max_mass_residual": run.max_mass_residual, **extra}
    write_json(out / "pme.json", report)
    return report, ["flux-balance"], run.max_mass_residual <= 1e-9 and not run.blew_up


def cmd_blowup(cfg, out):
    m, T, alpha = float(cfg["m"]), float(cfg["T"]), float(cfg["alpha"])
    target_H = float(cfg["target_H"])
    prof = build_profile(cfg)
    R = float(cfg["R"]) if cfg.get("R") else _radius_for_H(prof, target_H)
    t_end = float(cfg["t_frac"]) * T
    rep = run_blowup_experiment(prof, m, T, alpha, R, t_end, beta=float(cfg["beta"]))
    report = rep.as_dict()
    report["R"] = R
    ok_fit = abs(rep.T_fit - T) <= 0.1 * T
    ok_track = rep.tracking_error <= 0.02
    ok_sand = bool(rep.sandwich.get("discrete_ordered", True))
    report["checks"] = {"T_fit_within_10pct": ok_fit, "tracking_within_2pct": ok_track,
                        "sandwich_ordered": ok_sand}
    write_json(out / "blowup.json", report)
    return report, ["blowup-time-fit", "separable-tracking", "sandwich-order"], \
        ok_fit and ok_track and ok_sand


DATA_EXPONENTS = {"subcritical": 0.5, "critical": 1.0, "supercritical": 2.0}


def cmd_uniq(cfg, out):
    m = float(cfg["m"])
    prof = build_profile(cfg, R=4 * float(cfg["R"]) + 1.0)
    e = DATA_EXPONENTS.get(cfg.get("data") or "subcritical")
    if e is None:
        raise ConfigError(f"unknown data class; use one of {', '.join(DATA_EXPONENTS)}")

    def u0(r):
        return (1.0 + prof.H_at(r)) ** (e / (m - 1.0))

    reports = {}
    for kind in ("refinement", "domain"):
        rep = uniqueness_probe(prof.model, prof.N, m, u0, float(cfg["t_end"]), kind=kind,
                               R=float(cfg["R"]), h=float(cfg["h_probe"]))
        reports[kind] = rep.as_dict()
    passed = all(r["converged"] for r in reports.values())
    write_json(out / "uniqueness.json", reports)
    return reports, ["refinement-convergence", "domain-convergence"], passed


def _sweep_job(job):
    name, argv = job
    code = main(argv)
    return name, code


def cmd_sweep(cfg, out):
    if not cfg.get("jobs"):
        raise ConfigError("sweep needs --jobs FILE")
    try:
        jobs = json.loads(Path(cfg["jobs"]).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read jobs file: {exc}") from exc
    work = []
    for name in sorted(jobs):
        argv = list(jobs[name]) + ["--out", str(out / name)]
        work.append((name, argv))
    with ProcessPoolExecutor(max_workers=int(cfg.get("workers") or 1)) as ex:
        results = dict(ex.map(_sweep_job, work))
    report = {"jobs": results}
    write_json(out / "sweep.json", report)
    return report, ["sweep"], all(c == 0 for c in results.values())


# --------------------------------------------------------------------------
# parser

def _common(p, dim=3, model="hyperbolic", rmax=20.0):
    p.add_argument("--config", help="JSON file whose keys override the flags")
    p.add_argument("--out", help="output directory")
    p.add_argument("--model", default=model, help=f"one of {', '.join(CATALOG)}")
    p.add_argument("--c", type=float, help="hyperbolic curvature scale")
    p.add_argument("--c0", type=float, help="quadratic curvature scale")
    p.add_argument("--k", type=float, help="power rate")
    p.add_argument("--sigma", type=float, help="power exponent in (0, 2)")
    p.add_argument("--p", type=float, help="superquadratic exponent")
    p.add_argument("--dim", type=int, default=dim)
    p.add_argument("--rmax", type=float, default=rmax)
    p.add_argument("--h", type=float, default=0.05, help="mesh width (cap)")
    p.add_argument("--uniform", action="store_true", help="uniform mesh of width h")


def build_parser():
    ap = argparse.ArgumentParser(prog="hpme", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("geom", help="H-function, curvatures and stochastic completeness")
    _common(p, model="euclidean")
    p.add_argument("--r-probe", type=float)
    p.set_defaults(func=cmd_geom, uniform=True)

    p = sub.add_parser("elliptic", help="sublinear radial problem and separable profile")
    _common(p, dim=2, rmax=22.0)
    p.add_argument("--m", type=float, default=2.0)
    p.add_argument("--u0", type=float, default=1.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--T", type=float)
    p.add_argument("--alpha", type=float, default=1.0)
    p.set_defaults(func=cmd_elliptic)

    p = sub.add_parser("barrier", help="certify barrier inequalities")
    _common(p, dim=2, rmax=60.0)
    p.add_argument("--alpha", type=float, default=3.5)
    p.add_argument("--r0", type=float, default=2.0)
    p.add_argument("--K", type=float, help="backward barrier rate")
    p.add_argument("--T", type=float, default=0.2)
    p.add_argument("--C2", type=float, default=1.0)
    p.add_argument("--R0", type=float, default=3.0)
    p.add_argument("--no-strict", action="store_true")
    p.add_argument("--m", type=float)
    p.add_argument("--l", type=float, help="log-condition exponent")
    p.add_argument("--phi", action="store_true", help="also build the perturbed model")
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--K-curv", type=float, default=0.5)
    p.set_defaults(func=cmd_barrier)

    p = sub.add_parser("pme", help="single Dirichlet run")
    _common(p, dim=3, model="euclidean")
    p.add_argument("--m", type=float, default=2.0)
    p.add_argument("--R", type=float, default=6.0)
    p.add_argument("--t-end", type=float, default=0.1)
    p.add_argument("--snapshots", type=int, default=4)
    p.add_argument("--data", default="barenblatt", help="barenblatt or separable")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.set_defaults(func=cmd_pme)

    p = sub.add_parser("blowup", help="blow-up experiment from a separable profile")
    _common(p, dim=2, rmax=24.0)
    p.add_argument("--m", type=float, default=2.0)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.2)
    p.add_argument("--R", type=float)
    p.add_argument("--target-H", type=float, default=20.0)
    p.add_argument("--t-frac", type=float, default=0.8)
    p.set_defaults(func=cmd_blowup)

    p = sub.add_parser("uniq", help="refinement and domain convergence probes")
    _common(p, dim=2)
    p.add_argument("--m", type=float, default=2.0)
    p.add_argument("--R", type=float, default=8.0)
    p.add_argument("--h-probe", type=float, default=0.1)
    p.add_argument("--t-end", type=float, default=0.3)
    p.add_argument("--data", default="subcritical", help=", ".join(DATA_EXPONENTS))
    p.set_defaults(func=cmd_uniq)

    p = sub.add_parser("sweep", help="run several commands in worker processes")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--jobs", help="JSON object mapping job names to argument lists")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = _merge_config(args)
        out = _outdir(cfg, args.command)
        report, checks, passed = args.func(cfg, out)
    except (ConfigError, DomainError, KeyError, TypeError, ValueError) as exc:
        print(f"hpme {args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"hpme {args.command}: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except VerificationError as exc:
        print(f"hpme {args.command}: verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    write_manifest(out, args.command, cfg, checks, passed)
    print(f"hpme {args.command}: {'pass' if passed else 'FAIL'} -> {out}")
    return EXIT_OK if passed else EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
