"""Command-line entry point.

Subcommands: ``simulate``, ``eigen``, ``periodic``, ``classify``,
``threshold`` and ``sweep``.  Exit codes: 0 success, 2 configuration
error, 3 numerical failure, 4 invariant-audit violation.

All CSV output prints floating-point values with 17 significant digits;
JSON uses exact shortest round-trip representations.  Two invocations
with the same configuration produce byte-identical outputs: there is no
randomness anywhere in the core.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, NumericalError
from .config import parse_config
from .kernel import kernels_match
from .model import InitialData, a_priori_bound
from .simulator import run_fixed, run_free
from .eigen import (
    EigenProblemSpec,
    closed_form_lambda,
    floquet_lambda,
    generalized_bracket,
    lambda0,
    lambda_sensitivity,
)
from .periodic import monotone_iteration, ode_periodic_linear, ode_periodic_logistic
from .classify import classify_trajectory, dichotomy_predict, eigen_inputs, mu_threshold_search

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_AUDIT = 4


def _fmt(value) -> str:
    return format(float(value), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def _write_json(path, payload):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _eigen_spec(cfg, interval, n=None, time_steps=None) -> EigenProblemSpec:
    return EigenProblemSpec(
        coeffs=cfg.params.coeffs,
        k1=cfg.params.k1,
        k2=cfg.params.k2,
        pulse_slope=min(cfg.params.harvest.slope0(), 1.0),
        interval=interval,
        n=n or cfg.eigen_nodes,
        time_steps=time_steps or cfg.eigen_time_steps,
    )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = parse_config(args.config, strict=args.strict)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.fixed is not None:
        traj = run_fixed(cfg.params, tuple(args.fixed), cfg.sim)
    else:
        traj = run_free(cfg.params, cfg.sim)
    traj.write_csv(out / "trajectory.csv")
    for snap in traj.snapshots:
        with open(out / f"snap_{snap.period}.csv", "w") as fh:
            fh.write("x,u1,u2\n")
            for x, u1, u2 in zip(snap.x, snap.u1_pre, snap.u2_pre):
                fh.write(f"{_fmt(x)},{_fmt(u1)},{_fmt(u2)}\n")
    verdict = classify_trajectory(traj, cfg.classify_tolerances)
    summary = {
        "run": traj.summary(),
        "verdict": verdict.as_dict(),
        "config": cfg.resolved,
        "warnings": cfg.warnings,
    }
    _write_json(out / "summary.json", summary)
    for warning in cfg.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    if args.audit and traj.audit and traj.audit.violations > 0:
        print(f"audit violations: {traj.audit.as_dict()}", file=sys.stderr)
        return EXIT_AUDIT
    return EXIT_OK


def cmd_eigen(args) -> int:
    cfg = parse_config(args.config, strict=args.strict)
    h0 = cfg.params.frontier.h0
    interval = tuple(args.interval) if args.interval else (-h0, h0)
    payload = {"mode": args.mode, "interval": list(interval),
               "grid": cfg.eigen_nodes, "config": cfg.resolved}
    eig = None
    if args.mode == "lambda0":
        eig = lambda0(cfg.params.k1, interval[1] - interval[0], cfg.eigen_nodes)
        payload.update({"lambda": eig.value, "method": eig.method,
                        "residual": eig.residual})
    elif args.mode == "closed":
        eig = closed_form_lambda(_eigen_spec(cfg, interval))
        payload.update({"lambda": eig.value, "method": eig.method,
                        "residual": eig.residual, "lambda0": eig.lam0,
                        "details": {k: eig.details[k]
                                    for k in ("m", "Lambda", "c1", "c2")}})
    elif args.mode == "floquet":
        eig = floquet_lambda(_eigen_spec(cfg, interval))
        payload.update({"lambda": eig.value, "method": eig.method,
                        "residual": eig.residual, "note": eig.note})
    elif args.mode == "bracket":
        br = generalized_bracket(_eigen_spec(cfg, interval))
        payload.update(lower=br.lower, upper=br.upper, witnesses=br.witnesses)
    elif args.mode == "sensitivity":
        payload.update(value=lambda_sensitivity(_eigen_spec(cfg, interval)),
                       method="adjoint")
    if args.eigenfunction_csv and eig is not None and eig.phi is not None:
        with open(args.eigenfunction_csv, "w") as fh:
            fh.write("t,x,phi,psi\n")
            for i, t in enumerate(eig.times):
                for j, x in enumerate(eig.grid):
                    fh.write(f"{_fmt(t)},{_fmt(x)},{_fmt(eig.phi[i, j])},"
                             f"{_fmt(eig.psi[i, j])}\n")
        payload["eigenfunction_csv"] = str(args.eigenfunction_csv)
    _write_json(args.out, payload)
    return EXIT_OK


def cmd_periodic(args) -> int:
    cfg = parse_config(args.config, strict=args.strict)
    h0 = cfg.params.frontier.h0
    interval = tuple(args.interval) if args.interval else (-h0, h0)
    with open(args.out, "w") as fh:
        if args.mode == "spatial":
            sol = monotone_iteration(cfg.params, interval, args.direction, cfg.sim)
            fh.write("t,x,U1,U2\n")
            for i, t in enumerate(sol.times):
                for j, x in enumerate(sol.x):
                    fh.write(f"{_fmt(t)},{_fmt(x)},{_fmt(sol.u1[i, j])},"
                             f"{_fmt(sol.u2[i, j])}\n")
        else:
            if args.mode == "ode-linear":
                sol = ode_periodic_linear(cfg.params.coeffs, cfg.params.harvest)
            else:
                sol = ode_periodic_logistic(cfg.params.coeffs, cfg.params.harvest)
            fh.write("t,U1,U2\n")
            for t, u1, u2 in zip(sol.times, sol.u1, sol.u2):
                fh.write(f"{_fmt(t)},{_fmt(u1)},{_fmt(u2)}\n")
    return EXIT_OK


def cmd_classify(args) -> int:
    cfg = parse_config(args.config, strict=args.strict)
    traj = run_free(cfg.params, cfg.sim)
    verdict = classify_trajectory(traj, cfg.classify_tolerances)
    lam_init, lam_inf = eigen_inputs(cfg.params, n=min(cfg.eigen_nodes, 192),
                                     time_steps=cfg.eigen_time_steps)
    prediction = dichotomy_predict(cfg.params, lam_init, lam_inf)
    _write_json(args.out, {
        "verdict": verdict.as_dict(),
        "prediction": {"outcome": prediction.outcome,
                       "rationale": prediction.rationale,
                       "values": prediction.values},
        "run": traj.summary(),
        "config": cfg.resolved,
    })
    if args.audit and traj.audit and traj.audit.violations > 0:
        print(f"audit violations: {traj.audit.as_dict()}", file=sys.stderr)
        return EXIT_AUDIT
    return EXIT_OK


def cmd_threshold(args) -> int:
    cfg = parse_config(args.config, strict=args.strict)
    horizon = args.horizon or cfg.sim.horizon
    result = mu_threshold_search(cfg.params, args.ratio, tuple(args.bracket),
                                 horizon=horizon, config=cfg.sim,
                                 max_probes=args.max_probes)
    _write_json(args.out, {"threshold": result.as_dict(), "config": cfg.resolved})
    return EXIT_OK


def _sweep_point(cfg, param, value):
    params = cfg.params
    h0 = params.frontier.h0
    if param == "hprime":
        spec = dataclasses.replace(_eigen_spec(cfg, (-h0, h0), n=min(cfg.eigen_nodes, 192)),
                                   pulse_slope=float(value))
        use_closed = params.coeffs.is_constant and kernels_match(params.k1, params.k2)
        eig = closed_form_lambda(spec) if use_closed else floquet_lambda(spec)
        return {"hprime": value, "lambda": eig.value, "method": eig.method}
    if param == "L":
        spec = _eigen_spec(cfg, (0.0, float(value)), n=min(cfg.eigen_nodes, 192))
        use_closed = params.coeffs.is_constant and kernels_match(params.k1, params.k2)
        eig = closed_form_lambda(spec) if use_closed else floquet_lambda(spec)
        return {"L": value, "lambda": eig.value, "method": eig.method}
    if param == "mu":
        total = params.frontier.mu_total
        share = params.frontier.mu1 / total if total > 0 else 0.5
        frontier = dataclasses.replace(params.frontier, mu1=value * share,
                                       mu2=value * (1.0 - share))
        run_params = dataclasses.replace(params, frontier=frontier)
        traj = run_free(run_params, cfg.sim)
        verdict = classify_trajectory(traj, cfg.classify_tolerances)
        return {"mu_total": value, "outcome": verdict.outcome,
                "evidence": verdict.evidence}
    if param == "h0":
        resolved = cfg.resolved["initial"]
        if str(resolved.get("kind", "bump")) != "bump":
            raise ConfigError(["h0 sweeps require bump initial data"])
        frontier = dataclasses.replace(params.frontier, h0=float(value))
        initial = InitialData.bump(float(value), float(resolved["amplitude1"]),
                                   float(resolved["amplitude2"]))
        run_params = dataclasses.replace(params, frontier=frontier, initial=initial)
        spec = _eigen_spec(cfg, (-float(value), float(value)), n=min(cfg.eigen_nodes, 192))
        eig = floquet_lambda(spec, want_eigenfunction=False)
        traj = run_free(run_params, cfg.sim)
        verdict = classify_trajectory(traj, cfg.classify_tolerances)
        return {"h0": value, "lambda": eig.value, "outcome": verdict.outcome}
    raise ConfigError([f"unknown sweep parameter {param!r}"])


def cmd_sweep(args) -> int:
    cfg = parse_config(args.config, strict=args.strict)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError(["sweep requires a nonempty value grid"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"param": args.param, "points": []}
    for i, value in enumerate(values):
        entry = {"index": i, "value": value}
        try:
            result = _sweep_point(cfg, args.param, value)
            entry.update(result)
            _write_json(out / f"point_{i:03d}.json", result)
        except (NumericalError, ConfigError, ValueError) as err:
            entry["error"] = str(err)
        manifest["points"].append(entry)
    _write_json(out / "manifest.json", manifest)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pulsefront",
        description="Two-stage population dynamics with nonlocal dispersal, "
                    "moving habitat edges and periodic harvesting pulses.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default=None):
        p.add_argument("--config", required=True, help="run configuration (INI)")
        if out_default is None:
            p.add_argument("--out", required=True, help="output path")
        else:
            p.add_argument("--out", default=out_default, help="output path")
        p.add_argument("--strict", action="store_true",
                       help="treat hypothesis failures as configuration errors")

    p = sub.add_parser("simulate", help="run the free- or fixed-boundary problem")
    common(p, out_default="out")
    p.add_argument("--fixed", nargs=2, type=float, metavar=("L1", "L2"),
                   help="fixed-domain mode on [L1, L2]")
    p.add_argument("--audit", action="store_true",
                   help="exit 4 when any invariant audit fails")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eigen", help="eigenvalue computations")
    common(p)
    p.add_argument("--mode", required=True,
                   choices=["lambda0", "closed", "floquet", "bracket", "sensitivity"])
    p.add_argument("--interval", nargs=2, type=float, metavar=("L1", "L2"))
    p.add_argument("--eigenfunction-csv", help="also write the eigenfunction")
    p.set_defaults(func=cmd_eigen)

    p = sub.add_parser("periodic", help="periodic-state solvers")
    common(p)
    p.add_argument("--mode", required=True,
                   choices=["spatial", "ode-linear", "ode-logistic"])
    p.add_argument("--direction", default="from_upper",
                   choices=["from_upper", "from_lower"])
    p.add_argument("--interval", nargs=2, type=float, metavar=("L1", "L2"))
    p.set_defaults(func=cmd_periodic)

    p = sub.add_parser("classify", help="run, classify and predict")
    common(p)
    p.add_argument("--audit", action="store_true",
                   help="exit 4 when any invariant audit fails")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("threshold", help="bisect the expansion-capacity threshold")
    common(p)
    p.add_argument("--ratio", type=float, default=1.0, help="mu1 : mu2 ratio")
    p.add_argument("--bracket", nargs=2, type=float, required=True,
                   metavar=("LO", "HI"))
    p.add_argument("--horizon", type=int, help="periods per probe")
    p.add_argument("--max-probes", type=int, default=12)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("sweep", help="parameter sweeps with a manifest")
    common(p)
    p.add_argument("--param", required=True, choices=["hprime", "mu", "L", "h0"])
    p.add_argument("--values", required=True, help="comma-separated grid")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        for violation in err.violations:
            print(f"config error: {violation}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
