"""Run configuration: an INI file with one section per concern.

Every key has a documented default, an empty file is a valid
configuration, and unknown sections or keys are rejected.  All resolved
numeric values are recorded so emitted summaries reproduce the run.

Sections and keys (defaults in parentheses):

    [kernel]        family (triangular) | sigma (1.0) | table (CSV path "x,value")
    [kernel2]       same keys; defaults to [kernel] when absent
    [coefficients]  d1 (1.0) d2 (1.0) tau (1.0) and b (2.0) a (1.0)
                    m1 (0.5) m2 (0.5) alpha1 (1.0) alpha2 (1.0);
                    the last six accept a comma list of per-slot values
    [harvest]       kind (linear) c (0.5) | m, a | r, b
    [frontier]      mu1 (0.5) mu2 (0.5) h0 (2.0)
    [initial]       kind (bump) amplitude1 (0.5) amplitude2 (0.5) | path (CSV "x,u1,u2")
    [numerics]      dx (0.05) steps_per_period (64) or dt, horizon (50)
                    record_stride (8) eigen_nodes (256) eigen_time_steps (64)
    [classify]      eps_density_factor (1e-5) eps_front (1e-6)
                    spread_length_factor (10.0) spread_delta_factor (1e-3)
"""

from __future__ import annotations

import configparser
import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .kernel import KernelSpec
from .model import (
    Coefficients,
    FrontierParams,
    HarvestRule,
    InitialData,
    ModelParams,
    validate_hypotheses,
)
from .simulator import SimConfig

_SCHEMA = {
    "kernel": {"family", "sigma", "table"},
    "kernel2": {"family", "sigma", "table"},
    "coefficients": {"d1", "d2", "b", "a", "m1", "m2", "alpha1", "alpha2", "tau"},
    "harvest": {"kind", "c", "m", "a", "r", "b"},
    "frontier": {"mu1", "mu2", "h0"},
    "initial": {"kind", "amplitude1", "amplitude2", "path"},
    "numerics": {"dx", "dt", "steps_per_period", "horizon", "record_stride",
                 "eigen_nodes", "eigen_time_steps"},
    "classify": {"eps_density_factor", "eps_front", "spread_length_factor",
                 "spread_delta_factor"},
}

_DEFAULTS = {
    "kernel": {"family": "triangular", "sigma": 1.0},
    "coefficients": {"d1": 1.0, "d2": 1.0, "b": 2.0, "a": 1.0, "m1": 0.5, "m2": 0.5,
                     "alpha1": 1.0, "alpha2": 1.0, "tau": 1.0},
    "harvest": {"kind": "linear", "c": 0.5},
    "frontier": {"mu1": 0.5, "mu2": 0.5, "h0": 2.0},
    "initial": {"kind": "bump", "amplitude1": 0.5, "amplitude2": 0.5},
    "numerics": {"dx": 0.05, "steps_per_period": 64, "horizon": 50, "record_stride": 8,
                 "eigen_nodes": 256, "eigen_time_steps": 64},
    "classify": {"eps_density_factor": 1e-5, "eps_front": 1e-6,
                 "spread_length_factor": 10.0, "spread_delta_factor": 1e-3},
}


@dataclass
class RunConfig:
    """Validated parameters plus the resolved values for reproducibility."""

    params: ModelParams
    sim: SimConfig
    eigen_nodes: int
    eigen_time_steps: int
    classify_factors: dict
    resolved: dict
    warnings: list = field(default_factory=list)

    @property
    def classify_tolerances(self):
        from .classify import ClassifyTolerances
        from .model import a_priori_bound

        bound = a_priori_bound(self.params.coeffs, self.params.initial)
        f = self.classify_factors
        return ClassifyTolerances.for_run(
            bound, self.params.frontier.h0,
            eps_density=f["eps_density_factor"] * bound,
            eps_front=f["eps_front"],
            spread_length=f["spread_length_factor"] * self.params.frontier.h0,
            spread_delta=f["spread_delta_factor"] * bound,
        )


def _float(raw, where, errors):
    try:
        return float(raw)
    except ValueError:
        errors.append(f"{where}: expected a number, got {raw!r}")
        return None


def _float_or_list(raw, where, errors):
    if "," in str(raw):
        out = []
        for piece in str(raw).split(","):
            v = _float(piece.strip(), where, errors)
            if v is None:
                return None
            out.append(v)
        return out
    return _float(raw, where, errors)


def _int(raw, where, errors):
    v = _float(raw, where, errors)
    if v is None:
        return None
    if v != int(v):
        errors.append(f"{where}: expected an integer, got {raw!r}")
        return None
    return int(v)


def _load_kernel(section, base_dir, errors, where):
    family = section.get("family", _DEFAULTS["kernel"]["family"]).strip().lower()
    sigma = _float(section.get("sigma", _DEFAULTS["kernel"]["sigma"]), f"{where}.sigma", errors)
    try:
        if family == "table":
            path = section.get("table")
            if path is None:
                errors.append(f"{where}: table family requires a 'table' path")
                return None
            file = (base_dir / path).resolve()
            xs, vs = [], []
            with open(file) as fh:
                for row in csv.reader(fh):
                    if not row or row[0].lstrip().startswith("#"):
                        continue
                    xs.append(float(row[0]))
                    vs.append(float(row[1]))
            return KernelSpec.from_table(np.asarray(xs), np.asarray(vs))
        if sigma is None:
            return None
        return KernelSpec(family, sigma)
    except (OSError, ValueError) as err:
        errors.append(f"{where}: {err}")
        return None


def _load_initial(section, h0, base_dir, errors):
    kind = section.get("kind", "bump").strip().lower()
    if kind == "bump":
        a1 = _float(section.get("amplitude1", _DEFAULTS["initial"]["amplitude1"]),
                    "initial.amplitude1", errors)
        a2 = _float(section.get("amplitude2", _DEFAULTS["initial"]["amplitude2"]),
                    "initial.amplitude2", errors)
        if a1 is None or a2 is None or h0 is None:
            return None
        try:
            return InitialData.bump(h0, a1, a2)
        except ValueError as err:
            errors.append(f"initial: {err}")
            return None
    if kind == "csv":
        path = section.get("path")
        if path is None:
            errors.append("initial: csv kind requires a 'path'")
            return None
        try:
            data = np.loadtxt((base_dir / path).resolve(), delimiter=",", comments="#")
            return InitialData.from_profiles(data[:, 0], data[:, 1], data[:, 2])
        except (OSError, ValueError, IndexError) as err:
            errors.append(f"initial: {err}")
            return None
    errors.append(f"initial.kind: unknown kind {kind!r}")
    return None


def parse_config(path, strict: bool = False) -> RunConfig:
    """Read and validate a run configuration.

    Raises :class:`ConfigError` carrying every violation found, not just
    the first.  Hypothesis failures are warnings unless ``strict``.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file not found: {path}"])
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path)
    except configparser.Error as err:
        raise ConfigError([f"malformed config: {err}"]) from err

    errors: list[str] = []
    for section in parser.sections():
        if section not in _SCHEMA:
            errors.append(f"unknown section [{section}]")
            continue
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                errors.append(f"unknown key {key!r} in [{section}]")

    def sec(name):
        return parser[name] if parser.has_section(name) else {}

    base_dir = path.parent
    resolved: dict = {}

    co = sec("coefficients")
    cd = _DEFAULTS["coefficients"]
    cvals = {}
    for key in ("d1", "d2", "tau"):
        cvals[key] = _float(co.get(key, cd[key]), f"coefficients.{key}", errors)
    for key in ("b", "a", "m1", "m2", "alpha1", "alpha2"):
        cvals[key] = _float_or_list(co.get(key, cd[key]), f"coefficients.{key}", errors)
    coeffs = None
    if all(v is not None for v in cvals.values()):
        try:
            coeffs = Coefficients(**cvals)
        except ValueError as err:
            errors.append(f"coefficients: {err}")
    resolved["coefficients"] = {k: (v if not isinstance(v, list) else list(v))
                                for k, v in cvals.items()}

    ha = sec("harvest")
    kind = ha.get("kind", _DEFAULTS["harvest"]["kind"]).strip().lower()
    harvest = None
    hparams = {}
    try:
        if kind == "linear":
            hparams["c"] = _float(ha.get("c", _DEFAULTS["harvest"]["c"]), "harvest.c", errors)
            if hparams["c"] is not None:
                harvest = HarvestRule.linear(hparams["c"])
        elif kind == "beverton_holt":
            hparams["m"] = _float(ha.get("m", 1.0), "harvest.m", errors)
            hparams["a"] = _float(ha.get("a", 1.0), "harvest.a", errors)
            if None not in hparams.values():
                harvest = HarvestRule.beverton_holt(hparams["m"], hparams["a"])
        elif kind == "ricker":
            hparams["r"] = _float(ha.get("r", 0.1), "harvest.r", errors)
            hparams["b"] = _float(ha.get("b", 1.0), "harvest.b", errors)
            if None not in hparams.values():
                harvest = HarvestRule.ricker(hparams["r"], hparams["b"])
        elif kind == "identity":
            harvest = HarvestRule.identity()
        else:
            errors.append(f"harvest.kind: unknown kind {kind!r}")
    except ValueError as err:
        errors.append(f"harvest: {err}")
    resolved["harvest"] = {"kind": kind, **hparams}

    fr = sec("frontier")
    fd = _DEFAULTS["frontier"]
    fvals = {k: _float(fr.get(k, fd[k]), f"frontier.{k}", errors) for k in fd}
    frontier = None
    if all(v is not None for v in fvals.values()):
        try:
            frontier = FrontierParams(**fvals)
        except ValueError as err:
            errors.append(f"frontier: {err}")
    resolved["frontier"] = fvals

    k1 = _load_kernel(sec("kernel"), base_dir, errors, "kernel")
    k2 = _load_kernel(sec("kernel2"), base_dir, errors, "kernel2") \
        if parser.has_section("kernel2") else k1
    resolved["kernel"] = {"family": k1.family, "sigma": k1.sigma} if k1 else None
    resolved["kernel2"] = {"family": k2.family, "sigma": k2.sigma} if k2 else None

    initial = _load_initial(sec("initial"), fvals.get("h0"), base_dir, errors)
    resolved["initial"] = dict(sec("initial")) or dict(_DEFAULTS["initial"])

    nu = sec("numerics")
    nd = _DEFAULTS["numerics"]
    dx = _float(nu.get("dx", nd["dx"]), "numerics.dx", errors)
    horizon = _int(nu.get("horizon", nd["horizon"]), "numerics.horizon", errors)
    stride = _int(nu.get("record_stride", nd["record_stride"]), "numerics.record_stride", errors)
    eigen_nodes = _int(nu.get("eigen_nodes", nd["eigen_nodes"]), "numerics.eigen_nodes", errors)
    eigen_steps = _int(nu.get("eigen_time_steps", nd["eigen_time_steps"]),
                       "numerics.eigen_time_steps", errors)
    tau = cvals.get("tau") or 1.0
    if "dt" in nu and "steps_per_period" in nu:
        errors.append("numerics: give either dt or steps_per_period, not both")
    if "dt" in nu:
        dt = _float(nu.get("dt"), "numerics.dt", errors)
        if dt is not None and dt > 0:
            ratio = tau / dt
            if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
                errors.append(
                    f"numerics.dt: dt must divide the period exactly; tau/dt = {ratio!r} "
                    "is not an integer")
    else:
        spp = _int(nu.get("steps_per_period", nd["steps_per_period"]),
                   "numerics.steps_per_period", errors)
        dt = tau / spp if spp else None

    sim = None
    if None not in (dx, dt, horizon, stride):
        try:
            sim = SimConfig(dx=dx, dt=dt, horizon=horizon, record_stride=stride)
        except ConfigError as err:
            errors.extend(err.violations)
    resolved["numerics"] = {"dx": dx, "dt": dt, "horizon": horizon,
                            "record_stride": stride, "eigen_nodes": eigen_nodes,
                            "eigen_time_steps": eigen_steps}

    cl = sec("classify")
    cld = _DEFAULTS["classify"]
    factors = {k: _float(cl.get(k, cld[k]), f"classify.{k}", errors) for k in cld}
    resolved["classify"] = factors

    warnings = []
    if not errors and None not in (coeffs, harvest, frontier, initial, k1, k2):
        report = validate_hypotheses(coeffs, harvest, frontier, initial)
        for check in report.failures():
            msg = f"hypothesis {check.name} fails"
            if check.witness is not None:
                msg += f" (witness {check.witness:.6g})"
            if check.message:
                msg += f": {check.message}"
            if strict:
                errors.append(msg)
            else:
                warnings.append(msg)

    if errors:
        raise ConfigError(errors)

    params = ModelParams(coeffs=coeffs, harvest=harvest, frontier=frontier,
                         initial=initial, k1=k1, k2=k2)
    return RunConfig(
        params=params,
        sim=sim,
        eigen_nodes=eigen_nodes,
        eigen_time_steps=eigen_steps,
        classify_factors=factors,
        resolved=resolved,
        warnings=warnings,
    )
