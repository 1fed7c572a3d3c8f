"""Spreading/vanishing verdicts, dichotomy predictions, the small-data
vanishing certificate, and bisection for the expansion-capacity thresholds.

The underlying notions are asymptotic (habitat growing without bound with
persistent densities vs. bounded habitat with densities decaying to zero),
so verdicts from finite runs rely on observable surrogates with explicit
tolerances; ``undetermined`` is a first-class outcome, never hidden.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .kernel import kernels_match
from .model import ModelParams, a_priori_bound
from .simulator import SimConfig, Trajectory, run_free
from .eigen import (
    EigenProblemSpec,
    EigenResult,
    GeneralizedBracket,
    closed_form_lambda,
    floquet_lambda,
    generalized_bracket,
)

SPREADING = "spreading"
VANISHING = "vanishing"
UNDETERMINED = "undetermined"
CONDITIONAL = "conditional"
CONDITIONAL_SPREADING = "conditional-spreading"


@dataclass(frozen=True)
class ClassifyTolerances:
    """Observable surrogates for the asymptotic definitions.

    Vanishing: final sup density <= eps_density and per-period front
    advance <= eps_front.  Spreading: habitat width >= spread_length and
    the last-period density minimum over the core window >= spread_delta.
    """

    eps_density: float
    eps_front: float
    spread_length: float
    spread_delta: float
    core_window: tuple

    @classmethod
    def for_run(cls, a_bound: float, h0: float, eps_density: float | None = None,
                eps_front: float = 1e-6, spread_length: float | None = None,
                spread_delta: float | None = None) -> "ClassifyTolerances":
        return cls(
            eps_density=eps_density if eps_density is not None else 1e-5 * a_bound,
            eps_front=eps_front,
            spread_length=spread_length if spread_length is not None else 10.0 * h0,
            spread_delta=spread_delta if spread_delta is not None else 1e-3 * a_bound,
            core_window=(-h0 / 2.0, h0 / 2.0),
        )


@dataclass
class Verdict:
    outcome: str
    evidence: dict
    horizon: float

    def as_dict(self) -> dict:
        return {"outcome": self.outcome, "horizon": self.horizon, "evidence": self.evidence}


@dataclass
class Prediction:
    """Eigenvalue-based forecast of the run outcome, with its reasoning."""

    outcome: str
    rationale: str
    values: dict = field(default_factory=dict)


def _row_at(traj: Trajectory, t: float):
    idx = int(np.argmin(np.abs(traj.records[:, 0] - t)))
    return traj.records[idx]


def classify_trajectory(traj: Trajectory, tol: ClassifyTolerances | None = None) -> Verdict:
    """Apply the verdict rules to a recorded trajectory.

    Deterministic; anything not meeting the spreading or vanishing
    evidence (including runs shorter than five periods) is undetermined.
    """
    tol = tol or ClassifyTolerances.for_run(traj.a_bound, traj.h0)
    last = traj.records[-1]
    t_final = float(last[0])
    final_sup = float(max(last[5], last[6]))
    final_width = float(last[2] - last[1])

    evidence = {
        "final_width": final_width,
        "final_sup": final_sup,
        "periods": float(traj.periods),
    }
    if traj.periods < 5:
        evidence["note"] = "trajectory spans fewer than 5 periods"
        return Verdict(UNDETERMINED, evidence, t_final)

    prev = _row_at(traj, t_final - traj.tau)
    h_advance = float(last[2] - prev[2])
    g_advance = float(prev[1] - last[1])
    front_advance = max(h_advance, g_advance)
    sup_prev = float(max(prev[5], prev[6]))
    evidence["front_advance"] = front_advance
    evidence["front_rate"] = front_advance / traj.tau
    if final_sup > 0 and sup_prev > 0:
        evidence["density_log_slope"] = math.log(final_sup / sup_prev) / traj.tau

    core_min = _core_minimum(traj, tol.core_window)
    evidence["core_min"] = core_min

    if final_sup <= tol.eps_density and front_advance <= tol.eps_front:
        return Verdict(VANISHING, evidence, t_final)
    if final_width >= tol.spread_length and core_min is not None \
            and core_min >= tol.spread_delta:
        return Verdict(SPREADING, evidence, t_final)
    return Verdict(UNDETERMINED, evidence, t_final)


def _core_minimum(traj: Trajectory, window) -> float | None:
    """Minimum of both densities over the core window during the last period."""
    snaps = [s for s in traj.snapshots if s.t >= traj.records[-1, 0] - traj.tau - 1e-12]
    vals = []
    for snap in snaps:
        mask = (snap.x >= window[0]) & (snap.x <= window[1])
        if not np.any(mask):
            return None
        for arr in (snap.u1_pre, snap.u2_pre, snap.u1_post, snap.u2_post):
            if arr is not None:
                vals.append(float(np.min(arr[mask])))
    return min(vals) if vals else None


# ---------------------------------------------------------------------------
# Eigenvalue-based prediction
# ---------------------------------------------------------------------------


def dichotomy_predict(params: ModelParams, lam_init, lam_inf) -> Prediction:
    """Forecast from the eigenvalues on the initial habitat and at infinity.

    Shared kernels: nonnegative eigenvalue at infinity means vanishing for
    any capacities and data; nonpositive eigenvalue on the initial habitat
    means spreading; in between the outcome depends on the capacities and
    the data size (conditional).  Distinct kernels with constant
    coefficients use the generalized estimates: nonnegative lower estimate
    at infinity means vanishing; negative upper estimate means spreading
    whenever the habitat grows without bound (conditional-spreading).
    """
    if lam_init is None or lam_inf is None:
        raise ValueError("both eigenvalue inputs are required")
    h0 = params.frontier.h0
    if isinstance(lam_inf, GeneralizedBracket):
        values = {
            "lower_infinity": lam_inf.lower,
            "upper_infinity": lam_inf.upper,
            "lower_initial": lam_init.lower,
            "upper_initial": lam_init.upper,
        }
        if lam_inf.lower >= 0:
            return Prediction(VANISHING,
                              "lower eigenvalue estimate at infinity is nonnegative",
                              values)
        if lam_inf.upper < 0:
            return Prediction(CONDITIONAL_SPREADING,
                              "upper eigenvalue estimate at infinity is negative; "
                              "spreading once the habitat grows without bound",
                              values)
        return Prediction(CONDITIONAL,
                          "the generalized estimates at infinity straddle zero",
                          values)

    values = {"initial": lam_init.value, "infinity": lam_inf.value, "h0": h0}
    if lam_inf.value >= 0:
        return Prediction(VANISHING, "pulsed eigenvalue at infinity is nonnegative",
                          values)
    if lam_init.value <= 0:
        return Prediction(SPREADING,
                          "pulsed eigenvalue on the initial habitat is nonpositive",
                          values)
    return Prediction(CONDITIONAL,
                      "positive on the initial habitat, negative at infinity: "
                      "the outcome depends on the capacities and the data size",
                      values)


def eigen_inputs(params: ModelParams, n: int = 128, time_steps: int = 64):
    """Eigenvalue inputs for :func:`dichotomy_predict` from the parameters."""
    slope = min(params.harvest.slope0(), 1.0)
    h0 = params.frontier.h0
    shared = dict(coeffs=params.coeffs, k1=params.k1, k2=params.k2,
                  pulse_slope=slope, n=n, time_steps=time_steps)
    spec_init = EigenProblemSpec(interval=(-h0, h0), **shared)
    spec_inf = EigenProblemSpec(interval=None, **shared)
    if kernels_match(params.k1, params.k2):
        if params.coeffs.is_constant:
            return closed_form_lambda(spec_init), closed_form_lambda(spec_inf)
        return floquet_lambda(spec_init), floquet_lambda(spec_inf)
    if not params.coeffs.is_constant:
        raise NumericalError(
            "no eigenvalue route for distinct kernels with time-dependent coefficients")
    return generalized_bracket(spec_init), generalized_bracket(spec_inf)


# ---------------------------------------------------------------------------
# Small-data vanishing certificate
# ---------------------------------------------------------------------------


@dataclass
class VanishingCertificate:
    """Explicit smallness threshold under which vanishing is guaranteed.

    Built on a slightly enlarged habitat radius h1 > h0 whose pulsed lower
    eigenvalue is positive: gamma is half of it, and the decaying envelope
    eta(t) = h0 + (h1 - h0)(1 - exp(-gamma t)) confines the fronts.  The
    comparison constant c1 = (h1 - h0) gamma / (2 h1 (mu1 + mu2)) converts
    the eigenfunction minima into a bound on the initial sup norms, and
    mu_star is the capacity threshold of the same construction for the
    given initial data.
    """

    h0: float
    h1: float
    gamma: float
    c1: float
    smallness_bound: float
    mu_star: float
    phi0_min: float
    psi0_min: float
    eigenvalue: float
    note: str = ""

    def envelope(self, t):
        return self.h0 + (self.h1 - self.h0) * (1.0 - np.exp(-self.gamma * np.asarray(t)))


def vanishing_certificate(params: ModelParams, n: int = 129, time_steps: int = 64,
                          eps_fractions=(0.1, 0.2, 0.5),
                          h1_candidates=None) -> VanishingCertificate:
    """Search enlarged radii for a positive pulsed lower eigenvalue and
    assemble the certificate constants.

    Raises when no candidate radius has a positive eigenvalue, when a
    candidate does not exceed h0, or when the capacities vanish (the
    comparison constant is then undefined).
    """
    h0 = params.frontier.h0
    if params.frontier.mu_total <= 0:
        raise ValueError("certificate requires positive expansion capacities")
    slope = params.harvest.slope0()
    if not 0 < slope <= 1:
        raise ValueError("certificate requires a pulse slope in (0, 1]")
    if h1_candidates is None:
        h1_candidates = [h0 * (1.0 + f) for f in eps_fractions]
    shared_kernels = kernels_match(params.k1, params.k2)

    tried = []
    for h1 in h1_candidates:
        if not h1 > h0:
            raise ValueError(f"candidate radius h1 = {h1} does not exceed h0 = {h0}")
        spec = EigenProblemSpec(coeffs=params.coeffs, k1=params.k1, k2=params.k2,
                                pulse_slope=slope, interval=(-h1, h1),
                                n=n, time_steps=time_steps)
        eig = floquet_lambda(spec)
        if shared_kernels:
            lam_lower = eig.value
            note = ""
        else:
            lam_lower = generalized_bracket(spec).lower
            note = "eigenfunction pair is the discrete surrogate (distinct kernels)"
        tried.append((h1, lam_lower))
        if lam_lower > 0:
            break
    else:
        raise NumericalError(
            "certificate unavailable: no candidate radius has a positive "
            "pulsed lower eigenvalue", candidates=tried)

    gamma = lam_lower / 2.0
    # normalize the eigenfunction pair to sup <= 1 over one period
    scale = max(float(eig.phi.max()), float(eig.psi.max()))
    phi = eig.phi / scale
    psi = eig.psi / scale
    mask = np.abs(eig.grid) <= h0 + 1e-12
    phi0_min = float(np.min(phi[-1][mask]))   # pre-pulse values at the period start
    psi0_min = float(np.min(psi[-1][mask]))
    minmin = min(phi0_min, psi0_min)

    c1 = (h1 - h0) * gamma / (2.0 * h1 * params.frontier.mu_total)
    smallness = c1 * minmin

    n1, n2 = params.initial.sup_norms
    norms = n1 + n2
    if norms > 0:
        c1_data = norms / minmin
        mu_star = (h1 - h0) * gamma / (2.0 * h1 * c1_data)
    else:
        mu_star = math.inf
    return VanishingCertificate(
        h0=h0, h1=h1, gamma=gamma, c1=c1,
        smallness_bound=smallness, mu_star=mu_star,
        phi0_min=phi0_min, psi0_min=psi0_min,
        eigenvalue=lam_lower, note=note,
    )


# ---------------------------------------------------------------------------
# Capacity threshold search
# ---------------------------------------------------------------------------


@dataclass
class ThresholdResult:
    mu_low: float
    mu_high: float
    analytic_mu_low: float
    probes: list
    horizon: int

    def __post_init__(self):
        if self.mu_low > self.mu_high + 1e-15:
            raise ValueError("threshold bracket violates mu_low <= mu_high")

    @property
    def width(self) -> float:
        return self.mu_high - self.mu_low

    def as_dict(self) -> dict:
        return {
            "mu_low": self.mu_low,
            "mu_high": self.mu_high,
            "analytic_mu_low": self.analytic_mu_low,
            "width": self.width,
            "horizon": self.horizon,
            "probes": self.probes,
        }


def _with_mu(params: ModelParams, mu_total: float, ratio: float) -> ModelParams:
    mu1 = mu_total * ratio / (1.0 + ratio)
    mu2 = mu_total / (1.0 + ratio)
    frontier = dataclasses.replace(params.frontier, mu1=mu1, mu2=mu2)
    return dataclasses.replace(params, frontier=frontier)


def mu_threshold_search(params: ModelParams, mu_ratio: float, bracket,
                        horizon: int, config: SimConfig | None = None,
                        max_probes: int = 12, n: int = 129) -> ThresholdResult:
    """Bisect the total expansion capacity between vanishing and spreading.

    Requires the conditional regime (positive eigenvalue on the initial
    habitat, negative at infinity).  Each probe runs the free-boundary
    problem and classifies it; an undetermined probe is retried once at a
    doubled horizon and, if still undetermined, ends the refinement with
    the current bracket.  The analytic capacity bound from the vanishing
    certificate accompanies the empirical bracket.
    """
    config = config or SimConfig()
    slope = min(params.harvest.slope0(), 1.0)
    h0 = params.frontier.h0
    spec_init = EigenProblemSpec(coeffs=params.coeffs, k1=params.k1, k2=params.k2,
                                 pulse_slope=slope, interval=(-h0, h0), n=n)
    spec_inf = dataclasses.replace(spec_init, interval=None)
    lam_init = floquet_lambda(spec_init, want_eigenfunction=False).value
    lam_inf = floquet_lambda(spec_inf, want_eigenfunction=False).value
    if not (lam_init > 0 > lam_inf):
        raise ValueError(
            f"threshold search requires the conditional regime, got "
            f"lambda(initial) = {lam_init:.4g}, lambda(infinity) = {lam_inf:.4g}")

    probes = []

    def probe(mu_total):
        run_params = _with_mu(params, mu_total, mu_ratio)
        cfg = dataclasses.replace(config, horizon=horizon)
        verdict = classify_trajectory(run_free(run_params, cfg))
        if verdict.outcome == UNDETERMINED:
            cfg = dataclasses.replace(config, horizon=2 * horizon)
            verdict = classify_trajectory(run_free(run_params, cfg))
        probes.append({"mu_total": mu_total, "outcome": verdict.outcome,
                       "evidence": verdict.evidence})
        return verdict.outcome

    lo, hi = float(bracket[0]), float(bracket[1])
    if not 0 < lo < hi:
        raise ValueError("bracket must satisfy 0 < low < high")
    out_lo = probe(lo)
    out_hi = probe(hi)
    if out_lo != VANISHING or out_hi != SPREADING:
        raise NumericalError(
            "bracket endpoints are not of opposite verdicts",
            low=(lo, out_lo), high=(hi, out_hi))

    for _ in range(max_probes):
        mid = 0.5 * (lo + hi)
        outcome = probe(mid)
        if outcome == VANISHING:
            lo = mid
        elif outcome == SPREADING:
            hi = mid
        else:
            break

    analytic = vanishing_certificate(params, n=n).mu_star
    return ThresholdResult(mu_low=lo, mu_high=hi, analytic_mu_low=analytic,
                           probes=probes, horizon=horizon)
