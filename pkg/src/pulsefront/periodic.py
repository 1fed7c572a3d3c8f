"""Periodic-state solvers.

``monotone_iteration`` computes the extremal tau-periodic states of the
fixed-domain problem by sweeping a shifted linear system driven by the
previous iterate: from above starting at the a-priori bound (A, A), or
from below starting at a small multiple of the pulsed eigenfunction.
When both limits agree the periodic state is unique and certified.

Two spatially homogeneous impulsive ODE problems serve as comparison
envelopes: the linear stage system (whose only nonlinearity is the pulse
itself) and the logistic stage system.  Both are integrated to their
attracting periodic orbit.

All time courses follow the pulse convention used across the package:
index 0 is the post-pulse instant 0+, the last index is the period end
tau, and the stored pre-pulse values close the loop.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import NumericalError
from .kernel import convolve_profile
from .model import Coefficients, HarvestRule, ModelParams, a_priori_bound, apply_harvest
from .simulator import SimConfig, FrontState, step_interior
from .eigen import EigenProblemSpec, floquet_lambda

FROM_UPPER = "from_upper"
FROM_LOWER = "from_lower"

SPATIAL = "spatial"
ODE_LINEAR = "ode_linear"
ODE_LOGISTIC = "ode_logistic"


@dataclass
class PeriodicSolution:
    """A tau-periodic state with its convergence diagnostics.

    ``u1``/``u2`` hold the post-pulse branch over one period; ``u1_pre``/
    ``u2_pre`` are the matching pre-pulse values at the period start, so
    u2[0] == H(u2_pre) holds exactly by construction.
    """

    kind: str
    times: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    u1_pre: np.ndarray
    u2_pre: np.ndarray
    residual: float
    x: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def sup(self) -> float:
        return float(max(np.max(self.u1, initial=0.0), np.max(self.u2, initial=0.0)))


# ---------------------------------------------------------------------------
# Monotone iteration on a fixed interval
# ---------------------------------------------------------------------------


def shift_constants(coeffs: Coefficients, bound: float) -> tuple:
    """Shifts making the shifted reaction terms monotone on [0, bound]."""
    sup = coeffs.sup
    k1 = sup["a"] + sup["m1"] + 2.0 * sup["alpha1"] * bound
    k2 = sup["m2"] + 2.0 * sup["alpha2"] * bound
    return k1, k2


def _iteration_grid(params: ModelParams, interval, config: SimConfig):
    dx = config.dx
    lo, hi = interval
    i_left, i_right = round(lo / dx), round(hi / dx)
    if abs(lo - i_left * dx) > 1e-9 * max(1.0, abs(lo)) or \
       abs(hi - i_right * dx) > 1e-9 * max(1.0, abs(hi)):
        raise ValueError("interval endpoints must be integer multiples of dx")
    if i_right - i_left < 2:
        raise ValueError("interval must span at least two cells")
    return np.arange(i_left, i_right + 1) * dx


def _sweep(prev1, prev2, params: ModelParams, config: SimConfig, steps, dt,
           kshift1, kshift2, rows):
    """One pass of the shifted linear iteration over a full period.

    ``prev1``/``prev2`` hold the previous iterate at every step time
    ((steps+1, nx), post-pulse branch).  Returns the next iterate.
    """
    coeffs = params.coeffs
    d1, d2 = coeffs.d1, coeffs.d2
    next1 = np.empty_like(prev1)
    next2 = np.empty_like(prev2)
    next1[0] = prev1[-1]
    next2[0] = apply_harvest(params.harvest, prev2[-1])
    for j in range(steps):
        cv = coeffs.values_at(j * dt)
        conv1 = convolve_profile(params.k1, next1[j], config.dx, row=rows[0])
        conv2 = convolve_profile(params.k2, next2[j], config.dx, row=rows[1])
        drive1 = kshift1 * prev1[j] + cv["b"] * prev2[j] \
            - (cv["a"] + cv["m1"]) * prev1[j] - cv["alpha1"] * prev1[j] ** 2
        drive2 = kshift2 * prev2[j] + cv["a"] * prev1[j] \
            - cv["m2"] * prev2[j] - cv["alpha2"] * prev2[j] ** 2
        next1[j + 1] = next1[j] * (1.0 - dt * (d1 + kshift1)) + dt * (d1 * conv1 + drive1)
        next2[j + 1] = next2[j] * (1.0 - dt * (d2 + kshift2)) + dt * (d2 * conv2 + drive2)
    return next1, next2


def _lower_seed(params: ModelParams, interval, config: SimConfig, steps, x):
    """Small positive subsolution built from the pulsed eigenfunction."""
    spec = EigenProblemSpec(
        coeffs=params.coeffs, k1=params.k1, k2=params.k2,
        pulse_slope=params.harvest.slope0(), interval=tuple(interval),
        n=x.size, time_steps=steps,
    )
    eig = floquet_lambda(spec)
    lam = eig.value
    if lam >= 0:
        raise NumericalError(
            "no positive lower seed: the pulsed eigenvalue is nonnegative", value=lam)
    ups = abs(lam) / 2.0
    tau = params.coeffs.tau
    factor = math.exp((lam + ups) * tau)
    decay = np.exp((-lam - ups) * eig.times)[:, None]
    seed1 = factor * eig.phi
    seed2 = factor * decay * eig.psi
    return seed1, seed2, lam


def monotone_iteration(params: ModelParams, interval, direction: str,
                       config: SimConfig | None = None, tol: float = 1e-8,
                       max_sweeps: int = 20_000) -> PeriodicSolution:
    """Extremal tau-periodic state of the fixed-domain problem.

    ``from_upper`` starts at the a-priori bound and decreases to the
    maximal periodic state (possibly zero); ``from_lower`` requires a
    negative pulsed eigenvalue, seeds with a small multiple of its
    eigenfunction (halving the amplitude until the first sweep verifies
    it as a subsolution) and increases to the minimal one.  When the two
    limits agree within tolerance the state is unique.
    """
    if direction not in (FROM_UPPER, FROM_LOWER):
        raise ValueError(f"direction must be {FROM_UPPER!r} or {FROM_LOWER!r}")
    config = config or SimConfig()
    coeffs = params.coeffs
    tau = coeffs.tau
    steps = config.steps_per_period(tau)
    dt = tau / steps
    bound = a_priori_bound(coeffs, params.initial)
    k1s, k2s = shift_constants(coeffs, bound)
    if dt * (max(coeffs.d1, coeffs.d2) + max(k1s, k2s)) > 1.0 + 1e-12:
        raise NumericalError(
            "time step too large for a monotone sweep", dt=dt,
            rate_sum=max(coeffs.d1, coeffs.d2) + max(k1s, k2s))

    x = _iteration_grid(params, interval, config)
    rows = (params.k1.sample_row(config.dx), params.k2.sample_row(config.dx))
    nx = x.size
    meta = {"direction": direction, "interval": tuple(interval)}

    if direction == FROM_UPPER:
        prev1 = np.full((steps + 1, nx), bound)
        prev2 = np.full((steps + 1, nx), bound)
        sign = -1.0
    else:
        seed1, seed2, lam = _lower_seed(params, interval, config, steps, x)
        eps = 1e-3 * bound / max(seed1.max(), seed2.max())
        for _ in range(20):
            cand1, cand2 = eps * seed1, eps * seed2
            new1, new2 = _sweep(cand1, cand2, params, config, steps, dt, k1s, k2s, rows)
            if np.all(new1 >= cand1 - 1e-12) and np.all(new2 >= cand2 - 1e-12):
                break
            eps *= 0.5
        else:
            raise NumericalError("could not verify the eigenfunction seed as a "
                                 "subsolution after 20 halvings", eps=eps)
        prev1, prev2 = cand1, cand2
        sign = +1.0
        meta["eigenvalue"] = lam
        meta["seed_scale"] = eps

    change = np.inf
    for sweep in range(1, max_sweeps + 1):
        new1, new2 = _sweep(prev1, prev2, params, config, steps, dt, k1s, k2s, rows)
        drift1 = sign * (new1 - prev1)
        drift2 = sign * (new2 - prev2)
        if drift1.min() < -1e-10 * max(1.0, bound) or drift2.min() < -1e-10 * max(1.0, bound):
            raise NumericalError(
                "iteration lost monotonicity",
                sweep=sweep, worst=float(min(drift1.min(), drift2.min())))
        change = float(max(np.max(np.abs(new1 - prev1)), np.max(np.abs(new2 - prev2))))
        u1_pre, u2_pre = prev1[-1].copy(), prev2[-1].copy()
        prev1, prev2 = new1, new2
        if change < tol:
            break
    else:
        raise NumericalError("monotone iteration did not converge",
                             sweeps=max_sweeps, change=change)

    meta["sweeps"] = sweep
    times = np.arange(steps + 1) * dt
    return PeriodicSolution(
        kind=SPATIAL,
        times=times,
        u1=prev1,
        u2=prev2,
        u1_pre=u1_pre,
        u2_pre=u2_pre,
        residual=change,
        x=x,
        meta=meta,
    )


def certified_periodic_solution(params: ModelParams, interval,
                                config: SimConfig | None = None, tol: float = 1e-8):
    """Run both directions; certify uniqueness when the limits agree to 2*tol.

    Sweeps run well below the certification tolerance because the distance
    between a stopped iterate and its limit is a multiple of the last
    per-sweep change.  Returns (upper solution, gap between the limits).
    """
    sweep_tol = tol / 20.0
    upper = monotone_iteration(params, interval, FROM_UPPER, config, sweep_tol)
    lower = monotone_iteration(params, interval, FROM_LOWER, config, sweep_tol)
    gap = float(max(np.max(np.abs(upper.u1 - lower.u1)),
                    np.max(np.abs(upper.u2 - lower.u2))))
    upper.meta["two_sided_gap"] = gap
    upper.meta["certified"] = gap <= 2.0 * tol
    return upper, gap


def residual_in_simulation(params: ModelParams, interval, sol: PeriodicSolution,
                           config: SimConfig | None = None) -> float:
    """Integrate one full period from the solution's post-pulse start and
    report the sup distance to the solution's period end."""
    config = config or SimConfig()
    steps = config.steps_per_period(params.coeffs.tau)
    dt = params.coeffs.tau / steps
    state = FrontState(
        t=0.0, dx=config.dx, i_left=round(sol.x[0] / config.dx),
        u1=sol.u1[0].copy(), u2=sol.u2[0].copy(),
        g=sol.x[0], h=sol.x[-1],
    )
    rows = (params.k1.sample_row(config.dx), params.k2.sample_row(config.dx))
    for _ in range(steps):
        state = step_interior(state, params.coeffs, params.k1, params.k2, dt,
                              free=False, rows=rows)
    return float(max(np.max(np.abs(state.u1 - sol.u1[-1])),
                     np.max(np.abs(state.u2 - sol.u2[-1]))))


# ---------------------------------------------------------------------------
# Impulsive ODE envelopes
# ---------------------------------------------------------------------------


def linear_ode_start(coeffs: Coefficients) -> float:
    """Starting level dominating the linear stage system's attractor."""
    sup, inf = coeffs.sup, coeffs.inf
    return max(sup["b"] / (inf["a"] + inf["m1"]), sup["a"] / inf["m2"])


def _slot_propagators(coeffs: Coefficients):
    props = []
    dt_slot = coeffs.tau / coeffs.slots
    for s in range(coeffs.slots):
        m = np.array([
            [-(coeffs.a[s] + coeffs.m1[s]), coeffs.b[s]],
            [coeffs.a[s], -coeffs.m2[s]],
        ])
        props.append(expm(m * dt_slot))
    return props


def _check_divergence(norms, scale):
    if len(norms) >= 11 and norms[-1] > 2.0 * norms[-11] and norms[-1] > 10.0 * scale:
        raise NumericalError(
            "hypothesis violated: the impulsive linear system diverges "
            "(its pulsed eigenvalue is negative and the pulse does not saturate)",
            norm=norms[-1])


def ode_periodic_linear(coeffs: Coefficients, rule: HarvestRule, tol: float = 1e-10,
                        max_periods: int = 200_000,
                        samples_per_period: int = 64) -> PeriodicSolution:
    """Attracting periodic orbit of the linear stage system with pulses.

    Integration is exact (per-slot matrix exponentials); the pulse applies
    the full nonlinear harvest map.  Starts from the dominating level A*
    and iterates periods until the period map settles.  Divergence across
    ten periods raises: the underlying positivity hypothesis fails.
    """
    from .eigen import closed_form_lambda

    slope = rule.slope0()
    lam_inf = None
    if slope <= 1.0:
        lam_inf = closed_form_lambda(
            EigenProblemSpec(coeffs=coeffs, k1=_unit_kernel(), k2=_unit_kernel(),
                             pulse_slope=slope, interval=None)
        ).value
        if lam_inf > 1e-9:
            warnings.warn(
                f"pulsed eigenvalue at infinity is positive ({lam_inf:.3g}); "
                "the attracting orbit will be zero", stacklevel=2)

    props = _slot_propagators(coeffs)
    a_star = linear_ode_start(coeffs)
    state = np.array([a_star, a_star])
    norms = [float(np.max(state))]
    for period in range(1, max_periods + 1):
        pre = state.copy()
        state = np.array([pre[0], apply_harvest(rule, pre[1])])
        for E in props:
            state = E @ state
        norms.append(float(np.max(np.abs(state))))
        _check_divergence(norms, a_star)
        if np.max(np.abs(state - pre)) < tol:
            break
    else:
        raise NumericalError("linear impulsive orbit did not settle",
                             periods=max_periods)

    return _sample_ode_period(coeffs, rule, state, ODE_LINEAR, props,
                              samples_per_period,
                              residual=float(np.max(np.abs(state - pre))),
                              meta={"periods": period, "start": a_star,
                                    "lambda_infinity": lam_inf})


def _sample_ode_period(coeffs, rule, endpoint, kind, props, samples, residual, meta):
    """Expand a converged pre-pulse endpoint into a sampled period course."""
    slots = coeffs.slots
    nsub = max(1, -(-samples // slots))
    dt_slot = coeffs.tau / slots
    u1_pre = np.array([endpoint[0]])
    u2_pre = np.array([endpoint[1]])
    w = np.array([endpoint[0], apply_harvest(rule, endpoint[1])])
    times = [0.0]
    course = [w.copy()]
    t = 0.0
    for s in range(slots):
        m = np.array([
            [-(coeffs.a[s] + coeffs.m1[s]), coeffs.b[s]],
            [coeffs.a[s], -coeffs.m2[s]],
        ])
        E = expm(m * (dt_slot / nsub))
        for _ in range(nsub):
            w = E @ w
            t += dt_slot / nsub
            times.append(t)
            course.append(w.copy())
    course = np.asarray(course)
    return PeriodicSolution(
        kind=kind,
        times=np.asarray(times),
        u1=course[:, 0],
        u2=course[:, 1],
        u1_pre=u1_pre,
        u2_pre=u2_pre,
        residual=residual,
        meta=meta,
    )


def _unit_kernel():
    from .kernel import KernelSpec

    return KernelSpec.triangular(1.0)


def ode_periodic_logistic(coeffs: Coefficients, rule: HarvestRule, tol: float = 1e-10,
                          steps_per_period: int = 256, max_periods: int = 100_000,
                          require_positive: bool = True) -> PeriodicSolution:
    """Attracting periodic orbit of the logistic stage system with pulses.

    Explicit Euler under the positivity step constraint; equilibria of the
    discrete map coincide exactly with the algebraic roots of the vector
    field.  Raises when a positive orbit was required but the attractor
    is zero.
    """
    sup = coeffs.sup
    bound = max(sup["b"] / coeffs.inf["alpha1"], sup["a"] / coeffs.inf["alpha2"])
    dt = coeffs.tau / steps_per_period
    rate = sup["a"] + sup["m1"] + sup["m2"] + sup["b"] \
        + 2.0 * max(sup["alpha1"], sup["alpha2"]) * bound
    if dt * rate > 1.0 + 1e-12:
        raise NumericalError("steps_per_period too small for positivity",
                             dt=dt, rate_sum=rate)

    def euler_period(start):
        u = start.copy()
        for j in range(steps_per_period):
            cv = coeffs.values_at(j * dt)
            f1 = cv["b"] * u[1] - (cv["a"] + cv["m1"]) * u[0] - cv["alpha1"] * u[0] ** 2
            f2 = cv["a"] * u[0] - cv["m2"] * u[1] - cv["alpha2"] * u[1] ** 2
            u = np.array([u[0] + dt * f1, u[1] + dt * f2])
        return u

    state = np.array([bound, bound])
    for period in range(1, max_periods + 1):
        pre = state.copy()
        state = euler_period(np.array([pre[0], apply_harvest(rule, pre[1])]))
        if np.max(np.abs(state - pre)) < tol:
            break
    else:
        raise NumericalError("logistic impulsive orbit did not settle",
                             periods=max_periods)

    if require_positive and np.max(state) < 1e-8 * bound:
        raise NumericalError(
            "attractor is zero although a positive periodic orbit was required",
            endpoint=state.tolist())

    # sample the converged period with the same Euler stepping
    u = np.array([state[0], apply_harvest(rule, state[1])])
    times = [0.0]
    course = [u.copy()]
    for j in range(steps_per_period):
        cv = coeffs.values_at(j * dt)
        f1 = cv["b"] * u[1] - (cv["a"] + cv["m1"]) * u[0] - cv["alpha1"] * u[0] ** 2
        f2 = cv["a"] * u[0] - cv["m2"] * u[1] - cv["alpha2"] * u[1] ** 2
        u = np.array([u[0] + dt * f1, u[1] + dt * f2])
        times.append((j + 1) * dt)
        course.append(u.copy())
    course = np.asarray(course)
    return PeriodicSolution(
        kind=ODE_LOGISTIC,
        times=np.asarray(times),
        u1=course[:, 0],
        u2=course[:, 1],
        u1_pre=np.array([state[0]]),
        u2_pre=np.array([state[1]]),
        residual=float(np.max(np.abs(state - pre))),
        meta={"periods": period, "bound": bound},
    )
