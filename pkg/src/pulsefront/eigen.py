"""Eigenvalue machinery for the pulsed, nonlocal two-stage linearization.

Three related quantities are computed here:

* ``lambda0``: the principal eigenvalue of the time-independent dispersal
  operator u -> int J(x-y)u(y)dy - u on a fixed interval.  It always lies
  in (-1, 0) and increases towards 0 as the interval grows.

* ``lambda*``: the principal eigenvalue of the tau-periodic linearization
  with the pulse multiplier H'(0) applied to the adult component at every
  period start.  Its sign separates extinction (>= 0) from persistence.
  Two independent routes are provided: a closed form via separation of
  variables (constant coefficients, equal kernels) and a Floquet route via
  the spectral radius of the discretized period map.  The central identity
  is rho(monodromy) = exp(-lambda* tau), i.e. lambda* = -ln(rho)/tau.

* generalized upper/lower estimates for distinct kernels, where a true
  principal eigenvalue need not exist: Collatz-Wielandt style bounds built
  around a positive candidate vector.

An ``interval`` of ``None`` denotes the infinite habitat: constants are
dispersal-neutral there (the kernel integrates to one), so the problem
reduces to the kernel-free 2x2 stage system with lambda0 = 0.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.linalg import expm, toeplitz

from .errors import NumericalError
from .kernel import KernelSpec, kernels_match, trapezoid_weights
from .model import Coefficients

POWER = "power"
CLOSED_FORM = "closed_form"
FLOQUET = "floquet"


@dataclass(frozen=True)
class EigenProblemSpec:
    """A pulsed eigenvalue problem on a fixed interval (None = infinite)."""

    coeffs: Coefficients
    k1: KernelSpec
    k2: KernelSpec
    pulse_slope: float
    interval: tuple[float, float] | None = None
    n: int = 256
    time_steps: int = 64

    def __post_init__(self):
        if not 0.0 < self.pulse_slope <= 1.0:
            raise ValueError("pulse slope H'(0) must lie in (0, 1]")
        if self.interval is not None:
            lo, hi = self.interval
            if not lo < hi:
                raise ValueError("interval must satisfy L1 < L2")
            object.__setattr__(self, "interval", (float(lo), float(hi)))
        if self.n < 8:
            raise ValueError("need at least 8 grid nodes")
        if self.time_steps < 1:
            raise ValueError("time_steps must be positive")

    @property
    def length(self) -> float | None:
        if self.interval is None:
            return None
        return self.interval[1] - self.interval[0]

    @property
    def same_kernels(self) -> bool:
        return kernels_match(self.k1, self.k2)


@dataclass
class EigenResult:
    """An eigenvalue with optional eigenfunction data.

    ``value`` holds the eigenvalue; ``residual`` is a method-specific
    defect (operator residual for power iteration, curve mismatch for the
    closed form, monodromy residual scaled to eigenvalue units for the
    Floquet route).  Time-indexed arrays follow the pulse convention:
    index 0 is the post-pulse instant, the final index is the period end,
    whose value equals the pre-pulse state by periodicity.
    """

    value: float
    method: str
    residual: float
    grid: np.ndarray | None = None
    times: np.ndarray | None = None
    phi: np.ndarray | None = None
    psi: np.ndarray | None = None
    psi_space: np.ndarray | None = None
    alpha: np.ndarray | None = None
    beta: np.ndarray | None = None
    lam0: float | None = None
    details: dict = field(default_factory=dict)
    note: str = ""


@dataclass(frozen=True)
class GeneralizedBracket:
    """Lower/upper eigenvalue estimates with their witness description."""

    lower: float
    upper: float
    witnesses: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lower > self.upper + 1e-12:
            raise ValueError("bracket violates lower <= upper")


# ---------------------------------------------------------------------------
# Time-independent dispersal eigenvalue
# ---------------------------------------------------------------------------


def quadrature_matrix(kernel: KernelSpec, length: float, n: int) -> np.ndarray:
    """Trapezoid discretization of u -> int_0^L J(x-y) u(y) dy.

    Built from node-index differences only, so results are exactly
    translation invariant.  The unit-mass discrete stencil keeps every row
    sum at or below one, which pins the dispersal eigenvalue inside
    (-1, 0) on any grid.
    """
    dx = length / (n - 1)
    col = kernel.discrete_norm(dx) * np.asarray(
        kernel.evaluate(np.arange(n) * dx), dtype=float
    )
    return toeplitz(col) * trapezoid_weights(n, dx)[None, :]


def _power_iteration(matvec, n, tol, max_iter, weights=None):
    """Perron pair of a positive operator; returns (rho, v, residual, iters)."""
    v = np.ones(n)
    w = weights if weights is not None else np.ones(n)
    rho = 1.0
    residual = np.inf
    for it in range(1, max_iter + 1):
        u = matvec(v)
        rho = float(np.dot(w * v, u) / np.dot(w * v, v))
        residual = float(np.max(np.abs(u - rho * v)))
        scale = np.max(np.abs(u))
        if scale == 0.0:
            raise NumericalError("power iteration collapsed to zero")
        v = u / scale
        if residual <= tol * max(1.0, abs(rho)):
            return rho, v, residual, it
    raise NumericalError(
        f"power iteration did not converge in {max_iter} iterations",
        residual=residual,
        rho=rho,
    )


def lambda0(kernel: KernelSpec, length: float, n: int = 256, tol: float = 1e-12,
            max_iter: int = 200_000) -> EigenResult:
    """Principal eigenvalue of the dispersal operator on an interval of
    the given length.

    Power iteration runs on the positive integral part; subtracting one at
    the end gives the eigenvalue, always inside (-1, 0).
    """
    if not length > 0:
        raise ValueError("interval length must be positive")
    if n < 2:
        raise ValueError("need at least 2 nodes")
    dx = length / (n - 1)
    B = quadrature_matrix(kernel, length, n)
    w = trapezoid_weights(n, dx)
    rho, v, residual, iters = _power_iteration(lambda y: B @ y, n, tol, max_iter, weights=w)
    v = v / np.max(v)
    if np.any(v <= 0):
        raise NumericalError("dispersal eigenfunction is not positive")
    lam = rho - 1.0
    return EigenResult(
        value=lam,
        method=POWER,
        residual=residual,
        grid=np.arange(n) * dx,
        psi_space=v,
        lam0=lam,
        details={"iterations": iters},
    )


# ---------------------------------------------------------------------------
# Closed form for constant coefficients with a shared kernel
# ---------------------------------------------------------------------------


def characteristic_roots(coeffs: Coefficients, lam0: float) -> tuple[float, float]:
    """Floquet exponents (c1, c2) of the constant-coefficient stage system,
    shifted by the dispersal eigenvalue; returned with c1 > c2.

    They satisfy a + m1 - d1*lam0 + c1 = -(m2 - d2*lam0 + c2) > 0.
    """
    if not coeffs.is_constant:
        raise ValueError("characteristic roots require constant coefficients")
    cv = coeffs.constant_values()
    a, b, m1, m2 = cv["a"], cv["b"], cv["m1"], cv["m2"]
    d1, d2 = coeffs.d1, coeffs.d2
    s = -a - m1 - m2 + (d1 + d2) * lam0
    disc = (a + m1 - m2 - d1 * lam0 + d2 * lam0) ** 2 + 4.0 * a * b
    root = math.sqrt(disc)
    return 0.5 * (s + root), 0.5 * (s - root)


def _require_closed_form(spec: EigenProblemSpec):
    if not spec.coeffs.is_constant:
        raise ValueError("closed-form route requires constant coefficients")
    if not spec.same_kernels:
        raise ValueError("closed-form route requires identical kernels")


def _lambda0_for(spec: EigenProblemSpec) -> EigenResult:
    if spec.interval is None:
        # infinite habitat: constants see the full unit kernel mass
        return EigenResult(value=0.0, method=CLOSED_FORM, residual=0.0,
                           grid=np.zeros(1), psi_space=np.ones(1), lam0=0.0)
    return lambda0(spec.k1, spec.length, spec.n)


def closed_form_lambda(spec: EigenProblemSpec, tol: float = 1e-14,
                       scan_points: int = 400) -> EigenResult:
    """Principal pulsed eigenvalue via separation of variables.

    The spatial factor is the dispersal eigenfunction; the time factors
    are combinations of exp((lambda + c_i) t).  Periodicity plus the pulse
    condition reduce to the intersection of two monotone rational curves
    in the (m, Lambda) plane, with Lambda = exp((lambda + c1) tau); the
    unique intersection with a positive pair lies at m in (-p/(a q), 0]
    and Lambda in (1, 1/q).  Bisection on the difference of the two curves
    locates it; lambda* = ln(Lambda)/tau - c1.
    """
    _require_closed_form(spec)
    base = _lambda0_for(spec)
    lam0_val = base.value
    c1, c2 = characteristic_roots(spec.coeffs, lam0_val)
    cv = spec.coeffs.constant_values()
    a, b, m1v, m2v = cv["a"], cv["b"], cv["m1"], cv["m2"]
    d1, d2 = spec.coeffs.d1, spec.coeffs.d2
    tau = spec.coeffs.tau
    slope = spec.pulse_slope

    p = a + m1v - d1 * lam0_val + c1
    q = math.exp((c2 - c1) * tau)
    a11, a12, a13 = b, p, p * q
    a21, a22, a23 = a, slope * a * q, slope * p

    def curve1(m):
        return (a11 - a12 * m) / (a11 - a13 * m)

    def curve2(m):
        return (a21 * m + a12) / (a22 * m + a23)

    def gap(m):
        return curve1(m) - curve2(m)

    m_left = -p / (a * q)

    if gap(0.0) >= 0.0:
        # only possible for slope == 1, where both curves pass through (0, 1)
        m_root, lam_cap = 0.0, 1.0
        residual = abs(gap(0.0))
    else:
        # sample log-spaced towards the asymptote, then bisect the sign change
        s_grid = np.geomspace(1e-12, 1.0, scan_points)
        ms = m_left * (1.0 - s_grid)
        vals = np.array([gap(m) for m in ms])
        pos = np.where(vals > 0)[0]
        if pos.size == 0:
            raise NumericalError(
                "no sign change of the eigenvalue curves inside the admissible window",
                samples=list(zip(ms.tolist(), vals.tolist())),
            )
        i = pos[-1]
        if i + 1 >= ms.size:
            raise NumericalError(
                "eigenvalue curve intersection escapes the admissible window",
                samples=list(zip(ms.tolist(), vals.tolist())),
            )
        lo, hi = ms[i], ms[i + 1]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if gap(mid) > 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= tol * max(1.0, abs(m_left)):
                break
        m_root = 0.5 * (lo + hi)
        lam_cap = curve1(m_root)
        residual = abs(gap(m_root))

    lam_star = math.log(lam_cap) / tau - c1

    mu1 = lam_star + c1
    mu2 = lam_star + c2
    cden = a * b - p * (m2v - d2 * lam0_val + c2)
    times = np.linspace(0.0, tau, spec.time_steps + 1)
    e1 = np.exp(mu1 * times)
    e2 = np.exp(mu2 * times)
    alpha = (b * e1 - p * m_root * e2) / cden
    beta = (p * e1 + a * m_root * e2) / cden
    if np.any(alpha <= 0) or np.any(beta <= 0):
        raise NumericalError("closed-form time factors are not positive",
                             alpha_min=float(alpha.min()), beta_min=float(beta.min()))

    psi_space = base.psi_space
    phi = np.outer(alpha, psi_space)
    psi = np.outer(beta, psi_space)
    return EigenResult(
        value=lam_star,
        method=CLOSED_FORM,
        residual=max(residual, base.residual),
        grid=base.grid if spec.interval is None else base.grid + spec.interval[0],
        times=times,
        phi=phi,
        psi=psi,
        psi_space=psi_space,
        alpha=alpha,
        beta=beta,
        lam0=lam0_val,
        details={
            "m": m_root,
            "Lambda": lam_cap,
            "c1": c1,
            "c2": c2,
            "p": p,
            "q": q,
            "window": (1.0, 1.0 / (slope * q)),
        },
    )


# ---------------------------------------------------------------------------
# Floquet route: spectral radius of the discrete period map
# ---------------------------------------------------------------------------


def _spatial_matrices(spec: EigenProblemSpec):
    if spec.interval is None:
        one = np.ones((1, 1))
        return 1, one.copy(), one.copy()
    K1 = quadrature_matrix(spec.k1, spec.length, spec.n)
    K2 = quadrature_matrix(spec.k2, spec.length, spec.n)
    return spec.n, K1, K2


def _generator(coeffs: Coefficients, slot: int, K1: np.ndarray, K2: np.ndarray) -> np.ndarray:
    n = K1.shape[0]
    eye = np.eye(n)
    b = coeffs.b[slot]
    a = coeffs.a[slot]
    m1 = coeffs.m1[slot]
    m2 = coeffs.m2[slot]
    L = np.zeros((2 * n, 2 * n))
    L[:n, :n] = coeffs.d1 * (K1 - eye) - (a + m1) * eye
    L[:n, n:] = b * eye
    L[n:, :n] = a * eye
    L[n:, n:] = coeffs.d2 * (K2 - eye) - m2 * eye
    return L


def _monodromy(spec: EigenProblemSpec):
    """Pulse followed by exact per-slot propagation over one period.

    Coefficients are piecewise constant in time, so the matrix exponential
    per slot integrates the linear system exactly; finer time stepping
    would not change the map.
    """
    n, K1, K2 = _spatial_matrices(spec)
    coeffs = spec.coeffs
    dt_slot = coeffs.tau / coeffs.slots
    pulse = np.concatenate([np.ones(n), np.full(n, spec.pulse_slope)])
    M = np.diag(pulse)
    slot_props = []
    for s in range(coeffs.slots):
        E = expm(_generator(coeffs, s, K1, K2) * dt_slot)
        slot_props.append(E)
        M = E @ M
    return M, slot_props, n, K1, K2


def floquet_lambda(spec: EigenProblemSpec, tol: float = 1e-11,
                   max_iter: int = 50_000, want_eigenfunction: bool = True) -> EigenResult:
    """Principal pulsed eigenvalue from the monodromy spectral radius.

    The period map applies the pulse matrix blockdiag(I, H'(0) I) and then
    integrates the linear system to tau; with rho its spectral radius (by
    power iteration), lambda* = -ln(rho)/tau.  For distinct kernels a
    positive Perron pair of the discretization still exists; the result is
    then labeled a discrete surrogate rather than a continuum principal
    eigenvalue.
    """
    M, slot_props, n, K1, K2 = _monodromy(spec)
    tau = spec.coeffs.tau
    try:
        rho, v, residual, iters = _power_iteration(lambda y: M @ y, 2 * n, tol, max_iter)
    except NumericalError as err:
        raise NumericalError(f"monodromy power iteration stagnated: {err}",
                             **err.diagnostics) from err
    if rho <= 0:
        raise NumericalError("monodromy spectral radius is not positive", rho=rho)
    v = v / np.max(np.abs(v))
    if np.any(v < 0):
        # the Perron vector is positive up to rounding; tiny negatives are noise
        if np.min(v) < -1e-10:
            raise NumericalError("monodromy eigenvector is not positive",
                                 min_component=float(np.min(v)))
        v = np.maximum(v, 0.0)
    lam = -math.log(rho) / tau
    lam_residual = residual / (rho * tau)

    result = EigenResult(
        value=lam,
        method=FLOQUET,
        residual=lam_residual,
        lam0=None,
        details={"rho": rho, "iterations": iters},
        note="" if spec.same_kernels else "discrete surrogate",
    )
    if spec.interval is not None:
        dx = spec.length / (spec.n - 1)
        result.grid = spec.interval[0] + np.arange(spec.n) * dx
    else:
        result.grid = np.zeros(1)

    if want_eigenfunction:
        coeffs = spec.coeffs
        slots = coeffs.slots
        nsub = max(1, -(-spec.time_steps // slots))  # ceil division
        dt_slot = tau / slots
        times = [0.0]
        course = [np.concatenate([v[:n], spec.pulse_slope * v[n:]])]
        w = course[0]
        t = 0.0
        for s in range(slots):
            if nsub == 1:
                E = slot_props[s]
            else:
                E = expm(_generator(coeffs, s, K1, K2) * (dt_slot / nsub))
            for _ in range(nsub):
                w = E @ w
                t += dt_slot / nsub
                times.append(t)
                course.append(w)
        times = np.asarray(times)
        course = np.asarray(course)
        factor = np.exp(lam * times)[:, None]
        periodic = course * factor
        result.times = times
        result.phi = periodic[:, :n]
        result.psi = periodic[:, n:]
        result.details["periodicity_defect"] = float(
            np.max(np.abs(periodic[-1] - v)) / max(np.max(np.abs(v)), 1e-300)
        )
    return result


# ---------------------------------------------------------------------------
# Generalized eigenvalue bounds for distinct kernels
# ---------------------------------------------------------------------------


def generalized_bracket(spec: EigenProblemSpec, tol: float = 1e-8,
                        candidate_tol: float = 1e-12) -> GeneralizedBracket:
    """Upper/lower eigenvalue estimates from a positive candidate pair.

    The candidate is the discrete Perron eigenvector of the period map.
    The upper estimate is the smallest lambda whose eigen-shifted period
    map leaves the candidate pointwise non-increasing over one period
    (exp(lambda tau) M v >= v); the lower estimate is the symmetric
    non-decreasing version.  Both are located by bisection over lambda.
    The sandwich lower <= lambda_discrete <= upper holds for any positive
    candidate and tightens as the candidate approaches the Perron vector.
    """
    if not spec.coeffs.is_constant:
        raise ValueError("generalized bracket requires constant coefficients")
    M, _, n, _, _ = _monodromy(spec)
    tau = spec.coeffs.tau
    rho, v, residual, _ = _power_iteration(lambda y: M @ y, 2 * n, candidate_tol, 50_000)
    v = np.maximum(v / np.max(np.abs(v)), 1e-300)
    mv = M @ v

    cv = spec.coeffs.sup
    span = spec.coeffs.d1 + spec.coeffs.d2 + cv["a"] + cv["b"] + cv["m1"] + cv["m2"] + 1.0

    def holds_upper(lam):
        return bool(np.all(math.exp(lam * tau) * mv >= v))

    def holds_lower(lam):
        return bool(np.all(math.exp(lam * tau) * mv <= v))

    if not holds_upper(span) or holds_upper(-span):
        raise NumericalError("upper-estimate bisection bracket not found",
                             search_range=(-span, span))
    if not holds_lower(-span) or holds_lower(span):
        raise NumericalError("lower-estimate bisection bracket not found",
                             search_range=(-span, span))

    lo, hi = -span, span
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if holds_upper(mid):
            hi = mid
        else:
            lo = mid
    upper = hi

    lo, hi = -span, span
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if holds_lower(mid):
            lo = mid
        else:
            hi = mid
    lower = lo

    return GeneralizedBracket(
        lower=lower,
        upper=upper,
        witnesses={
            "candidate": "discrete Perron eigenvector of the period map",
            "candidate_residual": residual,
            "rho": rho,
            "surrogate_lambda": -math.log(rho) / tau,
        },
    )


# ---------------------------------------------------------------------------
# Sensitivity of lambda* to the pulse slope
# ---------------------------------------------------------------------------


def lambda_sensitivity(spec: EigenProblemSpec, quad_points: int = 4097) -> float:
    """d(lambda*)/d(H'(0)), always strictly negative.

    Evaluates the quotient -(1/H'(0)) beta(0) beta*(0) divided by the
    period integral of (beta beta* + alpha alpha*), where (alpha*, beta*)
    solves the time-reversed adjoint stage system with reciprocal pulse
    1/H'(0).  Pre-pulse values enter the numerator; the integral runs over
    the post-pulse branch.
    """
    res = closed_form_lambda(spec)
    lam = res.value
    lam0_val = res.lam0
    cv = spec.coeffs.constant_values()
    a, b, m1v, m2v = cv["a"], cv["b"], cv["m1"], cv["m2"]
    d1, d2 = spec.coeffs.d1, spec.coeffs.d2
    tau = spec.coeffs.tau
    slope = spec.pulse_slope

    mstar = np.array(
        [
            [-(a + m1v - d1 * lam0_val) + lam, a],
            [b, -(m2v - d2 * lam0_val) + lam],
        ]
    )
    # adjoint flows backwards: w' = -Mstar w on the post-pulse branch
    evals, vecs = np.linalg.eig(-mstar)
    if np.max(np.abs(evals.imag)) > 1e-12 * np.max(np.abs(evals.real) + 1.0):
        raise NumericalError("adjoint system produced complex exponents")
    evals = evals.real
    vecs = vecs.real

    qstar = np.diag([1.0, 1.0 / slope])
    G = expm(-mstar * tau) @ qstar
    gvals, gvecs = np.linalg.eig(G)
    j = int(np.argmin(np.abs(gvals - 1.0)))
    if abs(gvals[j] - 1.0) > 1e-6:
        raise NumericalError("adjoint period map has no unit multiplier",
                             multipliers=gvals.tolist())
    w0 = gvecs[:, j].real
    if w0[0] < 0:
        w0 = -w0
    if np.any(w0 <= 0):
        raise NumericalError("adjoint eigenfunction is not positive", w0=w0.tolist())

    w_post = qstar @ w0
    ts = np.linspace(0.0, tau, quad_points)
    modal = np.linalg.solve(vecs, w_post)
    adj = vecs @ (np.exp(np.outer(evals, ts)) * modal[:, None])
    alpha_star = adj[0]
    beta_star = adj[1]

    m_root = res.details["m"]
    c1, c2, p = res.details["c1"], res.details["c2"], res.details["p"]
    cden = a * b - p * (m2v - d2 * lam0_val + c2)
    mu1, mu2 = lam + c1, lam + c2
    e1 = np.exp(mu1 * ts)
    e2 = np.exp(mu2 * ts)
    alpha_t = (b * e1 - p * m_root * e2) / cden
    beta_t = (p * e1 + a * m_root * e2) / cden

    beta_pre = float(beta_t[-1])          # beta(0) = beta(tau) pre-pulse
    beta_star_pre = float(w0[1])
    numerator = -(1.0 / slope) * beta_pre * beta_star_pre
    denominator = float(simpson(alpha_t * alpha_star + beta_t * beta_star, x=ts))
    if abs(denominator) < 1e-12:
        raise NumericalError("sensitivity denominator is degenerate",
                             denominator=denominator)
    out = numerator / denominator
    if not out < 0:
        raise NumericalError("sensitivity must be strictly negative", value=out)
    return out


def translate_interval(spec: EigenProblemSpec, shift: float) -> EigenProblemSpec:
    """Shift the interval; all eigenvalues are exactly invariant because the
    discretization depends on node differences only."""
    if spec.interval is None:
        return spec
    lo, hi = spec.interval
    return dataclasses.replace(spec, interval=(lo + shift, hi + shift))


def richardson(coarse: float, fine: float, order: int = 2) -> float:
    """One Richardson extrapolation step for a halved mesh."""
    f = 2.0**order
    return (f * fine - coarse) / (f - 1.0)
