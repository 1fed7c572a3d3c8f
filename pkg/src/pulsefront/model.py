"""Model parameters: periodic coefficients, harvesting rules, expansion
capacities and initial data, plus numerical validation of the structural
hypotheses the analysis rests on.

Coefficients are tau-periodic and represented as piecewise-constant tables
over [0, tau); a plain constant is a one-slot table.  The closed-form
eigenvalue route requires constants and is gated on :attr:`Coefficients.is_constant`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable

import numpy as np

from .kernel import KernelSpec

#: Default number of slots when a coefficient is supplied as a table.
DEFAULT_SLOTS = 64

_COEFF_NAMES = ("b", "a", "m1", "m2", "alpha1", "alpha2")


def _as_table(value, name):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"coefficient {name} must be a scalar or a 1-d table")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"coefficient {name} has non-finite entries")
    return arr


@dataclass(frozen=True)
class Coefficients:
    """Diffusion rates and tau-periodic demographic coefficients.

    b: reproduction by adults; a: maturation of juveniles; m1, m2: stage
    death rates; alpha1, alpha2: intrastage competition.  Each of the six
    may be a constant or a table of per-slot values over one period.
    """

    d1: float
    d2: float
    b: np.ndarray
    a: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    alpha1: np.ndarray
    alpha2: np.ndarray
    tau: float = 1.0

    def __post_init__(self):
        if self.d1 < 0 or self.d2 < 0:
            raise ValueError("diffusion rates d1, d2 must be nonnegative")
        if not self.tau > 0:
            raise ValueError("pulse period tau must be positive")
        tables = {name: _as_table(getattr(self, name), name) for name in _COEFF_NAMES}
        slots = max(t.size for t in tables.values())
        for name, t in tables.items():
            if t.size not in (1, slots):
                raise ValueError(
                    f"coefficient {name} has {t.size} slots, expected 1 or {slots}"
                )
            if np.any(t <= 0):
                raise ValueError(f"coefficient {name} must be strictly positive")
            object.__setattr__(self, name, np.broadcast_to(t, (slots,)).copy())
        object.__setattr__(self, "d1", float(self.d1))
        object.__setattr__(self, "d2", float(self.d2))
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def slots(self) -> int:
        return self.b.size

    @cached_property
    def is_constant(self) -> bool:
        return all(np.ptp(getattr(self, name)) == 0.0 for name in _COEFF_NAMES)

    def constant_values(self) -> dict:
        """The six coefficient values when time-independent."""
        if not self.is_constant:
            raise ValueError("coefficients are time-dependent")
        return {name: float(getattr(self, name)[0]) for name in _COEFF_NAMES}

    def slot_of(self, t: float) -> int:
        """Slot index covering time t (tables live on [0, tau))."""
        frac = (t / self.tau) % 1.0
        return min(int(frac * self.slots), self.slots - 1)

    def values_at(self, t: float) -> dict:
        s = self.slot_of(t)
        return {name: float(getattr(self, name)[s]) for name in _COEFF_NAMES}

    # sup ("M") and inf ("m") values over one period
    @cached_property
    def sup(self) -> dict:
        return {name: float(getattr(self, name).max()) for name in _COEFF_NAMES}

    @cached_property
    def inf(self) -> dict:
        return {name: float(getattr(self, name).min()) for name in _COEFF_NAMES}

    def with_values(self, **updates) -> "Coefficients":
        return replace(self, **updates)


# ---------------------------------------------------------------------------
# Harvesting rules
# ---------------------------------------------------------------------------

LINEAR = "linear"
BEVERTON_HOLT = "beverton_holt"
RICKER = "ricker"
IDENTITY = "identity"


@dataclass(frozen=True)
class HarvestRule:
    """Pulse map applied to the adult density at every period boundary.

    ``linear``: H(u) = c*u.  ``beverton_holt``: H(u) = m*u/(a + u).
    ``ricker``: H(u) = u*exp(r - b*u).  ``identity``: no harvesting.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        p = dict(self.params)
        if self.kind == LINEAR:
            if not 0 < p.get("c", 0) <= 1:
                raise ValueError("linear harvest requires survival fraction c in (0, 1]")
        elif self.kind == BEVERTON_HOLT:
            if p.get("m", 0) <= 0 or p.get("a", 0) <= 0:
                raise ValueError("beverton_holt harvest requires m > 0 and a > 0")
        elif self.kind == RICKER:
            if "r" not in p or p.get("b", 0) <= 0:
                raise ValueError("ricker harvest requires r and b > 0")
        elif self.kind == IDENTITY:
            p = {}
        else:
            raise ValueError(f"unknown harvest kind {self.kind!r}")
        object.__setattr__(self, "params", p)

    @classmethod
    def linear(cls, c):
        return cls(LINEAR, {"c": float(c)})

    @classmethod
    def beverton_holt(cls, m, a):
        return cls(BEVERTON_HOLT, {"m": float(m), "a": float(a)})

    @classmethod
    def ricker(cls, r, b):
        return cls(RICKER, {"r": float(r), "b": float(b)})

    @classmethod
    def identity(cls):
        return cls(IDENTITY)

    def apply(self, u):
        p = self.params
        if self.kind == LINEAR:
            return p["c"] * u
        if self.kind == BEVERTON_HOLT:
            return p["m"] * u / (p["a"] + u)
        if self.kind == RICKER:
            return u * np.exp(p["r"] - p["b"] * u)
        return u

    def slope0(self) -> float:
        """H'(0), the linearization of the pulse at extinction."""
        p = self.params
        if self.kind == LINEAR:
            return p["c"]
        if self.kind == BEVERTON_HOLT:
            return p["m"] / p["a"]
        if self.kind == RICKER:
            return math.exp(p["r"])
        return 1.0


def apply_harvest(rule: HarvestRule, u):
    """H(u) for u >= 0; negative input signals an upstream positivity bug."""
    ua = np.asarray(u, dtype=float)
    if np.any(ua < 0):
        raise ValueError("harvest applied to a negative density")
    out = rule.apply(ua)
    if np.isscalar(u) or np.ndim(u) == 0:
        return float(out)
    return out


def harvest_slope0(rule: HarvestRule) -> float:
    return rule.slope0()


# ---------------------------------------------------------------------------
# Frontier and initial data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrontierParams:
    """Expansion capacities of the two stages and the initial half-length."""

    mu1: float
    mu2: float
    h0: float

    def __post_init__(self):
        if self.mu1 < 0 or self.mu2 < 0:
            raise ValueError("expansion capacities must be nonnegative")
        if not self.h0 > 0:
            raise ValueError("initial half-length h0 must be positive")

    @property
    def mu_total(self) -> float:
        return self.mu1 + self.mu2


@dataclass(frozen=True)
class InitialData:
    """Initial stage profiles on [-h0, h0], evaluated through callables.

    Profiles are expected to be positive inside the interval and zero at
    the endpoints; that is reported by :func:`validate_hypotheses` rather
    than enforced here, since a degenerate adult profile (identically
    zero) is a legitimate input: the stage coupling regenerates it.
    """

    h0: float
    u1_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    u2_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def __post_init__(self):
        if not self.h0 > 0:
            raise ValueError("h0 must be positive")
        probe = self.sample(np.linspace(-self.h0, self.h0, 33))
        for u in probe:
            if np.any(u < 0) or not np.all(np.isfinite(u)):
                raise ValueError("initial profiles must be finite and nonnegative")

    @classmethod
    def bump(cls, h0, amplitude1, amplitude2):
        """Smooth cosine-squared bumps, zero at +-h0.

        Evaluated through |x| so sampled profiles are bitwise symmetric.
        """
        h0 = float(h0)

        def profile(amp):
            def f(x):
                z = np.abs(np.asarray(x, dtype=float))
                vals = amp * np.cos(0.5 * np.pi * np.minimum(z, h0) / h0) ** 2
                return np.where(z >= h0, 0.0, vals)

            return f

        return cls(h0, profile(float(amplitude1)), profile(float(amplitude2)))

    @classmethod
    def from_profiles(cls, x, u1, u2):
        """Sampled profiles, linearly interpolated, zero outside the data."""
        x = np.asarray(x, dtype=float)
        u1 = np.asarray(u1, dtype=float)
        u2 = np.asarray(u2, dtype=float)
        if x.ndim != 1 or x.size < 2 or u1.shape != x.shape or u2.shape != x.shape:
            raise ValueError("profiles must be 1-d arrays over a shared grid")
        h0 = float(max(abs(x[0]), abs(x[-1])))

        def interp(v):
            return lambda q: np.interp(np.asarray(q, dtype=float), x, v, left=0.0, right=0.0)

        return cls(h0, interp(u1), interp(u2))

    def sample(self, x):
        return np.asarray(self.u1_fn(x), dtype=float), np.asarray(self.u2_fn(x), dtype=float)

    @cached_property
    def sup_norms(self) -> tuple:
        x = np.linspace(-self.h0, self.h0, 2001)
        u1, u2 = self.sample(x)
        return float(np.max(u1)), float(np.max(u2))

    def scaled(self, factor: float) -> "InitialData":
        f = float(factor)
        u1, u2 = self.u1_fn, self.u2_fn
        return InitialData(self.h0, lambda x: f * u1(x), lambda x: f * u2(x))


@dataclass(frozen=True)
class ModelParams:
    """Everything that defines one model instance (kernels held as a pair)."""

    coeffs: Coefficients
    harvest: HarvestRule
    frontier: FrontierParams
    initial: InitialData
    k1: KernelSpec
    k2: KernelSpec


# ---------------------------------------------------------------------------
# Derived bounds and hypothesis validation
# ---------------------------------------------------------------------------


def a_priori_bound(coeffs: Coefficients, initial: InitialData) -> float:
    """Uniform bound A on both densities, valid for all time.

    A = max(sup b / inf alpha1, sup a / inf alpha2, initial sup norms).
    """
    n1, n2 = initial.sup_norms
    return max(
        coeffs.sup["b"] / coeffs.inf["alpha1"],
        coeffs.sup["a"] / coeffs.inf["alpha2"],
        n1,
        n2,
    )


@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    passed: bool
    witness: float | None = None
    message: str = ""


@dataclass(frozen=True)
class HypothesisReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def __str__(self):
        lines = []
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            extra = f" (witness {c.witness:.6g})" if c.witness is not None else ""
            msg = f" - {c.message}" if c.message else ""
            lines.append(f"[{status}] {c.name}{extra}{msg}")
        return "\n".join(lines)


def validate_hypotheses(
    coeffs: Coefficients,
    rule: HarvestRule,
    frontier: FrontierParams,
    initial: InitialData,
    samples: int = 1000,
) -> HypothesisReport:
    """Numerically check the structural hypotheses on [0, A].

    The harvest condition requires 0 < H(u)/u < 1 with a nonincreasing
    ratio; it is probed at ``samples`` points up to the a-priori bound.
    A Ricker rule with r > 0 violates it (H(u)/u > 1 for u < r/b) and is
    reported with a witness; runs may still proceed since the simulator
    itself does not rely on the condition.
    """
    checks = []
    bound = a_priori_bound(coeffs, initial)

    # coefficient positivity is enforced at construction; record it
    checks.append(HypothesisCheck("coefficients-positive", True))

    u = np.linspace(bound / samples, bound, samples)
    hu = rule.apply(u)
    ratio = hu / u
    ok = True
    witness = None
    message = ""
    if np.any(hu <= 0):
        ok, witness, message = False, float(u[np.argmax(hu <= 0)]), "H(u) not positive"
    elif np.any(ratio >= 1.0 + 1e-12):
        ok = False
        witness = float(u[np.argmax(ratio >= 1.0 + 1e-12)])
        message = "H(u)/u reaches 1 or above"
    elif rule.kind == IDENTITY:
        ok, witness, message = False, float(u[0]), "identity pulse has H(u)/u = 1 (no harvesting)"
    elif rule.kind == LINEAR and rule.params["c"] >= 1.0:
        ok, witness, message = False, float(u[0]), "linear survival c = 1 leaves H(u)/u = 1"
    elif np.any(np.diff(ratio) > 1e-12 * np.abs(ratio[:-1])):
        ok = False
        witness = float(u[np.argmax(np.diff(ratio) > 1e-12 * np.abs(ratio[:-1]))])
        message = "H(u)/u increases"
    checks.append(HypothesisCheck("harvest-sublinearity", ok, witness, message))

    slope = rule.slope0()
    checks.append(
        HypothesisCheck(
            "harvest-slope-in-(0,1]",
            0 < slope <= 1.0 + 1e-12,
            None if 0 < slope <= 1.0 + 1e-12 else slope,
            "" if 0 < slope <= 1.0 + 1e-12 else f"H'(0) = {slope:.6g}",
        )
    )

    x = np.linspace(-initial.h0, initial.h0, 1001)
    u1, u2 = initial.sample(x)
    tol = 1e-12 * max(1.0, float(max(u1.max(), u2.max())))
    boundary_ok = (
        abs(u1[0]) <= tol and abs(u1[-1]) <= tol and abs(u2[0]) <= tol and abs(u2[-1]) <= tol
    )
    wit = None if boundary_ok else float(max(abs(u1[0]), abs(u1[-1]), abs(u2[0]), abs(u2[-1])))
    checks.append(
        HypothesisCheck(
            "initial-zero-at-front",
            boundary_ok,
            wit,
            "" if boundary_ok else "initial profile does not vanish at +-h0",
        )
    )
    interior1 = bool(np.all(u1[1:-1] > 0))
    interior2 = bool(np.all(u2[1:-1] > 0))
    msg = ""
    wit = None
    if not interior1:
        wit = float(x[1:-1][np.argmax(u1[1:-1] <= 0)])
        msg = "juvenile profile not positive inside (-h0, h0)"
    elif not interior2:
        wit = float(x[1:-1][np.argmax(u2[1:-1] <= 0)])
        msg = "adult profile not positive inside (-h0, h0)"
    checks.append(HypothesisCheck("initial-positive-interior", interior1 and interior2, wit, msg))

    checks.append(
        HypothesisCheck(
            "frontier-capacities",
            frontier.mu_total >= 0 and frontier.h0 > 0,
        )
    )
    return HypothesisReport(tuple(checks))
