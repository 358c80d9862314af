"""Scaling limits of ``(1/lam) Y^(phi1(lam) rho)_(phi2(lam) x)`` as lam -> 0+.

Everything is driven by the normalised drift

    h(lam, t) = phi1(lam) rho(lam t) / sqrt(lam t),

evaluated in log space so that exponentially large scaling functions do not
overflow. Its limit profile g(t) decides between the four possible limits:
zero drift, explosion at t0, power drift c t^alpha, or the point mass at 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .dinverse import DInverse, PointMass
from .drift import DriftFunction, verify_condition_A
from .errors import ClassificationError, ConditionViolated, DomainError
from .numerics import log_grid, normal_cdf

DEFAULT_LAMBDAS = 2.0 ** -np.arange(4, 41)
DEFAULT_TIMES = log_grid(1.0 / 16.0, 16.0, 24)

ZERO_THRESHOLD = 1e-8
INF_THRESHOLD = 1e8
CAUCHY_RTOL = 1e-4
TREND_STEP = 0.05
TAIL = 5
P_RTOL = 1e-3
MAX_UNRESOLVED = 0.2
T0_RTOL = 1e-3
R2_MIN = 0.999
ALPHA_SLACK = 1e-6


@dataclass(frozen=True, eq=False)
class ScalingFn:
    """Positive scaling function of lam.

    Named forms are ``a * lam^k * exp(b / lam)``; tables and arbitrary
    callables are also accepted. ``log`` never forms the value itself.
    """

    a: float = 1.0
    k: float = 0.0
    b: float = 0.0
    table: tuple | None = None
    func: Callable | None = None

    @classmethod
    def power(cls, a=1.0, k=0.0):
        return cls(a=float(a), k=float(k))

    @classmethod
    def exp(cls, a=1.0, b=0.0, k=0.0):
        return cls(a=float(a), k=float(k), b=float(b))

    @classmethod
    def tabulated(cls, lams, values):
        lams = np.asarray(lams, dtype=float)
        values = np.asarray(values, dtype=float)
        if lams.shape != values.shape or lams.ndim != 1 or lams.size == 0:
            raise DomainError("table needs equal-length lam and value columns")
        if np.any(lams <= 0) or np.any(values <= 0) or not np.all(np.isfinite(values)):
            raise DomainError("tabulated lam and values must be positive and finite")
        order = np.argsort(lams)
        return cls(table=(tuple(lams[order]), tuple(values[order])))

    @classmethod
    def wrap(cls, f):
        return f if isinstance(f, ScalingFn) else cls(func=f)

    def log(self, lam):
        lam = np.asarray(lam, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.func is not None:
                return np.log(np.asarray(self.func(lam), dtype=float))
            if self.table is not None:
                lt, lv = np.log(self.table[0]), np.log(self.table[1])
                return np.interp(np.log(lam), lt, lv, left=np.nan, right=np.nan)
            return math.log(self.a) + self.k * np.log(lam) + self.b / lam

    def __call__(self, lam):
        with np.errstate(over="ignore"):
            return np.exp(self.log(lam))

    @property
    def grid(self):
        return None if self.table is None else np.asarray(self.table[0])[::-1]


@dataclass(frozen=True, eq=False)
class ScalingFamily:
    drift: DriftFunction
    phi1: ScalingFn
    phi2: ScalingFn
    lambda_grid: np.ndarray = field(default_factory=lambda: DEFAULT_LAMBDAS.copy())
    t_grid: np.ndarray = field(default_factory=lambda: DEFAULT_TIMES.copy())

    def __post_init__(self):
        object.__setattr__(self, "phi1", ScalingFn.wrap(self.phi1))
        object.__setattr__(self, "phi2", ScalingFn.wrap(self.phi2))
        lam = np.asarray(self.lambda_grid, dtype=float)
        t = np.asarray(self.t_grid, dtype=float)
        object.__setattr__(self, "lambda_grid", lam)
        object.__setattr__(self, "t_grid", t)
        if lam.size == 0 or np.any(lam <= 0) or np.any(np.diff(lam) >= 0):
            raise DomainError("lambda grid must be positive and strictly decreasing")
        if t.size == 0 or np.any(t <= 0) or np.any(np.diff(t) <= 0):
            raise DomainError("time grid must be positive and strictly increasing")
        for name in ("phi1", "phi2"):
            lv = getattr(self, name).log(lam)
            if not np.all(np.isfinite(lv)):
                raise DomainError(f"{name} must be finite and positive on the lambda grid")
        verdict = verify_condition_A(self.drift)
        if not verdict:
            raise ConditionViolated(f"{self.drift.describe()} violates the increasing-ratio condition", verdict)

    def log_h(self, lam, t):
        lam = np.asarray(lam, dtype=float)
        t = np.asarray(t, dtype=float)
        lt = lam * t
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.phi1.log(lam) + self.drift.log(lt) - 0.5 * np.log(lt)

    def h(self, lam, t):
        with np.errstate(over="ignore"):
            return np.exp(self.log_h(lam, t))

    def level_term(self, lam, t, x):
        """``phi2(lam) x / sqrt(lam t)``."""
        if x == 0:
            return np.zeros(np.broadcast(np.asarray(lam), np.asarray(t)).shape)
        with np.errstate(over="ignore"):
            return x * np.exp(self.phi2.log(lam) - 0.5 * np.log(np.asarray(lam) * np.asarray(t)))

    def finite_cdf(self, lam, t, x):
        """``P((1/lam) Y^(phi1 rho)_(phi2 x) <= t)`` at the given lam."""
        h = self.h(lam, t)
        lvl = self.level_term(lam, t, x)
        with np.errstate(invalid="ignore"):
            arg = np.where(np.isposinf(h), np.inf, h - lvl)
        return normal_cdf(arg)


class Case(str, Enum):
    ZERO = "ZeroDrift"
    EXPLOSION = "Explosion"
    POWER = "PowerDrift"
    DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class PEstimate:
    p: float
    converged: bool
    ratios: np.ndarray


def _aitken(a, b, c):
    denom = c - 2.0 * b + a
    if denom == 0 or not np.isfinite(denom):
        return c
    acc = c - (c - b) ** 2 / denom
    # Reject extrapolations that jump further than the last step warrants.
    if not np.isfinite(acc) or abs(acc - c) > 10.0 * abs(c - b):
        return c
    return acc


def _limit(seq):
    """Limit estimate and convergence flag for the tail of a positive sequence."""
    tail = np.asarray(seq[-3:], dtype=float)
    if tail.size < 3 or not np.all(np.isfinite(tail)):
        return float(tail[-1]) if tail.size else math.nan, False
    gaps = np.abs(np.diff(tail)) / np.maximum(np.abs(tail[1:]), 1.0)
    return float(_aitken(*tail)), bool(np.all(gaps <= P_RTOL))


def estimate_p(family: ScalingFamily) -> PEstimate:
    """Limit of ``phi2(lam)/sqrt(lam)`` along the lambda grid."""
    lam = family.lambda_grid
    if lam.size < 8:
        raise DomainError("estimate_p needs at least 8 lambda values")
    with np.errstate(over="ignore"):
        r = np.exp(family.phi2.log(lam) - 0.5 * np.log(lam))
    p, ok = _limit(r)
    return PEstimate(max(p, 0.0), ok, r)


ZERO, INF, FINITE, UNRESOLVED = "zero", "inf", "finite", "unresolved"


def classify_sequence(h):
    """Decide whether a sequence (ordered by decreasing lam) tends to 0, inf or a finite limit.

    Returns ``(state, value)``. Besides the absolute thresholds 1e-8 / 1e8,
    a tail whose log changes by at least 0.05 in the same direction at every
    step is taken to diverge, which catches power-law divergence that is too
    slow to reach the thresholds on a finite grid.
    """
    tail = np.asarray(h[-TAIL:], dtype=float)
    if np.any(np.isnan(tail)):
        return UNRESOLVED, math.nan
    last = tail[-1]
    with np.errstate(invalid="ignore"):
        d = np.diff(tail)
    if last == 0 or (last < ZERO_THRESHOLD and np.all(d <= 0)):
        return ZERO, 0.0
    if np.isposinf(last) or (last > INF_THRESHOLD and np.all(d >= 0)):
        return INF, math.inf
    if np.all(tail > 0) and np.all(np.isfinite(tail)):
        if np.max(tail) - np.min(tail) < CAUCHY_RTOL * abs(last):
            return FINITE, float(last)
        steps = np.diff(np.log(tail))
        if np.all(steps >= TREND_STEP):
            return INF, math.inf
        if np.all(steps <= -TREND_STEP):
            return ZERO, 0.0
    return UNRESOLVED, math.nan


@dataclass(frozen=True, eq=False)
class Profile:
    t: np.ndarray
    values: np.ndarray
    states: tuple
    h: np.ndarray

    @property
    def resolved(self):
        return np.array([s != UNRESOLVED for s in self.states])

    def as_dict(self):
        return {
            "t": [float(v) for v in self.t],
            "g": [float(v) for v in self.values],
            "state": list(self.states),
        }


def limit_profile(family: ScalingFamily) -> Profile:
    """Tabulate ``g(t) = lim h(lam, t)`` on the family's time grid."""
    lam = family.lambda_grid[:, None]
    t = family.t_grid
    h = family.h(lam, t[None, :])
    states, values = [], []
    for j in range(t.size):
        s, v = classify_sequence(h[:, j])
        states.append(s)
        values.append(v)
    prof = Profile(t, np.array(values), tuple(states), h)
    unresolved = 1.0 - prof.resolved.mean()
    if unresolved > MAX_UNRESOLVED:
        raise ClassificationError(
            f"{unresolved:.0%} of probe times have no detectable limit", profile=prof.as_dict()
        )
    return prof


@dataclass(frozen=True, eq=False)
class ScalingLimitReport:
    case: Case
    p: float
    profile: Profile
    t0: float | None = None
    c: float | None = None
    alpha: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self):
        out = {"case": self.case.value, "p": self.p}
        if self.case is Case.EXPLOSION:
            out["t0"] = self.t0
        if self.case is Case.POWER:
            out["c"] = self.c
            out["alpha"] = self.alpha
        out["g_profile"] = self.profile.as_dict()
        out["diagnostics"] = self.diagnostics
        return out


def _split_state(family, t, lam, extra):
    state, _ = classify_sequence(family.h(lam, t))
    if state == UNRESOLVED:
        # Push lam further toward 0 before giving up on this point.
        state, _ = classify_sequence(family.h(np.concatenate([lam, extra]), t))
    return state


def _refine_split(family, lo, hi):
    """Shrink the bracket [lo, hi] around the 0/inf split of the limit profile."""
    lam = family.lambda_grid
    extra = lam[-1] * 2.0 ** -np.arange(1, 21)
    while (hi - lo) / math.sqrt(lo * hi) > T0_RTOL:
        # The split point itself may carry a finite limit; probe off-centre too.
        for w in (0.5, 1.0 / 3.0, 2.0 / 3.0):
            mid = lo ** (1.0 - w) * hi**w
            state = _split_state(family, mid, lam, extra)
            if state in (ZERO, INF):
                break
        if state == ZERO:
            lo = mid
        elif state == INF:
            hi = mid
        else:
            break
    return lo, hi


def _fit_index(family):
    """Least-squares slope of log(rho(lam t)/rho(lam)) against log t at the smallest usable lam."""
    t = family.t_grid
    logt = np.log(t)
    for lam in family.lambda_grid[::-1]:
        y = family.drift.log(lam * t) - family.drift.log(lam)
        if np.all(np.isfinite(y)):
            break
    else:
        raise ClassificationError("rho(lam t)/rho(lam) is not finite at any lam on the grid")
    slope, intercept = np.polyfit(logt, y, 1)
    resid = y - (slope * logt + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else (1.0 if np.allclose(resid, 0) else 0.0)
    return float(slope), r2, float(lam), resid


def classify(family: ScalingFamily) -> ScalingLimitReport:
    pe = estimate_p(family)
    if not pe.converged:
        raise ClassificationError(
            "phi2(lam)/sqrt(lam) does not converge to a finite limit",
            profile={"ratios_tail": [float(r) for r in pe.ratios[-3:]]},
        )
    prof = limit_profile(family)
    mask = prof.resolved
    states = [s for s in prof.states if s != UNRESOLVED]
    vals = prof.values[mask]
    tt = prof.t[mask]
    diag = {
        "unresolved": int((~mask).sum()),
        "p_tail": [float(r) for r in pe.ratios[-3:]],
        "p_converged": pe.converged,
    }
    with np.errstate(invalid="ignore"):
        drops = np.diff(vals) < -1e-6 * np.maximum(np.abs(vals[:-1]), 1.0)
    if np.any(drops):
        raise ClassificationError("limit profile is not increasing", profile=prof.as_dict())

    if all(s == ZERO for s in states):
        return ScalingLimitReport(Case.ZERO, pe.p, prof, diagnostics=diag)
    if all(s == INF for s in states):
        return ScalingLimitReport(Case.DEGENERATE, pe.p, prof, diagnostics=diag)
    if all(s in (ZERO, INF) for s in states):
        lo = float(np.max(tt[[s == ZERO for s in states]]))
        hi = float(np.min(tt[[s == INF for s in states]]))
        lo, hi = _refine_split(family, lo, hi)
        t0 = math.sqrt(lo * hi)
        diag["t0_bracket"] = [lo, hi]
        return ScalingLimitReport(Case.EXPLOSION, pe.p, prof, t0=t0, diagnostics=diag)
    if all(s == FINITE for s in states):
        alpha, r2, lam_fit, resid = _fit_index(family)
        lam = family.lambda_grid
        with np.errstate(over="ignore"):
            cseq = np.exp(family.drift.log(lam) + family.phi1.log(lam) - 0.5 * np.log(lam))
        c, c_ok = _limit(cseq)
        diag.update({"alpha_r2": r2, "alpha_lambda": lam_fit,
                     "alpha_residual_max": float(np.max(np.abs(resid))), "c_converged": c_ok})
        if r2 < R2_MIN:
            raise ClassificationError(f"power fit too poor (R^2={r2:.6f})", profile=prof.as_dict())
        if not c_ok or not c > 0:
            raise ClassificationError("rho(lam) phi1(lam)/sqrt(lam) has no positive finite limit",
                                      profile=prof.as_dict())
        if alpha < 0.5 - ALPHA_SLACK:
            raise ClassificationError(f"estimated index {alpha} is below 1/2", profile=prof.as_dict())
        model = c * tt ** (alpha - 0.5)
        diag["g_model_rel_err"] = float(np.max(np.abs(vals - model) / model))
        return ScalingLimitReport(Case.POWER, pe.p, prof, c=c, alpha=max(alpha, 0.5), diagnostics=diag)
    raise ClassificationError("profile mixes finite, zero and infinite limits", profile=prof.as_dict())


def limit_law(report: ScalingLimitReport, x=0.0):
    """The limiting law of the rescaled d-inverse at level x."""
    if not x >= 0:
        raise DomainError(f"level must be >= 0, got {x}")
    level = report.p * x
    if report.case is Case.ZERO:
        return DInverse(DriftFunction.zero(), level)
    if report.case is Case.EXPLOSION:
        return DInverse(DriftFunction.explosive(report.t0), level)
    if report.case is Case.POWER:
        return DInverse(DriftFunction.power(report.c, report.alpha), level)
    return PointMass(0.0, level)


def verify_scale_invariance_power(c, alpha, lam, x, t_grid):
    """Max CDF gap between ``(1/lam) Z^(c lam^(1/2-alpha), alpha)_(sqrt(lam) x)`` and ``Z^(c,alpha)_x``."""
    if not (c > 0 and alpha >= 0.5 and lam > 0 and x >= 0):
        raise DomainError("need c > 0, alpha >= 1/2, lam > 0, x >= 0")
    t = np.asarray(t_grid, dtype=float)
    lhs = DInverse(DriftFunction.power(c * lam ** (0.5 - alpha), alpha), math.sqrt(lam) * x).cdf(lam * t)
    rhs = DInverse(DriftFunction.power(c, alpha), x).cdf(t)
    return float(np.max(np.abs(np.asarray(lhs) - np.asarray(rhs))))


def verify_scale_invariance_explosion(t0, lam, x, t_grid, truncate_scaled=True):
    """Max CDF gap between ``(1/lam) min{Y^(0)_(sqrt(lam) x), T}`` and ``min{Y^(0)_x, t0}``.

    With ``truncate_scaled`` the truncation is ``T = lam t0``, which makes the
    identity exact. ``T = t0`` gives ``min{Y^(0)_x, t0/lam}`` on the left and
    so only holds at lam = 1.
    """
    if not (t0 > 0 and lam > 0 and x >= 0):
        raise DomainError("need t0 > 0, lam > 0, x >= 0")
    t = np.asarray(t_grid, dtype=float)
    cut = lam * t0 if truncate_scaled else t0
    lhs = DInverse(DriftFunction.explosive(cut), math.sqrt(lam) * x).cdf(lam * t)
    rhs = DInverse(DriftFunction.explosive(t0), x).cdf(t)
    return float(np.max(np.abs(np.asarray(lhs) - np.asarray(rhs))))


@dataclass(frozen=True)
class ConvergenceReport:
    lambdas: np.ndarray
    gaps: np.ndarray
    limit_cdf: float
    skipped: bool = False

    @property
    def converged(self):
        if self.skipped:
            return True
        g = self.gaps
        if not np.all(np.isfinite(g)) or g[-1] >= 1e-3:
            return False
        tail = g[-TAIL:]
        return bool(g[-1] < 1e-12 or np.all(np.diff(tail) <= 1e-15))


def verify_scaling_convergence(family: ScalingFamily, x, t, report=None) -> ConvergenceReport:
    """Gaps ``|P((1/lam) Y <= t) - P(Z_x <= t)|`` along the lambda grid."""
    if not (x >= 0 and t > 0):
        raise DomainError("need x >= 0 and t > 0")
    report = report or classify(family)
    if report.case is Case.DEGENERATE:
        raise DomainError("convergence check needs a non-degenerate limit")
    law = limit_law(report, x)
    lam = family.lambda_grid
    lim = float(law.cdf(t))
    if report.case is Case.EXPLOSION and abs(t - report.t0) <= 0.01 * report.t0:
        return ConvergenceReport(lam, np.full(lam.size, np.nan), lim, skipped=True)
    fin = np.asarray(family.finite_cdf(lam, t, x), dtype=float)
    return ConvergenceReport(lam, np.abs(fin - lim), lim)


# Analytic fixtures for the four cases, with phi2(lam) = sqrt(lam) so p = 1.
def power_fixture():
    return ScalingFamily(DriftFunction.power(1.0, 2.0), ScalingFn.power(3.0, -1.5), ScalingFn.power(1.0, 0.5))


def explosion_fixture():
    rho = DriftFunction.custom(
        lambda t: t * np.exp(-1.0 / t),
        log_func=lambda t: np.log(t) - 1.0 / t,
        label="t*exp(-1/t)",
    )
    return ScalingFamily(rho, ScalingFn.exp(1.0, 0.5, -0.5), ScalingFn.power(1.0, 0.5))


def zero_fixture():
    return ScalingFamily(DriftFunction.constant(1.0), ScalingFn.power(1.0, 1.0), ScalingFn.power(1.0, 0.5))


def degenerate_fixture():
    return ScalingFamily(DriftFunction.constant(1.0), ScalingFn.power(1.0, -1.0), ScalingFn.power(1.0, 0.5))
