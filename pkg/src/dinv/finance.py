"""Geometric Brownian motion, call prices and the time change to B_t + rho(t).

Prices are undiscounted expectations ``C(t) = E[max(S_t - K, 0)]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dinverse import DInverse, TransformedLaw, check_d_increasing, identity_fn, transform
from .drift import DriftFunction
from .errors import DegenerateTimeChangeError, DomainError, NotDIncreasingError
from .numerics import MonotoneFn, Verdict, first_decrease, integrate, left_inverse, log_grid, normal_cdf

MC_PATHS = 200_000


def _coef(v):
    if callable(v):
        return v
    v = float(v)
    return lambda t: np.full(np.shape(t), v) if np.ndim(t) else v


def tabulated_coefficient(t, values):
    """Piecewise-linear coefficient through ``(t, value)`` knots, flat outside."""
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    if t.ndim != 1 or t.shape != values.shape or np.any(np.diff(t) <= 0):
        raise DomainError("coefficient table needs strictly increasing t and matching values")
    return lambda s: np.interp(s, t, values)


@dataclass(frozen=True, eq=False)
class GBMSpec:
    """``dS = sigma(t) S dB + mu(t) S dt`` started at ``s0``.

    ``sigma`` and ``mu`` are numbers or vectorised callables of t.
    """

    s0: float
    sigma: float | Callable = 1.0
    mu: float | Callable = 0.0

    def __post_init__(self):
        if not self.s0 > 0:
            raise DomainError(f"s0 must be > 0, got {self.s0}")
        if not callable(self.sigma) and not self.sigma > 0:
            raise DomainError(f"sigma must be > 0, got {self.sigma}")

    @classmethod
    def from_mu_tilde(cls, s0, sigma, mu_tilde):
        """Build a spec from the log-drift ``mu - sigma^2/2`` instead of mu."""
        if not callable(sigma) and not callable(mu_tilde):
            return cls(s0, sigma, float(mu_tilde) + 0.5 * float(sigma) ** 2)
        sg, mt = _coef(sigma), _coef(mu_tilde)
        return cls(s0, sg, lambda t: np.asarray(mt(t)) + 0.5 * np.asarray(sg(t)) ** 2)

    @property
    def constant(self):
        return not callable(self.sigma) and not callable(self.mu)

    def sigma_at(self, t):
        return _coef(self.sigma)(t)

    def mu_at(self, t):
        return _coef(self.mu)(t)

    def mu_tilde(self, t=0.0):
        return np.asarray(self.mu_at(t)) - 0.5 * np.asarray(self.sigma_at(t)) ** 2

    @property
    def mu_tilde_const(self):
        if not self.constant:
            raise DomainError("mu_tilde is not constant for functional coefficients")
        return float(self.mu) - 0.5 * float(self.sigma) ** 2

    def log_moments(self, t):
        """Mean and variance of ``log(S_t / s0)``: ``(b(t), a(t))``."""
        if self.constant:
            return self.mu_tilde_const * t, float(self.sigma) ** 2 * t
        a = integrate(lambda u: float(self.sigma_at(u)) ** 2, 0.0, t)
        b = integrate(lambda u: float(self.mu_tilde(u)), 0.0, t)
        return b, a


def black_scholes_call(s0, sigma, K, t):
    """Undiscounted call on a martingale GBM:
    ``s0 N(-log(K/s0)/(sigma sqrt t) + sigma sqrt(t)/2) - K N(... - sigma sqrt(t)/2)``.
    """
    t = np.asarray(t, dtype=float)
    if not (s0 > 0 and sigma > 0 and K > 0) or np.any(t <= 0):
        raise DomainError("s0, sigma, K and t must all be positive")
    v = sigma * np.sqrt(t)
    m = -math.log(K / s0) / v
    out = s0 * normal_cdf(m + 0.5 * v) - K * normal_cdf(m - 0.5 * v)
    return float(out) if np.ndim(out) == 0 else out


def gbm_terminal_survival(spec: GBMSpec, x, t):
    """``P(S_t >= x)``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) or not t > 0:
        raise DomainError("x and t must be > 0")
    b, a = spec.log_moments(t)
    out = normal_cdf((b - np.log(x / spec.s0)) / math.sqrt(a))
    return float(out) if np.ndim(out) == 0 else out


def gbm_dinverse(spec: GBMSpec, s) -> TransformedLaw:
    """d-inverse of a constant-coefficient GBM at price level ``s >= s0``.

    ``S_t = f(B_t + (mu_tilde/sigma) t)`` with ``f(x) = s0 exp(sigma x)``, so
    the law is the constant-drift d-inverse at level ``log(s/s0)/sigma``
    pushed through ``f``. Exists iff ``mu_tilde = mu - sigma^2/2 >= 0``.
    """
    if not spec.constant:
        raise DomainError("gbm_dinverse needs constant coefficients")
    mt = spec.mu_tilde_const
    if mt < 0:
        raise NotDIncreasingError(
            f"GBM admits a d-inverse iff mu - sigma^2/2 >= 0; here it is {mt:.6g}"
        )
    if not s >= spec.s0:
        raise DomainError(f"price level must be >= s0={spec.s0}, got {s}")
    sigma, s0 = float(spec.sigma), spec.s0
    base = DInverse(DriftFunction.constant(mt / sigma), 0.0)
    f = MonotoneFn(lambda v: s0 * np.exp(sigma * np.asarray(v, dtype=float)), lo=0.0)
    return transform(base, f=f, g=identity_fn(), y=s)


@dataclass(frozen=True, eq=False)
class TimeChangeReduction:
    """``a(t) = int sigma^2``, ``b(t) = int mu_tilde`` and ``rho = b o a^{-1}``.

    ``a^{-1}`` is a left-continuous inverse on ``[0, horizon]``; the horizon
    doubles whenever a requested clock value lies beyond ``a(horizon)``.
    """

    spec: GBMSpec
    horizon: float = 100.0
    warning: str | None = None
    _state: dict = field(default_factory=dict, repr=False)

    def a(self, t):
        return self._vec(lambda s: integrate(lambda u: float(self.spec.sigma_at(u)) ** 2, 0.0, s), t)

    def b(self, t):
        return self._vec(lambda s: integrate(lambda u: float(self.spec.mu_tilde(u)), 0.0, s), t)

    @staticmethod
    def _vec(fn, t):
        arr = np.asarray(t, dtype=float)
        out = np.array([fn(float(v)) for v in arr.ravel()]).reshape(arr.shape)
        return float(out) if out.ndim == 0 else out

    def a_inverse(self, v):
        v = np.asarray(v, dtype=float)
        if np.any(v < 0):
            raise DomainError("clock values must be >= 0")
        hz = self._state.get("horizon", self.horizon)
        vmax = float(np.max(v)) if v.size else 0.0
        while self.a(hz) < vmax:
            hz *= 2.0
        self._state["horizon"] = hz
        clock = MonotoneFn(self.a, lo=0.0, hi=hz)
        return left_inverse(clock, v)

    def rho(self, t):
        return self.b(self.a_inverse(t))

    @property
    def drift(self) -> DriftFunction:
        return DriftFunction.custom(self.rho, label="b(a^-1(t))")


def reduce_functional_gbm(spec: GBMSpec, horizon=100.0, require_nonnegative=False) -> TimeChangeReduction:
    """Time-change a GBM with functional coefficients into ``s0 exp(beta_t + rho(t))``."""
    probe = np.concatenate([[0.0], log_grid(1e-6, horizon, 200)])
    sig = np.asarray(spec.sigma_at(probe), dtype=float) * np.ones_like(probe)
    if np.any(~np.isfinite(sig)) or np.any(sig[1:] <= 0):
        k = int(np.flatnonzero(~(np.isfinite(sig[1:]) & (sig[1:] > 0)))[0]) + 1
        raise DegenerateTimeChangeError(
            f"sigma must be positive for a strictly increasing clock; sigma({probe[k]:.6g}) = {sig[k]!r}"
        )
    mt = np.asarray(spec.mu_tilde(probe), dtype=float) * np.ones_like(probe)
    warning = None
    if np.any(mt < 0):
        k = int(np.flatnonzero(mt < 0)[0])
        msg = f"mu_tilde({probe[k]:.6g}) = {mt[k]:.6g} < 0; rho may fail the d-increasing condition"
        if require_nonnegative:
            raise NotDIncreasingError(msg)
        warning = msg
    return TimeChangeReduction(spec, float(horizon), warning)


@dataclass(frozen=True)
class KnotFunction:
    """Increasing right-continuous function given by knots.

    Zero left of ``xs[0]``; linear between distinct consecutive knots; a
    repeated abscissa is a jump; beyond the last knot it continues with
    ``tail_slope``.
    """

    xs: tuple
    values: tuple
    tail_slope: float = 0.0

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        vs = np.asarray(self.values, dtype=float)
        if xs.ndim != 1 or xs.shape != vs.shape or xs.size == 0:
            raise DomainError("knots need equal-length, non-empty x and value sequences")
        if np.any(np.diff(xs) < 0) or np.any(np.diff(vs) < 0) or self.tail_slope < 0:
            raise DomainError("knot function must be increasing")

    @classmethod
    def indicator(cls, x):
        return cls((float(x),), (1.0,))

    @classmethod
    def call_payoff(cls, K):
        return cls((float(K),), (0.0,), 1.0)

    def __call__(self, s):
        xs = np.asarray(self.xs)
        vs = np.asarray(self.values)
        s = np.asarray(s, dtype=float)
        i = np.searchsorted(xs, s, side="right") - 1
        out = np.zeros_like(s)
        for k in range(xs.size):
            nxt = k + 1
            sel = i == k
            if nxt < xs.size and xs[nxt] > xs[k]:
                slope = (vs[nxt] - vs[k]) / (xs[nxt] - xs[k])
            elif nxt == xs.size:
                slope = self.tail_slope
            else:
                slope = 0.0
            out = np.where(sel, vs[k] + slope * (s - xs[k]), out)
        return float(out) if out.ndim == 0 else out


def increasing_expectation(survival, phi: KnotFunction):
    """``E[phi(S)] = phi(x0) P(S >= x0) + int_{x0}^inf P(S >= x) dphi(x)``.

    ``survival(x)`` is ``P(S >= x)``; the Stieltjes integral is split into
    jump terms at the knots and Lebesgue integrals over the linear pieces.
    """
    xs = np.asarray(phi.xs, dtype=float)
    vs = np.asarray(phi.values, dtype=float)

    def surv(x):
        v = float(survival(x))
        if not 0.0 <= v <= 1.0:
            raise DomainError(f"survival({x}) = {v} is not a probability")
        return v

    total = vs[0] * surv(xs[0]) if vs[0] != 0 else 0.0
    for k in range(1, xs.size):
        dv = vs[k] - vs[k - 1]
        if dv == 0:
            continue
        if xs[k] == xs[k - 1]:
            total += dv * surv(xs[k])
        else:
            slope = dv / (xs[k] - xs[k - 1])
            total += slope * integrate(surv, xs[k - 1], xs[k])
    if phi.tail_slope > 0:
        total += phi.tail_slope * integrate(surv, xs[-1], math.inf)
    return total


@dataclass(frozen=True, eq=False)
class PriceCurve:
    t: np.ndarray
    price: np.ndarray
    stderr: np.ndarray
    method: str
    verdict: Verdict

    @property
    def label(self):
        return "Increasing" if self.verdict.holds else "CounterExample"


def call_prices(spec: GBMSpec, K, t_grid, rng=None, n=MC_PATHS):
    """Call prices on ``t_grid``: closed form for a martingale GBM, Monte Carlo otherwise.

    Monte Carlo uses one set of normal draws for every maturity. Returns
    ``(price, stderr, method)``.
    """
    t = np.asarray(t_grid, dtype=float)
    if spec.constant and float(spec.mu) == 0.0:
        return black_scholes_call(spec.s0, float(spec.sigma), K, t), np.zeros_like(t), "closed"
    if rng is None:
        from .montecarlo import make_rng

        rng = make_rng()
    z = rng.standard_normal(n)
    price, se = np.empty_like(t), np.empty_like(t)
    for i, ti in enumerate(t):
        b, a = spec.log_moments(float(ti))
        pay = np.maximum(spec.s0 * np.exp(math.sqrt(a) * z + b) - K, 0.0)
        price[i] = pay.mean()
        se[i] = pay.std(ddof=1) / math.sqrt(n)
    return price, se, "monte-carlo"


def call_price_monotonicity(spec: GBMSpec, K, t_grid, rng=None, n=MC_PATHS, tol=1e-9) -> PriceCurve:
    """Is ``t -> C(t)`` increasing on the grid?

    The closed form is checked to ``tol``; simulated prices may dip by up to
    three standard errors.
    """
    t = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t) <= 0):
        raise DomainError("maturity grid must be increasing")
    price, se, method = call_prices(spec, K, t, rng, n)
    if method == "closed":
        hit = first_decrease(t, price, tol)
    else:
        hit = None
        for j in range(1, t.size):
            i = int(np.argmax(price[:j]))
            if price[i] > price[j] + 3.0 * max(se[i], se[j]):
                hit = (i, j)
                break
    if hit is None:
        verdict = Verdict(True)
    else:
        i, j = hit
        verdict = Verdict(False, (float(t[i]), float(t[j])), (float(price[i]), float(price[j])), float(K))
    return PriceCurve(t, price, se, method, verdict)


def gbm_d_increasing(spec: GBMSpec, t_grid, x_grid) -> Verdict:
    """Grid check that ``P(S_t >= x)`` increases in t at every price level."""
    return check_d_increasing(
        lambda t, x: np.vectorize(lambda tt, xx: gbm_terminal_survival(spec, xx, tt))(t, x),
        t_grid,
        x_grid,
    )
