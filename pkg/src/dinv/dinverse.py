"""Laws of d-inverses of Brownian motion with functional drift.

For a drift rho with rho(t)/sqrt(t) increasing, the d-inverse at level x has
``P(Y_x <= t) = N(eta_x(t))`` with ``eta_x(t) = (rho(t) - x)/sqrt(t)`` and is
realised as ``eta_x^{-1}(Z)`` for a standard normal Z. Zero, constant,
power and explosive drifts also have closed forms, which every method uses
when available; the ``generic`` methods always go through eta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .drift import DriftFunction, DriftKind, EtaCurve, eta, verify_condition_A
from .errors import ConditionViolated, DomainError
from .numerics import MonotoneFn, Verdict, first_decrease, left_inverse, normal_cdf, normal_quantile

D_INCREASING_TOL = 1e-9
LEVEL_RTOL = 1e-15


class ClosedForm(str, Enum):
    ZERO = "ZeroDrift"
    CONSTANT = "ConstantDrift"
    POWER = "PowerDrift"
    EXPLOSION = "Explosion"


def _scalar_or_array(out):
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


def _check_times(t):
    t = np.asarray(t, dtype=float)
    if np.any(np.isnan(t)) or np.any(t <= 0):
        raise DomainError(f"times must be > 0, got {t!r}")
    return t


def _check_u(u):
    u = np.asarray(u, dtype=float)
    if np.any(np.isnan(u)) or np.any((u < 0) | (u > 1)):
        raise DomainError(f"probability must lie in [0, 1], got {u!r}")
    return u


@dataclass(frozen=True, eq=False)
class DInverse:
    """Law of the d-inverse ``Y_x`` of ``B_t + rho(t)`` at a fixed level x."""

    drift: DriftFunction
    x: float = 0.0
    check: bool = True

    def __post_init__(self):
        if not self.x >= 0:
            raise DomainError(f"level must be >= 0, got {self.x}")
        if self.check:
            verdict = verify_condition_A(self.drift)
            if not verdict:
                raise ConditionViolated(
                    f"{self.drift.describe()} is not d-increasing: rho(t)/sqrt(t) decreases "
                    f"between t={verdict.witness[0]:.6g} and t={verdict.witness[1]:.6g}",
                    verdict,
                )

    @property
    def closed_form(self):
        d = self.drift
        if d.kind is DriftKind.ZERO or (d.kind in (DriftKind.POWER, DriftKind.CONSTANT) and d.c == 0):
            return ClosedForm.ZERO
        if d.kind is DriftKind.CONSTANT:
            return ClosedForm.CONSTANT
        if d.kind is DriftKind.POWER and d.alpha >= 0.5:
            return ClosedForm.POWER
        if d.kind is DriftKind.EXPLOSIVE:
            return ClosedForm.EXPLOSION
        return None

    @property
    def eta(self) -> EtaCurve:
        return eta(self.drift, self.x)

    @property
    def level(self):
        return self.x

    def with_level(self, x):
        return replace(self, x=float(x), check=False)

    # -- distribution function ------------------------------------------------

    def cdf(self, t):
        t = _check_times(t)
        form, x, d = self.closed_form, self.x, self.drift
        rt = np.sqrt(t)
        if form is ClosedForm.ZERO:
            out = normal_cdf(-x / rt)
        elif form is ClosedForm.CONSTANT:
            out = normal_cdf(d.c * rt - x / rt)
        elif form is ClosedForm.POWER:
            out = normal_cdf(d.c * t ** (d.alpha - 0.5) - x / rt)
        elif form is ClosedForm.EXPLOSION:
            out = np.where(t >= d.t0, 1.0, normal_cdf(-x / rt))
        else:
            out = normal_cdf(self.eta(t))
        return _scalar_or_array(out)

    def generic_cdf(self, t):
        return _scalar_or_array(normal_cdf(self.eta(_check_times(t))))

    def defect_mass(self):
        """``P(Y_x = inf) = 1 - lim_{t->inf} cdf(t)``."""
        form, d = self.closed_form, self.drift
        if form is ClosedForm.ZERO:
            return 0.5
        if form in (ClosedForm.CONSTANT, ClosedForm.EXPLOSION):
            return 0.0
        if form is ClosedForm.POWER:
            # eta_x(t) -> c when alpha = 1/2, otherwise -> inf.
            return 1.0 - normal_cdf(d.c) if d.alpha == 0.5 else 0.0
        m = np.array([self.generic_cdf(t) for t in (1e12, 1e13, 1e14)])
        denom = m[2] - 2 * m[1] + m[0]
        limit = m[2]
        if abs(denom) > 1e-15:
            limit = m[2] - (m[2] - m[1]) ** 2 / denom
        return float(np.clip(1.0 - limit, 0.0, 1.0))

    # -- inversion ------------------------------------------------------------

    def eta_inverse(self, z, method="auto"):
        """``eta_x^{-1}(z)``: the smallest t > 0 with eta_x(t) >= z (0 or inf at the ends)."""
        z = np.asarray(z, dtype=float)
        if method == "generic" or self.closed_form is None:
            return _scalar_or_array(left_inverse(self.eta, z))
        if method not in ("auto", "closed"):
            raise DomainError(f"unknown method {method!r}")
        return _scalar_or_array(self._closed_eta_inverse(z))

    def _closed_eta_inverse(self, z):
        form, x, d = self.closed_form, self.x, self.drift
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if form is ClosedForm.ZERO:
                return _zero_inverse(z, x)
            if form is ClosedForm.EXPLOSION:
                return np.minimum(_zero_inverse(z, x), d.t0)
            if form is ClosedForm.CONSTANT or d.alpha == 1.0:
                return _constant_inverse(z, d.c, x)
            return _power_inverse(z, d.c, d.alpha, x)

    def quantile(self, u, method="auto"):
        """Left-continuous inverse of :meth:`cdf`; +inf beyond the finite mass."""
        q = normal_quantile(_check_u(u))
        return self.eta_inverse(q, method=method)

    def from_normal(self, z, method="closed"):
        """Map standard normal draws to draws of ``Y_x``.

        The generic route is ``eta_x^{-1}(z)``. The zero-drift and explosion
        closed forms follow the classical display
        ``(x/z)^2 1{z > 0} + inf 1{z <= 0}`` (truncated at t0), which is the
        generic route applied to ``-z``; both are exact in law since Z and -Z
        agree in distribution.
        """
        z = np.asarray(z, dtype=float)
        if method == "generic" or self.closed_form is None:
            return self.eta_inverse(z, method="generic")
        if self.closed_form in (ClosedForm.ZERO, ClosedForm.EXPLOSION):
            z = -z
        return self.eta_inverse(z, method="closed")

    def sample(self, rng, size=None, method="closed"):
        z = rng.standard_normal(size)
        return self.from_normal(z, method=method)


def _zero_inverse(z, x):
    # eta_x(t) = -x/sqrt(t): reaches z < 0 at t = (x/z)^2 and never reaches z > 0.
    if x == 0:
        return np.where(z <= 0, 0.0, np.inf)
    return np.where(z < 0, (x / z) ** 2, np.inf)


def _constant_inverse(z, c, x):
    # sqrt(t) solves c s^2 - z s - x = 0; the z < 0 branch is the rationalised root.
    disc = np.sqrt(z * z + 4.0 * c * x)
    s_pos = (z + disc) / (2.0 * c)
    s_neg = 2.0 * x / (disc - z)
    s = np.where(z >= 0, s_pos, s_neg)
    s = np.where(np.isposinf(z), np.inf, np.where(np.isneginf(z), 0.0, s))
    if x == 0:
        s = np.where(z <= 0, 0.0, s)
    return s * s


def _power_inverse(z, c, alpha, x, max_iter=200):
    """Root in s = sqrt(t) of ``c s^(2 alpha - 1) - x/s = z`` for alpha >= 1/2."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    k = 2.0 * alpha - 1.0
    if k == 0.0:
        if x == 0:
            s = np.where(z <= c, 0.0, np.inf)
        else:
            s = np.where(z < c, x / (c - z), np.inf)
        return s * s
    if x == 0:
        s = np.where(z <= 0, 0.0, (np.maximum(z, 0.0) / c) ** (1.0 / k))
        return s * s

    out = np.empty_like(z)
    out[np.isposinf(z)] = np.inf
    out[np.isneginf(z)] = 0.0
    fin = np.isfinite(z)
    zz = z[fin]
    s1 = (x / c) ** (1.0 / (k + 1.0))  # root when z = 0
    neg = zz <= 0
    lo = np.where(neg, x / (c * s1**k - zz), s1)
    hi = np.where(neg, s1, ((zz + x / s1) / c) ** (1.0 / k))
    u_lo, u_hi = np.log(lo), np.log(hi)
    u = 0.5 * (u_lo + u_hi)
    for _ in range(max_iter):
        e_ku, e_mu = np.exp(k * u), np.exp(-u)
        phi = c * e_ku - x * e_mu - zz
        dphi = k * c * e_ku + x * e_mu
        u_lo = np.where(phi < 0, u, u_lo)
        u_hi = np.where(phi >= 0, u, u_hi)
        step = u - phi / dphi
        inside = (step > u_lo) & (step < u_hi)
        u_new = np.where(inside, step, 0.5 * (u_lo + u_hi))
        done = np.abs(u_new - u) <= 1e-15 * np.maximum(1.0, np.abs(u))
        u = u_new
        if np.all(done):
            break
    out[fin] = np.exp(2.0 * u)
    return out


# -- transforms -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TransformedLaw:
    """d-inverse of ``f(X_{g(t)})`` at level y, given a d-inverse family of X.

    Its law is that of ``g^{-1}(Y_{f^{-1}(y)})``. ``base`` is any law with
    ``with_level``, ``cdf``, ``quantile`` and ``sample`` (so transforms nest).
    """

    base: object
    f: MonotoneFn
    g: MonotoneFn
    y: float

    def __post_init__(self):
        floor = float(self.f(self.f.lo))
        if self.y < floor - 1e-12 * (1 + abs(floor)):
            raise DomainError(f"level {self.y} lies below f(x0) = {floor}")

    @property
    def level(self):
        return self.y

    @property
    def base_level(self):
        # solved to a few ulp so that nested and composed transforms agree
        return max(float(left_inverse(self.f, self.y, rtol=LEVEL_RTOL)), self.f.lo)

    def at_base(self):
        return self.base.with_level(self.base_level)

    def with_level(self, y):
        return replace(self, y=float(y))

    def cdf(self, t):
        t = _check_times(t)
        return self.at_base().cdf(np.asarray(self.g(t), dtype=float))

    def quantile(self, u):
        q = np.asarray(self.at_base().quantile(u), dtype=float)
        return _scalar_or_array(left_inverse(self.g, q))

    def sample(self, rng, size=None, **kw):
        y = np.asarray(self.at_base().sample(rng, size, **kw), dtype=float)
        return _scalar_or_array(left_inverse(self.g, y))

    def defect_mass(self):
        return self.at_base().defect_mass()


def identity_fn(lo=0.0):
    return MonotoneFn(lambda v: np.asarray(v, dtype=float), lo=lo)


def transform(dist, f: MonotoneFn | None = None, g: MonotoneFn | None = None, y=None) -> TransformedLaw:
    """Law of the d-inverse of ``f(X_{g(t)})`` at level ``y``.

    ``f`` defaults to the identity on [0, inf) and ``y`` to ``f(dist.level)``.
    """
    f = f or identity_fn()
    g = g or identity_fn()
    if y is None:
        y = float(f(dist.level))
    return TransformedLaw(dist, f, g, float(y))


# -- checks ---------------------------------------------------------------------


def duality_check(c, x, n, rng):
    """Two-sample KS distance between ``Y^(c.)_x`` and ``1 / Y^(x.)_c``."""
    from .montecarlo import EmpiricalLaw, ks_two_sample

    if not (c > 0 and x > 0):
        raise DomainError("duality needs c > 0 and x > 0")
    if n < 1000:
        raise DomainError("duality check needs n >= 1000")
    a = DInverse(DriftFunction.constant(c), x).sample(rng, n)
    with np.errstate(divide="ignore"):
        b = 1.0 / DInverse(DriftFunction.constant(x), c).sample(rng, n)
    return ks_two_sample(EmpiricalLaw.from_samples(a), EmpiricalLaw.from_samples(b))


def _survival_table(survival, t_grid, x_grid):
    T, X = np.meshgrid(t_grid, x_grid, indexing="ij")
    try:
        vals = np.asarray(survival(T, X), dtype=float)
    except (TypeError, ValueError):
        vals = None
    if vals is None or vals.shape != T.shape:
        vals = np.array([[float(survival(t, x)) for x in x_grid] for t in t_grid])
    if np.any(np.isnan(vals)) or np.any((vals < 0) | (vals > 1)):
        raise DomainError("survival probabilities must lie in [0, 1]")
    return vals


def check_d_increasing(survival, t_grid, x_grid, tol=D_INCREASING_TOL) -> Verdict:
    """Is ``t -> survival(t, x)`` increasing for every grid level x?

    ``survival(t, x)`` stands for ``P(X_t >= x)``; it is called once on
    meshgrid arrays and falls back to pointwise calls if that fails to
    broadcast. A failing verdict carries ``(t_i, t_j)``, the two values and
    the level.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    x_grid = np.asarray(x_grid, dtype=float)
    if t_grid.size == 0 or x_grid.size == 0:
        raise DomainError("grids must be non-empty")
    if np.any(np.diff(t_grid) <= 0) or np.any(np.diff(x_grid) < 0):
        raise DomainError("grids must be increasing")
    vals = _survival_table(survival, t_grid, x_grid)
    for k, x in enumerate(x_grid):
        hit = first_decrease(t_grid, vals[:, k], tol)
        if hit is not None:
            i, j = hit
            return Verdict(False, (float(t_grid[i]), float(t_grid[j])),
                           (float(vals[i, k]), float(vals[j, k])), float(x))
    return Verdict(True)


def stochastically_le(survival_a, survival_b, x_grid, tol=D_INCREASING_TOL) -> Verdict:
    """``A <=_st B`` on the grid levels: ``P(A >= x) <= P(B >= x)`` for all grid x."""
    x_grid = np.asarray(x_grid, dtype=float)
    sa = np.asarray(survival_a(x_grid), dtype=float)
    sb = np.asarray(survival_b(x_grid), dtype=float)
    bad = sa > sb + tol
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        return Verdict(False, (float(x_grid[k]),), (float(sa[k]), float(sb[k])), float(x_grid[k]))
    return Verdict(True)


@dataclass(frozen=True)
class PointMass:
    """Degenerate law concentrated at a point (used for degenerate scaling limits)."""

    at: float = 0.0
    level: float = 0.0

    def with_level(self, x):
        return replace(self, level=float(x))

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("times must be >= 0")
        return _scalar_or_array(np.where(t >= self.at, 1.0, 0.0))

    def quantile(self, u):
        _check_u(u)
        return _scalar_or_array(np.full(np.shape(u), self.at))

    def sample(self, rng, size=None, **kw):
        return _scalar_or_array(np.full(size if size is not None else (), self.at))

    def defect_mass(self):
        return 0.0


def explosion_law(t0, x=0.0):
    return DInverse(DriftFunction.explosive(t0), x)


def zero_law(x=0.0):
    return DInverse(DriftFunction.zero(), x)


def power_law(c, alpha, x=0.0):
    return DInverse(DriftFunction.power(c, alpha), x)


def constant_law(c, x=0.0):
    return DInverse(DriftFunction.constant(c), x)
