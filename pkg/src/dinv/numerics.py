"""Special functions and monotone-function machinery.

Everything here accepts numpy arrays as well as scalars. Extended reals are
plain IEEE infinities; no large finite sentinels are used anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate as _integrate
from scipy import special

from .errors import DomainError, EvaluationError, InconsistencyError

# Library tolerances. Callers override per call through keyword arguments.
ROOT_ATOL = 0.0
ROOT_RTOL = 1e-12
CDF_TOL = 1e-14
MONOTONE_TOL = 1e-12
QUAD_ATOL = 1e-10
QUAD_RTOL = 1e-8

# Geometric bracket expansion on unbounded domains.
BRACKET_FACTOR = 4.0
BRACKET_MIN = 1e-18
BRACKET_MAX = 1e18

_MAX_BISECT = 400


def normal_cdf(z):
    """Standard Gaussian CDF, accurate in both tails.

    Backed by ``scipy.special.ndtr``, which evaluates the lower tail through
    ``erfc`` directly, so no ``1 - small`` cancellation occurs for z < 0.
    Scalars and arrays take the same path and give identical bits.
    """
    out = special.ndtr(np.asarray(z, dtype=float))
    return float(out) if out.ndim == 0 else out


def normal_pdf(z):
    z = np.asarray(z, dtype=float)
    out = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    return float(out) if out.ndim == 0 else out


def normal_quantile(u):
    """Inverse of :func:`normal_cdf`; ``u=0`` maps to -inf and ``u=1`` to +inf."""
    arr = np.asarray(u, dtype=float)
    if np.any(np.isnan(arr)) or np.any((arr < 0.0) | (arr > 1.0)):
        raise DomainError(f"quantile level must lie in [0, 1], got {u!r}")
    q = special.ndtri(arr)
    return float(q) if q.ndim == 0 else q


@dataclass(frozen=True)
class MonotoneFn:
    """An increasing map on an interval ``[lo, hi]`` of the extended reals.

    ``func`` must accept numpy arrays. With ``open_lo`` the left endpoint is
    never evaluated (used for curves defined only on ``(0, inf)``).
    """

    func: Callable
    lo: float = 0.0
    hi: float = math.inf
    open_lo: bool = False

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DomainError(f"empty domain [{self.lo}, {self.hi}]")
        if self.lo == -math.inf:
            raise DomainError("domains unbounded below are not supported")
        if self.open_lo and self.lo < 0:
            raise DomainError("an open left endpoint must be non-negative")

    def __call__(self, x):
        return self.func(x)

    def inverse(self, y, **kw):
        return left_inverse(self, y, **kw)


@dataclass(frozen=True)
class Verdict:
    """Outcome of a grid monotonicity check.

    ``holds`` is the answer. On failure ``witness`` holds the offending pair
    ``(s_i, s_j)`` with ``s_i < s_j``, ``values`` their function values, and
    ``level`` the extra coordinate (a level x) when the check had one.
    """

    holds: bool
    witness: tuple | None = None
    values: tuple | None = None
    level: float | None = None

    def __bool__(self):
        return self.holds


def first_decrease(grid, values, tol=MONOTONE_TOL):
    """Return indices ``(i, j)``, ``i < j``, with ``values[i] > values[j] + tol``, or None."""
    v = np.asarray(values, dtype=float)
    if np.any(np.isnan(v)):
        k = int(np.flatnonzero(np.isnan(v))[0])
        raise EvaluationError(f"NaN value at grid point {grid[k]!r}")
    if v.size < 2:
        return None
    prefix = np.maximum.accumulate(v)
    with np.errstate(invalid="ignore"):
        bad = prefix[:-1] > v[1:] + tol
    if not np.any(bad):
        return None
    j = int(np.flatnonzero(bad)[0]) + 1
    i = int(np.argmax(v[:j]))
    return i, j


def verify_monotone(f, grid, tol=MONOTONE_TOL) -> Verdict:
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(f(grid), dtype=float) * np.ones_like(grid)
    bad = first_decrease(grid, values, tol)
    if bad is None:
        return Verdict(True)
    i, j = bad
    return Verdict(False, (grid[i], grid[j]), (values[i], values[j]))


def _eval(f, x):
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        v = np.asarray(f(x), dtype=float) * np.ones(np.shape(x))
    if np.any(np.isnan(v)):
        k = np.flatnonzero(np.isnan(np.atleast_1d(v)))[0]
        raise EvaluationError(f"NaN from increasing function at x={np.atleast_1d(x)[k]!r}")
    return v


def _slack(a, b):
    mag = np.maximum(np.abs(np.where(np.isfinite(a), a, 0.0)),
                     np.abs(np.where(np.isfinite(b), b, 0.0)))
    return MONOTONE_TOL * (1.0 + mag)


def _check_order(x_small, f_small, x_big, f_big):
    bad = f_small > f_big + _slack(f_small, f_big)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        pts = ((float(x_small[k]), float(f_small[k])), (float(x_big[k]), float(f_big[k])))
        raise InconsistencyError(
            f"function decreases: f({pts[0][0]!r})={pts[0][1]!r} > f({pts[1][0]!r})={pts[1][1]!r}",
            points=pts,
        )


def left_inverse(f: MonotoneFn, y, *, atol=ROOT_ATOL, rtol=ROOT_RTOL):
    """Left-continuous inverse ``inf{x in domain : f(x) >= y}``.

    Empty sets map to the right endpoint of the domain and sets equal to the
    whole domain map to the left endpoint. Vectorised over ``y``.

    Unbounded or open-at-zero domains are bracketed geometrically from 1 by a
    factor of 4 out to 1e18 (and down to 1e-18); escaping that range returns
    the corresponding endpoint. Bisection is geometric while the bracket is
    positive and spans more than a factor of two, and stops once the bracket
    is narrower than ``max(atol, rtol * |x|)``.
    """
    y = np.asarray(y, dtype=float)
    scalar = y.ndim == 0
    y = np.atleast_1d(y).astype(float)
    if np.any(np.isnan(y)):
        raise DomainError("cannot invert at NaN")
    n = y.size
    out = np.full(n, np.nan)
    lo_d, hi_d = float(f.lo), float(f.hi)

    # Lower bracket: a point with f(a) < y, or a decision that the answer is lo_d.
    a = np.full(n, np.nan)
    fa = np.full(n, -np.inf)
    pending = np.ones(n, dtype=bool)
    if not f.open_lo:
        f_lo = _eval(f, np.full(n, lo_d))
        hit = f_lo >= y
        out[hit] = lo_d
        pending &= ~hit
        a[pending] = lo_d
        fa[pending] = f_lo[pending]

    # Upper bracket: a point with f(b) >= y.
    b = np.full(n, np.nan)
    fb = np.full(n, np.inf)
    if math.isfinite(hi_d):
        f_hi = _eval(f, np.full(n, hi_d))
        miss = pending & (f_hi < y)
        out[miss] = hi_d
        pending &= ~miss
        b[pending] = hi_d
        fb[pending] = f_hi[pending]

    if np.any(pending):
        if lo_d < 1.0 < hi_d:
            start = 1.0
        elif math.isfinite(hi_d):
            start = math.sqrt(lo_d * hi_d) if lo_d > 0 else 0.5 * (lo_d + hi_d)
        else:
            start = 2.0 * lo_d
        f_start = _eval(f, np.full(n, start))
        up = pending & (f_start < y)
        down = pending & ~up
        a[up] = start
        fa[up] = f_start[up]
        b[down] = start
        fb[down] = f_start[down]

        # Expand upward until f >= y.
        idx = np.flatnonzero(up & np.isnan(b))
        x_prev = np.full(idx.size, start)
        f_prev = f_start[idx]
        while idx.size:
            x_new = np.minimum(x_prev * BRACKET_FACTOR, hi_d)
            f_new = _eval(f, x_new)
            _check_order(x_prev, f_prev, x_new, f_new)
            done = f_new >= y[idx]
            b[idx[done]] = x_new[done]
            fb[idx[done]] = f_new[done]
            a[idx[~done]] = x_new[~done]
            fa[idx[~done]] = f_new[~done]
            escaped = ~done & (x_new >= BRACKET_MAX)
            out[idx[escaped]] = hi_d
            pending[idx[escaped]] = False
            keep = ~done & ~escaped
            idx, x_prev, f_prev = idx[keep], x_new[keep], f_new[keep]

        # Expand downward until f < y.
        idx = np.flatnonzero(pending & down) if lo_d >= 0 else np.empty(0, dtype=int)
        x_prev = b[idx].copy()
        f_prev = fb[idx].copy()
        floor = max(lo_d, 0.0)
        while idx.size:
            x_new = x_prev / BRACKET_FACTOR
            if floor > 0:
                x_new = np.maximum(x_new, floor)
            f_new = _eval(f, x_new)
            _check_order(x_new, f_new, x_prev, f_prev)
            done = f_new < y[idx]
            a[idx[done]] = x_new[done]
            fa[idx[done]] = f_new[done]
            b[idx[~done]] = x_new[~done]
            fb[idx[~done]] = f_new[~done]
            escaped = ~done & ((x_new <= BRACKET_MIN) | (x_new <= floor))
            out[idx[escaped]] = lo_d
            pending[idx[escaped]] = False
            keep = ~done & ~escaped
            idx, x_prev, f_prev = idx[keep], x_new[keep], f_new[keep]

    idx = np.flatnonzero(pending)
    lo, hi = a[idx], b[idx]
    flo, fhi = fa[idx], fb[idx]
    yy = y[idx]
    for _ in range(_MAX_BISECT):
        width = hi - lo
        scale = np.maximum(np.abs(lo), np.abs(hi))
        active = (width > np.maximum(atol, rtol * scale)) & (width > 0)
        if not np.any(active):
            break
        geo = (lo > 0) & (hi > 2.0 * lo)
        with np.errstate(invalid="ignore"):
            mid = np.where(geo, np.sqrt(lo * hi), lo + 0.5 * width)
        mid = np.where(active, mid, hi)
        fm = _eval(f, mid)
        act = np.flatnonzero(active)
        _check_order(lo[act], flo[act], mid[act], fm[act])
        _check_order(mid[act], fm[act], hi[act], fhi[act])
        go_up = active & (fm < yy)
        go_down = active & ~go_up
        lo = np.where(go_up, mid, lo)
        flo = np.where(go_up, fm, flo)
        hi = np.where(go_down, mid, hi)
        fhi = np.where(go_down, fm, fhi)
    out[idx] = hi
    return float(out[0]) if scalar else out


def integrate(f, lo, hi, *, atol=QUAD_ATOL, rtol=QUAD_RTOL, points=None):
    """Adaptive quadrature of ``f`` over ``[lo, hi]``; ``hi`` may be ``inf``."""
    if not lo <= hi:
        raise DomainError(f"integration bounds out of order: [{lo}, {hi}]")
    if lo == hi:
        return 0.0

    def g(x):
        v = float(f(x))
        if not math.isfinite(v):
            raise EvaluationError(f"non-finite integrand {v!r} at x={x!r}")
        return v

    kw = {"epsabs": atol, "epsrel": rtol, "limit": 500}
    if points is not None and math.isfinite(hi):
        kw["points"] = points
    val, _ = _integrate.quad(g, lo, hi, **kw)
    return val


def log_grid(lo, hi, n):
    return np.logspace(math.log10(lo), math.log10(hi), n)
