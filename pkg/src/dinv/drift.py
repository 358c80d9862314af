"""Drift functions, the increasing-ratio condition, and the normalised curve eta_x."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .errors import DomainError, EvaluationError
from .numerics import MONOTONE_TOL, Verdict, first_decrease, log_grid

DEFAULT_GRID = log_grid(1e-8, 1e8, 200)


class DriftKind(str, Enum):
    ZERO = "zero"
    CONSTANT = "constant"
    POWER = "power"
    EXPLOSIVE = "explosive"
    TABULATED = "tabulated"
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class DriftFunction:
    """A non-negative drift rho on [0, inf), assumed right-continuous.

    Build instances with the classmethods rather than the constructor. The
    explosive kind is the drift ``inf * 1{t >= t0}`` of a Brownian motion
    that explodes at ``t0``.
    """

    kind: DriftKind
    c: float = 0.0
    alpha: float = 1.0
    t0: float = math.inf
    knots_t: tuple = ()
    knots_rho: tuple = ()
    mode: str = "step"
    func: Callable | None = None
    log_func: Callable | None = None
    label: str = ""

    @classmethod
    def zero(cls):
        return cls(DriftKind.ZERO, c=0.0)

    @classmethod
    def constant(cls, c):
        if not c >= 0:
            raise DomainError(f"constant drift slope must be >= 0, got {c}")
        if c == 0:
            return cls.zero()
        return cls(DriftKind.CONSTANT, c=float(c), alpha=1.0)

    @classmethod
    def power(cls, c, alpha):
        if not (c >= 0 and alpha >= 0):
            raise DomainError(f"power drift needs c >= 0 and alpha >= 0, got c={c}, alpha={alpha}")
        return cls(DriftKind.POWER, c=float(c), alpha=float(alpha))

    @classmethod
    def explosive(cls, t0):
        if not 0 < t0 < math.inf:
            raise DomainError(f"explosion time must lie in (0, inf), got {t0}")
        return cls(DriftKind.EXPLOSIVE, t0=float(t0))

    @classmethod
    def tabulated(cls, t, rho, mode="step"):
        t = np.asarray(t, dtype=float)
        rho = np.asarray(rho, dtype=float)
        if mode not in ("step", "linear"):
            raise DomainError(f"unknown interpolation mode {mode!r}")
        if t.ndim != 1 or t.shape != rho.shape or t.size == 0:
            raise DomainError("knots must be two equal-length non-empty sequences")
        if np.any(t < 0) or np.any(np.diff(t) <= 0):
            raise DomainError("knot times must be non-negative and strictly increasing")
        if not np.all(np.isfinite(rho)) or np.any(rho < 0):
            raise DomainError("knot values must be finite and non-negative")
        if mode == "linear" and t.size < 2:
            raise DomainError("linear interpolation needs at least two knots")
        return cls(DriftKind.TABULATED, knots_t=tuple(t), knots_rho=tuple(rho), mode=mode)

    @classmethod
    def from_csv(cls, path, mode="step"):
        """Load ``t,rho`` columns (header required) into a tabulated drift."""
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip().lower() for h in next(reader, [])]
            if header != ["t", "rho"]:
                raise DomainError(f"{path}: expected header 't,rho', got {header!r}")
            rows = [r for r in reader if r and any(x.strip() for x in r)]
        try:
            t = [float(r[0]) for r in rows]
            rho = [float(r[1]) for r in rows]
        except (ValueError, IndexError) as exc:
            raise DomainError(f"{path}: malformed row ({exc})") from None
        return cls.tabulated(t, rho, mode=mode)

    @classmethod
    def custom(cls, func, log_func=None, label=""):
        """Wrap a vectorised callable. ``log_func`` gives log(rho) for overflow-free scaling."""
        return cls(DriftKind.CUSTOM, func=func, log_func=log_func, label=label)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        kind = self.kind
        if kind is DriftKind.ZERO:
            out = np.zeros_like(t)
        elif kind is DriftKind.CONSTANT:
            out = self.c * t
        elif kind is DriftKind.POWER:
            with np.errstate(divide="ignore", invalid="ignore"):
                out = self.c * np.power(t, self.alpha)
            if self.alpha == 0:
                out = np.full_like(t, self.c)
        elif kind is DriftKind.EXPLOSIVE:
            out = np.where(t >= self.t0, np.inf, 0.0)
        elif kind is DriftKind.TABULATED:
            out = self._interp(t)
        else:
            with np.errstate(all="ignore"):
                out = np.asarray(self.func(t), dtype=float) * np.ones_like(t)
        return float(out) if out.ndim == 0 else out

    def _interp(self, t):
        kt = np.asarray(self.knots_t)
        kr = np.asarray(self.knots_rho)
        if self.mode == "step":
            i = np.clip(np.searchsorted(kt, t, side="right") - 1, 0, kt.size - 1)
            return kr[i]
        out = np.interp(t, kt, kr)
        right_slope = (kr[-1] - kr[-2]) / (kt[-1] - kt[-2])
        left_slope = (kr[1] - kr[0]) / (kt[1] - kt[0])
        out = np.where(t > kt[-1], kr[-1] + right_slope * (t - kt[-1]), out)
        out = np.where(t < kt[0], np.maximum(kr[0] + left_slope * (t - kt[0]), 0.0), out)
        return out

    def log(self, t):
        """log(rho(t)), computed without forming rho when a log form is known."""
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind is DriftKind.POWER and self.c > 0:
                out = math.log(self.c) + self.alpha * np.log(t)
            elif self.kind is DriftKind.CONSTANT:
                out = math.log(self.c) + np.log(t)
            elif self.kind is DriftKind.CUSTOM and self.log_func is not None:
                out = np.asarray(self.log_func(t), dtype=float) * np.ones_like(t)
            else:
                out = np.log(np.asarray(self(t), dtype=float))
        return float(out) if np.ndim(out) == 0 else out

    def scaled(self, s):
        """The drift ``t -> rho(s t)``."""
        if self.kind is DriftKind.ZERO:
            return self
        if self.kind is DriftKind.CONSTANT:
            return DriftFunction.constant(self.c * s)
        if self.kind is DriftKind.POWER:
            return DriftFunction.power(self.c * s**self.alpha, self.alpha)
        if self.kind is DriftKind.EXPLOSIVE:
            return DriftFunction.explosive(self.t0 / s)
        log_func = None
        if self.kind is DriftKind.CUSTOM and self.log_func is not None:
            log_func = lambda t, f=self.log_func: f(s * np.asarray(t))  # noqa: E731
        return DriftFunction.custom(lambda t: self(s * np.asarray(t)), log_func, label=f"{self.label}(s={s})")

    def describe(self):
        k = self.kind
        if k is DriftKind.CONSTANT:
            return f"constant(c={self.c})"
        if k is DriftKind.POWER:
            return f"power(c={self.c}, alpha={self.alpha})"
        if k is DriftKind.EXPLOSIVE:
            return f"explosive(t0={self.t0})"
        if k is DriftKind.TABULATED:
            return f"tabulated({len(self.knots_t)} knots, {self.mode})"
        if k is DriftKind.CUSTOM:
            return f"custom({self.label})" if self.label else "custom"
        return "zero"


def verify_condition_A(drift: DriftFunction, grid=None, tol=MONOTONE_TOL) -> Verdict:
    """Check that rho(t)/sqrt(t) is increasing in t > 0.

    Zero, constant, power and explosive drifts are answered analytically;
    power drifts satisfy it iff ``alpha >= 1/2`` or ``c == 0``. Other drifts
    are checked pairwise on ``grid`` (default: 200 log-spaced points on
    [1e-8, 1e8]).
    """
    kind = drift.kind
    if kind in (DriftKind.ZERO, DriftKind.CONSTANT, DriftKind.EXPLOSIVE):
        return Verdict(True)
    if kind is DriftKind.POWER:
        if drift.alpha >= 0.5 or drift.c == 0:
            return Verdict(True)
        # rho(t)/sqrt(t) = c t^(alpha - 1/2) is strictly decreasing.
        vals = tuple(drift.c * t ** (drift.alpha - 0.5) for t in (1.0, 4.0))
        return Verdict(False, (1.0, 4.0), vals)

    grid = DEFAULT_GRID if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be non-empty, positive and strictly increasing")
    rho = np.asarray(drift(grid), dtype=float) * np.ones_like(grid)
    bad = ~np.isfinite(rho)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise EvaluationError(f"drift is non-finite at t={grid[k]!r}: {rho[k]!r}")
    if np.any(rho < 0):
        k = int(np.flatnonzero(rho < 0)[0])
        raise DomainError(f"drift is negative at t={grid[k]!r}: {rho[k]!r}")
    ratio = rho / np.sqrt(grid)
    hit = first_decrease(grid, ratio, tol)
    if hit is None:
        return Verdict(True)
    i, j = hit
    return Verdict(False, (float(grid[i]), float(grid[j])), (float(ratio[i]), float(ratio[j])))


@dataclass(frozen=True)
class EtaCurve:
    """``t -> (rho(t) - x) / sqrt(t)`` on (0, inf).

    Duck-types as a :class:`~dinv.numerics.MonotoneFn` with an open left
    endpoint so it can be handed straight to ``left_inverse``.
    """

    drift: DriftFunction
    x: float
    lo: float = 0.0
    hi: float = math.inf
    open_lo: bool = True

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.drift.kind is DriftKind.EXPLOSIVE:
                out = np.where(t >= self.drift.t0, np.inf, -self.x / np.sqrt(t))
            else:
                out = (np.asarray(self.drift(t)) - self.x) / np.sqrt(t)
        return float(out) if out.ndim == 0 else out


def eta(drift: DriftFunction, x) -> EtaCurve:
    if not x >= 0:
        raise DomainError(f"level must be >= 0, got {x}")
    if drift.kind is DriftKind.EXPLOSIVE:
        # eta is +inf from t0 on; a closed right end makes t0 itself an exact bracket point
        return EtaCurve(drift, float(x), hi=drift.t0)
    return EtaCurve(drift, float(x))
