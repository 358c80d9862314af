"""Monte Carlo oracle: reproducible streams, empirical laws and KS statistics.

All randomness comes from numpy's Philox counter-based generator keyed by
``(seed, stream_id)``. Parallel work is cut into fixed-size blocks, block b
drawing from stream b, so the merged output does not depend on the number of
worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .drift import DriftFunction, eta
from .errors import DomainError
from .numerics import normal_cdf

DEFAULT_SEED = 20100101
BLOCK_SIZE = 1 << 14
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SeededStream:
    seed: int = DEFAULT_SEED
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        key = (int(self.seed) & _MASK64) | ((int(self.stream_id) & _MASK64) << 64)
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, stream_id):
        return SeededStream(self.seed, stream_id)


def make_rng(seed=DEFAULT_SEED, stream_id=0) -> np.random.Generator:
    return SeededStream(seed, stream_id).generator()


def parallel_draws(draw, n, seed=DEFAULT_SEED, threads=1, block=BLOCK_SIZE):
    """Concatenate ``draw(rng, size)`` over fixed blocks of ``n``; block b uses stream b."""
    sizes = [min(block, n - s) for s in range(0, n, block)]

    def run(b):
        return np.asarray(draw(make_rng(seed, b), sizes[b]), dtype=float)

    if threads <= 1 or len(sizes) <= 1:
        parts = [run(b) for b in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    return np.concatenate(parts) if parts else np.empty(0)


@dataclass(frozen=True, eq=False)
class EmpiricalLaw:
    """Sorted finite samples plus the number of +inf samples."""

    finite: np.ndarray
    n_inf: int
    n: int

    @classmethod
    def from_samples(cls, samples):
        s = np.asarray(samples, dtype=float).ravel()
        if np.any(np.isnan(s)) or np.any(np.isneginf(s)):
            raise DomainError("samples must be real or +inf")
        inf = np.isposinf(s)
        return cls(np.sort(s[~inf]), int(inf.sum()), int(s.size))

    @property
    def defect_fraction(self):
        return self.n_inf / self.n if self.n else 0.0

    def cdf(self, t):
        """Unconditional empirical ``P(Y <= t)`` (infinite samples never count)."""
        return np.searchsorted(self.finite, t, side="right") / self.n

    def merge(self, other):
        return EmpiricalLaw(np.sort(np.concatenate([self.finite, other.finite])),
                            self.n_inf + other.n_inf, self.n + other.n)


def sample_drifted_terminal(drift: DriftFunction, t, rng, size=None):
    """Draw ``B_t + rho(t)`` as ``sqrt(t) Z + rho(t)``."""
    if not t > 0:
        raise DomainError(f"time must be > 0, got {t}")
    z = rng.standard_normal(size)
    return math.sqrt(t) * z + drift(t)


def conditional_cdf(law):
    """CDF of ``law`` given a finite value; pairs with :func:`ks_one_sample`."""
    finite_mass = 1.0 - law.defect_mass()
    if finite_mass <= 0:
        raise DomainError("law has no finite mass")
    return lambda t: np.asarray(law.cdf(t), dtype=float) / finite_mass


def ks_one_sample(emp: EmpiricalLaw, cdf):
    """Sup distance between the ECDF of the finite samples and ``cdf``.

    Ties and atoms are handled by comparing both one-sided limits at every
    distinct sample value; ``cdf`` is only ever evaluated on (0, inf), with
    0 mapped to its right limit.
    """
    m = emp.finite.size
    if m == 0:
        raise DomainError("KS statistic undefined: every sample is infinite")
    u, counts = np.unique(emp.finite, return_counts=True)
    right = np.cumsum(counts) / m
    left = right - counts / m
    tiny = np.nextafter(0.0, 1.0)
    at = np.where(u > 0, u, tiny)
    below = np.where(u > 0, np.nextafter(u, 0.0), tiny)
    f_at = np.asarray(cdf(np.maximum(at, tiny)), dtype=float)
    f_below = np.asarray(cdf(np.maximum(below, tiny)), dtype=float)
    f_below = np.where(u > 0, f_below, 0.0)
    return float(max(np.max(np.abs(right - f_at)), np.max(np.abs(left - f_below))))


def ks_two_sample(a: EmpiricalLaw, b: EmpiricalLaw):
    """Sup distance between the two empirical CDFs over the merged finite support.

    Empirical CDFs are normalised by the total counts, so a difference in
    infinite fractions shows up as the gap after the last finite point.
    """
    support = np.concatenate([a.finite, b.finite])
    if support.size == 0:
        return 0.0
    return float(np.max(np.abs(a.cdf(support) - b.cdf(support))))


def ks_critical_one_sample(n, alpha=0.01):
    """Exact finite-n critical value of the one-sample Kolmogorov statistic."""
    return float(stats.kstwo.ppf(1.0 - alpha, n))


def ks_critical_two_sample(n, m, alpha=0.01):
    """Asymptotic two-sample critical value ``sqrt(-ln(alpha/2)/2 * (n+m)/(n m))``."""
    return math.sqrt(-math.log(alpha / 2.0) / 2.0 * (n + m) / (n * m))


def binomial_band(p, n, k=3.0):
    return k * math.sqrt(p * (1.0 - p) / n)


@dataclass(frozen=True)
class LawCheck:
    ks: float
    critical: float
    defect_fraction: float
    defect_mass: float
    defect_band: float

    @property
    def ks_ok(self):
        return self.ks < self.critical

    @property
    def defect_ok(self):
        return abs(self.defect_fraction - self.defect_mass) <= self.defect_band

    @property
    def passed(self):
        return self.ks_ok and self.defect_ok


def law_check(law, samples, alpha=0.01) -> LawCheck:
    """Compare samples with an analytic law: conditional KS plus a binomial defect test."""
    emp = EmpiricalLaw.from_samples(samples)
    p = law.defect_mass()
    ks = ks_one_sample(emp, conditional_cdf(law))
    crit = ks_critical_one_sample(emp.finite.size, alpha)
    return LawCheck(ks, crit, emp.defect_fraction, p, binomial_band(p, emp.n))


@dataclass(frozen=True)
class CrossingCheck:
    empirical: float
    analytic: float
    stderr: float

    @property
    def ok(self):
        return abs(self.empirical - self.analytic) < 4.0 * self.stderr


def crossing_check(drift: DriftFunction, x, t, n, rng) -> CrossingCheck:
    """Empirical ``P(B_t + rho(t) >= x)`` against ``N(eta_x(t))``."""
    if n < 10_000:
        raise DomainError("crossing check needs n >= 10^4")
    draws = sample_drifted_terminal(drift, t, rng, n)
    freq = float(np.mean(draws >= x))
    p = float(normal_cdf(eta(drift, x)(t)))
    se = math.sqrt(max(p * (1.0 - p), 1.0 / n) / n)
    return CrossingCheck(freq, p, se)
