"""Closed-form expected adaptation, memory, and generalization errors.

Expectations for the sequential minimum-norm estimator on Gaussian task data,
as functions of the sequence length T, per-task sample count n, dimension p,
rehearsal budget s, noise level sigma, and the task geometry.  Each evaluator
returns a :class:`TheoryBreakdown` whose named terms sum to the total, so
individual terms can be tested in isolation.

All expressions assume the uniform-contraction protocol: every step fits
n + s constraints (the first task padded up to n + s), so a single factor
``lambda = (p - n - s) / p`` governs the whole sequence.  The interpolation
boundary ``|p - (n + s)| <= 1`` is excluded; denominators vanish there.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import fsum

import numpy as np

from .errors import BoundaryRegimeError, InvalidConfigError, RangeError, UndefinedMetricError
from .geometry import TaskGeometry

OVERPARAMETERIZED = "Overparameterized"
UNDERPARAMETERIZED = "Underparameterized"
BOUNDARY = "Boundary"


@dataclass(frozen=True)
class Regime:
    label: str

    @property
    def is_over(self) -> bool:
        return self.label == OVERPARAMETERIZED

    @property
    def is_under(self) -> bool:
        return self.label == UNDERPARAMETERIZED

    @property
    def is_boundary(self) -> bool:
        return self.label == BOUNDARY


@dataclass(frozen=True)
class TheoryBreakdown:
    """A closed-form expectation split into its named terms.

    ``total`` is the compensated sum of ``terms``; ``lam`` is the contraction
    factor (p - n - s) / p; ``u`` carries the u_{kj} coupling table for the
    memory metric (upper triangle, k < j) and is None otherwise.
    """

    metric: str
    regime: str
    total: float
    terms: dict[str, float]
    lam: float
    u: np.ndarray | None = None


def classify_regime(p: int, n: int, s: int) -> Regime:
    """Overparameterized iff p > n+s+1, underparameterized iff n+s > p+1,
    boundary otherwise."""
    _check_counts(p=p, n=n, s=s)
    m = n + s
    if p > m + 1:
        return Regime(OVERPARAMETERIZED)
    if m > p + 1:
        return Regime(UNDERPARAMETERIZED)
    return Regime(BOUNDARY)


def contraction_factor(p: int, n: int, s: int) -> float:
    """Per-step geometric decay of the unexplained parameter component."""
    return (p - n - s) / p


def interpolation_noise(T: int, n: int, p: int, s: int, sigma: float) -> float:
    """Accumulated noise term (1 - lambda^T) p sigma^2 / (p - n - s - 1).

    Appears as the noise contribution of both the adaptation and the
    generalization expectations in the overparameterized regime.
    """
    lam = contraction_factor(p, n, s)
    return (1.0 - lam ** T) * p * sigma ** 2 / (p - n - s - 1)


def memory_noise(T: int, n: int, p: int, s: int, sigma: float) -> float:
    """Noise term of the memory expectation, overparameterized regime:
    mean over i < T of p sigma^2 (lambda^i - lambda^T) / (p - n - s - 1)."""
    lam = contraction_factor(p, n, s)
    scale = p * sigma ** 2 / (p - n - s - 1)
    powers = _lambda_powers(lam, T)
    return fsum(scale * (powers[i] - powers[T]) for i in range(1, T)) / (T - 1)


def _check_counts(*, p: int, n: int, s: int) -> None:
    for name, val, lo in (("p", p, 1), ("n", n, 1), ("s", s, 0)):
        if not isinstance(val, (int, np.integer)) or val < lo:
            raise InvalidConfigError(f"{name} must be an integer >= {lo}, got {val!r}")


def _check_config(T: int, n: int, p: int, s: int, sigma: float,
                  geom: TaskGeometry) -> Regime:
    if not isinstance(T, (int, np.integer)) or T < 1:
        raise InvalidConfigError(f"T must be a positive integer, got {T!r}")
    if sigma < 0:
        raise InvalidConfigError(f"sigma must be nonnegative, got {sigma}")
    if geom.task_count != T:
        raise InvalidConfigError(
            f"geometry describes {geom.task_count} tasks but T={T}")
    regime = classify_regime(p, n, s)
    if regime.is_boundary:
        raise BoundaryRegimeError(
            f"theory undefined at the interpolation boundary: p={p}, n+s={n + s}")
    return regime


def _lambda_powers(lam: float, T: int) -> list[float]:
    # repeated multiplication, not exponentiation, for reproducible rounding
    powers = [1.0]
    for _ in range(T):
        powers.append(powers[-1] * lam)
    return powers


def theory_adaptation(T: int, n: int, p: int, s: int, sigma: float,
                      geom: TaskGeometry) -> TheoryBreakdown:
    """Expected squared distance of the final estimate from the last task's
    optimum.

    Overparameterized: decay of the zero initialization, a mixing term over
    earlier task optima, and accumulated noise.  Underparameterized: pure
    noise floor p sigma^2 / (n + s - p - 1).
    """
    regime = _check_config(T, n, p, s, sigma, geom)
    lam = contraction_factor(p, n, s)
    if regime.is_under:
        total = p * sigma ** 2 / (n + s - p - 1)
        return TheoryBreakdown("adaptation", regime.label, total, {"noise": total}, lam)
    powers = _lambda_powers(lam, T)
    nu = geom.sq_norms
    d2 = geom.sq_dists
    decay = float(powers[T] * nu[T - 1])
    # k = T summand vanishes by construction; summed as written anyway
    term_a1 = (n + s) / p * fsum(
        powers[T - k] * d2[k - 1, T - 1] for k in range(1, T + 1))
    a_noise = interpolation_noise(T, n, p, s, sigma)
    terms = {"decay": decay, "term_a1": term_a1, "a_noise": a_noise}
    return TheoryBreakdown("adaptation", regime.label, fsum(terms.values()), terms, lam)


def theory_memory(T: int, n: int, p: int, s: int, sigma: float,
                  geom: TaskGeometry) -> TheoryBreakdown:
    """Expected mean increase of the estimation error on earlier tasks.

    Negative values indicate backward transfer.  Undefined for T = 1.
    """
    if isinstance(T, (int, np.integer)) and T == 1:
        raise UndefinedMetricError("memory error is undefined for T=1")
    regime = _check_config(T, n, p, s, sigma, geom)
    lam = contraction_factor(p, n, s)
    nu = geom.sq_norms
    d2 = geom.sq_dists
    if regime.is_under:
        total = float(fsum(d2[T - 1, k - 1] for k in range(1, T)) / (T - 1))
        return TheoryBreakdown("memory", regime.label, total, {"distance": total}, lam)
    powers = _lambda_powers(lam, T)
    u = np.zeros((T, T))
    for k in range(1, T):
        for j in range(k + 1, T + 1):
            u[k - 1, j - 1] = powers[T - k] - powers[j - k] + powers[T - j]
    term_m1 = (n + s) / p / (T - 1) * fsum(
        u[k - 1, j - 1] * d2[j - 1, k - 1]
        for k in range(1, T) for j in range(k + 1, T + 1))
    term_m2 = float(fsum((powers[T] - powers[i]) * nu[i - 1] for i in range(1, T)) / (T - 1))
    m_noise = memory_noise(T, n, p, s, sigma)
    terms = {"term_m1": term_m1, "term_m2": term_m2, "m_noise": m_noise}
    return TheoryBreakdown("memory", regime.label, fsum(terms.values()), terms, lam, u)


def theory_generalization(T: int, n: int, p: int, s: int, sigma: float,
                          geom: TaskGeometry) -> TheoryBreakdown:
    """Expected mean squared distance of the final estimate from all task
    optima seen so far.  At T = 1 this coincides with the adaptation error."""
    regime = _check_config(T, n, p, s, sigma, geom)
    lam = contraction_factor(p, n, s)
    nu = geom.sq_norms
    d2 = geom.sq_dists
    if regime.is_under:
        dist = float(fsum(d2[T - 1, k - 1] for k in range(1, T + 1)) / T)
        noise = p * sigma ** 2 / (n + s - p - 1)
        terms = {"distance": dist, "noise": noise}
        return TheoryBreakdown("generalization", regime.label,
                               fsum(terms.values()), terms, lam)
    powers = _lambda_powers(lam, T)
    term_g1 = (n + s) / p / T * fsum(
        powers[T - k] * d2[k - 1, j - 1]
        for k in range(1, T + 1) for j in range(1, T + 1))
    term_g2 = float(powers[T] * fsum(nu[k - 1] for k in range(1, T + 1)) / T)
    g_noise = interpolation_noise(T, n, p, s, sigma)
    terms = {"term_g1": term_g1, "term_g2": term_g2, "g_noise": g_noise}
    return TheoryBreakdown("generalization", regime.label,
                           fsum(terms.values()), terms, lam)


def theory_two_task(n: int, p: int, s: int, sigma: float, sq_norm1: float,
                    sq_norm2: float, sq_dist: float) -> tuple[float, float, float]:
    """Direct evaluation of the two-task special forms of all three
    expectations, independent of the general evaluators."""
    regime = classify_regime(p, n, s)
    if regime.is_boundary:
        raise BoundaryRegimeError(
            f"theory undefined at the interpolation boundary: p={p}, n+s={n + s}")
    m = n + s
    if regime.is_under:
        noise = p * sigma ** 2 / (m - p - 1)
        return noise, sq_dist, 0.5 * sq_dist + noise
    lam = contraction_factor(p, n, s)
    a = (lam ** 2 * sq_norm2
         + lam * m / p * sq_dist
         + (1.0 - lam ** 2) * p * sigma ** 2 / (p - m - 1))
    mem = (-(m * (p - m)) / p ** 2 * sq_norm1
           + m / p * sq_dist
           + m * (p - m) * sigma ** 2 / ((p - m - 1) * p))
    g = (0.5 * (1.0 - lam ** 2) * sq_dist
         + 0.5 * lam ** 2 * (sq_norm1 + sq_norm2)
         + p * sigma ** 2 * (1.0 - lam ** 2) / (p - m - 1))
    return a, mem, g


@dataclass(frozen=True)
class ExtremumScan:
    """Result of an exhaustive integer grid scan over the rehearsal budget."""

    s_star: int
    s_values: np.ndarray
    totals: np.ndarray


def _overparam_s_grid(n: int, p: int) -> np.ndarray:
    if p <= n + 2:
        raise RangeError(
            f"no overparameterized rehearsal range: need p > n + 2, got p={p}, n={n}")
    return np.arange(0, p - n - 1)  # s in [0, p - n - 2]


def find_adaptation_turning_point(T: int, n: int, p: int, sigma: float,
                                  geom: TaskGeometry) -> ExtremumScan:
    """Rehearsal budget minimizing the expected adaptation error over the
    overparameterized range s in [0, p - n - 2].

    Exhaustive integer scan (no unimodality assumption); ties break toward
    the smallest s.  Returns the full curve for plotting.
    """
    grid = _overparam_s_grid(n, p)
    totals = np.array([
        theory_adaptation(T, n, p, int(s), sigma, geom).total for s in grid])
    return ExtremumScan(int(grid[int(np.argmin(totals))]), grid, totals)


def find_memory_floor(n: int, p: int, sigma: float, sq_norm1: float,
                      sq_norm2: float, sq_dist: float) -> ExtremumScan:
    """Rehearsal budget minimizing the two-task memory expectation over the
    overparameterized range.  Same scan and tie-break as the adaptation
    turning point."""
    grid = _overparam_s_grid(n, p)
    totals = np.array([
        theory_two_task(n, p, int(s), sigma, sq_norm1, sq_norm2, sq_dist)[1]
        for s in grid])
    return ExtremumScan(int(grid[int(np.argmin(totals))]), grid, totals)
