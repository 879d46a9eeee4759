"""Synthetic Gaussian task data and the sequential rehearsal estimator.

Each task t contributes n samples ``y = X^T w_t + eps`` with isotropic
standard Gaussian features.  Training is sequential: the step-t parameters interpolate
the current task's data together with a rehearsal buffer of s samples split
evenly over the previous tasks.  When the stacked system is underdetermined
(m < p) the update is the interpolant closest to the previous parameters;
when overdetermined (m > p) it is the unique least-squares solution and the
previous parameters are irrelevant.

Buffer modes
------------
subset-fixed
    Store each task's original samples; every step re-samples its quota from
    that fixed pool, so buffer noise realizations are shared across steps.
iid-fresh
    Redraw the quota from each previous task's distribution at every step;
    responses carry that task's own optimum.
current-fresh
    Redraw the quota as fresh samples of the *current* task.  This is the
    configuration whose error expectations the closed forms in
    :mod:`clsim.theory` describe exactly; with the other two modes the
    measured errors acquire extra terms of order (s/p) * distance^2 when
    tasks differ.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import (BoundaryStepError, CapacityError, InvalidConfigError,
                     RankDeficiencyError)
from .geometry import TaskGeometry, TaskVectors
from .theory import BOUNDARY, OVERPARAMETERIZED, UNDERPARAMETERIZED

BUFFER_MODES = ("subset-fixed", "iid-fresh", "current-fresh")
FIRST_TASK_POLICIES = ("plain", "padded")

# Cholesky pivot below GRAM_PIVOT_TOL * trace/m means numerically singular.
GRAM_PIVOT_TOL = 1e-12


@dataclass(frozen=True)
class SequenceConfig:
    """Full description of one training sequence."""

    T: int
    n: int
    p: int
    s: int
    sigma: float
    geometry: TaskGeometry
    buffer_mode: str = "current-fresh"
    first_task_policy: str = "padded"
    seed: int = 0

    def __post_init__(self):
        for name, val, lo in (("T", self.T, 1), ("n", self.n, 1),
                              ("p", self.p, 1), ("s", self.s, 0)):
            if not isinstance(val, (int, np.integer)) or val < lo:
                raise InvalidConfigError(f"{name} must be an integer >= {lo}, got {val!r}")
        if self.sigma < 0:
            raise InvalidConfigError(f"sigma must be nonnegative, got {self.sigma}")
        if self.buffer_mode not in BUFFER_MODES:
            raise InvalidConfigError(
                f"buffer_mode must be one of {BUFFER_MODES}, got {self.buffer_mode!r}")
        if self.first_task_policy not in FIRST_TASK_POLICIES:
            raise InvalidConfigError(
                f"first_task_policy must be one of {FIRST_TASK_POLICIES}, "
                f"got {self.first_task_policy!r}")
        if self.geometry.task_count != self.T:
            raise InvalidConfigError(
                f"geometry describes {self.geometry.task_count} tasks but T={self.T}")
        if (self.buffer_mode == "subset-fixed" and self.T >= 2
                and self.s > self.n * (self.T - 1)):
            raise InvalidConfigError(
                f"subset-fixed cannot store s={self.s} samples: only "
                f"n*(T-1)={self.n * (self.T - 1)} were observed")

    def step_sample_counts(self) -> list[int]:
        """Stacked sample count m_t for each step t = 1..T."""
        first = self.n + (self.s if self.first_task_policy == "padded" else 0)
        return [first] + [self.n + self.s] * (self.T - 1)


@dataclass(frozen=True)
class TaskData:
    """One task's samples: features as a p x n matrix, responses length n."""

    features: np.ndarray
    responses: np.ndarray


@dataclass(frozen=True)
class TaskRecord:
    """A task's optimum and its original data pool, kept for rehearsal."""

    w_star: np.ndarray
    data: TaskData


@dataclass(frozen=True)
class RehearsalBuffer:
    """Per previous task: stored features Z_i (p x q_i) and responses g_i."""

    task_ids: tuple[int, ...]
    features: tuple[np.ndarray, ...]
    responses: tuple[np.ndarray, ...]

    @property
    def quotas(self) -> tuple[int, ...]:
        return tuple(g.shape[0] for g in self.responses)

    @property
    def total(self) -> int:
        return sum(self.quotas)


@dataclass(frozen=True)
class Trajectory:
    """Per-task estimator snapshots and step diagnostics."""

    snapshots: np.ndarray          # (T, p), row t-1 is w_hat_t
    sample_counts: np.ndarray      # (T,) stacked m_t per step
    regimes: tuple[str, ...]       # per-step regime label
    gram_conditions: np.ndarray    # (T,) Cholesky-pivot condition estimate

    @property
    def task_count(self) -> int:
        return self.snapshots.shape[0]

    def snapshot(self, t: int) -> np.ndarray:
        """Parameters after task ``t`` (1-based)."""
        return self.snapshots[t - 1]


def quota_split(s: int, k: int) -> list[int]:
    """Split s samples over k tasks: floor(s/k) each, one extra for the
    first s mod k task indices."""
    if k < 1:
        raise InvalidConfigError(f"cannot split a budget over {k} tasks")
    base, extra = divmod(s, k)
    return [base + 1] * extra + [base] * (k - extra)


def draw_task_data(w_star: np.ndarray, n: int, sigma: float,
                   rng: np.random.Generator) -> TaskData:
    """n i.i.d. samples of the linear model with isotropic Gaussian features
    and N(0, sigma^2) noise."""
    p = w_star.shape[0]
    X = rng.standard_normal((p, n))
    y = X.T @ w_star + sigma * rng.standard_normal(n)
    return TaskData(X, y)


def assemble_buffer(history: list[TaskRecord], t: int, s: int, mode: str,
                    rng: np.random.Generator, sigma: float,
                    w_current: np.ndarray) -> RehearsalBuffer:
    """Build the step-t rehearsal buffer from the per-task history.

    Quotas follow :func:`quota_split` over tasks 1..t-1.  subset-fixed
    re-samples each quota without replacement from the task's stored pool;
    the fresh modes redraw from the respective task distribution.
    """
    if t < 2:
        raise InvalidConfigError(f"no previous tasks to rehearse at t={t}")
    if mode not in BUFFER_MODES:
        raise InvalidConfigError(f"unknown buffer mode {mode!r}")
    k = t - 1
    quotas = quota_split(s, k)
    feats, resps = [], []
    for i in range(k):
        q = quotas[i]
        record = history[i]
        if mode == "subset-fixed":
            pool = record.data.responses.shape[0]
            if q > pool:
                raise CapacityError(
                    f"task {i + 1} quota q={q} exceeds its {pool} stored samples")
            idx = np.sort(rng.choice(pool, size=q, replace=False))
            feats.append(record.data.features[:, idx])
            resps.append(record.data.responses[idx])
        else:
            w = record.w_star if mode == "iid-fresh" else w_current
            fresh = draw_task_data(w, q, sigma, rng) if q > 0 else None
            feats.append(fresh.features if fresh else np.empty((w_current.shape[0], 0)))
            resps.append(fresh.responses if fresh else np.empty(0))
    return RehearsalBuffer(tuple(range(1, t)), tuple(feats), tuple(resps))


def _chol_gram(G: np.ndarray, size: int):
    """Cholesky factor of a Gram matrix plus a pivot-based condition estimate.

    Raises RankDeficiencyError when the smallest pivot falls below the
    relative tolerance; no silent regularization.
    """
    floor = GRAM_PIVOT_TOL * np.trace(G) / size
    try:
        factor = cho_factor(G, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise RankDeficiencyError(
            f"Gram matrix not positive definite: {exc}", math.inf) from exc
    diag = np.diagonal(factor[0])
    pivots = diag * diag
    cond = float((diag.max() / diag.min()) ** 2) if diag.min() > 0 else math.inf
    if pivots.min() < floor:
        raise RankDeficiencyError(
            f"Gram matrix numerically singular: pivot {pivots.min():.3e} below "
            f"tolerance {floor:.3e} (condition estimate {cond:.3e})", cond)
    return factor, cond


def _min_norm_step(A: np.ndarray, b: np.ndarray, w_prev: np.ndarray):
    G = A @ A.T
    factor, cond = _chol_gram(G, A.shape[0])
    c = cho_solve(factor, b - A @ w_prev, check_finite=False)
    return w_prev + A.T @ c, cond


def _least_squares_step(A: np.ndarray, b: np.ndarray):
    G = A.T @ A
    factor, cond = _chol_gram(G, A.shape[1])
    return cho_solve(factor, A.T @ b, check_finite=False), cond


def fit_min_norm(A: np.ndarray, b: np.ndarray, w_prev: np.ndarray) -> np.ndarray:
    """Interpolant of ``A w = b`` closest to ``w_prev`` in Euclidean norm.

    Solves (A A^T) c = b - A w_prev by symmetric positive-definite
    factorization and returns ``w_prev + A^T c``.  Requires m < p with
    independent rows.
    """
    m, p = A.shape
    if m >= p:
        raise InvalidConfigError(f"minimum-norm fit needs m < p, got m={m}, p={p}")
    w, _ = _min_norm_step(A, np.asarray(b, float), np.asarray(w_prev, float))
    return w


def fit_least_squares(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Unique least-squares solution of an overdetermined system (m > p),
    independent of any prior parameter state."""
    m, p = A.shape
    if m <= p:
        raise InvalidConfigError(f"least-squares fit needs m > p, got m={m}, p={p}")
    w, _ = _least_squares_step(A, np.asarray(b, float))
    return w


def _stack_step(blocks: list[TaskData]) -> tuple[np.ndarray, np.ndarray]:
    A = np.concatenate([blk.features.T for blk in blocks], axis=0)
    b = np.concatenate([blk.responses for blk in blocks])
    return A, b


def train_sequence(config: SequenceConfig, vectors: TaskVectors,
                   rng: np.random.Generator, *,
                   allow_boundary: bool = False) -> Trajectory:
    """Run the sequential rehearsal estimator and record every snapshot.

    For each task: draw n samples, build the rehearsal buffer (t >= 2; at
    t = 1 the padded policy appends s fresh task-1 samples instead), stack,
    and fit minimum-norm from the previous snapshot (m < p) or plain least
    squares (m > p).  Steps at the interpolation boundary |m - p| <= 1 raise
    by default; with ``allow_boundary`` they proceed under a warning, using
    the interpolating fit when m <= p.
    """
    if vectors.dimension != config.p or vectors.task_count != config.T:
        raise InvalidConfigError(
            f"vectors are {vectors.dimension}x{vectors.task_count}, expected "
            f"{config.p}x{config.T}")
    p = config.p
    counts = config.step_sample_counts()
    for t, m in enumerate(counts, start=1):
        if abs(m - p) <= 1:
            if not allow_boundary:
                raise BoundaryStepError(
                    f"step {t} sits at the interpolation boundary "
                    f"(m={m}, p={p}); pass allow_boundary to proceed")
            warnings.warn(
                f"step {t} proceeds at the interpolation boundary (m={m}, p={p})",
                RuntimeWarning, stacklevel=2)

    history: list[TaskRecord] = []
    w = np.zeros(p)
    snapshots = np.empty((config.T, p))
    regimes = []
    conds = np.empty(config.T)
    for t in range(1, config.T + 1):
        w_star = vectors.task(t)
        data = draw_task_data(w_star, config.n, config.sigma, rng)
        blocks = [data]
        if t == 1:
            if config.first_task_policy == "padded" and config.s > 0:
                blocks.append(draw_task_data(w_star, config.s, config.sigma, rng))
        elif config.s > 0:
            buf = assemble_buffer(history, t, config.s, config.buffer_mode,
                                  rng, config.sigma, w_star)
            blocks.extend(TaskData(f, r) for f, r in zip(buf.features, buf.responses))
        A, b = _stack_step(blocks)
        m = b.shape[0]
        assert m == counts[t - 1]
        if m < p:
            w, cond = _min_norm_step(A, b, w)
            regimes.append(OVERPARAMETERIZED if m < p - 1 else BOUNDARY)
        elif m > p:
            w, cond = _least_squares_step(A, b)
            regimes.append(UNDERPARAMETERIZED if m > p + 1 else BOUNDARY)
        else:
            w, cond = _min_norm_step_square(A, b, w)
            regimes.append(BOUNDARY)
        snapshots[t - 1] = w
        conds[t - 1] = cond
        history.append(TaskRecord(w_star, data))
    return Trajectory(snapshots, np.asarray(counts), tuple(regimes), conds)


def _min_norm_step_square(A: np.ndarray, b: np.ndarray, w_prev: np.ndarray):
    # square system at the boundary: the unique interpolant, via the Gram path
    return _min_norm_step(A, b, w_prev)
