"""Empirical adaptation, memory, and generalization errors of a trajectory.

All three metrics are parameter-space squared distances derived from one
lower-triangular table ``err[t, i] = ||w_hat_t - w_i||^2`` for i <= t:
adaptation is the diagonal, generalization the row mean, and memory the mean
increase over each earlier task's own entry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, UndefinedMetricError
from .geometry import TaskVectors
from .trainer import Trajectory


@dataclass(frozen=True)
class ErrorReport:
    """Per-task metric values for a whole trajectory.

    Arrays are indexed by task (position t-1).  ``memory[0]`` is NaN since
    the metric needs at least one previous task.
    """

    adaptation: np.ndarray
    generalization: np.ndarray
    memory: np.ndarray
    estimation_errors: np.ndarray  # (T, T), NaN above the diagonal


def estimation_errors(traj: Trajectory, vecs: TaskVectors) -> np.ndarray:
    """Table of ||w_hat_t - w_i||^2 for i <= t, NaN above the diagonal."""
    if traj.snapshots.shape != vecs.vectors.T.shape:
        raise InvalidConfigError(
            f"trajectory is {traj.snapshots.shape}, vectors are "
            f"{vecs.vectors.shape}; shapes do not correspond")
    diff = traj.snapshots[:, None, :] - vecs.vectors.T[None, :, :]
    table = np.sum(diff * diff, axis=2)
    T = table.shape[0]
    table[np.triu_indices(T, k=1)] = np.nan
    return table


def _check_t(t: int, T: int) -> None:
    if not 1 <= t <= T:
        raise InvalidConfigError(f"task index t={t} outside 1..{T}")


def adaptation_error(traj: Trajectory, vecs: TaskVectors, t: int) -> float:
    """||w_hat_t - w_t||^2."""
    _check_t(t, traj.task_count)
    d = traj.snapshot(t) - vecs.task(t)
    return float(np.sum(d * d))


def generalization_error(traj: Trajectory, vecs: TaskVectors, t: int) -> float:
    """Mean of ||w_hat_t - w_i||^2 over i = 1..t."""
    _check_t(t, traj.task_count)
    w = traj.snapshot(t)
    d = w[:, None] - vecs.vectors[:, :t]
    return float(np.mean(np.sum(d * d, axis=0)))


def memory_error(traj: Trajectory, vecs: TaskVectors, t: int) -> float:
    """Mean over i < t of ||w_hat_t - w_i||^2 - ||w_hat_i - w_i||^2.

    Negative values signal backward transfer.
    """
    _check_t(t, traj.task_count)
    if t < 2:
        raise UndefinedMetricError("memory error needs t >= 2")
    now = traj.snapshot(t)[:, None] - vecs.vectors[:, :t - 1]
    then = traj.snapshots[:t - 1].T - vecs.vectors[:, :t - 1]
    now_err = np.sum(now * now, axis=0)
    then_err = np.sum(then * then, axis=0)
    return float(np.mean(now_err - then_err))


def error_report(traj: Trajectory, vecs: TaskVectors) -> ErrorReport:
    """All three metrics for every task, computed from one distance table."""
    table = estimation_errors(traj, vecs)
    T = table.shape[0]
    adaptation = np.diagonal(table).copy()
    generalization = np.array([np.mean(table[t, :t + 1]) for t in range(T)])
    memory = np.full(T, np.nan)
    for t in range(1, T):
        memory[t] = np.mean(table[t, :t] - np.diagonal(table)[:t])
    return ErrorReport(adaptation, generalization, memory, table)
