"""Families of task-optimal parameter vectors with prescribed norms and distances.

A :class:`TaskGeometry` holds the squared norms ``||w_t||^2`` and pairwise
squared distances ``||w_i - w_j||^2`` of the per-task optimal parameters.
This is the only task information the closed-form error expressions consume,
so experiments are specified at this level and concrete vectors are drawn
lazily with :func:`realize_vectors`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, GeometryError

MODES = ("identical", "orthogonal", "angle", "explicit")

# Euclidean realizability: smallest Gram eigenvalue >= -PSD_TOL * max |entry|.
PSD_TOL = 1e-9
# Gram-Schmidt pivot below this (relative) triggers a re-draw.
GS_PIVOT_TOL = 1e-10


@dataclass(frozen=True)
class TaskGeometry:
    """Norms and pairwise squared distances of the task optima.

    Attributes
    ----------
    sq_norms : (T,) array of ``||w_t||^2``.
    sq_dists : (T, T) symmetric array of ``||w_i - w_j||^2`` with zero diagonal.
    """

    sq_norms: np.ndarray
    sq_dists: np.ndarray

    def __post_init__(self):
        norms = np.atleast_1d(np.asarray(self.sq_norms, dtype=float))
        dists = np.asarray(self.sq_dists, dtype=float)
        object.__setattr__(self, "sq_norms", norms)
        object.__setattr__(self, "sq_dists", dists)
        T = norms.shape[0]
        if T < 1:
            raise GeometryError("geometry needs at least one task")
        if dists.shape != (T, T):
            raise GeometryError(
                f"sq_dists must be {T}x{T}, got {dists.shape}")
        if np.any(norms < 0) or np.any(dists < 0):
            raise GeometryError("squared norms and distances must be nonnegative")
        scale = max(dists.max(initial=0.0), 1.0)
        if not np.allclose(dists, dists.T, atol=1e-12 * scale):
            raise GeometryError("sq_dists must be symmetric")
        if np.any(np.abs(np.diag(dists)) > 1e-12 * scale):
            raise GeometryError("sq_dists must have a zero diagonal")
        gram = self.gram()
        eigs = np.linalg.eigvalsh(gram)
        bound = -PSD_TOL * max(np.abs(gram).max(), np.finfo(float).tiny)
        if eigs[0] < bound:
            raise GeometryError(
                "geometry is not Euclidean-realizable: implied Gram matrix has "
                f"eigenvalue {eigs[0]:.6g} below tolerance {bound:.6g}")

    @property
    def task_count(self) -> int:
        return self.sq_norms.shape[0]

    def gram(self) -> np.ndarray:
        """Inner-product matrix implied by the norms and distances."""
        n = self.sq_norms
        return (n[:, None] + n[None, :] - self.sq_dists) / 2.0

    def head(self, t: int) -> "TaskGeometry":
        """Geometry restricted to the first ``t`` tasks."""
        if not 1 <= t <= self.task_count:
            raise GeometryError(f"head({t}) out of range for {self.task_count} tasks")
        return TaskGeometry(self.sq_norms[:t].copy(), self.sq_dists[:t, :t].copy())


@dataclass(frozen=True)
class TaskVectors:
    """Concrete task optima, one per column of a p x T matrix."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=float)
        if v.ndim != 2:
            raise GeometryError("vectors must be a p x T matrix")
        object.__setattr__(self, "vectors", v)

    @property
    def dimension(self) -> int:
        return self.vectors.shape[0]

    @property
    def task_count(self) -> int:
        return self.vectors.shape[1]

    def task(self, t: int) -> np.ndarray:
        """Column for task ``t`` (1-based)."""
        return self.vectors[:, t - 1]


def make_geometry(mode: str, T: int, *, theta_degrees: float | None = None,
                  sq_norms=None, sq_dists=None) -> TaskGeometry:
    """Build a task geometry from one of the named families.

    ``identical`` and ``orthogonal`` give unit-norm tasks with pairwise
    squared distances 0 and 2.  ``angle`` places every task at angle theta
    from a shared direction, giving uniform distance ``2 sin^2(theta)``.
    ``explicit`` passes user matrices through Euclidean-realizability
    validation.
    """
    if not isinstance(T, (int, np.integer)) or T < 1:
        raise GeometryError(f"task count must be a positive integer, got {T!r}")
    if mode not in MODES:
        raise GeometryError(f"unknown geometry mode {mode!r}; expected one of {MODES}")
    if mode == "explicit":
        if sq_norms is None or sq_dists is None:
            raise GeometryError("explicit mode requires sq_norms and sq_dists")
        geom = TaskGeometry(np.asarray(sq_norms, float), np.asarray(sq_dists, float))
        if geom.task_count != T:
            raise GeometryError(
                f"explicit matrices describe {geom.task_count} tasks, expected {T}")
        return geom

    if mode == "identical":
        theta = 0.0
    elif mode == "orthogonal":
        theta = 90.0
    else:
        if theta_degrees is None:
            raise GeometryError("angle mode requires theta_degrees")
        theta = float(theta_degrees)
        if not 0.0 <= theta <= 90.0:
            raise GeometryError(f"theta must lie in [0, 90] degrees, got {theta}")
    d2 = 2.0 * math.sin(math.radians(theta)) ** 2
    dists = np.full((T, T), d2)
    np.fill_diagonal(dists, 0.0)
    return TaskGeometry(np.ones(T), dists)


def _uniform_angle(geom: TaskGeometry) -> float | None:
    """Shared-direction angle (radians) if the geometry is in the built-in
    family (unit norms, one common off-diagonal distance in [0, 2])."""
    if not np.allclose(geom.sq_norms, 1.0, rtol=0, atol=1e-12):
        return None
    T = geom.task_count
    if T == 1:
        return 0.0
    off = geom.sq_dists[~np.eye(T, dtype=bool)]
    d2 = off[0]
    if not np.allclose(off, d2, rtol=0, atol=1e-12) or not 0.0 <= d2 <= 2.0:
        return None
    return math.asin(math.sqrt(d2 / 2.0))


def _orthonormal_frame(p: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """k orthonormal columns in R^p via Gram-Schmidt on Gaussian draws.

    Re-draws a vector whenever the orthogonalized residual falls below the
    pivot tolerance (relative to the raw draw).
    """
    frame = np.empty((p, k))
    filled = 0
    while filled < k:
        v = rng.standard_normal(p)
        raw = math.sqrt(np.sum(v * v))
        basis = frame[:, :filled]
        v = v - basis @ (basis.T @ v)
        # second pass for numerical orthogonality
        v = v - basis @ (basis.T @ v)
        res = math.sqrt(np.sum(v * v))
        if res <= GS_PIVOT_TOL * raw:
            continue  # near-collinear draw, try again
        frame[:, filled] = v / res
        filled += 1
    return frame


def realize_vectors(geom: TaskGeometry, p: int, rng: np.random.Generator) -> TaskVectors:
    """Draw task vectors in R^p matching ``geom``.

    Built-in (unit-norm, uniform-distance) geometries use the shared-direction
    construction ``w_t = cos(theta) c + sin(theta) e_t`` over a random
    orthonormal frame ``c, e_1..e_T`` and need ``p >= T + 1``.  General
    geometries are embedded through an eigenfactorization of the implied Gram
    matrix and need ``p >= rank``.  Output depends only on (geom, p, rng state).
    """
    T = geom.task_count
    theta = _uniform_angle(geom)
    if theta is not None:
        if p < T + 1:
            raise DimensionError(
                f"p={p} too small for the shared-direction construction with "
                f"T={T}; minimum feasible p is {T + 1}", T + 1)
        frame = _orthonormal_frame(p, T + 1, rng)
        c, e = frame[:, 0], frame[:, 1:]
        vecs = math.cos(theta) * c[:, None] + math.sin(theta) * e
        return TaskVectors(vecs)

    gram = geom.gram()
    eigvals, eigvecs = np.linalg.eigh(gram)
    tol = PSD_TOL * max(np.abs(gram).max(), np.finfo(float).tiny)
    keep = eigvals > tol
    rank = int(np.count_nonzero(keep))
    if p < rank:
        raise DimensionError(
            f"p={p} too small to embed a rank-{rank} geometry; minimum "
            f"feasible p is {rank}", rank)
    # coords (rank x T) with coords^T coords = gram
    coords = (eigvecs[:, keep] * np.sqrt(eigvals[keep])).T
    if rank == 0:
        return TaskVectors(np.zeros((p, T)))
    frame = _orthonormal_frame(p, rank, rng)
    return TaskVectors(frame @ coords)


def measure_geometry(vecs: TaskVectors) -> TaskGeometry:
    """Exact norms and pairwise squared distances of the columns."""
    v = vecs.vectors
    sq_norms = np.sum(v * v, axis=0)
    diff = v[:, :, None] - v[:, None, :]
    sq_dists = np.sum(diff * diff, axis=0)
    return TaskGeometry(sq_norms, sq_dists)


@dataclass(frozen=True)
class GeometrySpec:
    """User-level geometry description, as written in flags or config files."""

    mode: str
    theta_degrees: float | None = None
    sq_norms: tuple | None = None
    sq_dists: tuple | None = None

    def build(self, T: int) -> TaskGeometry:
        return make_geometry(self.mode, T, theta_degrees=self.theta_degrees,
                             sq_norms=self.sq_norms, sq_dists=self.sq_dists)

    def with_theta(self, theta_degrees: float) -> "GeometrySpec":
        if self.mode != "angle":
            raise GeometryError("theta can only be varied in angle mode")
        return GeometrySpec("angle", theta_degrees=float(theta_degrees))

    def describe(self) -> dict:
        out: dict = {"mode": self.mode}
        if self.theta_degrees is not None:
            out["theta_degrees"] = self.theta_degrees
        if self.sq_norms is not None:
            out["sq_norms"] = [float(x) for x in self.sq_norms]
        if self.sq_dists is not None:
            out["sq_dists"] = [[float(x) for x in row] for row in self.sq_dists]
        return out
