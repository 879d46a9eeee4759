"""Seeded, replicated simulations and parameter sweeps.

Replication r of an experiment draws its own task vectors and data from a
counter-based Philox stream keyed by (master_seed, r), so replications are
independent, reproducible, and schedulable in any order: aggregation always
runs in ascending r, making results bit-identical across worker counts.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import theory
from .errors import (DimensionError, EmptySweepError, InvalidConfigError,
                     ReplicationError)
from .geometry import GeometrySpec, realize_vectors
from .metrics import ErrorReport, error_report
from .trainer import SequenceConfig, train_sequence

SWEEP_AXES = ("p", "s", "sigma", "theta")
METRICS = ("A", "M", "G")
SUITES = ("quick", "full")

DEFAULT_SUITE_SEED = 20260811


@dataclass(frozen=True)
class ExperimentSpec:
    """One configuration, replicated R times from a master seed."""

    config: SequenceConfig
    replications: int
    master_seed: int

    def __post_init__(self):
        if not isinstance(self.replications, (int, np.integer)) or self.replications < 1:
            raise InvalidConfigError(
                f"replications must be a positive integer, got {self.replications!r}")


@dataclass(frozen=True)
class SweepSpec:
    """An experiment repeated along one axis.

    ``geometry_spec`` supplies the generating description and is required for
    theta sweeps, where each value rebuilds the geometry.
    """

    base: ExperimentSpec
    axis: str
    values: tuple
    geometry_spec: GeometrySpec | None = None

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise InvalidConfigError(
                f"axis must be one of {SWEEP_AXES}, got {self.axis!r}")
        if len(self.values) == 0:
            raise InvalidConfigError("sweep needs a non-empty values list")
        if self.axis == "theta" and self.geometry_spec is None:
            raise InvalidConfigError("theta sweep needs a geometry spec")


@dataclass(frozen=True)
class AggregateRow:
    """One aggregated point: metric at task t, empirically and in theory.

    Skipped sweep points keep their axis_value and regime label but carry no
    numbers, so plotted curves show gaps exactly where theory is undefined.
    """

    axis_value: float | int | None
    metric: str
    task: int | None
    mean: float | None
    stderr: float | None
    theory: float | None
    regime: str
    reps: int
    seed: int


def replication_rng(master_seed: int, r: int) -> np.random.Generator:
    """Independent substream for replication r (counter-based, splittable)."""
    key = [int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(r)]
    return np.random.Generator(np.random.Philox(key=key))


def _run_one(config: SequenceConfig, master_seed: int, r: int) -> ErrorReport:
    rng = replication_rng(master_seed, r)
    vectors = realize_vectors(config.geometry, config.p, rng)
    traj = train_sequence(config, vectors, rng)
    return error_report(traj, vectors)


def _theory_value(metric: str, t: int, config: SequenceConfig) -> float | None:
    # The closed forms assume the padded (uniform-contraction) protocol.
    if config.first_task_policy != "padded":
        return None
    if theory.classify_regime(config.p, config.n, config.s).is_boundary:
        return None
    geom_t = config.geometry.head(t)
    args = (t, config.n, config.p, config.s, config.sigma, geom_t)
    if metric == "A":
        return theory.theory_adaptation(*args).total
    if metric == "M":
        return theory.theory_memory(*args).total
    return theory.theory_generalization(*args).total


def run_replications(spec: ExperimentSpec, *, threads: int = 1,
                     axis_value=None) -> list[AggregateRow]:
    """Replicate one configuration and aggregate every metric at every task.

    Rows are ordered metric-major (A, M, G) with ascending task index; the
    memory metric starts at t = 2.
    """
    config, R, seed = spec.config, spec.replications, spec.master_seed
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_run_one, config, seed, r) for r in range(R)]
            reports = []
            for r, fut in enumerate(futures):
                try:
                    reports.append(fut.result())
                except Exception as exc:
                    raise ReplicationError(f"replication {r} failed: {exc}", r) from exc
    else:
        reports = []
        for r in range(R):
            try:
                reports.append(_run_one(config, seed, r))
            except Exception as exc:
                raise ReplicationError(f"replication {r} failed: {exc}", r) from exc

    stacks = {
        "A": np.stack([rep.adaptation for rep in reports]),
        "M": np.stack([rep.memory for rep in reports]),
        "G": np.stack([rep.generalization for rep in reports]),
    }
    regime = theory.classify_regime(config.p, config.n, config.s).label
    rows = []
    for metric in METRICS:
        start_t = 2 if metric == "M" else 1
        for t in range(start_t, config.T + 1):
            col = stacks[metric][:, t - 1]
            mean = float(np.mean(col))
            stderr = float(np.std(col, ddof=1) / math.sqrt(R)) if R > 1 else 0.0
            rows.append(AggregateRow(axis_value, metric, t, mean, stderr,
                                     _theory_value(metric, t, config),
                                     regime, R, seed))
    return rows


def _config_for_value(spec: SweepSpec, value) -> SequenceConfig:
    config = spec.base.config
    if spec.axis == "p":
        return replace(config, p=int(value))
    if spec.axis == "s":
        return replace(config, s=int(value))
    if spec.axis == "sigma":
        return replace(config, sigma=float(value))
    geom = spec.geometry_spec.with_theta(float(value)).build(config.T)
    return replace(config, geometry=geom)


def _skip_reason(config: SequenceConfig) -> str | None:
    if theory.classify_regime(config.p, config.n, config.s).is_boundary:
        return "Boundary"
    try:
        realize_vectors(config.geometry, config.p, np.random.default_rng(0))
    except DimensionError:
        return "Invalid"
    return None


def run_sweep(spec: SweepSpec, *, threads: int = 1) -> list[AggregateRow]:
    """One replicated run per axis value, in the given order.

    Values whose configuration is invalid or sits at the interpolation
    boundary are recorded as skipped rows, never silently dropped.  Raises
    when every value is skipped.
    """
    rows: list[AggregateRow] = []
    ran_any = False
    for value in spec.values:
        try:
            config = _config_for_value(spec, value)
            reason = _skip_reason(config)
        except InvalidConfigError:
            reason = "Invalid"
            config = None
        if reason is not None:
            rows.append(AggregateRow(value, "", None, None, None, None, reason,
                                     spec.base.replications, spec.base.master_seed))
            continue
        point = ExperimentSpec(config, spec.base.replications, spec.base.master_seed)
        rows.extend(run_replications(point, threads=threads, axis_value=value))
        ran_any = True
    if not ran_any:
        raise EmptySweepError(
            f"every value of the {spec.axis} sweep was skipped: "
            f"{[r.regime for r in rows]}")
    return rows


# --------------------------------------------------------------------------
# Theory-vs-simulation agreement suite (the `verify` command)

@dataclass(frozen=True)
class AgreementCell:
    label: str
    metric: str
    task: int
    mean: float
    stderr: float
    theory: float
    z: float


@dataclass(frozen=True)
class SuiteReport:
    cells: tuple[AgreementCell, ...]
    allowed_failures: int

    @property
    def failures(self) -> tuple[AgreementCell, ...]:
        return tuple(c for c in self.cells if abs(c.z) > 3.0)

    @property
    def passed(self) -> bool:
        return len(self.failures) <= self.allowed_failures

    @property
    def worst(self) -> AgreementCell:
        return max(self.cells, key=lambda c: abs(c.z))


def _cell_z(mean: float, stderr: float, expected: float) -> float:
    diff = mean - expected
    if stderr > 0:
        return diff / stderr
    if abs(diff) <= 1e-12 * (1.0 + abs(expected)):
        return 0.0
    return math.copysign(math.inf, diff)


def _suite_configs(n_configs: int, seed: int) -> list[SequenceConfig]:
    """Randomized non-boundary configurations spanning both regimes.

    Identical-task configurations rehearse from previous-task pools
    (iid-fresh), which the closed forms cover exactly in that case; configs
    with distinct tasks use the current-fresh buffer the forms describe in
    general.
    """
    rng = np.random.default_rng(seed)
    configs = []
    while len(configs) < n_configs:
        T = int(rng.integers(1, 5))
        n = int(rng.integers(8, 40))
        s = int(rng.integers(0, 30))
        sigma = float(rng.choice([0.0, 0.2, 0.4, 0.6]))
        mode = str(rng.choice(["identical", "orthogonal", "angle"]))
        theta = float(rng.uniform(5.0, 85.0)) if mode == "angle" else None
        overparam = bool(rng.integers(0, 2))
        m = n + s
        if overparam:
            p = m + int(rng.integers(4, 80))
        else:
            p = max(T + 1, m - int(rng.integers(4, min(m - 2, 60))))
            if m <= p + 1:
                continue
        if p < T + 1:
            continue
        geom = GeometrySpec(mode, theta_degrees=theta).build(T)
        buffer_mode = "iid-fresh" if mode == "identical" else "current-fresh"
        configs.append(SequenceConfig(T, n, p, s, sigma, geom,
                                      buffer_mode=buffer_mode,
                                      first_task_policy="padded"))
    return configs


def agreement_suite(suite: str = "quick", *, threads: int = 1,
                    seed: int = DEFAULT_SUITE_SEED) -> SuiteReport:
    """Run the randomized theory-vs-simulation agreement suite.

    Every non-boundary cell must satisfy |empirical mean - theory| <= 3
    standard errors, with at most 1% of cells allowed to fail (3-sigma
    leaves room for rare excursions).
    """
    if suite not in SUITES:
        raise InvalidConfigError(f"suite must be one of {SUITES}, got {suite!r}")
    n_configs, reps = (10, 160) if suite == "quick" else (50, 400)
    # one fixed high-noise sequence so noise-term defects are unmissable
    anchor = SequenceConfig(3, 20, 100, 12, 0.5,
                            GeometrySpec("identical").build(3),
                            buffer_mode="iid-fresh", first_task_policy="padded")
    configs = [anchor] + _suite_configs(n_configs - 1, seed)
    cells = []
    for idx, config in enumerate(configs):
        spec = ExperimentSpec(config, reps, master_seed=seed + 1000 * idx)
        label = (f"cfg{idx:02d}[T={config.T} n={config.n} p={config.p} "
                 f"s={config.s} sigma={config.sigma:g} {config.buffer_mode}]")
        for row in run_replications(spec, threads=threads):
            if row.theory is None:
                continue
            z = _cell_z(row.mean, row.stderr, row.theory)
            cells.append(AgreementCell(label, row.metric, row.task,
                                       row.mean, row.stderr, row.theory, z))
    allowed = int(0.01 * len(cells))
    return SuiteReport(tuple(cells), allowed)
