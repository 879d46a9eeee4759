"""Rehearsal-based continual linear regression: simulation and error theory.

The package trains the sequential minimum-norm / least-squares estimator on
synthetic Gaussian task sequences, evaluates closed-form expectations of the
adaptation, memory, and generalization errors, and verifies the two against
each other with seeded Monte Carlo sweeps.
"""

__version__ = "0.1.0"

from .geometry import (GeometrySpec, TaskGeometry, TaskVectors, make_geometry,
                       measure_geometry, realize_vectors)
from .metrics import (ErrorReport, adaptation_error, error_report,
                      estimation_errors, generalization_error, memory_error)
from .montecarlo import (AggregateRow, ExperimentSpec, SweepSpec,
                         agreement_suite, run_replications, run_sweep)
from .theory import (Regime, TheoryBreakdown, classify_regime,
                     contraction_factor, find_adaptation_turning_point,
                     find_memory_floor, theory_adaptation,
                     theory_generalization, theory_memory, theory_two_task)
from .trainer import (RehearsalBuffer, SequenceConfig, TaskData, Trajectory,
                      assemble_buffer, draw_task_data, fit_least_squares,
                      fit_min_norm, quota_split, train_sequence)

__all__ = [
    "__version__",
    "AggregateRow", "ErrorReport", "ExperimentSpec", "GeometrySpec", "Regime",
    "RehearsalBuffer", "SequenceConfig", "SweepSpec", "TaskData",
    "TaskGeometry", "TaskVectors", "TheoryBreakdown", "Trajectory",
    "adaptation_error", "agreement_suite", "assemble_buffer",
    "classify_regime", "contraction_factor", "draw_task_data", "error_report",
    "estimation_errors", "find_adaptation_turning_point", "find_memory_floor",
    "fit_least_squares", "fit_min_norm", "generalization_error",
    "make_geometry", "measure_geometry", "memory_error", "quota_split",
    "realize_vectors", "run_replications", "run_sweep", "theory_adaptation",
    "theory_generalization", "theory_memory", "theory_two_task",
    "train_sequence",
]
