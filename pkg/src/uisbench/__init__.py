"""Workbench for comparing uncertain inference systems against a
maximum-entropy probabilistic reference."""

from .belief import (
    BeliefInterval,
    CompatibilityRelation,
    Frame,
    MassFunction,
    bel_from_compatibility,
    bel_max_form,
    pathology_sweep,
)
from .engines import EngineKind, PropagationError, dst_propagate, propagate
from .harness import Case, Experiment, SweepSpec, figure_spec, reactor_benchmark, run_pipeline, sweep
from .joint import (
    ConvergenceError,
    InfeasibleError,
    JointDistribution,
    SolverOptions,
    compile_constraints,
    evidence_constraints,
    max_entropy,
    min_cross_entropy,
)
from .metrics import ComparisonReport, aggregate, normalize, random_guess_baseline, score
from .rules import Evidence, Kind, RuleSet, RuleSetError, parse_evidence, parse_ruleset, validate

__version__ = "0.1.0"

__all__ = [
    "BeliefInterval",
    "Case",
    "ComparisonReport",
    "CompatibilityRelation",
    "ConvergenceError",
    "EngineKind",
    "Evidence",
    "Experiment",
    "Frame",
    "InfeasibleError",
    "JointDistribution",
    "Kind",
    "MassFunction",
    "PropagationError",
    "RuleSet",
    "RuleSetError",
    "SolverOptions",
    "SweepSpec",
    "aggregate",
    "bel_from_compatibility",
    "bel_max_form",
    "compile_constraints",
    "dst_propagate",
    "evidence_constraints",
    "figure_spec",
    "max_entropy",
    "min_cross_entropy",
    "normalize",
    "parse_evidence",
    "parse_ruleset",
    "pathology_sweep",
    "propagate",
    "random_guess_baseline",
    "reactor_benchmark",
    "run_pipeline",
    "score",
    "sweep",
    "validate",
]
