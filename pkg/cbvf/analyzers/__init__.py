"""Analyzers module - barrier verification, safe controllers and synthesis."""

from cbvf.analyzers.controller import (
    GreedyController,
    SampleHoldController,
    ThetaLog,
    greedy_control,
    greedy_rollout,
    sample_hold_rollout,
)
from cbvf.analyzers.counterexample import (
    CounterexampleParams,
    EscapeResult,
    bang_bang_signal,
    check_bang_bang_escape,
    run_counterexample,
)
from cbvf.analyzers.synth import (
    ConvergenceParams,
    LimitResult,
    fixed_point_residual,
    limit_cbvf,
    pointwise_max,
    sequence_limit_check,
)
from cbvf.analyzers.verify import (
    BarrierParams,
    check_avoid_time_invariance,
    check_barrier_guarantee,
    check_classical_cbf,
    check_time_invariance,
    clamp_nonneg,
    default_invariance_tolerance,
    verify_viscosity_cbf,
)

__all__ = [
    # Controllers
    "GreedyController",
    "SampleHoldController",
    "ThetaLog",
    "greedy_control",
    "greedy_rollout",
    "sample_hold_rollout",
    # Verification
    "BarrierParams",
    "check_classical_cbf",
    "check_time_invariance",
    "check_barrier_guarantee",
    "check_avoid_time_invariance",
    "verify_viscosity_cbf",
    "clamp_nonneg",
    "default_invariance_tolerance",
    # Synthesis
    "ConvergenceParams",
    "LimitResult",
    "pointwise_max",
    "limit_cbvf",
    "fixed_point_residual",
    "sequence_limit_check",
    # Counterexample
    "CounterexampleParams",
    "EscapeResult",
    "bang_bang_signal",
    "check_bang_bang_escape",
    "run_counterexample",
]
