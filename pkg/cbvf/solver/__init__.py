"""Solver module - Hamiltonians, level-set marching and the brute-force oracle."""

from cbvf.solver.hamiltonian import (
    ControlCandidates,
    control_candidates,
    ham_alpha,
    ham_max,
    is_control_affine,
)
from cbvf.solver.marching import (
    LevelSetMarcher,
    SolverParams,
    solve_avoid,
    solve_cbvf,
    transform_check,
)
from cbvf.solver.oracle import OracleParams, OracleResult, cbvf_oracle, oracle_search

__all__ = [
    # Hamiltonian
    "ControlCandidates",
    "control_candidates",
    "is_control_affine",
    "ham_alpha",
    "ham_max",
    # Marching
    "SolverParams",
    "LevelSetMarcher",
    "solve_cbvf",
    "solve_avoid",
    "transform_check",
    # Oracle
    "OracleParams",
    "OracleResult",
    "cbvf_oracle",
    "oracle_search",
]
