"""Controlled-phase gate between two single-photon pulses in a five-level atom."""

from .model import SchemeParams, build_hamiltonian, build_jump_operators, enumerate_basis, initial_state
from .dynamics import SolverOptions, build_process_map, evolve_master, sample_trajectory
from .metrics import GateMetrics, MCOptions, PhaseSet, compute_metrics, conditional_fidelity, perturbative_cps

__version__ = "0.1.0"

__all__ = [
    "SchemeParams", "build_hamiltonian", "build_jump_operators", "enumerate_basis", "initial_state",
    "SolverOptions", "build_process_map", "evolve_master", "sample_trajectory",
    "GateMetrics", "MCOptions", "PhaseSet", "compute_metrics", "conditional_fidelity", "perturbative_cps",
]
