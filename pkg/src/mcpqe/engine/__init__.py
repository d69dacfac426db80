"""MC-PQE propagation engine, deterministic PQE, folded spectrum and spawn sampling."""

from .folded import FoldedResult, assign_states, folded_scan, run_folded_spectrum
from .pqe import NotConverged, PQEResult, deterministic_pqe, linked_residuals
from .propagate import (
    Observer,
    PopulationCollapse,
    PropagationConfig,
    RunResult,
    TrajectoryRecord,
    TrialWavefunction,
    WalkerPopulation,
    projected_energy,
    propagate,
    run_ground,
    step,
    trial_projected_energy,
    update_shift,
)
from .residuals import Measurement, ResidualEstimator, estimate_residuals
from .spawn import analytic_ptilde, kl_divergence, p_gen, sample_spawn_targets
from .system import StatePreparer, System, build_system

__all__ = [
    "FoldedResult", "assign_states", "folded_scan", "run_folded_spectrum",
    "NotConverged", "PQEResult", "deterministic_pqe", "linked_residuals",
    "Observer", "PopulationCollapse", "PropagationConfig", "RunResult", "TrajectoryRecord",
    "TrialWavefunction", "WalkerPopulation", "projected_energy", "propagate", "run_ground",
    "step", "trial_projected_energy", "update_shift",
    "Measurement", "ResidualEstimator", "estimate_residuals",
    "analytic_ptilde", "kl_divergence", "p_gen", "sample_spawn_targets",
    "StatePreparer", "System", "build_system",
]
