"""Quantum trajectories, localization and the asymptotic structure of Lindblad dynamics."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .system import (QuantumSystem, new_system, validate_density, normalize_ket,  # noqa: F401
                     ket_to_density, purity, load_system, save_system)
from .lindblad import (apply_generator, apply_adjoint_generator, build_liouvillian,  # noqa: F401
                       propagate, propagate_adjoint, liouvillian_spectrum, spectral_gap,
                       convergence_horizon, asymptotic_state, asymptotic_weights)
from .unravel import (step_diffusive, step_jump, run_trajectory, run_ensemble,  # noqa: F401
                      time_average, trajectory_seed, default_dt, TrajectoryRecord,
                      EnsembleStats)
from .structure import (simultaneous_block_diagonalize, commutant_basis,  # noqa: F401
                        split_decaying_asymptotic, find_all_stationary_states,
                        trajectory_steady_state_finder, detect_dfs, infinite_time_projector,
                        stationary_state_in, SubspaceDecomposition, StationarySet, DfsReport)
from .analytics import (subspace_overlap, localization_statistics,  # noqa: F401
                        check_invariant_diffusive, check_invariant_jump,
                        classify_incomplete_localization, fidelity, participation_ratio,
                        mean_fidelity, l1_coherence, concurrence, make_observable,
                        verify_update_rule)
