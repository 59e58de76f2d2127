"""Online network resource allocation under uncertainty.

Queueing networks with per-slot random arrivals and strictly convex edge
costs, controlled by first-order dual methods: the plain stochastic dual
recursion, its heavy-ball momentum variant, and a learning controller that
separates statistical learning of the dual optimum from queue-driven
adaptation.  Includes a message-passing implementation that is bit-identical
to the centralized one, ensemble dual oracles for ground truth, and an
experiment harness with CSV outputs and a CLI.
"""

from .controllers import (HeavyBallState, LaSdgState, SdgState, eta_value,
                          gamma_recursion_residual, heavy_ball_init, heavy_ball_step,
                          lasdg_init, lasdg_step, sdg_init, sdg_step, theta_default)
from .distributed import DeadlockError, Message, run_distributed, write_message_trace
from .graph import (BoxSet, ConvergenceError, NetworkGraph, build_incidence, load_network,
                    queue_update, save_network, spectral_radius_ata, validate_incidence)
from .harness import (ConfigError, SimulationConfig, SummaryRecord, Trajectory, compare,
                      emit_config, emit_trajectory_csv, monte_carlo, parse_config,
                      parse_trajectory_csv, run_simulation, summarize, write_summary_csv)
from .lagrangian import (dual_value, gradient_bound, minimize_lagrangian,
                         minimize_lagrangian_batch, stochastic_dual_gradient)
from .oracle import (FiniteSupportDistribution, OracleReport, empirical_convergence_probe,
                     ensemble_dual_value, exact_expected_gradient, read_oracle_report,
                     reference_dual_solution, saa_distribution, saa_dual_solve,
                     solve_ensemble_dual, verify_structural_constants, write_oracle_report)
from .rng import stream
from .scenario import (GeoScenario, ScenarioConfig, StateSample, build_geo_load_balancing)
from .validate import run_validation

__version__ = "0.1.0"
