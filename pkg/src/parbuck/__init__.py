"""Decoupled voltage regulation and optimal current repartition for banks
of parallel buck converters: average model, coordinate machinery, known-load
and load-independent controllers, deterministic scenario simulator,
structural verification suite, HTTP service and CLI."""

__version__ = "0.1.0"

from .controllers import (KnownLoadConfig, RobustConfig, RobustState,
                          assemble_duty, chi_hamiltonian, chi_rhs,
                          chi_transform, ida_pbc_mu, known_lambda,
                          known_load_hamiltonian, phi_t_star, pre_feedback,
                          robust_lambda, robust_mu, robust_xi_star)
from .coordinates import (CasimirReport, CoordinateMaps, ZState, build_gamma,
                          build_maps, d_to_input, input_to_d, leq_ladder,
                          to_x, to_z, transform_system, verify_casimir)
from .costs import (CostFunction, OptimalRepartition, QuadraticCost,
                    TrackingCost, argmin_oracle, cost_z, grad_z)
from .errors import (ConfigError, ParameterError, ParbuckError,
                     SimulationDiverged, StructureError,
                     UnsupportedOracleError)
from .model import (BankParams, PchState, PchSystem, apply_esr, build_pch,
                    grad_hamiltonian, hamiltonian, open_loop_rhs)
from .sim import Event, Scenario, run
from .trace import Trace, read_csv, steady_state_metrics
from .verify import run_structural_suite

__all__ = [
    "BankParams", "PchState", "PchSystem", "build_pch", "apply_esr",
    "hamiltonian", "grad_hamiltonian", "open_loop_rhs",
    "CoordinateMaps", "ZState", "CasimirReport", "build_gamma", "build_maps",
    "leq_ladder", "transform_system", "to_z", "to_x", "input_to_d",
    "d_to_input", "verify_casimir",
    "CostFunction", "QuadraticCost", "TrackingCost", "OptimalRepartition",
    "cost_z", "grad_z", "argmin_oracle",
    "KnownLoadConfig", "RobustConfig", "RobustState", "ida_pbc_mu",
    "known_lambda", "known_load_hamiltonian", "robust_mu", "robust_lambda",
    "robust_xi_star", "chi_transform", "chi_rhs", "chi_hamiltonian",
    "assemble_duty", "pre_feedback", "phi_t_star",
    "Scenario", "Event", "run", "Trace", "read_csv", "steady_state_metrics",
    "run_structural_suite",
    "ParbuckError", "ParameterError", "StructureError", "ConfigError",
    "UnsupportedOracleError", "SimulationDiverged",
]
