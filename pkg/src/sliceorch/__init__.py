"""Cross-slice admission control as a finite MDP: model, solver, analysis, simulator."""
from .actions import ActionIndexMap
from .analysis import (EvaluationReport, StationaryDistribution, average_reward, drop_fraction,
                       dropping_probability_exact, dropping_probability_paper, evaluate_policy,
                       stationary_distribution)
from .errors import ConfigError, ContractViolation, ConvergenceError, UnsupportedModelError
from .model import (Action, ScenarioConfig, StateSpace, SystemState, TransitionDistribution,
                    build_transition_matrix, default_scenario, enumerate_states, feasible_actions,
                    reward, transition_distribution)
from .simulator import SimulationMetrics, SimulationSettings, SlotRandom, simulate, step
from .solver import Policy, SolverSettings, greedy_policy, q_values, value_iteration

__version__ = "0.1.0"

__all__ = [
    "ActionIndexMap",
    "EvaluationReport",
    "StationaryDistribution",
    "average_reward",
    "drop_fraction",
    "dropping_probability_exact",
    "dropping_probability_paper",
    "evaluate_policy",
    "stationary_distribution",
    "ConfigError",
    "ContractViolation",
    "ConvergenceError",
    "UnsupportedModelError",
    "Action",
    "ScenarioConfig",
    "StateSpace",
    "SystemState",
    "TransitionDistribution",
    "build_transition_matrix",
    "default_scenario",
    "enumerate_states",
    "feasible_actions",
    "reward",
    "transition_distribution",
    "SimulationMetrics",
    "SimulationSettings",
    "SlotRandom",
    "simulate",
    "step",
    "Policy",
    "SolverSettings",
    "greedy_policy",
    "q_values",
    "value_iteration",
]
