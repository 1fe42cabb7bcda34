"""Solve, evaluate and sweep pipelines shared by the CLI and the test suite."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .analysis import EvaluationReport, evaluate_policy
from .errors import ConfigError
from .model import ScenarioConfig, StateSpace, bernoulli, enumerate_states
from .solver import Policy, SolverSettings, greedy_policy, value_iteration

POLICIES = ("optimal", "greedy")

# sweepable parameter -> (config field, kind)
PARAMETERS = {
    "p_l^b": ("be_departure_prob", "departure"),
    "p_n^b": ("be_arrival_dist", "arrival"),
    "p_l^g": ("gs_departure_prob", "departure"),
    "p_n^g": ("gs_arrival_dist", "arrival"),
    "r_g": ("gs_reward", "reward"),
    "r_b": ("be_reward", "reward"),
    "γ": ("discount", "discount"),
}
ALIASES = {"gamma": "γ", "discount": "γ"}
ALIASES.update({fld: sym for sym, (fld, _) in PARAMETERS.items() if fld != "discount"})

DEFAULT_GRID = tuple(round(0.1 * k, 10) for k in range(1, 10))

SWEEP_FIELDS = ("param", "value", "policy", "avg_reward", "be_drop_paper", "gs_drop_paper",
                "be_drop_exact", "gs_drop_exact")


def canonical_parameter(name: str) -> str:
    name = ALIASES.get(name, name)
    if name not in PARAMETERS:
        raise ConfigError("parameter", f"unknown sweep parameter {name!r}")
    return name


def slug(name: str) -> str:
    return {"γ": "gamma"}.get(name, name.replace("^", "_"))


def apply_parameter(config: ScenarioConfig, name: str, value: float) -> ScenarioConfig:
    """Copy of ``config`` with one sweepable parameter set to ``value``."""
    name = canonical_parameter(name)
    fld, kind = PARAMETERS[name]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError("values", f"{name} value {value!r} is not a finite real")
    if kind == "departure" and not 0 < value <= 1:
        raise ConfigError("values", f"{name} value {value!r} outside (0, 1]")
    if kind == "arrival" and not 0 <= value <= 1:
        raise ConfigError("values", f"{name} value {value!r} outside [0, 1]")
    if kind == "discount" and not 0 < value < 1:
        raise ConfigError("values", f"{name} value {value!r} outside (0, 1)")
    if kind == "arrival":
        current = getattr(config, fld)
        if any(p != 0 for p in current[2:]):
            raise ConfigError(fld, f"{name} sweeps need single-arrival (Bernoulli) distributions")
        return config.replace(**{fld: bernoulli(float(value))})
    return config.replace(**{fld: float(value)})


@dataclass
class SweepSpec:
    parameter: str
    values: tuple = DEFAULT_GRID
    policies: tuple = POLICIES

    def __post_init__(self):
        self.parameter = canonical_parameter(self.parameter)
        self.values = tuple(self.values)
        self.policies = tuple(self.policies)
        if not self.values:
            raise ConfigError("values", "value list must be non-empty")
        if not self.policies or any(p not in POLICIES for p in self.policies):
            raise ConfigError("policies", f"policies must be drawn from {POLICIES}")

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        if not isinstance(data, dict):
            raise ConfigError(None, "sweep spec must be a JSON object")
        unknown = sorted(set(data) - {"parameter", "values", "policies"})
        if unknown:
            raise ConfigError(unknown[0], "unknown field")
        if "parameter" not in data:
            raise ConfigError("parameter", "missing field")
        return cls(data["parameter"], tuple(data.get("values", DEFAULT_GRID)),
                   tuple(data.get("policies", POLICIES)))

    @classmethod
    def load(cls, path) -> "SweepSpec":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(None, f"invalid JSON: {exc}") from None
        return cls.from_dict(data)


def solve_policy(config: ScenarioConfig, which: str, space: StateSpace | None = None,
                 settings: SolverSettings | None = None) -> Policy:
    space = space or enumerate_states(config)
    if which == "optimal":
        return value_iteration(space, config, settings)
    if which == "greedy":
        return greedy_policy(space, config, settings)
    raise ConfigError("policy", f"unknown policy {which!r}")


def run_evaluation(config: ScenarioConfig, which: str, scenario_id: str = "scenario",
                   settings: SolverSettings | None = None) -> EvaluationReport:
    space = enumerate_states(config)
    policy = solve_policy(config, which, space, settings)
    return evaluate_policy(policy, space, config, scenario_id=scenario_id, policy_name=which)


@dataclass
class SweepPoint:
    param: str
    value: float
    report: EvaluationReport

    def row(self) -> tuple:
        r = self.report
        return (self.param, float(self.value), r.policy, r.avg_reward, r.be_drop_paper,
                r.gs_drop_paper, r.be_drop_exact, r.gs_drop_exact)


def run_sweep(config: ScenarioConfig, spec: SweepSpec, scenario_id: str = "scenario",
              settings: SolverSettings | None = None) -> list[SweepPoint]:
    configs = [apply_parameter(config, spec.parameter, v) for v in spec.values]
    points = []
    for value, cfg in zip(spec.values, configs):
        for which in spec.policies:
            points.append(SweepPoint(spec.parameter, value, run_evaluation(cfg, which, scenario_id, settings)))
    return points


FIGURE_METRICS = ("avg_reward", "be_drop_paper", "gs_drop_paper", "be_drop_exact", "gs_drop_exact")


def figure_series(points: list[SweepPoint]) -> dict[tuple[str, str], list[tuple[float, float]]]:
    """Two-column series keyed by (metric, policy), in sweep order."""
    out: dict[tuple[str, str], list] = {}
    for pt in points:
        for metric in FIGURE_METRICS:
            out.setdefault((metric, pt.report.policy), []).append(
                (float(pt.value), getattr(pt.report, metric)))
    return out
