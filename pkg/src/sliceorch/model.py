"""Cross-slice admission control model.

Two request classes share a pool of radio, compute and storage units:
guaranteed-service (GS) and best-effort (BE). Each class has a finite queue,
a per-slot arrival distribution, a per-slot slice departure probability and a
per-admission reward. A system state is ``(s_g, s_b, m_g, m_b)``: the two
queue lengths and the number of active slices of each class. Free resources
are derived from the slice counts.

One slot runs: observe state, admit ``(a_g, a_b)`` requests, append arrivals
to the queues (overflow is dropped), then let eligible active slices depart.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, ContractViolation

PROB_TOL = 1e-12

RESOURCES = ("radio", "compute", "storage")


class SystemState(NamedTuple):
    s_g: int
    s_b: int
    m_g: int
    m_b: int


class Action(NamedTuple):
    a_g: int
    a_b: int


def canonical_key(action: Action) -> tuple[int, int]:
    """Sort key for the canonical action order: ascending a_b, then a_g."""
    return (action.a_b, action.a_g)


def _check_prob_vector(name: str, values: Sequence[float]) -> tuple[float, ...]:
    try:
        vec = [float(v) for v in values]
    except (TypeError, ValueError):
        raise ConfigError(name, "must be an array of reals") from None
    if not vec:
        raise ConfigError(name, "must be non-empty")
    if any(not math.isfinite(v) or v < 0 for v in vec):
        raise ConfigError(name, "entries must be finite and nonnegative")
    total = math.fsum(vec)
    if abs(total - 1.0) > PROB_TOL:
        raise ConfigError(name, f"must sum to 1 (got {total!r})")
    if total != 1.0:
        vec = [v / total for v in vec]
    return tuple(vec)


def _check_count(name: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise ConfigError(name, f"must be a nonnegative integer (got {value!r})")
    if value < 0:
        raise ConfigError(name, f"must be a nonnegative integer (got {value!r})")
    return int(value)


@dataclass(frozen=True)
class ScenarioConfig:
    """All model parameters. Validated on construction.

    Demands are ``(radio, compute, storage)`` units per slice. Arrival
    distributions give P[n arrivals in a slot] for n = 0..N.
    """

    radio_capacity: int
    compute_capacity: int
    storage_capacity: int
    gs_demand: tuple[int, int, int]
    be_demand: tuple[int, int, int]
    gs_queue_capacity: int
    be_queue_capacity: int
    gs_arrival_dist: tuple[float, ...]
    be_arrival_dist: tuple[float, ...]
    gs_departure_prob: float
    be_departure_prob: float
    gs_reward: float
    be_reward: float
    discount: float
    departures_include_new: bool = False

    def __post_init__(self):
        set_ = object.__setattr__
        for name in ("radio_capacity", "compute_capacity", "storage_capacity",
                     "gs_queue_capacity", "be_queue_capacity"):
            set_(self, name, _check_count(name, getattr(self, name)))
        for name in ("gs_demand", "be_demand"):
            raw = getattr(self, name)
            try:
                demand = tuple(_check_count(name, v) for v in raw)
            except TypeError:
                raise ConfigError(name, "must be an array of 3 integers") from None
            if len(demand) != 3:
                raise ConfigError(name, "must be an array of 3 integers")
            if not any(demand):
                raise ConfigError(name, "per-slice demand must not be all zero")
            set_(self, name, demand)
        for name in ("gs_arrival_dist", "be_arrival_dist"):
            set_(self, name, _check_prob_vector(name, getattr(self, name)))
        for name in ("gs_departure_prob", "be_departure_prob"):
            p = getattr(self, name)
            if isinstance(p, bool) or not isinstance(p, (int, float)) or not 0 < p <= 1:
                raise ConfigError(name, f"must be in (0, 1] (got {p!r})")
            set_(self, name, float(p))
        for name in ("gs_reward", "be_reward"):
            r = getattr(self, name)
            if isinstance(r, bool) or not isinstance(r, (int, float)) or not math.isfinite(r):
                raise ConfigError(name, f"must be a finite real (got {r!r})")
            set_(self, name, float(r))
        g = self.discount
        if isinstance(g, bool) or not isinstance(g, (int, float)) or not 0 < g < 1:
            raise ConfigError("discount", f"must be in (0, 1) (got {g!r})")
        set_(self, "discount", float(g))
        if not isinstance(self.departures_include_new, bool):
            raise ConfigError("departures_include_new", "must be a boolean")

    @property
    def capacities(self) -> tuple[int, int, int]:
        return (self.radio_capacity, self.compute_capacity, self.storage_capacity)

    def queue_capacity(self, kind: str) -> int:
        return self.gs_queue_capacity if kind == "g" else self.be_queue_capacity

    def arrival_dist(self, kind: str) -> tuple[float, ...]:
        return self.gs_arrival_dist if kind == "g" else self.be_arrival_dist

    def departure_prob(self, kind: str) -> float:
        return self.gs_departure_prob if kind == "g" else self.be_departure_prob

    def mean_arrivals(self, kind: str) -> float:
        return math.fsum(n * p for n, p in enumerate(self.arrival_dist(kind)))

    def free_resources(self, m_g: int, m_b: int) -> tuple[int, int, int]:
        return tuple(
            cap - m_g * dg - m_b * db
            for cap, dg, db in zip(self.capacities, self.gs_demand, self.be_demand)
        )

    def replace(self, **changes) -> "ScenarioConfig":
        data = self.to_dict()
        data.update(changes)
        return ScenarioConfig(**data)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError(None, "config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown field")
        missing = [f.name for f in fields(cls)
                   if f.name not in data and f.name != "departures_include_new"]
        if missing:
            raise ConfigError(missing[0], "missing field")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(None, f"invalid JSON: {exc}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")


def default_scenario(**overrides) -> ScenarioConfig:
    """The evaluation setting: 4 units of each resource, 2 per slice, queues of 4."""
    base = dict(
        radio_capacity=4, compute_capacity=4, storage_capacity=4,
        gs_demand=(2, 2, 2), be_demand=(2, 2, 2),
        gs_queue_capacity=4, be_queue_capacity=4,
        gs_arrival_dist=(0.65, 0.35), be_arrival_dist=(0.15, 0.85),
        gs_departure_prob=0.35, be_departure_prob=0.85,
        gs_reward=1.553, be_reward=1.0,
        discount=0.9,
    )
    base.update(overrides)
    return ScenarioConfig(**base)


def bernoulli(p: float) -> tuple[float, float]:
    return (1.0 - p, p)


class StateSpace:
    """Lexicographically ordered valid states with an index bijection."""

    def __init__(self, states: Sequence[SystemState]):
        self.states = tuple(states)
        self._index = {s: i for i, s in enumerate(self.states)}
        self.coords = np.array(self.states, dtype=np.int64).reshape(-1, 4)

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self) -> Iterator[SystemState]:
        return iter(self.states)

    def __contains__(self, state) -> bool:
        return tuple(state) in self._index

    def encode(self, state) -> int:
        try:
            return self._index[tuple(state)]
        except KeyError:
            raise ContractViolation(f"state {tuple(state)} is not in the state space") from None

    def decode(self, index: int) -> SystemState:
        return self.states[index]

    @property
    def empty_index(self) -> int:
        return self.encode((0, 0, 0, 0))


def slice_count_pairs(config: ScenarioConfig) -> list[tuple[int, int]]:
    """All (m_g, m_b) whose resource usage fits within every capacity."""
    def max_count(demand, other_used=(0, 0, 0)):
        bounds = [(cap - used) // d for cap, used, d in zip(config.capacities, other_used, demand) if d > 0]
        return min(bounds)

    pairs = []
    for m_g in range(max_count(config.gs_demand) + 1):
        used = tuple(m_g * d for d in config.gs_demand)
        for m_b in range(max_count(config.be_demand, used) + 1):
            pairs.append((m_g, m_b))
    return pairs


def enumerate_states(config: ScenarioConfig) -> StateSpace:
    pairs = slice_count_pairs(config)
    states = [
        SystemState(s_g, s_b, m_g, m_b)
        for s_g in range(config.gs_queue_capacity + 1)
        for s_b in range(config.be_queue_capacity + 1)
        for m_g, m_b in pairs
    ]
    return StateSpace(states)


def is_valid_state(state, config: ScenarioConfig) -> bool:
    s_g, s_b, m_g, m_b = state
    if not (0 <= s_g <= config.gs_queue_capacity and 0 <= s_b <= config.be_queue_capacity):
        return False
    if m_g < 0 or m_b < 0:
        return False
    return all(x >= 0 for x in config.free_resources(m_g, m_b))


def feasible_actions(state, config: ScenarioConfig) -> list[Action]:
    """Admissible actions in canonical order; always contains (0, 0)."""
    if not is_valid_state(state, config):
        raise ContractViolation(f"state {tuple(state)} is not valid for this config")
    s_g, s_b, m_g, m_b = state
    free = config.free_resources(m_g, m_b)
    out = []
    for a_b in range(s_b + 1):
        for a_g in range(s_g + 1):
            if all(a_g * dg + a_b * db <= f
                   for f, dg, db in zip(free, config.gs_demand, config.be_demand)):
                out.append(Action(a_g, a_b))
    return out


def is_feasible(state, action, config: ScenarioConfig) -> bool:
    s_g, s_b, m_g, m_b = state
    a_g, a_b = action
    if not (0 <= a_g <= s_g and 0 <= a_b <= s_b):
        return False
    free = config.free_resources(m_g, m_b)
    return all(a_g * dg + a_b * db <= f
               for f, dg, db in zip(free, config.gs_demand, config.be_demand))


def reward(action, config: ScenarioConfig) -> float:
    a_g, a_b = action
    return a_g * config.gs_reward + a_b * config.be_reward


def binomial_pmf(n: int, p: float) -> list[float]:
    return [math.comb(n, k) * p**k * (1.0 - p) ** (n - k) for k in range(n + 1)]


def class_marginal(queue: int, active: int, admitted: int, kind: str,
                   config: ScenarioConfig) -> dict[tuple[int, int], float]:
    """Next (queue, active) distribution of one class after admitting ``admitted``."""
    cap = config.queue_capacity(kind)
    left = queue - admitted
    queue_next: dict[int, float] = {}
    for n, p in enumerate(config.arrival_dist(kind)):
        if p > 0:
            q = min(left + n, cap)
            queue_next[q] = queue_next.get(q, 0.0) + p
    eligible = active + admitted if config.departures_include_new else active
    running = active + admitted
    out: dict[tuple[int, int], float] = {}
    for k, pk in enumerate(binomial_pmf(eligible, config.departure_prob(kind))):
        if pk == 0:
            continue
        for q, pq in queue_next.items():
            key = (q, running - k)
            out[key] = out.get(key, 0.0) + pq * pk
    return out


@dataclass(frozen=True)
class TransitionDistribution:
    """Sparse next-state distribution as sorted ``(index, probability)`` pairs."""

    entries: tuple[tuple[int, float], ...]

    def __post_init__(self):
        idx = [i for i, _ in self.entries]
        if len(set(idx)) != len(idx):
            raise ContractViolation("duplicate next-state index")
        if any(p < 0 for _, p in self.entries):
            raise ContractViolation("negative transition probability")
        if abs(self.total - 1.0) > PROB_TOL:
            raise ContractViolation(f"transition probabilities sum to {self.total!r}")

    @property
    def total(self) -> float:
        return math.fsum(p for _, p in self.entries)

    @property
    def indices(self) -> list[int]:
        return [i for i, _ in self.entries]

    @property
    def probabilities(self) -> list[float]:
        return [p for _, p in self.entries]

    def as_dict(self) -> dict[int, float]:
        return dict(self.entries)


def transition_distribution(state, action, config: ScenarioConfig,
                            space: StateSpace | None = None) -> TransitionDistribution:
    if not is_valid_state(state, config) or not is_feasible(state, action, config):
        raise ContractViolation(f"action {tuple(action)} is infeasible in state {tuple(state)}")
    if space is None:
        space = enumerate_states(config)
    s_g, s_b, m_g, m_b = state
    a_g, a_b = action
    gs = class_marginal(s_g, m_g, a_g, "g", config)
    be = class_marginal(s_b, m_b, a_b, "b", config)
    joint: dict[int, float] = {}
    for (qg, mg), pg in gs.items():
        for (qb, mb), pb in be.items():
            j = space.encode((qg, qb, mg, mb))
            joint[j] = joint.get(j, 0.0) + pg * pb
    return TransitionDistribution(tuple(sorted(joint.items())))


def build_transition_matrix(policy_actions, space: StateSpace,
                            config: ScenarioConfig) -> sp.csr_matrix:
    """Row-stochastic matrix of the chain under a fixed policy.

    ``policy_actions`` is a sequence (or ``(n, 2)`` array) of ``(a_g, a_b)``
    per state index; a :class:`~sliceorch.solver.Policy` also works.
    """
    actions = getattr(policy_actions, "actions", policy_actions)
    if len(actions) != len(space):
        raise ContractViolation(
            f"policy covers {len(actions)} states, state space has {len(space)}")
    rows, cols, vals = [], [], []
    for i, state in enumerate(space):
        action = Action(*(int(x) for x in actions[i]))
        if not is_feasible(state, action, config):
            raise ContractViolation(
                f"policy assigns infeasible action {tuple(action)} to state {tuple(state)} (index {i})")
        dist = transition_distribution(state, action, config, space)
        for j, p in dist.entries:
            rows.append(i)
            cols.append(j)
            vals.append(p)
    n = len(space)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
