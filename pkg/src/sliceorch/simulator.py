"""Slot-by-slot Monte-Carlo simulation of the admission system.

Random source: ``numpy.random.PCG64`` seeded through ``SeedSequence(seed)``,
spawned into four substreams in this fixed order::

    0  GS arrivals      1  BE arrivals
    2  GS departures    3  BE departures

Each substream yields uniform doubles in blocks. An arrival count is the
inverse CDF of one uniform; each eligible active slice departs when its own
uniform falls below the departure probability (slices visited in order).
"""
from __future__ import annotations

import bisect
import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import ContractViolation
from .model import Action, ScenarioConfig, StateSpace, SystemState, enumerate_states, is_feasible, reward

STREAMS = ("arrivals_g", "arrivals_b", "departures_g", "departures_b")
BLOCK = 1 << 16


class UniformStream:
    def __init__(self, seed_seq: np.random.SeedSequence):
        self._gen = np.random.Generator(np.random.PCG64(seed_seq))
        self._buf: list[float] = []
        self._pos = 0

    def next(self) -> float:
        if self._pos == len(self._buf):
            self._buf = self._gen.random(BLOCK).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u


class SlotRandom:
    """The four named substreams for one trajectory."""

    def __init__(self, seed: int):
        children = np.random.SeedSequence(seed).spawn(len(STREAMS))
        self.streams = {name: UniformStream(ss) for name, ss in zip(STREAMS, children)}

    def arrivals(self, cdf: list[float], kind: str) -> int:
        n = bisect.bisect_right(cdf, self.streams["arrivals_" + kind].next())
        return min(n, len(cdf) - 1)

    def departures(self, eligible: int, p: float, kind: str) -> int:
        nxt = self.streams["departures_" + kind].next
        return sum(1 for _ in range(eligible) if nxt() < p)


@dataclass(frozen=True)
class SlotRecord:
    arrivals_g: int
    arrivals_b: int
    drops_g: int
    drops_b: int
    departures_g: int
    departures_b: int
    reward: float


def _cdf(dist) -> list[float]:
    out = list(itertools.accumulate(dist))
    out[-1] = 1.0
    return out


class _Dynamics:
    """Per-config constants used by the slot update."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.cdf_g = _cdf(config.gs_arrival_dist)
        self.cdf_b = _cdf(config.be_arrival_dist)
        self.p_g = config.gs_departure_prob
        self.p_b = config.be_departure_prob
        self.cap_g = config.gs_queue_capacity
        self.cap_b = config.be_queue_capacity
        self.include_new = config.departures_include_new

    def advance(self, state, action, rng: SlotRandom):
        s_g, s_b, m_g, m_b = state
        a_g, a_b = action
        n_g = rng.arrivals(self.cdf_g, "g")
        n_b = rng.arrivals(self.cdf_b, "b")
        q_g = s_g - a_g + n_g
        q_b = s_b - a_b + n_b
        d_g = q_g - self.cap_g if q_g > self.cap_g else 0
        d_b = q_b - self.cap_b if q_b > self.cap_b else 0
        run_g = m_g + a_g
        run_b = m_b + a_b
        k_g = rng.departures(run_g if self.include_new else m_g, self.p_g, "g")
        k_b = rng.departures(run_b if self.include_new else m_b, self.p_b, "b")
        nxt = SystemState(q_g - d_g, q_b - d_b, run_g - k_g, run_b - k_b)
        return nxt, (n_g, n_b, d_g, d_b, k_g, k_b)


@functools.lru_cache(maxsize=32)
def _dynamics(config: ScenarioConfig) -> _Dynamics:
    return _Dynamics(config)


def step(state, action, rng: SlotRandom, config: ScenarioConfig) -> tuple[SystemState, SlotRecord]:
    """Sample one slot from ``state`` under ``action``."""
    if not is_feasible(state, action, config):
        raise ContractViolation(f"action {tuple(action)} is infeasible in state {tuple(state)}")
    nxt, (n_g, n_b, d_g, d_b, k_g, k_b) = _dynamics(config).advance(state, action, rng)
    return nxt, SlotRecord(n_g, n_b, d_g, d_b, k_g, k_b, reward(action, config))


def sample_next_states(state, action, config: ScenarioConfig, size: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` independent successors at once; returns an ``(size, 4)`` array.

    Same slot dynamics as :func:`step`, vectorised for goodness-of-fit checks.
    """
    if not is_feasible(state, action, config):
        raise ContractViolation(f"action {tuple(action)} is infeasible in state {tuple(state)}")
    s_g, s_b, m_g, m_b = state
    a_g, a_b = action
    out = np.empty((size, 4), dtype=np.int64)
    for col, (queue, active, admitted, kind) in enumerate(((s_g, m_g, a_g, "g"), (s_b, m_b, a_b, "b"))):
        cdf = np.array(_cdf(config.arrival_dist(kind)))
        n = np.minimum(np.searchsorted(cdf, rng.random(size), side="right"), len(cdf) - 1)
        out[:, col] = np.minimum(queue - admitted + n, config.queue_capacity(kind))
        eligible = active + admitted if config.departures_include_new else active
        k = (rng.random((size, eligible)) < config.departure_prob(kind)).sum(axis=1)
        out[:, col + 2] = active + admitted - k
    return out


@dataclass(frozen=True)
class SimulationSettings:
    horizon: int
    warmup: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.warmup is None:
            object.__setattr__(self, "warmup", self.horizon // 100)
        if not (isinstance(self.horizon, int) and self.horizon > 0):
            raise ValueError("horizon must be a positive integer")
        if not 0 <= self.warmup < self.horizon:
            raise ValueError("need horizon > warmup >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


TRACE_FIELDS = ("slot", "s_g", "s_b", "m_g", "m_b", "a_g", "a_b", "arr_g", "arr_b",
                "drop_g", "drop_b", "dep_g", "dep_b", "reward")


@dataclass
class SimulationMetrics:
    """Counts and time averages over the post-warmup window."""

    slots: int
    total_reward: float
    arrivals: dict = field(default_factory=dict)
    admissions: dict = field(default_factory=dict)
    drops: dict = field(default_factory=dict)
    departures: dict = field(default_factory=dict)
    queue_start: dict = field(default_factory=dict)
    queue_end: dict = field(default_factory=dict)
    active_start: dict = field(default_factory=dict)
    active_end: dict = field(default_factory=dict)
    occupancy: dict = field(default_factory=dict)
    batch_rewards: list = field(default_factory=list)

    @property
    def avg_reward(self) -> float:
        return self.total_reward / self.slots

    def drop_fraction(self, kind: str) -> float:
        arrived = self.arrivals[kind]
        return self.drops[kind] / arrived if arrived else 0.0

    def drop_rate(self, kind: str) -> float:
        """Dropped requests per slot."""
        return self.drops[kind] / self.slots

    @property
    def reward_stderr(self) -> float:
        """Batch-means standard error of the average reward."""
        b = np.asarray(self.batch_rewards, dtype=float)
        if len(b) < 2:
            return math.inf
        return float(b.std(ddof=1) / math.sqrt(len(b)))

    def ledger_balanced(self) -> bool:
        for t in "gb":
            if self.arrivals[t] != self.drops[t] + self.admissions[t] + self.queue_end[t] - self.queue_start[t]:
                return False
            if self.admissions[t] - self.departures[t] != self.active_end[t] - self.active_start[t]:
                return False
        return True

    def row(self) -> dict:
        return {
            "slots": self.slots,
            "avg_reward": self.avg_reward,
            "reward_stderr": self.reward_stderr,
            "arrivals_g": self.arrivals["g"], "arrivals_b": self.arrivals["b"],
            "admissions_g": self.admissions["g"], "admissions_b": self.admissions["b"],
            "drops_g": self.drops["g"], "drops_b": self.drops["b"],
            "drop_fraction_g": self.drop_fraction("g"), "drop_fraction_b": self.drop_fraction("b"),
            "drop_rate_g": self.drop_rate("g"), "drop_rate_b": self.drop_rate("b"),
            "mean_sg": self.occupancy["s_g"], "mean_sb": self.occupancy["s_b"],
            "mean_mg": self.occupancy["m_g"], "mean_mb": self.occupancy["m_b"],
        }


def _policy_lookup(policy, config: ScenarioConfig, space: StateSpace | None) -> Mapping:
    if isinstance(policy, Mapping):
        return {SystemState(*s): Action(*a) for s, a in policy.items()}
    space = space or enumerate_states(config)
    actions = getattr(policy, "actions", policy)
    if len(actions) != len(space):
        raise ContractViolation(f"policy covers {len(actions)} states, state space has {len(space)}")
    return {s: Action(int(a[0]), int(a[1])) for s, a in zip(space, actions)}


def simulate(config: ScenarioConfig, policy, settings: SimulationSettings,
             space: StateSpace | None = None,
             trace: Callable[[tuple], None] | None = None,
             batches: int = 20) -> SimulationMetrics:
    """Run one trajectory from the empty system.

    ``policy`` is a :class:`~sliceorch.solver.Policy`, an action table aligned
    with the state space, or a mapping from state to action. ``trace``, if
    given, receives one tuple per slot in ``TRACE_FIELDS`` order.
    """
    table = _policy_lookup(policy, config, space)
    dyn = _dynamics(config)
    rng = SlotRandom(settings.seed)
    r_g, r_b = config.gs_reward, config.be_reward
    state = SystemState(0, 0, 0, 0)
    checked: set = set()
    warmup, horizon = settings.warmup, settings.horizon
    window = horizon - warmup
    batch_len = max(1, window // batches)

    arr_g = arr_b = adm_g = adm_b = drp_g = drp_b = dep_g = dep_b = 0
    occ = [0, 0, 0, 0]
    total = batch_sum = 0.0
    batch_rewards: list[float] = []
    start_state = state
    for slot in range(horizon):
        if slot == warmup:
            start_state = state
        try:
            action = table[state]
        except KeyError:
            raise ContractViolation(f"policy has no action for visited state {tuple(state)}") from None
        if state not in checked:
            if not is_feasible(state, action, config):
                raise ContractViolation(f"policy assigns infeasible action {tuple(action)} to state {tuple(state)}")
            checked.add(state)
        nxt, (n_g, n_b, d_g, d_b, k_g, k_b) = dyn.advance(state, action, rng)
        r = action[0] * r_g + action[1] * r_b
        if trace is not None:
            trace((slot, *state, *action, n_g, n_b, d_g, d_b, k_g, k_b, r))
        if slot >= warmup:
            arr_g += n_g
            arr_b += n_b
            adm_g += action[0]
            adm_b += action[1]
            drp_g += d_g
            drp_b += d_b
            dep_g += k_g
            dep_b += k_b
            occ[0] += state[0]
            occ[1] += state[1]
            occ[2] += state[2]
            occ[3] += state[3]
            total += r
            batch_sum += r
            if (slot - warmup + 1) % batch_len == 0 and len(batch_rewards) < batches:
                batch_rewards.append(batch_sum / batch_len)
                batch_sum = 0.0
        state = nxt

    return SimulationMetrics(
        slots=window,
        total_reward=total,
        arrivals={"g": arr_g, "b": arr_b},
        admissions={"g": adm_g, "b": adm_b},
        drops={"g": drp_g, "b": drp_b},
        departures={"g": dep_g, "b": dep_b},
        queue_start={"g": start_state.s_g, "b": start_state.s_b},
        queue_end={"g": state.s_g, "b": state.s_b},
        active_start={"g": start_state.m_g, "b": start_state.m_b},
        active_end={"g": state.m_g, "b": state.m_b},
        occupancy={k: v / window for k, v in zip(("s_g", "s_b", "m_g", "m_b"), occ)},
        batch_rewards=batch_rewards,
    )
