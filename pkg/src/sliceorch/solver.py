"""Optimal discounted policy by value iteration, and the greedy baseline."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import ContractViolation, ConvergenceError
from .model import (Action, ScenarioConfig, StateSpace, build_transition_matrix,
                    feasible_actions, is_feasible, reward, transition_distribution)


@dataclass(frozen=True)
class SolverSettings:
    epsilon: float = 1e-6
    max_iterations: int = 100_000

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")


@dataclass
class Policy:
    """Action table indexed by state, with the value vector that goes with it.

    ``actions`` is an ``(n, 2)`` integer array of ``(a_g, a_b)``.
    """

    actions: np.ndarray
    values: np.ndarray
    iterations: int
    residual: float
    name: str = "policy"

    def __len__(self):
        return len(self.actions)

    def action(self, index: int) -> Action:
        a_g, a_b = self.actions[index]
        return Action(int(a_g), int(a_b))


class MDPTables:
    """Flattened (state, action) pairs of a scenario.

    Pairs are grouped by state in state order; within a state they follow
    the canonical action order. ``offsets[i]:offsets[i+1]`` is the slice of
    pairs belonging to state ``i``.
    """

    def __init__(self, space: StateSpace, config: ScenarioConfig):
        self.space = space
        self.config = config
        actions, owners, rewards, offsets = [], [], [], [0]
        rows, cols, vals = [], [], []
        for i, state in enumerate(space):
            for a in feasible_actions(state, config):
                k = len(actions)
                actions.append(a)
                owners.append(i)
                rewards.append(reward(a, config))
                for j, p in transition_distribution(state, a, config, space).entries:
                    rows.append(k)
                    cols.append(j)
                    vals.append(p)
            offsets.append(len(actions))
        self.actions = np.array(actions, dtype=np.int64).reshape(-1, 2)
        self.owners = np.array(owners, dtype=np.int64)
        self.rewards = np.array(rewards, dtype=float)
        self.offsets = np.array(offsets, dtype=np.int64)
        self.transitions = sp.csr_matrix((vals, (rows, cols)), shape=(len(actions), len(space)))

    def backup(self, values: np.ndarray) -> np.ndarray:
        """Q(s, a) for every pair given successor values."""
        return self.rewards + self.config.discount * (self.transitions @ values)

    def state_max(self, q: np.ndarray) -> np.ndarray:
        return np.maximum.reduceat(q, self.offsets[:-1])

    def first_argmax(self, q: np.ndarray, best: np.ndarray) -> np.ndarray:
        """Pair index of the lowest canonical action attaining ``best`` per state."""
        pos = np.arange(len(q))
        candidates = np.where(q == best[self.owners], pos, len(q))
        return np.minimum.reduceat(candidates, self.offsets[:-1])


def value_iteration(space: StateSpace, config: ScenarioConfig,
                    settings: SolverSettings | None = None,
                    callback: Callable[[int, np.ndarray], None] | None = None,
                    tables: MDPTables | None = None) -> Policy:
    """Synchronous value iteration from V = 0.

    Stops once ``max_s |V_k(s) - V_{k-1}(s)| < epsilon`` and returns the
    greedy action with respect to the last backup, ties going to the lowest
    canonical action. ``callback(k, V_k)`` is called after every sweep.
    """
    settings = settings or SolverSettings()
    tables = tables or MDPTables(space, config)
    values = np.zeros(len(space))
    residual = math.inf
    for k in range(1, settings.max_iterations + 1):
        q = tables.backup(values)
        new = tables.state_max(q)
        residual = float(np.max(np.abs(new - values))) if len(new) else 0.0
        values = new
        if callback is not None:
            callback(k, values)
        if residual < settings.epsilon:
            chosen = tables.first_argmax(q, new)
            return Policy(tables.actions[chosen].copy(), values, k, residual, "optimal")
    raise ConvergenceError(f"value iteration did not converge in {settings.max_iterations} iterations",
                           residual)


def evaluate_discounted(actions, space: StateSpace, config: ScenarioConfig,
                        settings: SolverSettings | None = None) -> tuple[np.ndarray, int, float]:
    """Discounted value of a fixed policy: iterate V <- R + gamma P V from 0."""
    settings = settings or SolverSettings()
    P = build_transition_matrix(actions, space, config)
    r = np.array([reward(a, config) for a in actions], dtype=float)
    values = np.zeros(len(space))
    for k in range(1, settings.max_iterations + 1):
        new = r + config.discount * (P @ values)
        residual = float(np.max(np.abs(new - values)))
        values = new
        if residual < settings.epsilon:
            return values, k, residual
    raise ConvergenceError(f"policy evaluation did not converge in {settings.max_iterations} iterations",
                           residual)


def greedy_action(state, config: ScenarioConfig) -> Action:
    # ties: larger a_g first, then larger a_b
    return max(feasible_actions(state, config), key=lambda a: (reward(a, config), a.a_g, a.a_b))


def greedy_policy(space: StateSpace, config: ScenarioConfig,
                  settings: SolverSettings | None = None) -> Policy:
    actions = np.array([greedy_action(s, config) for s in space], dtype=np.int64).reshape(-1, 2)
    values, k, residual = evaluate_discounted(actions, space, config, settings)
    return Policy(actions, values, k, residual, "greedy")


def q_values(state, values, config: ScenarioConfig, space: StateSpace) -> dict[Action, float]:
    """One-step lookahead values of every feasible action at ``state``."""
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ContractViolation("value vector must be finite")
    out = {}
    for a in feasible_actions(state, config):
        dist = transition_distribution(state, a, config, space)
        future = math.fsum(p * values[j] for j, p in dist.entries)
        out[a] = reward(a, config) + config.discount * future
    return out


def check_policy(policy: Policy, space: StateSpace, config: ScenarioConfig) -> None:
    if len(policy) != len(space):
        raise ContractViolation(f"policy covers {len(policy)} states, state space has {len(space)}")
    for i, s in enumerate(space):
        if not is_feasible(s, policy.action(i), config):
            raise ContractViolation(f"infeasible action {tuple(policy.action(i))} at state {tuple(s)}")
