"""Long-run evaluation of a fixed policy: occupancy, average reward, drop rates."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ContractViolation, ConvergenceError, UnsupportedModelError
from .model import ScenarioConfig, StateSpace, build_transition_matrix, reward

STEP_TOL = 1e-10
RESIDUAL_TOL = 1e-8


@dataclass
class StationaryDistribution:
    probabilities: np.ndarray
    residual: float
    iterations: int

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.probabilities, dtype=dtype)


def stationary_distribution(P, initial_index: int, tol: float = STEP_TOL,
                            residual_tol: float = RESIDUAL_TOL,
                            max_iterations: int = 2_000_000) -> StationaryDistribution:
    """Limiting occupancy of the chain started from ``initial_index``.

    The chain need not be irreducible, so the answer depends on the start.
    Iterates the lazy chain ``(I + P) / 2``: it shares the Cesaro limit of
    ``P`` from every start but is aperiodic, so plain powers converge
    geometrically. Stops when successive iterates differ by less than
    ``tol`` in L1, then checks ``||phi P - phi||_1 < residual_tol``.
    """
    P = sp.csr_matrix(P, dtype=float)
    n = P.shape[0]
    if P.shape != (n, n):
        raise ContractViolation("transition matrix must be square")
    rowsum = np.asarray(P.sum(axis=1)).ravel()
    if n == 0 or np.max(np.abs(rowsum - 1.0)) > 1e-12 or (P.data < 0).any():
        raise ContractViolation("transition matrix must be row-stochastic")
    PT = P.T.tocsr()
    phi = np.zeros(n)
    phi[initial_index] = 1.0
    step = math.inf
    for k in range(1, max_iterations + 1):
        new = 0.5 * (phi + PT @ phi)
        step = float(np.abs(new - phi).sum())
        phi = new
        if step < tol:
            break
    else:
        raise ConvergenceError(f"stationary distribution did not converge in {max_iterations} iterations",
                               step)
    phi = np.clip(phi, 0.0, None)
    phi /= phi.sum()
    residual = float(np.abs(PT @ phi - phi).sum())
    if residual >= residual_tol:
        raise ConvergenceError("stationary residual above tolerance", residual)
    return StationaryDistribution(phi, residual, k)


def _probs(phi) -> np.ndarray:
    return np.asarray(getattr(phi, "probabilities", phi), dtype=float)


def _actions(policy) -> np.ndarray:
    return np.asarray(getattr(policy, "actions", policy), dtype=np.int64).reshape(-1, 2)


def average_reward(phi, policy, config: ScenarioConfig, space: StateSpace) -> float:
    """Expected per-slot reward under the occupancy ``phi``."""
    rewards = np.array([reward(a, config) for a in _actions(policy)])
    return float(_probs(phi) @ rewards)


def single_arrival_prob(config: ScenarioConfig, kind: str) -> float:
    dist = config.arrival_dist(kind)
    if any(p != 0 for p in dist[2:]):
        raise UnsupportedModelError(
            f"{'gs' if kind == 'g' else 'be'}_arrival_dist allows more than one arrival per slot; "
            "the full-queue closed form assumes Bernoulli arrivals")
    return dist[1] if len(dist) > 1 else 0.0


def dropping_probability_paper(phi, config: ScenarioConfig, space: StateSpace) -> tuple[float, float]:
    """Arrival probability times the occupancy of full-queue states, per class."""
    probs = _probs(phi)
    out = []
    for kind, col in (("g", 0), ("b", 1)):
        p_n = single_arrival_prob(config, kind)
        full = space.coords[:, col] == config.queue_capacity(kind)
        out.append(p_n * float(probs[full].sum()))
    return out[0], out[1]


def expected_drops(phi, policy, config: ScenarioConfig, space: StateSpace) -> tuple[float, float]:
    """Expected number of discarded requests per slot, per class.

    Counts overflow after the slot's admissions have freed queue space.
    """
    probs = _probs(phi)
    actions = _actions(policy)
    out = []
    for kind, col in (("g", 0), ("b", 1)):
        cap = config.queue_capacity(kind)
        left = space.coords[:, col] - actions[:, col]
        over = np.zeros(len(space))
        for n, p_n in enumerate(config.arrival_dist(kind)):
            over += p_n * np.maximum(0, left + n - cap)
        out.append(float(probs @ over))
    return out[0], out[1]


def dropping_probability_exact(phi, policy, config: ScenarioConfig,
                               space: StateSpace) -> tuple[float, float]:
    """Per-slot probability that an arriving request is discarded, action-aware.

    With at most one arrival per slot this is P[a request arrives and finds
    the queue full after admissions], directly comparable with the
    full-queue closed form. In general it is the expected drops per slot.
    """
    return expected_drops(phi, policy, config, space)


def drop_fraction(phi, policy, config: ScenarioConfig, space: StateSpace) -> tuple[float, float]:
    """Long-run fraction of arriving requests that are discarded (0 if none arrive)."""
    drops = expected_drops(phi, policy, config, space)
    out = []
    for d, kind in zip(drops, "gb"):
        mean = config.mean_arrivals(kind)
        out.append(d / mean if mean > 0 else 0.0)
    return out[0], out[1]


REPORT_FIELDS = ("scenario_id", "policy", "avg_reward", "gs_drop_paper", "be_drop_paper",
                 "gs_drop_exact", "be_drop_exact", "mean_sg", "mean_sb", "mean_mg", "mean_mb")


@dataclass
class EvaluationReport:
    scenario_id: str
    policy: str
    avg_reward: float
    gs_drop_paper: float
    be_drop_paper: float
    gs_drop_exact: float
    be_drop_exact: float
    mean_sg: float
    mean_sb: float
    mean_mg: float
    mean_mb: float
    gs_drop_fraction: float = 0.0
    be_drop_fraction: float = 0.0

    def row(self) -> dict:
        data = asdict(self)
        return {k: data[k] for k in REPORT_FIELDS}


def evaluate_policy(policy, space: StateSpace, config: ScenarioConfig,
                    scenario_id: str = "scenario", policy_name: str | None = None,
                    initial_index: int | None = None) -> EvaluationReport:
    """Stationary analysis of ``policy`` started from the empty system."""
    P = build_transition_matrix(policy, space, config)
    start = space.empty_index if initial_index is None else initial_index
    phi = stationary_distribution(P, start)
    try:
        gs_literal, be_literal = dropping_probability_paper(phi, config, space)
    except UnsupportedModelError:
        gs_literal = be_literal = float("nan")
    gs_exact, be_exact = dropping_probability_exact(phi, policy, config, space)
    gs_frac, be_frac = drop_fraction(phi, policy, config, space)
    means = phi.probabilities @ space.coords
    return EvaluationReport(
        scenario_id=scenario_id,
        policy=policy_name or getattr(policy, "name", "policy"),
        avg_reward=average_reward(phi, policy, config, space),
        gs_drop_paper=gs_literal, be_drop_paper=be_literal,
        gs_drop_exact=gs_exact, be_drop_exact=be_exact,
        mean_sg=float(means[0]), mean_sb=float(means[1]),
        mean_mg=float(means[2]), mean_mb=float(means[3]),
        gs_drop_fraction=gs_frac, be_drop_fraction=be_frac,
    )
