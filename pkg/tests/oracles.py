"""Independent reference computations used only by the tests.

Nothing here calls the package's transition or solver code; the state and
action enumeration is redone from the constraints directly.
"""
import itertools
import math

import numpy as np

from sliceorch.model import ScenarioConfig, bernoulli


def brute_states(cfg: ScenarioConfig):
    """All (s_g, s_b, m_g, m_b) with resource usage within capacity, by exhaustive search."""
    bound = max(cfg.capacities) + 1
    out = []
    for s_g in range(cfg.gs_queue_capacity + 1):
        for s_b in range(cfg.be_queue_capacity + 1):
            for m_g in range(bound + 1):
                for m_b in range(bound + 1):
                    used = [m_g * dg + m_b * db for dg, db in zip(cfg.gs_demand, cfg.be_demand)]
                    if all(u <= c for u, c in zip(used, cfg.capacities)):
                        out.append((s_g, s_b, m_g, m_b))
    return sorted(out)


def brute_actions(cfg, state):
    s_g, s_b, m_g, m_b = state
    out = []
    for a_g in range(s_g + 1):
        for a_b in range(s_b + 1):
            used = [(m_g + a_g) * dg + (m_b + a_b) * db for dg, db in zip(cfg.gs_demand, cfg.be_demand)]
            if all(u <= c for u, c in zip(used, cfg.capacities)):
                out.append((a_g, a_b))
    return out


def brute_transitions(cfg, state, action):
    """Enumerate every arrival pair and every per-slice departure coin pattern."""
    s_g, s_b, m_g, m_b = state
    a_g, a_b = action
    elig_g = m_g + a_g if cfg.departures_include_new else m_g
    elig_b = m_b + a_b if cfg.departures_include_new else m_b
    out = {}
    for n_g, p1 in enumerate(cfg.gs_arrival_dist):
        for n_b, p2 in enumerate(cfg.be_arrival_dist):
            for coins_g in itertools.product((0, 1), repeat=elig_g):
                pg = math.prod(cfg.gs_departure_prob if c else 1 - cfg.gs_departure_prob for c in coins_g)
                for coins_b in itertools.product((0, 1), repeat=elig_b):
                    pb = math.prod(cfg.be_departure_prob if c else 1 - cfg.be_departure_prob for c in coins_b)
                    nxt = (min(s_g - a_g + n_g, cfg.gs_queue_capacity),
                           min(s_b - a_b + n_b, cfg.be_queue_capacity),
                           m_g + a_g - sum(coins_g), m_b + a_b - sum(coins_b))
                    p = p1 * p2 * pg * pb
                    if p > 0:
                        out[nxt] = out.get(nxt, 0.0) + p
    return out


def finite_horizon_values(cfg, epsilon=1e-8):
    """Backward induction over a horizon long enough that the tail is below epsilon."""
    states = brute_states(cfg)
    index = {s: i for i, s in enumerate(states)}
    g = cfg.discount
    table = []
    r_max = 0.0
    for s in states:
        row = []
        for a in brute_actions(cfg, s):
            r = a[0] * cfg.gs_reward + a[1] * cfg.be_reward
            r_max = max(r_max, abs(r))
            trans = [(index[t], p) for t, p in brute_transitions(cfg, s, a).items()]
            row.append((r, trans))
        table.append(row)
    if r_max == 0:
        horizon = 1
    else:
        horizon = max(1, math.ceil(math.log(epsilon * (1 - g) / r_max) / math.log(g)))
    V = np.zeros(len(states))
    for _ in range(horizon):
        V = np.array([max(r + g * sum(p * V[j] for j, p in trans) for r, trans in row) for row in table])
    return states, V, horizon


def _demand(rng):
    while True:
        d = tuple(int(x) for x in rng.integers(0, 3, size=3))
        if any(d):
            return d


def _dist(rng, n_max):
    if rng.random() < 0.4:
        return bernoulli(float(rng.uniform(0.05, 0.95)))
    return tuple(float(x) for x in rng.dirichlet(np.ones(int(rng.integers(2, n_max + 2)))))


def random_scenario(rng: np.random.Generator, max_states=50) -> ScenarioConfig:
    """Small random scenario with at most ``max_states`` states."""
    while True:
        cfg = ScenarioConfig(
            radio_capacity=int(rng.integers(0, 5)),
            compute_capacity=int(rng.integers(0, 5)),
            storage_capacity=int(rng.integers(0, 5)),
            gs_demand=_demand(rng),
            be_demand=_demand(rng),
            gs_queue_capacity=int(rng.integers(0, 4)),
            be_queue_capacity=int(rng.integers(0, 4)),
            gs_arrival_dist=_dist(rng, 2),
            be_arrival_dist=_dist(rng, 2),
            gs_departure_prob=float(rng.uniform(0.05, 1.0)),
            be_departure_prob=float(rng.uniform(0.05, 1.0)),
            gs_reward=float(rng.uniform(0, 3)),
            be_reward=float(rng.uniform(0, 3)),
            discount=float(rng.uniform(0.5, 0.95)),
            departures_include_new=bool(rng.random() < 0.3),
        )
        if len(brute_states(cfg)) <= max_states:
            return cfg


def chi_square_pvalue(observed_counts: dict, expected_probs: dict, n: int) -> float:
    """Pearson goodness of fit, pooling cells with expected count below 5.

    Any observation outside the support of ``expected_probs`` gives p = 0.
    A distribution with fewer than two cells after pooling has no test
    statistic; if the support check passes the result is NaN.
    """
    from scipy import stats

    if set(observed_counts) - set(expected_probs):
        return 0.0
    obs, exp = [], []
    pool_o = pool_e = 0.0
    for key, p in expected_probs.items():
        if p * n < 5:
            pool_o += observed_counts.get(key, 0)
            pool_e += p * n
        else:
            obs.append(observed_counts.get(key, 0))
            exp.append(p * n)
    if pool_e > 0:
        obs.append(pool_o)
        exp.append(pool_e)
    if len(obs) < 2:
        return math.nan
    exp = np.array(exp)
    exp *= sum(obs) / exp.sum()
    return float(stats.chisquare(obs, exp).pvalue)


def state_lookup(space):
    """Dense array mapping (s_g, s_b, m_g, m_b) to the state index (-1 if invalid)."""
    shape = tuple(int(x) + 1 for x in space.coords.max(axis=0))
    lut = np.full(shape, -1, dtype=np.int64)
    lut[tuple(space.coords.T)] = np.arange(len(space))
    return lut


def goodness_of_fit_family(cfg, space, sample_fn, samples, seed):
    """Chi-squared p-value for every feasible (state, action) pair.

    ``sample_fn(state, action, cfg, size, rng)`` returns an ``(size, 4)`` array.
    """
    rng = np.random.default_rng(seed)
    lut = state_lookup(space)
    pvalues = []
    for s in space:
        for a in brute_actions(cfg, s):
            draws = sample_fn(s, a, cfg, samples, rng)
            if (draws < 0).any() or (draws >= np.array(lut.shape)).any():
                pvalues.append(0.0)
                continue
            idx = lut[tuple(draws.T)]
            counts = np.bincount(idx[idx >= 0], minlength=len(space))
            observed = {int(j): int(c) for j, c in enumerate(counts) if c}
            if (idx < 0).any():
                observed[-1] = int((idx < 0).sum())
            expected = {space.encode(t): p for t, p in brute_transitions(cfg, s, a).items()}
            pvalues.append(chi_square_pvalue(observed, expected, samples))
    return pvalues


def family_passes(pvalues, alpha=0.001):
    """Bonferroni family-wise test plus a uniformity check on the p-values.

    Untestable (NaN) entries are dropped. Returns (passed, detail).
    """
    from scipy import stats

    pvalues = [p for p in pvalues if not math.isnan(p)]
    k = len(pvalues)
    worst = min(pvalues)
    raw_rejects = sum(p < alpha for p in pvalues)
    bonferroni_ok = worst >= alpha / k
    # discrete chi-squared p-values are only approximately uniform; the KS
    # check guards against systematic bias, not single outliers
    ks_p = float(stats.kstest(pvalues, "uniform").pvalue) if k >= 20 else 1.0
    ok = bonferroni_ok and ks_p >= alpha
    return ok, (f"{k} pairs, min p={worst:.2e}, {raw_rejects} below {alpha} uncorrected, "
                f"Bonferroni threshold {alpha / k:.2e}, KS p={ks_p:.3f}")
