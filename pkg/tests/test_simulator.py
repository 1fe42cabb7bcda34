from collections import Counter

import numpy as np
import pytest

from oracles import chi_square_pvalue, family_passes, goodness_of_fit_family, random_scenario
from sliceorch.analysis import evaluate_policy
from sliceorch.errors import ContractViolation
from sliceorch.model import enumerate_states, transition_distribution
from sliceorch.simulator import (STREAMS, TRACE_FIELDS, SimulationSettings, SlotRandom,
                                 sample_next_states, simulate, step)
from sliceorch.solver import greedy_policy, value_iteration


def test_reject_all_without_arrivals_is_silent(base):
    cfg = base.replace(gs_arrival_dist=(1.0, 0.0), be_arrival_dist=(1.0, 0.0))
    space = enumerate_states(cfg)
    m = simulate(cfg, np.zeros((len(space), 2), dtype=int), SimulationSettings(5000, 0, 1), space)
    assert m.avg_reward == 0
    for counter in (m.arrivals, m.admissions, m.drops, m.departures):
        assert counter == {"g": 0, "b": 0}


def test_certain_departure(base):
    cfg = base.replace(gs_departure_prob=1.0, be_departure_prob=1.0)
    rng = SlotRandom(3)
    for _ in range(200):
        nxt, rec = step((0, 0, 1, 1), (0, 0), rng, cfg)
        assert (nxt.m_g, nxt.m_b) == (0, 0)
        assert (rec.departures_g, rec.departures_b) == (1, 1)


def test_new_slice_survives_admission_slot(base):
    cfg = base.replace(gs_departure_prob=1.0)
    rng = SlotRandom(4)
    for _ in range(200):
        nxt, rec = step((1, 0, 0, 0), (1, 0), rng, cfg)
        assert nxt.m_g == 1
        assert rec.reward == 1.553


def test_step_rejects_infeasible(base):
    with pytest.raises(ContractViolation):
        step((0, 0, 0, 0), (1, 0), SlotRandom(0), base)


def test_step_empirical_frequency(base):
    rng = SlotRandom(2024)
    n = 10**6
    hits = sum(1 for _ in range(n) if step((0, 0, 0, 0), (0, 0), rng, base)[0] == (1, 1, 0, 0))
    assert abs(hits / n - 0.2975) < 0.002


def test_substream_layout():
    # documented contract: SeedSequence(seed).spawn(4) in STREAMS order, PCG64, blocks of doubles
    seed = 123456789
    rng = SlotRandom(seed)
    children = np.random.SeedSequence(seed).spawn(4)
    for name, ss in zip(STREAMS, children):
        ref = np.random.Generator(np.random.PCG64(ss)).random(3).tolist()
        assert [rng.streams[name].next() for _ in range(3)] == ref


def test_chi_square_every_default_pair(base, base_space):
    pvalues = goodness_of_fit_family(base, base_space, sample_next_states, 10**5, seed=77)
    assert len(pvalues) > 300
    ok, detail = family_passes(pvalues)
    assert ok, detail


def test_step_matches_distribution_on_sample_pairs(base, base_space):
    rng = SlotRandom(99)
    n = 10**5
    for s, a in [((2, 3, 1, 0), (0, 1)), ((4, 4, 0, 0), (1, 1)), ((0, 1, 0, 2), (0, 0))]:
        observed = Counter(base_space.encode(step(s, a, rng, base)[0]) for _ in range(n))
        expected = transition_distribution(s, a, base, base_space).as_dict()
        assert chi_square_pvalue(observed, expected, n) > 0.001


def test_seed_determinism(base, base_space, base_optimal):
    settings = SimulationSettings(20000, 200, 42)
    a = simulate(base, base_optimal, settings, base_space)
    b = simulate(base, base_optimal, settings, base_space)
    assert a.row() == b.row()
    c = simulate(base, base_optimal, SimulationSettings(20000, 200, 43), base_space)
    assert c.row() != a.row()


@pytest.mark.parametrize("seed", range(6))
def test_conservation_ledger(seed):
    cfg = random_scenario(np.random.default_rng(500 + seed))
    space = enumerate_states(cfg)
    policy = value_iteration(space, cfg) if seed % 2 else greedy_policy(space, cfg)
    m = simulate(cfg, policy, SimulationSettings(20000, 137 * seed, seed), space)
    assert m.ledger_balanced()
    for t in "gb":
        assert 0 <= m.drop_fraction(t) <= 1


def test_trace_rows(base, base_space, base_greedy):
    rows = []
    m = simulate(base, base_greedy, SimulationSettings(500, 10, 5), base_space, trace=rows.append)
    assert len(rows) == 500
    assert all(len(r) == len(TRACE_FIELDS) for r in rows)
    assert [r[0] for r in rows] == list(range(500))
    window = rows[10:]
    assert sum(r[7] for r in window) == m.arrivals["g"]
    assert sum(r[10] for r in window) == m.drops["b"]
    # each row's successor is the next row's state
    for r, nxt in zip(rows, rows[1:]):
        assert nxt[3] == r[3] + r[5] - r[11]


def test_missing_state_in_mapping(base):
    with pytest.raises(ContractViolation, match="no action"):
        simulate(base, {(0, 0, 0, 0): (0, 0)}, SimulationSettings(100, 0, 0))


def test_infeasible_action_in_mapping(base, base_space):
    table = {s: (0, 0) for s in base_space}
    table[(1, 0, 0, 0)] = (2, 0)
    table[(1, 1, 0, 0)] = (2, 0)
    with pytest.raises(ContractViolation, match="infeasible"):
        simulate(base, table, SimulationSettings(1000, 0, 0))


def test_settings_validation():
    assert SimulationSettings(1000).warmup == 10
    with pytest.raises(ValueError):
        SimulationSettings(0)
    with pytest.raises(ValueError):
        SimulationSettings(10, 10)
    with pytest.raises(ValueError):
        SimulationSettings(10, 0, -1)


@pytest.mark.parametrize("which", ["optimal", "greedy"])
def test_average_reward_within_three_standard_errors(base, base_space, base_optimal, base_greedy, which):
    policy = base_optimal if which == "optimal" else base_greedy
    analytic = evaluate_policy(policy, base_space, base).avg_reward
    m = simulate(base, policy, SimulationSettings(200_000, 2000, 11), base_space)
    assert abs(m.avg_reward - analytic) < 3 * m.reward_stderr


def test_goodness_of_fit_detects_a_biased_sampler(base, base_space):
    skewed = base.replace(gs_departure_prob=0.37)

    def biased(s, a, cfg, size, rng):
        return sample_next_states(s, a, skewed, size, rng)

    pvalues = goodness_of_fit_family(base, base_space, biased, 10**5, seed=78)
    assert not family_passes(pvalues)[0]
