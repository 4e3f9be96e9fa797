import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from repnet import analytics, hitting, welfare
from repnet.experiments import GOLDEN_M
from repnet.hitting import HittingRealization, map_hitting_times, map_hitting_times_batch
from repnet.model import AgentPrior, EconomyParams, ExtensionConfig, MCConfig, NetworkConstraint, RunConfig

PR = AgentPrior(2.0, 2.0, 1.0)


def cfg(n=3, net=None, prior=PR, reps=20_000, seed=1, ext=None):
    return RunConfig((prior,) * n, net or NetworkConstraint.complete(n), EconomyParams(1.0, 1.0),
                     ext or ExtensionConfig(), MCConfig(reps, seed))


# ---------------------------------------------------------------- sampler

def test_quality_below_threshold_always_hit():
    q = np.array([0.2, 0.9, 1.0])
    u = np.array([0.999999, 0.5, 0.999])
    t = hitting.unscaled_times(q, u, 2.0, 2.0, 1.0, 1.0)
    assert np.all(np.isfinite(t))


def test_sampler_inverts_conditional_law():
    q = 1.7
    u = np.random.default_rng(3).uniform(size=20_000)
    t = hitting.unscaled_times(np.full(u.size, q), u, PR.mu, PR.sigma2, PR.tau, 1.0)
    a = (PR.mu - 1.0) / PR.sigma2
    fin = t[np.isfinite(t)]
    hit_mass = math.exp(-2 * a * (q - 1.0))
    assert abs(fin.size / u.size - hit_mass) < 4 * math.sqrt(hit_mass * (1 - hit_mass) / u.size)
    res = stats.kstest(fin, lambda s: analytics.hit_cdf(s, q - 1.0, a) / hit_mass)
    assert res.pvalue > 1e-3


def test_survival_frequency_matches_closed_form():
    c = cfg(reps=200_000)
    _, b = hitting.draw_attempts(c, np.arange(200_000), np.zeros(200_000, int), 0)
    p = analytics.survival_probability(PR, 1.0)
    assert abs(np.isinf(b).mean() - p) < 4 * math.sqrt(p * (1 - p) / b.size)


def test_tau_scaling_under_common_random_numbers():
    reps = np.arange(5000)
    ag = np.zeros(5000, int)
    _, b1 = hitting.draw_attempts(cfg(), reps, ag, 0)
    _, b7 = hitting.draw_attempts(cfg(prior=replace(PR, tau=7.0)), reps, ag, 0)
    assert np.array_equal(np.isinf(b1), np.isinf(b7))
    f = np.isfinite(b1)
    np.testing.assert_allclose(b7[f] * 7.0, b1[f], rtol=1e-8)


# ---------------------------------------------------------------- mapping

@pytest.mark.parametrize("name,budget,net,entry,want", GOLDEN_M, ids=[g[0] for g in GOLDEN_M])
def test_golden_mapping(name, budget, net, entry, want):
    got = map_hitting_times(HittingRealization(budget, "unscaled"), net, entry)
    assert got.kind == "actual"
    assert np.array_equal(got.times, np.array(want))


def test_mapping_rejects_actual_realization():
    with pytest.raises(ValueError):
        map_hitting_times(HittingRealization([1.0], "actual"), NetworkConstraint.empty(1))


def test_empty_network_times_equal_budgets():
    b = np.array([[0.3, np.inf, 2.0]])
    sp = map_hitting_times_batch(b, np.zeros((3, 3)))
    assert np.array_equal(sp.final_end, b)


@st.composite
def instances(draw):
    n = draw(st.integers(1, 5))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True) if pairs else st.just([]))
    budget = draw(st.lists(st.one_of(st.floats(0.01, 10), st.just(math.inf)), min_size=n, max_size=n))
    return NetworkConstraint(n, frozenset(edges)), np.array(budget)


@settings(max_examples=150, deadline=None)
@given(inst=instances())
def test_mapping_invariants(inst):
    net, b = inst
    n = net.n
    t = map_hitting_times_batch(b[None, :], net.adjacency()).final_end[0]
    # finiteness preserved
    assert np.array_equal(np.isinf(t), np.isinf(b))
    f = np.isfinite(b)
    # rate between 1 and the degree in the constraint
    deg = np.maximum(net.adjacency().sum(1), 1)
    assert np.all(t[f] <= b[f] * (1 + 1e-12))
    assert np.all(t[f] >= b[f] / deg[f] * (1 - 1e-12))
    # relabelling agents relabels the times
    perm = np.random.default_rng(n).permutation(n)
    inv = np.argsort(perm)
    pnet = NetworkConstraint(n, frozenset(tuple(sorted((int(inv[i]), int(inv[j])))) for i, j in net.edges))
    tp = map_hitting_times_batch(b[perm][None, :], pnet.adjacency()).final_end[0]
    np.testing.assert_allclose(tp, t[perm], rtol=1e-12)
    # uniform budget scaling scales the times
    t3 = map_hitting_times_batch(3.0 * b[None, :], net.adjacency()).final_end[0]
    np.testing.assert_allclose(t3, 3.0 * t, rtol=1e-12)


@settings(max_examples=100, deadline=None)
@given(b1=st.floats(0.05, 5), b2=st.floats(0.05, 5), b3=st.floats(0.05, 5), extra=st.floats(0.01, 3))
def test_longer_lived_neighbour_speeds_up_exit(b1, b2, b3, extra):
    # line 0-1-2: the middle agent's exit is weakly earlier when a neighbour stays longer
    adj = NetworkConstraint.line(3).adjacency()
    base = map_hitting_times_batch(np.array([[b1, b2, b3]]), adj).final_end[0]
    more = map_hitting_times_batch(np.array([[b1 + extra, b2, b3]]), adj).final_end[0]
    assert more[1] <= base[1] * (1 + 1e-12)


def test_batch_matches_single_realizations():
    rng = np.random.default_rng(9)
    b = rng.exponential(size=(50, 4))
    b[rng.uniform(size=b.shape) < 0.3] = np.inf
    adj = NetworkConstraint.ring(4).adjacency()
    batch = map_hitting_times_batch(b, adj).final_end
    for k in range(50):
        one = map_hitting_times(HittingRealization(b[k], "unscaled"), NetworkConstraint.ring(4)).times
        assert np.array_equal(one, batch[k])


def test_connected_survivors_frequency():
    # on a connected constraint, the final network is the survivors' induced subgraph
    c = cfg(n=4, net=NetworkConstraint.line(4), reps=100_000)
    sp = hitting.sample_spells(c, np.arange(100_000))
    surv = np.isinf(sp.final_end)
    p = analytics.survival_probability(PR, 1.0)
    assert abs(surv.mean() - p) < 4 * math.sqrt(p * (1 - p) / surv.size)
    both = (surv[:, 1] & surv[:, 2]).mean()
    assert abs(both - p * p) < 4 * math.sqrt(p * p / surv.shape[0])


# ---------------------------------------------------------------- re-entry

def test_reentry_single_attempt_is_bit_identical():
    c = cfg()
    a = hitting.sample_spells(c, np.arange(3000))
    b = hitting.sample_spells(replace(c, extension=ExtensionConfig("reentry", R=1, L=0.7)), np.arange(3000))
    assert np.array_equal(a.end, b.end) and np.array_equal(a.quality, b.quality)


def test_reentry_exclusion_frequency():
    R = 3
    c = cfg(n=2, net=NetworkConstraint.line(2), reps=100_000, ext=ExtensionConfig("reentry", R=R, L=0.2))
    sp = hitting.sample_spells(c, np.arange(100_000))
    excluded = np.isfinite(sp.final_end)
    p = 1 - analytics.reentry_survival_probability(PR, 1.0, R)
    assert abs(excluded.mean() - p) < 4 * math.sqrt(p * (1 - p) / excluded.size)
    assert sp.attempts.max() <= R
    # each new attempt starts L after the previous one ended
    two = sp.attempts[:, 0] >= 2
    np.testing.assert_allclose(sp.start[two, 0, 1] - sp.end[two, 0, 0], 0.2, rtol=0, atol=1e-9)


# ---------------------------------------------------------------- determinism, export

def test_thread_count_does_not_change_samples():
    c = cfg(reps=20_000)
    a = welfare.exante_samples(c, threads=1)
    b = welfare.exante_samples(c, threads=4)
    assert np.array_equal(a, b)


def test_sampling_is_chunk_independent():
    c = cfg()
    whole = hitting.sample_spells(c, np.arange(100)).final_end
    parts = np.vstack([hitting.sample_spells(c, np.arange(s, s + 10)).final_end for s in range(0, 100, 10)])
    assert np.array_equal(whole, parts)


def test_realization_and_csv():
    c = cfg()
    q, un, act = hitting.sample_realization(c, 5)
    assert un.kind == "unscaled" and act.kind == "actual"
    assert np.array_equal(np.isinf(un.times), np.isinf(act.times))
    text = hitting.realizations_csv(c, 4)
    lines = text.splitlines()
    assert lines[0] == "replication,agent,quality,unscaled_t,actual_t,attempts"
    assert len(lines) == 1 + 4 * 3
    assert text == hitting.realizations_csv(c, 4)
