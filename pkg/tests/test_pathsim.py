import math
from dataclasses import replace

import numpy as np
import pytest

from repnet import analytics, pathsim
from repnet.hitting import ACTIVE
from repnet.model import (AgentPrior, EconomyParams, EngineConfig, ExtensionConfig, MCConfig, NetworkConstraint,
                          RunConfig)

PR = AgentPrior(2.0, 2.0, 1.0)


def cfg(priors, net, reps=200, seed=3, dt=1e-2, horizon=None, ext=None, cost=1.0, rho=1.0):
    return RunConfig(tuple(priors), net, EconomyParams(cost, rho), ext or ExtensionConfig(),
                     MCConfig(reps, seed, EngineConfig("path", dt, horizon)))


def link_value(run, adj, rho):
    # welfare if every constrained link lasts forever: sum_j (q_j - c) / rho
    return (adj[None] * (run.quality - 1.0)[:, None, :]).sum(axis=2) / rho


def fixed_quality_state(q, B, n):
    z = np.zeros((B, n))
    return pathsim.PathState(0.0, np.full((B, n), q), z.copy(), z.copy(), np.full((B, n), ACTIVE),
                             np.ones((B, n), dtype=np.int64), np.zeros((B, n)))


def run_steps(state, par, dt, nsteps, seed):
    g = np.random.default_rng(seed)
    for _ in range(nsteps):
        state, _ = pathsim.step(state, dt, par, g.standard_normal(state.quality.shape), np.arange(state.quality.shape[0]))
    return state


def test_no_information_means_no_exits():
    c = cfg([replace(PR, tau=1e-12)] * 3, NetworkConstraint.complete(3), horizon=3.0)
    run = pathsim.run_paths(c, np.arange(200))
    assert run.permanent.all()
    np.testing.assert_allclose(run.welfare, link_value(run, c.constraint.adjacency(), 1.0), rtol=1e-9)


def test_known_quality_means_no_exits():
    c = cfg([replace(PR, sigma2=1e-12)] * 3, NetworkConstraint.complete(3), horizon=3.0)
    run = pathsim.run_paths(c, np.arange(200))
    assert run.permanent.all()
    np.testing.assert_allclose(run.welfare, 2.0, rtol=1e-5)


def test_large_subsidy_keeps_everyone():
    c = cfg([PR] * 3, NetworkConstraint.complete(3), horizon=2.0, ext=ExtensionConfig("subsidy", delta=50.0))
    run = pathsim.run_paths(c, np.arange(200))
    assert run.permanent.all()
    np.testing.assert_allclose(run.welfare, link_value(run, c.constraint.adjacency(), 1.0), rtol=1e-9)


def test_empty_constraint_gives_zero_welfare():
    c = cfg([PR] * 3, NetworkConstraint.empty(3), horizon=2.0)
    run = pathsim.run_paths(c, np.arange(100))
    assert np.all(run.welfare == 0.0)
    assert np.isfinite(run.times).any()  # isolated agents still learn


def test_link_formation_at_start():
    hi = AgentPrior(5.0, 1.0, 1.0)
    c = cfg([hi] * 3, NetworkConstraint.empty(3), horizon=0.05, ext=ExtensionConfig("link_formation", gamma=1.0))
    times, events, q = pathsim.run_path(c, 0)
    formed = [(i, j) for _, t, kind, i, j in events if kind == "form" and t == 0.0]
    assert sorted(formed) == [(0, 1), (0, 2), (1, 2)]
    run = pathsim.run_paths(c, np.arange(50))
    assert np.all(run.welfare != 0.0)


def test_posterior_mean_starts_at_prior_and_tracks_signal():
    par = pathsim._Params(cfg([PR] * 2, NetworkConstraint.line(2)))
    st = fixed_quality_state(3.0, 4, 2)
    np.testing.assert_allclose(st.posterior_mean(par.mu, par.sigma2, par.tau), 2.0)
    st = run_steps(st, par, 0.01, 10, 0)
    np.testing.assert_allclose(st.info, 0.1)
    prec = 1 / PR.sigma2 + PR.tau * st.info
    np.testing.assert_allclose(st.posterior_mean(par.mu, par.sigma2, par.tau),
                               (PR.mu / PR.sigma2 + PR.tau * st.signal) / prec)


def test_posterior_mean_is_martingale():
    # threshold far below: nobody leaves; averaged over q and noise the posterior mean stays at mu
    c = cfg([PR] * 2, NetworkConstraint.line(2), cost=-50.0)
    par = pathsim._Params(c)
    B = 20_000
    rng = np.random.default_rng(1)
    st = fixed_quality_state(0.0, B, 2)
    st.quality = PR.mu + PR.sigma * rng.standard_normal((B, 2))
    st = run_steps(st, par, 0.05, 40, 2)
    m = st.posterior_mean(par.mu, par.sigma2, par.tau)
    assert (st.status == ACTIVE).all()
    se = m.std() / math.sqrt(m.size)
    assert abs(m.mean() - PR.mu) < 4 * se


def test_survival_given_quality():
    # isolated agent, rate 1, q = 2: P(never hit) = 1 - exp(-2 a d) = 1 - 1/e
    c = cfg([PR], NetworkConstraint.empty(1))
    par = pathsim._Params(c)
    B = 4000
    st = run_steps(fixed_quality_state(2.0, B, 1), par, 1e-3, 10_000, 5)
    alive = (st.status == ACTIVE).mean()
    p = analytics.survival_probability_given_quality(2.0, PR, 1.0)
    se = math.sqrt(p * (1 - p) / B)
    late = 1 - analytics.finite_time_survival(2.0, 10.0, PR, 1.0) / p if p else 0.0
    # discrete monitoring can only raise survival; allow one grid-bias margin
    assert -4 * se - late <= alive - p <= 4 * se + 0.6 * math.sqrt(1e-3) * 2


def test_hitting_times_match_analytic_law_for_a_pair():
    # pair of agents: while both present each learns at rate 1, same as alone,
    # so each agent's exit time follows the single-agent hitting law
    c = cfg([PR] * 2, NetworkConstraint.line(2), reps=10_000, dt=1e-3, horizon=4.0)
    run = pathsim.run_paths(c, np.arange(10_000))
    t = run.times[:, 0]
    fin = np.sort(t[np.isfinite(t)])
    # compare P(T <= x) with the density integrated to x
    from scipy import integrate
    xs = np.quantile(fin, [0.1, 0.3, 0.5, 0.7, 0.9])
    for x in xs:
        want = integrate.quad(lambda s: float(analytics.hitting_time_pdf_closed(s, PR, 1.0)), 0, x, limit=200)[0]
        got = np.mean(t <= x)
        assert abs(got - want) <= 0.02


def test_grid_time_and_horizon_defaults():
    c = cfg([PR] * 3, NetworkConstraint.complete(3), dt=0.1)
    h = pathsim.default_horizon(c)
    assert analytics.unscaled_residual_mass(h, PR, 1.0) < 0.01
    run = pathsim.run_paths(c, np.arange(5))
    assert run.horizon >= h and run.horizon - h < 0.1 + 1e-9
    with pytest.raises(ValueError):
        pathsim.run_paths(replace(c, mc=MCConfig(5, 3)), np.arange(5))


def test_batching_does_not_change_paths():
    c = cfg([PR] * 3, NetworkConstraint.complete(3), dt=0.02, horizon=2.0)
    whole = pathsim.run_paths(c, np.arange(12)).welfare
    parts = np.vstack([pathsim.run_paths(c, np.arange(s, s + 4)).welfare for s in range(0, 12, 4)])
    assert np.array_equal(whole, parts)


def test_events_csv_and_reentry():
    c = cfg([PR] * 2, NetworkConstraint.line(2), dt=0.01, horizon=5.0, ext=ExtensionConfig("reentry", R=3, L=0.1))
    kinds = set()
    for r in range(40):
        _, ev, _ = pathsim.run_path(c, r)
        kinds |= {e[2] for e in ev}
    assert {"enter", "ostracize", "sever", "reenter"} <= kinds
    _, ev, _ = pathsim.run_path(c, 0)
    text = pathsim.events_csv(ev)
    lines = text.splitlines()
    assert lines[0] == "replication,time,event_type,agent_i,agent_j"
    assert lines[1].split(",")[2] == "enter"
    assert text == pathsim.events_csv(pathsim.run_path(c, 0)[1])


def test_formation_with_high_bar_helps():
    # new links only between agents whose reputations rose well above cost
    from repnet import welfare
    base = cfg([PR] * 3, NetworkConstraint.line(3), reps=2000, seed=5, horizon=6.0)
    formed = replace(base, extension=ExtensionConfig("link_formation", gamma=2.0))
    a = welfare.exante_samples(base).sum(axis=1)
    b = welfare.exante_samples(formed).sum(axis=1)
    d, se = welfare.paired_difference(b, a)
    assert d > 3 * se
