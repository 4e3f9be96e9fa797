"""Acceptance experiments, shared by the CLI ``acceptance`` command and the test-suite.

Each ``criterion_<k>`` returns a :class:`CriterionResult` holding a pass flag,
human-readable detail lines and the CSV outputs it produced.  Wall time is
measured around the whole experiment and compared with its limit.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import simpson

from . import analytics, hitting, pathsim, welfare
from .model import (AgentPrior, EconomyParams, EngineConfig, ExtensionConfig, MCConfig,
                    NetworkConstraint, RunConfig, config_to_dict)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    elapsed: float
    limit: float
    details: list = field(default_factory=list)
    outputs: dict = field(default_factory=dict)  # file name -> CSV text

    @property
    def ok(self):
        return self.passed and self.elapsed < self.limit

    def line(self):
        tag = "PASS" if self.ok else "FAIL"
        return f"[{tag}] criterion {self.number}: {self.title} ({self.elapsed:.1f}s / {self.limit:.0f}s)"

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in self.outputs.items():
            (out / name).write_text(text)


def _num(x):
    return welfare._num(x)


def _table(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_num(x) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


def _timed(number, title, limit, body):
    t0 = time.perf_counter()
    passed, details, outputs = body()
    return CriterionResult(number, title, bool(passed), time.perf_counter() - t0, limit, details, outputs)


# ----------------------------------------------------------------- configs
# Scenario definitions double as the JSON configs shipped under configs/.

def triangle_config(replications=100_000, seed=12):
    pr = AgentPrior(2.0, 2.0, 1.0)
    return RunConfig((pr,) * 3, NetworkConstraint.complete(3), EconomyParams(1.0, 1.0),
                     mc=MCConfig(replications, seed))


def star_config(replications=100_000, seed=5):
    per = AgentPrior(2.0, 2.0, 1.0)
    center = AgentPrior(2.0, 2.0, 1.0)
    exp = {"periphery": {"mu": 2.0, "sigma2": 2.0, "tau": 1.0}, "center_sigma2": 2.0, "n_periphery": 5,
           "mu_grid": [2.0, 2.125, 2.25, 2.375, 2.5], "tau_grid": [0.5, 1.0, 2.0, 4.0],
           "mu_sweep_tau": 1.0, "tau_sweep_mu": 2.0}
    return RunConfig((center,) + (per,) * 5, NetworkConstraint.star(6), EconomyParams(1.0, 1.0),
                     mc=MCConfig(replications, seed), experiment=exp)


def ring_config(replications=500_000, seed=3):
    pr = AgentPrior(1.25, 1.0, 1.0)
    return RunConfig((pr,) * 3, NetworkConstraint.ring(3), EconomyParams(1.0, 1.0),
                     mc=MCConfig(replications, seed), experiment={"sizes": [3, 4, 5, 6]})


def relay_fixture(tau0=1.0, replications=20_000, seed=31, K=12):
    """Relay network where a neighbour's faster learning hurts agent 1.

    Agents 0 and 1 are linked and share K - 3 weak neighbours; agent 1 also
    holds a link to agent 2, whose quality is known and high.
    """
    edges = {(0, 1), (1, 2)} | {(0, k) for k in range(3, K)} | {(1, k) for k in range(3, K)}
    pri = ((AgentPrior(1.5, 1.0, tau0), AgentPrior(1.5, 1.0, 1.0), AgentPrior(10.0, 1e-12, 1.0))
           + (AgentPrior(1.2, 1.0, 1.0),) * (K - 3))
    return RunConfig(pri, NetworkConstraint(K, frozenset(edges)), EconomyParams(1.0, 0.5),
                     mc=MCConfig(replications, seed))


def core_periphery_config(replications=100_000, seed=7):
    hi = AgentPrior(7.0, 1.0, 1.0)
    lo = AgentPrior(1.1, 1.0, 1.0)
    exp = {"topologies": [{"name": "complete", "kind": "complete"},
                          {"name": "core_periphery", "kind": "core_periphery", "core": [0, 1]}]}
    return RunConfig((hi, hi, lo, lo, lo, lo), NetworkConstraint.complete(6), EconomyParams(1.0, 1.0),
                     mc=MCConfig(replications, seed), experiment=exp)


def subsidy_config(replications=1_000_000, seed=11):
    pr = AgentPrior(1.5, 1.0, 1.0)
    return RunConfig((pr,) * 3, NetworkConstraint.complete(3), EconomyParams(1.0, 1.0),
                     ExtensionConfig("subsidy", delta=0.0), MCConfig(replications, seed),
                     experiment={"delta_grid": [0.0, 0.5, 1.0, 1.5, 2.0, 2.5]})


def entry_config(replications=80_000, seed=13):
    high = AgentPrior(100.0, 20.0, 1.0)
    mid = AgentPrior(1.0, 20.0, 1.0)
    grid = [round(0.0005 + 0.05 * k, 4) for k in range(40)]
    return RunConfig((high, mid, mid), NetworkConstraint.line(3), EconomyParams(0.0, 1.0),
                     ExtensionConfig("entry"), MCConfig(replications, seed),
                     experiment={"agent": 2, "entry_grid": grid})


def reentry_config(replications=20_000, seed=17):
    pr = AgentPrior(2.0, 2.0, 1.0)
    exp = {"R_grid": [20], "L_grid": [0.01], "tau_scale_grid": [1.0, 2.0],
           "topologies": [{"name": "complete", "kind": "complete"}, {"name": "star", "kind": "star"}]}
    return RunConfig((pr,) * 4, NetworkConstraint.complete(4), EconomyParams(1.0, 1.0),
                     ExtensionConfig("reentry", R=20, L=0.01), MCConfig(replications, seed), experiment=exp)


def path_config(replications=20_000, seed=19, dt=1e-3):
    cfg = triangle_config(replications, seed)
    return cfg.with_mc(engine=EngineConfig("path", dt, None))


SCENARIOS = {
    "triangle": triangle_config,
    "star_sweep": star_config,
    "ring_compare": ring_config,
    "core_periphery": core_periphery_config,
    "subsidy_sweep": subsidy_config,
    "entry_sweep": entry_config,
    "reentry_sweep": reentry_config,
    "path_check": path_config,
}


def write_configs(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, make in SCENARIOS.items():
        (out / f"{name}.json").write_text(json.dumps(config_to_dict(make()), indent=2) + "\n")


# ----------------------------------------------------------------- 1..5

def criterion_1(threads=1):
    def body():
        rows, worst = [], 0.0
        for mu in np.linspace(1.5, 6.0, 5):
            for sigma in np.linspace(0.5, 3.0, 5):
                for c in (0.0, 0.5, 1.0, 1.4):
                    pr = AgentPrior(float(mu), float(sigma) ** 2, 1.0)
                    a = analytics.survival_probability(pr, c)
                    b = analytics.survival_probability_quadrature(pr, c)
                    worst = max(worst, abs(a - b))
                    rows.append((float(mu), float(sigma), c, a, b))
        out = {"c1_survival_grid.csv": _table(["mu", "sigma", "cost", "closed_form", "quadrature"], rows)}
        return worst < 1e-6, [f"{len(rows)} grid points, max |closed - quadrature| = {worst:.3e}"], out
    return _timed(1, "closed-form vs quadrature survival probability", 1.0, body)


def pdf_mass(prior, cost, points=240, lo=-8.0, hi=12.0):
    """Integral of the hitting-time density over t in [10^lo, 10^hi] (Simpson in log t) plus the
    analytic t^{-1/2} tail beyond 10^hi."""
    x = np.linspace(lo * math.log(10), hi * math.log(10), points + 1)
    t = np.exp(x)
    f = np.array([analytics.hitting_time_pdf(float(ti), prior, cost) for ti in t]) * t
    body = simpson(f, x=x)
    # beyond T the density is ~ (mu-c)/(sigma2 sqrt(tau)) phi(...) t^{-3/2}
    T = t[-1]
    tail = 2.0 * float(analytics.hitting_time_pdf_closed(T, prior, cost)) * T
    return body + tail


PDF_POINTS = [(2.0, 2.0, 1.0, 1.0), (2.0, 2.0, 0.1, 1.0), (2.0, 2.0, 10.0, 1.0), (1.2, 1.0, 1.0, 1.0),
              (3.0, 0.5, 1.0, 1.0), (5.0, 4.0, 2.0, 0.0), (1.1, 0.2, 1.0, 1.0), (4.0, 9.0, 0.5, 2.0),
              (2.5, 1.0, 3.0, 0.5), (1.5, 3.0, 1.0, 0.0)]


def criterion_2(threads=1):
    def body():
        rows, worst = [], 0.0
        for mu, s2, tau, c in PDF_POINTS:
            pr = AgentPrior(mu, s2, tau)
            m = pdf_mass(pr, c)
            p = analytics.survival_probability(pr, c)
            worst = max(worst, abs(m + p - 1.0))
            rows.append((mu, s2, tau, c, m, p, m + p))
        out = {"c2_pdf_mass.csv": _table(["mu", "sigma2", "tau", "cost", "pdf_mass", "p_survive", "total"], rows)}
        return worst < 1e-4, [f"max |pdf mass + P(S) - 1| = {worst:.3e} over {len(rows)} points"], out
    return _timed(2, "hitting-time density normalisation", 10.0, body)


def criterion_3(threads=1, replications=100_000):
    def body():
        rows, freqs = [], []
        for k, tau in enumerate((0.1, 1.0, 10.0)):
            pr = AgentPrior(2.0, 2.0, tau)
            cfg = RunConfig((pr,) * 3, NetworkConstraint.complete(3), EconomyParams(1.0, 1.0),
                            mc=MCConfig(replications, 101 + k))
            alive = welfare.run_chunked(lambda r: np.isinf(hitting.sample_spells(cfg, r).final_end),
                                        replications, threads)
            f = alive.mean()
            se = alive.std(ddof=1) / math.sqrt(alive.size)
            freqs.append((tau, f, se))
            rows.append((tau, f, se, alive.size))
        ok, det = True, []
        for i in range(3):
            for j in range(i + 1, 3):
                d = abs(freqs[i][1] - freqs[j][1])
                s = math.hypot(freqs[i][2], freqs[j][2])
                ok &= d <= 3 * s
                det.append(f"tau {freqs[i][0]} vs {freqs[j][0]}: |diff| = {d:.5f}, 3 s.e. = {3 * s:.5f}")
        p = analytics.survival_probability(AgentPrior(2.0, 2.0, 1.0), 1.0)
        det.append(f"closed form P(S) = {p:.6f}")
        out = {"c3_tau_invariance.csv": _table(["tau", "survival_freq", "stderr", "draws"], rows)}
        return ok, det, out
    return _timed(3, "survival frequency invariant to tau", 30.0, body)


def criterion_4(threads=1):
    def body():
        pr = [AgentPrior(2.0, 2.0, 1.0), AgentPrior(1.7, 1.0, 2.0), AgentPrior(3.0, 4.0, 0.5)]
        cost = 1.0
        d = analytics.enumerate_stable_networks(NetworkConstraint.complete(3), pr, cost)
        p = [analytics.survival_probability(x, cost) for x in pr]
        q = [1 - x for x in p]
        empty = q[0] * q[1] * q[2] + p[0] * q[1] * q[2] + q[0] * p[1] * q[2] + q[0] * q[1] * p[2]
        e_err = abs(d.probability(()) - empty)
        s_err = abs(d.total() - 1.0)
        det = [f"{len(d)} stable networks", f"|sum - 1| = {s_err:.2e}", f"|empty - formula| = {e_err:.2e}"]
        return len(d) == 5 and s_err < 1e-9 and e_err < 1e-12, det, {"c4_stable_networks.csv": d.to_csv()}
    return _timed(4, "triangle stable-network enumeration", 1.0, body)


GOLDEN_M = [
    ("pair", [2.0, math.inf], NetworkConstraint.line(2), None, [2.0, math.inf]),
    ("line", [math.inf, 2.0, math.inf], NetworkConstraint.line(3), None, [math.inf, 1.0, math.inf]),
    ("triangle", [3.0, 1.0, math.inf], NetworkConstraint.complete(3), None, [2.5, 0.5, math.inf]),
    ("entry", [0.5, math.inf], NetworkConstraint.line(2), [0.0, 1.0], [1.5, math.inf]),
]


def brute_force_mapping(budget, adj, entry, dt):
    """Fixed-step consumption simulation, vectorised over instances.

    ``budget`` (K, n) with inf allowed, ``adj`` (K, n, n), ``entry`` (K, n).
    An agent is ostracized at the first grid time its remaining budget is <= 0.
    """
    budget = budget.copy()
    K, n = budget.shape
    out = np.full((K, n), np.inf)
    adjf = adj.astype(float)
    gone = np.zeros((K, n), dtype=bool)
    s = 0
    while True:
        t = s * dt
        present = (entry <= t + 1e-12) & ~gone
        waiting = entry > t + 1e-12
        if not (present & np.isfinite(budget)).any() and not waiting.any():
            break
        k = np.matmul(adjf, present[..., None].astype(float))[..., 0]
        pend = np.matmul(adjf, waiting[..., None].astype(float))[..., 0] > 0
        rate = np.where(k > 0, k, np.where(pend, 0.0, 1.0)) * present
        budget = budget - rate * dt
        hit = present & (budget <= 1e-9)
        if hit.any():
            out[hit] = t + dt
            gone |= hit
        s += 1
    return out


def random_mapping_instances(count=500, seed=2024):
    """Random N <= 4 constraints with budgets and entry times on a 1/8 grid."""
    g = np.random.default_rng(seed)
    inst = []
    for _ in range(count):
        n = int(g.integers(2, 5))
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        keep = g.random(len(pairs)) < 0.6
        net = NetworkConstraint(n, frozenset(p for p, k in zip(pairs, keep) if k))
        b = g.integers(1, 17, n) / 8.0
        b = np.where(g.random(n) < 0.25, np.inf, b)
        e = np.where(g.random(n) < 0.3, g.integers(1, 9, n) / 8.0, 0.0)
        inst.append((net, b, e))
    return inst


def criterion_5(threads=1, dt=1e-5, count=500):
    def body():
        rows, ok, det = [], True, []
        for name, b, net, e, want in GOLDEN_M:
            got = hitting.map_hitting_times(hitting.HittingRealization(b, "unscaled"), net, e).times
            match = np.array_equal(got, np.array(want))
            ok &= match
            det.append(f"golden {name}: {[float(x) for x in got]} {'==' if match else '!='} {want}")
        inst = random_mapping_instances(count)
        # pad to 4 agents with isolated never-ostracized agents so one batch covers all sizes
        K = len(inst)
        B = np.full((K, 4), np.inf)
        E = np.zeros((K, 4))
        A = np.zeros((K, 4, 4), dtype=bool)
        for k, (net, b, e) in enumerate(inst):
            B[k, :net.n], E[k, :net.n], A[k, :net.n, :net.n] = b, e, net.adjacency()
        bf = brute_force_mapping(B, A, E, dt)
        worst = 0.0
        for k, (net, b, e) in enumerate(inst):
            m = hitting.map_hitting_times(hitting.HittingRealization(b, "unscaled"), net, e).times
            ref = bf[k, :net.n]
            same_inf = np.array_equal(np.isinf(m), np.isinf(ref))
            fin = np.isfinite(m)
            err = float(np.max(np.abs(m[fin] - ref[fin]), initial=0.0)) if same_inf else math.inf
            worst = max(worst, err)
            rows.append((k, net.n, ";".join(f"{i}-{j}" for i, j in net.sorted_edges()),
                         " ".join(_num(x) for x in b), " ".join(_num(x) for x in e),
                         " ".join(_num(x) for x in m), " ".join(_num(x) for x in ref), err))
        rows.sort()
        ok &= worst <= 2 * dt
        det.append(f"brute force dt={dt:g} on {count} instances: max |M - brute| = {worst:.3e} (limit {2 * dt:.1e})")
        out = {"c5_mapping_bruteforce.csv": _table(
            ["instance", "n", "edges", "unscaled", "entry", "mapped", "brute_force", "abs_err"], rows)}
        return ok, det, out
    return _timed(5, "mapping golden cases and brute-force equivalence", 60.0, body)


# ----------------------------------------------------------------- 6..13

def random_welfare_configs(count=20, seed=606, replications=100_000):
    """Connected random constraints with N <= 6 and heterogeneous priors."""
    g = np.random.default_rng(seed)
    out = []
    for k in range(count):
        n = int(g.integers(2, 7))
        edges = set()
        for i in range(1, n):  # random spanning tree keeps every agent linked
            j = int(g.integers(0, i))
            edges.add((j, i))
        for i in range(n):
            for j in range(i + 1, n):
                if g.random() < 0.3:
                    edges.add((i, j))
        cost = float(g.uniform(0.0, 1.0))
        pri = []
        for _ in range(n):
            s2 = float(g.uniform(0.5, 3.0))
            # (mu - c) / sigma in [0.3, 1.5]: ostracism is a live risk for every agent
            pri.append(AgentPrior(cost + float(g.uniform(0.3, 1.5)) * math.sqrt(s2), s2, float(g.uniform(0.2, 3.0))))
        pri = tuple(pri)
        econ = EconomyParams(cost, float(g.uniform(0.3, 2.0)))
        out.append(RunConfig(pri, NetworkConstraint(n, frozenset(edges)), econ,
                             mc=MCConfig(replications, 6000 + k)))
    return out


def criterion_6(threads=1, replications=100_000):
    def body():
        rows, ok, worst = [], True, math.inf
        for k, cfg in enumerate(random_welfare_configs(replications=replications)):
            est = welfare.exante_welfare(cfg, threads)
            _, star = welfare.no_learning_welfare(cfg.constraint, cfg.priors, cfg.econ)
            for i in range(cfg.n):
                gap = star[i] - est.per_agent[i]
                z = gap / est.per_agent_stderr[i]
                worst = min(worst, z)
                ok &= z > 3
                rows.append((k, i, cfg.n, est.per_agent[i], est.per_agent_stderr[i], star[i], z))
        det = [f"{len(rows)} agents over 20 configs; smallest (W* - W)/s.e. = {worst:.2f}"]
        out = {"c6_learning_loss.csv": _table(
            ["config", "agent", "n", "welfare_mean", "welfare_stderr", "no_learning", "z"], rows)}
        return ok, det, out
    return _timed(6, "learning lowers every agent's welfare", 300.0, body)


def _adjacent(sw, order, z, det, label):
    ok = True
    for a, b in zip(order[:-1], order[1:]):
        d, se = sw.diff(b, a)
        ok &= d > z * se
        det.append(f"{label} {sw.points[a]} -> {sw.points[b]}: diff {d:.5f}, {d / se:.1f} s.e.")
    return ok


def criterion_7(threads=1):
    def body():
        cfg = star_config()
        x = cfg.experiment
        per = AgentPrior(**x["periphery"])
        econ, mc = cfg.econ, cfg.mc
        s_mu = welfare.star_sweep(per, [(m, x["mu_sweep_tau"]) for m in x["mu_grid"]], x["center_sigma2"],
                                  econ, mc, x["n_periphery"], threads)
        s_tau = welfare.star_sweep(per, [(x["tau_sweep_mu"], t) for t in reversed(x["tau_grid"])],
                                   x["center_sigma2"], econ, mc, x["n_periphery"], threads)
        det = []
        ok = _adjacent(s_mu, list(range(len(x["mu_grid"]))), 2, det, "mu up")
        ok &= _adjacent(s_tau, list(range(len(x["tau_grid"]))), 2, det, "tau down")
        return ok, det, {"c7_star_mu.csv": s_mu.to_csv(), "c7_star_tau.csv": s_tau.to_csv()}
    return _timed(7, "star welfare rises in center mean, falls in center precision", 300.0, body)


def criterion_8(threads=1):
    def body():
        cfg = ring_config()
        sizes = cfg.experiment["sizes"]
        sw = welfare.ring_compare(cfg.priors[0], cfg.econ, sizes, cfg.mc, threads)
        idx = {n: k for k, n in enumerate(sizes)}
        det, ok = [], True
        for hi, lo in [(3, 4), (3, 5), (5, 6), (6, 4)]:
            d, se = sw.diff(idx[hi], idx[lo])
            ok &= d > 3 * se
            det.append(f"W({hi}) - W({lo}) = {d:.3e}, {d / se:.1f} s.e.")
        return ok, det, {"c8_ring.csv": sw.to_csv()}
    return _timed(8, "ring of 3 best; odd/even ordering W(3)>W(5)>W(6)>W(4)", 300.0, body)


def _topologies(entries, n):
    out, names = [], []
    for t in entries:
        kind = t.get("kind", "edges")
        if kind == "complete":
            net = NetworkConstraint.complete(n)
        elif kind == "star":
            net = NetworkConstraint.star(n, t.get("center", 0))
        elif kind == "ring":
            net = NetworkConstraint.ring(n)
        elif kind == "line":
            net = NetworkConstraint.line(n)
        elif kind == "empty":
            net = NetworkConstraint.empty(n)
        elif kind == "core_periphery":
            net = NetworkConstraint.core_periphery(n, t["core"])
        elif kind == "edges":
            net = NetworkConstraint(n, frozenset(tuple(e) for e in t["edges"]))
        else:
            raise ValueError(f"unknown topology kind {kind!r}")
        out.append(net)
        names.append(t.get("name", kind))
    return out, names


def criterion_9(threads=1):
    def body():
        cfg = core_periphery_config()
        nets, names = _topologies(cfg.experiment["topologies"], cfg.n)
        rk = welfare.compare_topologies(cfg.priors, cfg.econ, nets, cfg.mc, threads=threads, names=names)
        top = rk[0]
        other = rk[1]
        ok = top.name == "core_periphery" and -other.gap > 3 * other.paired_stderr
        det = [f"{r.name}: {r.estimate}" for r in rk]
        det.append(f"core_periphery - complete = {-other.gap:.4f}, {-other.gap / other.paired_stderr:.1f} s.e.")
        return ok, det, {"c9_core_periphery.csv": welfare.ranking_csv(rk)}
    return _timed(9, "core-periphery beats complete for two-type agents", 300.0, body)


def criterion_10(threads=1):
    def body():
        cfg = subsidy_config()
        grid = cfg.experiment["delta_grid"]
        sw = welfare.subsidy_sweep(cfg, grid, threads)
        star, _ = welfare.no_learning_welfare(cfg.constraint, cfg.priors, cfg.econ)
        det, ok = [], True
        m0, s0 = sw.estimate(0)
        ok &= star - m0 > 3 * s0
        det.append(f"W* - W(0) = {star - m0:.4f}, {(star - m0) / s0:.1f} s.e.")
        top = list(range(len(grid) - 3, len(grid)))
        mL, sL = sw.estimate(top[-1])
        ok &= mL - star > 3 * sL
        det.append(f"W(delta={grid[top[-1]]}) - W* = {mL - star:.5f}, {(mL - star) / sL:.1f} s.e.")
        for a, b in zip(top[:-1], top[1:]):
            # both above W*, so |W - W*| shrinking means W(a) - W(b) > 0
            d, se = sw.diff(a, b)
            ma, sa = sw.estimate(a)
            ok &= d > 3 * se and ma - star > 3 * sa
            det.append(f"|W-W*| at delta {grid[a]} minus at {grid[b]} = {d:.5f}, {d / se:.1f} s.e.")
        return ok, det, {"c10_subsidy.csv": sw.to_csv()}
    return _timed(10, "subsidy: W(0) < W* < W(delta), gap closing", 300.0, body)


def criterion_11(threads=1):
    def body():
        cfg = entry_config()
        x = cfg.experiment
        sw = welfare.entry_sweep(cfg, x["agent"], x["entry_grid"], threads)
        m = sw.means()
        k = int(np.argmax(m))
        det = [f"maximum at e = {x['entry_grid'][k]}"]
        ok = 0 < k < len(m) - 1
        for end in (0, len(m) - 1):
            d, se = sw.diff(k, end)
            ok &= d > 3 * se
            det.append(f"W(e*) - W(e={x['entry_grid'][end]}) = {d:.4f}, {d / se if se > 0 else math.inf:.1f} s.e.")
        return ok, det, {"c11_entry.csv": sw.to_csv()}
    return _timed(11, "delayed entry has an interior welfare maximum", 300.0, body)


def criterion_12(threads=1):
    def body():
        cfg = path_config()
        chk = pathsim.path_check(cfg, threads)
        ana = welfare.exante_welfare(cfg.with_mc(engine=EngineConfig(), replications=100_000), threads)
        det, ok = [], True
        good = chk.survival_ok()
        ok &= bool(good.all())
        for i in range(cfg.n):
            det.append(f"agent {i}: path survival {chk.survival_freq[i]:.4f} ± {chk.survival_se[i]:.4f} "
                       f"(bias {chk.survival_bias[i]:.4f}, residual {chk.residual[i]:.4f}) "
                       f"vs exact {chk.survival_exact[i]:.4f}")
        diff = abs(chk.welfare_mean - ana.mean)
        tol = 3 * math.hypot(chk.welfare_se, ana.stderr) + chk.welfare_bias
        ok &= diff <= tol
        det.append(f"welfare path {chk.welfare_mean:.4f} ± {chk.welfare_se:.4f} (bias {chk.welfare_bias:.4f}) "
                   f"vs analytic {ana}: |diff| {diff:.4f} <= {tol:.4f}")
        csv_text = chk.to_csv() + f"welfare_analytic,,{_num(ana.mean)},{_num(ana.stderr)},,,\n"
        return ok, det, {"c12_engine_crosscheck.csv": csv_text}
    return _timed(12, "path engine vs analytic engine on the triangle", 600.0, body)


def criterion_13(threads=1):
    def body():
        cfg = reentry_config()
        x = cfg.experiment
        sw = welfare.reentry_sweep(cfg, x["R_grid"], x["L_grid"], x["tau_scale_grid"], threads)
        d, se = sw.diff(1, 0)
        det = [f"W(tau x2) - W(tau x1) = {d:.4f}, {d / se:.1f} s.e."]
        ok = d > 3 * se
        nets, names = _topologies(x["topologies"], cfg.n)
        rk = welfare.compare_topologies(cfg.priors, cfg.econ, nets, cfg.mc, cfg.extension, threads, names)
        ok &= rk[0].name == "complete" and -rk[1].gap > 3 * rk[1].paired_stderr
        det.append(f"complete - star = {-rk[1].gap:.4f}, {-rk[1].gap / rk[1].paired_stderr:.1f} s.e.")
        return ok, det, {"c13_reentry_tau.csv": sw.to_csv(), "c13_reentry_topology.csv": welfare.ranking_csv(rk)}
    return _timed(13, "re-entry: faster learning helps, complete beats star", 600.0, body)


CRITERIA = {k: globals()[f"criterion_{k}"] for k in range(1, 14)}


def criterion_14(results, rerun_threads=8):
    """Re-run every criterion with a different pool size and compare CSV bytes."""
    def body():
        det, ok = [], True
        for r in results:
            again = CRITERIA[r.number](threads=rerun_threads)
            same = again.outputs == r.outputs
            ok &= same
            det.append(f"criterion {r.number}: {'identical' if same else 'DIFFERENT'} CSV bytes "
                       f"(threads 1 vs {rerun_threads})")
        return ok, det, {}
    limit = sum(r.limit for r in results)
    return _timed(14, "byte-identical CSVs across runs and thread counts", limit, body)


def run_all(numbers=None, threads=1, out_dir=None, log=print):
    numbers = sorted(numbers or CRITERIA)
    results = []
    for k in numbers:
        if k == 14:
            continue
        r = CRITERIA[k](threads=threads)
        results.append(r)
        log(r.line())
        for d in r.details:
            log("    " + d)
        if out_dir:
            r.write(out_dir)
    if 14 in numbers:
        r = criterion_14(results)
        results.append(r)
        log(r.line())
        for d in r.details:
            log("    " + d)
    return results
