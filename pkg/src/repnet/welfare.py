"""Ex-post / ex-ante welfare, the no-learning benchmark, and design sweeps.

Ex-post welfare is computed from presence spells.  For a neighbour ``j`` the
expected flow surplus over one of its spells is ``E[q_j | spell] - c``: a
spell that ends in ostracism has conditional mean equal to the severance
threshold, a spell that never ends has the survival-conditional mean.  Agent
``i`` collects that surplus, discounted, over the overlap of its own spells
with ``j``'s.  With one spell per agent starting at 0 this is exactly
``(1 - exp(-rho t_i)) / rho * sum_{j: t_j = inf} (mu_j - c) / P(S_j)``.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import analytics
from .hitting import HittingRealization, Spells, draw_attempts, map_hitting_times_batch, sample_spells
from .model import AgentPrior, ExtensionConfig, MCConfig, NetworkConstraint, RunConfig, validate

CHUNK = 8192


@dataclass
class WelfareEstimate:
    mean: float
    stderr: float
    replications: int
    per_agent: np.ndarray | None = None
    per_agent_stderr: np.ndarray | None = None

    def __str__(self):
        return f"{self.mean:.6g} ± {self.stderr:.3g} (n={self.replications})"


def _estimate(per_agent_samples):
    x = np.asarray(per_agent_samples, dtype=float)
    n = x.shape[0]
    total = x.sum(axis=1)
    se = float(total.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    pa_se = x.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.full(x.shape[1], np.nan)
    return WelfareEstimate(float(total.mean()), se, n, x.mean(axis=0), pa_se)


def paired_difference(a, b):
    """Mean and standard error of ``a - b`` for paired per-replication samples."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return float(d.mean()), float(d.std(ddof=1) / math.sqrt(d.size))


# ------------------------------------------------------------ ex post

def spell_values(priors, cost, delta=0.0):
    """Flow surplus per neighbour spell: (value if never ends, value if it ends)."""
    thr = cost - delta
    surv = np.array([(p.mu - cost + (1.0 - analytics.survival_probability(p, thr)) * delta)
                     / analytics.survival_probability(p, thr) for p in priors])
    return surv, thr - cost


def _discounted(lo, hi, rho):
    ok = hi > lo
    with np.errstate(invalid="ignore"):
        val = (np.exp(-rho * lo) - np.exp(-rho * hi)) / rho
    return np.where(ok, val, 0.0)


def spell_welfare(spells, adj, surv_value, fail_value, rho):
    """Per-agent ex-post welfare, shape (reps, n)."""
    adj = np.asarray(adj, dtype=float)
    reps, n, R = spells.start.shape
    out = np.zeros((reps, n))
    used = ~np.isnan(spells.start)
    for aj in range(R):
        if not used[:, :, aj].any():
            continue
        sj = spells.start[:, None, :, aj]  # (reps, 1, n_j)
        ej = spells.end[:, None, :, aj]
        val = np.where(np.isinf(spells.end[:, :, aj]), surv_value[None, :], fail_value)
        val = np.where(used[:, :, aj], val, 0.0)
        acc = np.zeros((reps, n, n))
        for ai in range(R):
            if not used[:, :, ai].any():
                continue
            si = spells.start[:, :, None, ai]
            ei = spells.end[:, :, None, ai]
            lo = np.fmax(si, sj)
            hi = np.fmin(ei, ej)
            d = _discounted(lo, hi, rho)
            acc += np.where(used[:, :, None, ai] & used[:, None, :, aj], d, 0.0)
        out += (acc * adj[None] * val[:, None, :]).sum(axis=2)
    return out


def expost_welfare(actual, constraint, priors, econ, extension=None, entry_times=None):
    """(total, per-agent) welfare of one realization of actual ostracism times."""
    if actual.kind != "actual":
        raise ValueError("expost_welfare expects actual (network-scaled) times")
    ext = extension or ExtensionConfig()
    t = actual.times
    n = t.size
    e = np.zeros(n) if entry_times is None else np.asarray(entry_times, dtype=float)
    sp = Spells(e.reshape(1, n, 1), t.reshape(1, n, 1).copy(), np.full((1, n, 1), np.nan),
                np.full((1, n, 1), np.nan), np.ones((1, n), dtype=np.int64))
    surv, fail = spell_values(priors, econ.cost, ext.threshold_shift)
    w = spell_welfare(sp, constraint.adjacency(), surv, fail, econ.rho)[0]
    return float(w.sum()), w


def no_learning_welfare(constraint, priors, econ):
    """Welfare if no link is ever severed: (1/rho) sum over links of (mu_j - c)."""
    n = constraint.n
    per = np.zeros(n)
    for i, j in constraint.sorted_edges():
        per[i] += (priors[j].mu - econ.cost) / econ.rho
        per[j] += (priors[i].mu - econ.cost) / econ.rho
    return float(per.sum()), per


def welfare_limit(constraint, priors, econ, regime):
    """Closed-form welfare in the extreme learning/patience regimes.

    ``"slow"`` (learning rate -> 0) and ``"impatient"`` (rho -> inf) keep the
    initial network, so welfare is the no-learning value.  ``"fast"``
    (learning rate -> inf) jumps straight to the stable network: each link
    ``i <- j`` pays ``(mu_j - c)/rho`` with probability ``P(S_i)``.
    ``"patient"`` (rho -> 0) returns ``rho * W``, the average flow, which is
    the finite quantity in that limit.
    """
    if regime in ("slow", "impatient"):
        return no_learning_welfare(constraint, priors, econ)
    if regime not in ("fast", "patient"):
        raise ValueError(f"unknown regime {regime!r}")
    p = [analytics.survival_probability(pr, econ.cost) for pr in priors]
    per = np.zeros(constraint.n)
    for i, j in constraint.sorted_edges():
        per[i] += p[i] * (priors[j].mu - econ.cost)
        per[j] += p[j] * (priors[i].mu - econ.cost)
    if regime == "fast":
        per = per / econ.rho
    return float(per.sum()), per


# ------------------------------------------------------------ ex ante

def welfare_samples(config, reps):
    """Per-agent ex-post welfare, shape (len(reps), n), for the given replication indices."""
    if config.mc.engine.kind == "path":
        from .pathsim import run_paths
        return run_paths(config, reps).welfare
    sp = sample_spells(config, reps)
    surv, fail = spell_values(config.priors, config.econ.cost, config.extension.threshold_shift)
    return spell_welfare(sp, config.constraint.adjacency(), surv, fail, config.econ.rho)


def run_chunked(fn, replications, threads=1, chunk=CHUNK):
    """Apply ``fn(rep_indices)`` over fixed-size chunks and stack in replication order.

    Chunk boundaries never depend on ``threads``, so output is identical for
    any pool size.
    """
    bounds = [(s, min(s + chunk, replications)) for s in range(0, replications, chunk)]
    jobs = [np.arange(s, e, dtype=np.int64) for s, e in bounds]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(fn, jobs))
    else:
        parts = [fn(j) for j in jobs]
    return np.concatenate(parts, axis=0)


def exante_samples(config, threads=1):
    validate(config)
    return run_chunked(lambda r: welfare_samples(config, r), config.mc.replications, threads)


def exante_welfare(config, threads=1):
    """Monte Carlo ex-ante welfare (spell pipeline or path engine)."""
    return _estimate(exante_samples(config, threads))


# ------------------------------------------------------------ sweeps

@dataclass
class SweepResult:
    """Per-replication welfare for each sweep point, generated with common random numbers."""

    columns: tuple  # names of the swept parameters
    points: list  # parameter tuples
    samples: list = field(repr=False)  # each (reps, n) per-agent welfare
    focal: int | None = None  # if set, report this agent's welfare instead of the total

    def values(self, k):
        s = self.samples[k]
        return s[:, self.focal] if self.focal is not None else s.sum(axis=1)

    def estimate(self, k):
        v = self.values(k)
        return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))

    def means(self):
        return np.array([self.estimate(k)[0] for k in range(len(self.points))])

    def diff(self, k1, k2):
        """Paired (mean, stderr) of value(k1) - value(k2)."""
        return paired_difference(self.values(k1), self.values(k2))

    def index(self, point):
        return self.points.index(tuple(point))

    def to_csv(self, per_agent=False):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.samples[0].shape[1] if self.samples else 0
        head = list(self.columns) + ["welfare_mean", "welfare_stderr", "replications"]
        if per_agent:
            head += [f"agent_{i}_mean" for i in range(n)]
        w.writerow(head)
        for k, pt in enumerate(self.points):
            m, se = self.estimate(k)
            row = [_num(x) for x in pt] + [_num(m), _num(se), self.samples[k].shape[0]]
            if per_agent:
                row += [_num(x) for x in self.samples[k].mean(axis=0)]
            w.writerow(row)
        return buf.getvalue()


def _num(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def sweep(configs, points, columns, threads=1, focal=None):
    samples = [exante_samples(c, threads) for c in configs]
    return SweepResult(tuple(columns), [tuple(p) for p in points], samples, focal)


@dataclass
class RankedTopology:
    name: str
    constraint: NetworkConstraint
    estimate: WelfareEstimate
    paired_stderr: float  # stderr of the difference to the top-ranked topology
    gap: float  # mean difference to the top-ranked topology (<= 0)


def compare_topologies(priors, econ, topologies, mc, extension=None, threads=1, names=None):
    """Rank network constraints by ex-ante welfare under common random numbers."""
    topologies = list(topologies)
    n = len(priors)
    if any(t.n != n for t in topologies):
        raise ValueError("all topologies must be over the same agent set")
    names = list(names) if names is not None else [f"topology_{k}" for k in range(len(topologies))]
    ext = extension or ExtensionConfig()
    samples = [exante_samples(RunConfig(tuple(priors), t, econ, ext, mc), threads) for t in topologies]
    totals = [s.sum(axis=1) for s in samples]
    order = sorted(range(len(topologies)), key=lambda k: -totals[k].mean())
    best = order[0]
    out = []
    for k in order:
        gap, pse = paired_difference(totals[k], totals[best]) if k != best else (0.0, 0.0)
        out.append(RankedTopology(names[k], topologies[k], _estimate(samples[k]), pse, gap))
    return out


def ranking_csv(ranked):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "topology", "network_edges", "welfare_mean", "welfare_stderr",
                "gap_to_best", "paired_stderr", "replications"])
    for r, t in enumerate(ranked, 1):
        edges = ";".join(f"{i}-{j}" for i, j in t.constraint.sorted_edges())
        w.writerow([r, t.name, edges, _num(t.estimate.mean), _num(t.estimate.stderr),
                    _num(t.gap), _num(t.paired_stderr), t.estimate.replications])
    return buf.getvalue()


def star_sweep(periphery, center_grid, center_sigma2, econ, mc, n_periphery=5, threads=1):
    """Total welfare of a star as the center's (mu, tau) vary; agent 0 is the center."""
    net = NetworkConstraint.star(n_periphery + 1)
    configs = []
    for mu1, tau1 in center_grid:
        pri = (AgentPrior(mu1, center_sigma2, tau1),) + (periphery,) * n_periphery
        configs.append(RunConfig(pri, net, econ, ExtensionConfig(), mc))
    return sweep(configs, center_grid, ("mu_center", "tau_center"), threads)


def ring_labels(n):
    """Ring of n agents as label pairs, agent 0 focal, its neighbours labelled 1 and 2.

    Labels grow with distance from agent 0 so rings of different sizes share
    random numbers for the agents closest to the focal one.
    """
    def label(pos):
        if pos == 0:
            return 0
        return 2 * pos - 1 if pos <= n // 2 else 2 * (n - pos)
    return NetworkConstraint(n, frozenset((label(p), label((p + 1) % n)) for p in range(n)))


def _exit_discount(prior, cost, rho, top=1e4, points=4000):
    """G(a) = E[exp(-rho T)] for an agent with two neighbours until time ``a``, one after.

    The agent's clock budget b has the hitting density; while both neighbours
    are present it is spent at rate 2, so T = b/2 if b < 2a, else T = b - a.
    Returns a vectorised function of ``a`` built from cumulative quadrature.
    """
    from scipy import integrate

    def f(b):
        return float(analytics.hitting_time_pdf_closed(b, prior, cost))

    grid = np.concatenate([[0.0], np.geomspace(1e-6 * top, top, points)])
    half = np.zeros(grid.size)
    full = np.zeros(grid.size)
    for k in range(1, grid.size):
        lo, hi = grid[k - 1], grid[k]
        half[k] = half[k - 1] + integrate.quad(lambda b: math.exp(-rho * b / 2) * f(b), lo, hi,
                                               epsabs=0, epsrel=1e-12)[0]
        full[k] = full[k - 1] + integrate.quad(lambda b: math.exp(-rho * b) * f(b), lo, hi,
                                               epsabs=0, epsrel=1e-12)[0]

    def G(a):
        a = np.asarray(a, dtype=float)
        x = np.minimum(2 * a, grid[-1])
        tail = full[-1] - np.interp(x, grid, full)
        with np.errstate(over="ignore", invalid="ignore"):
            late = np.where(np.isinf(a), 0.0, np.exp(np.minimum(rho * a, 700.0)) * tail)
        return np.interp(x, grid, half) + late

    return G


def ring_focal_samples(config, reps, G):
    """Focal agent 0's welfare in a ring with its own budget integrated out.

    Agent 0's exit only matters to agent 0's own payoff after it happens, so
    the map is run with agent 0 never leaving; the first neighbour exit then
    fixes when agent 0's clock slows from rate 2 to rate 1, and the expected
    discount over agent 0's budget is ``G``.  Conditional expectation of the
    plain estimator, so same mean with smaller variance.
    """
    reps = np.asarray(reps, dtype=np.int64)
    n = config.n
    rr = np.repeat(reps, n)
    aa = np.tile(np.arange(n), reps.size)
    _, b = draw_attempts(config, rr, aa, 0)
    b = b.reshape(reps.size, n)
    nb = config.constraint.neighbors(0)
    stays = np.isinf(b[:, nb])
    b[:, 0] = np.inf
    t = map_hitting_times_batch(b, config.constraint.adjacency()).final_end
    first = t[:, nb].min(axis=1)
    surv, _ = spell_values(config.priors, config.econ.cost)
    val = (stays * surv[nb]).sum(axis=1) * (1.0 - G(first)) / config.econ.rho
    return val[:, None]


def ring_compare(prior, econ, sizes, mc, threads=1):
    """Per-agent welfare W(n) of a homogeneous ring, read off the focal agent 0.

    Samples are agent 0's welfare only (one column), from the conditional
    estimator ``ring_focal_samples``.
    """
    G = _exit_discount(prior, econ.cost, econ.rho)
    samples = []
    for n in sizes:
        cfg = validate(RunConfig((prior,) * n, ring_labels(n), econ, ExtensionConfig(), mc))
        samples.append(run_chunked(lambda r, c=cfg: ring_focal_samples(c, r, G), mc.replications, threads))
    return SweepResult(("ring_size",), [(n,) for n in sizes], samples, focal=0)


def entry_sweep(config, agent, entry_grid, threads=1):
    """Welfare as one agent's entry time varies (all others keep theirs)."""
    configs = []
    for e in entry_grid:
        pri = list(config.priors)
        pri[agent] = replace(pri[agent], entry_time=float(e))
        configs.append(replace(config, priors=tuple(pri), extension=ExtensionConfig("entry")))
    return sweep(configs, [(e,) for e in entry_grid], ("entry_time",), threads)


def subsidy_sweep(config, delta_grid, threads=1):
    configs = [replace(config, extension=ExtensionConfig("subsidy", delta=float(d))) for d in delta_grid]
    return sweep(configs, [(d,) for d in delta_grid], ("delta",), threads)


def reentry_sweep(config, R_grid, L_grid, tau_scale_grid, threads=1):
    """Welfare per (R, L, global tau scale) cell."""
    configs, points = [], []
    for R in R_grid:
        for L in L_grid:
            for lam in tau_scale_grid:
                pri = tuple(replace(p, tau=p.tau * lam) for p in config.priors)
                configs.append(replace(config, priors=pri,
                                       extension=ExtensionConfig("reentry", R=int(R), L=float(L))))
                points.append((int(R), float(L), float(lam)))
    return sweep(configs, points, ("R", "L", "tau_scale"), threads)


def default_mc(replications=10_000, seed=0):
    return MCConfig(replications=replications, seed=seed)
