"""Discretised path engine: benefit diffusions, Bayesian reputations, myopic linking.

Each present agent accumulates a signal ``Y`` and an effective observation
time ``I`` (``dI = r dt``, ``dY = q r dt + sqrt(r dt / tau) Z``), where ``r``
is its current information rate (number of active links, see
:func:`repnet.hitting._rates`).  The posterior over ``q`` is normal with
precision ``1/sigma2 + tau I`` and mean ``(mu/sigma2 + tau Y) / precision``.
An agent whose posterior mean falls below the severance threshold loses all
its links at the end of the step.

The engine is vectorised over replications; every replication owns a
numpy Philox generator keyed by ``(seed, replication)``, so results do not
depend on how replications are batched.  Realised welfare integrates
``exp(-rho t) (q_j - c)`` over the lifetime of every directed link; links
still alive at the horizon are counted as permanent.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import analytics, rng
from .hitting import ACTIVE, GONE, WAITING, _rates, quality_from_uniform
from .model import validate

BLOCK = 256  # fine steps of normals drawn per generator call


@dataclass
class PathState:
    """State of a batch of replications at one grid time (arrays are (B, n))."""

    time: float
    quality: np.ndarray
    signal: np.ndarray  # Y: integrated observations
    info: np.ndarray  # I: integrated information rate
    status: np.ndarray  # WAITING / ACTIVE / GONE
    attempts: np.ndarray  # entry attempts started (0 before first entry)
    wake: np.ndarray  # next (re-)entry time for waiting agents
    formed: np.ndarray | None = None  # (B, n, n) links created outside the constraint
    hit: np.ndarray | None = None  # agents ostracized in the step that produced this state

    def precision(self, sigma2, tau):
        return 1.0 / sigma2 + tau * self.info

    def posterior_mean(self, mu, sigma2, tau):
        return (mu / sigma2 + tau * self.signal) / self.precision(sigma2, tau)

    def links(self, adj):
        """(B, n, n) boolean active-link indicator."""
        act = self.status == ACTIVE
        both = act[:, :, None] & act[:, None, :]
        g = both & adj[None]
        if self.formed is not None:
            g = g | (both & self.formed)
        return g


@dataclass
class PathRun:
    welfare: np.ndarray  # (B, n) realised discounted surplus per agent
    times: np.ndarray  # (B, n) time of the last ostracism, inf if present at horizon
    quality: np.ndarray  # (B, n) quality of the final attempt
    attempts: np.ndarray  # (B, n)
    permanent: np.ndarray  # (B, n) present at the horizon
    horizon: float
    dt: float
    residual: np.ndarray  # per-agent analytic mass of hits beyond the horizon (unscaled clock)
    events: list = field(default_factory=list)


class _Params:
    def __init__(self, config):
        p = config.priors
        self.mu = np.array([x.mu for x in p])
        self.sigma2 = np.array([x.sigma2 for x in p])
        self.tau = np.array([x.tau for x in p])
        self.entry = config.entry_times()
        self.adj = config.constraint.adjacency()
        self.adjf = self.adj.astype(float)
        self.cost = config.econ.cost
        self.rho = config.econ.rho
        self.thr = config.threshold()
        ext = config.extension
        self.R = ext.attempts
        self.L = ext.downtime
        self.form = ext.variant == "link_formation"
        self.form_level = config.econ.cost + ext.gamma
        self.seed = config.mc.seed


def default_horizon(config):
    """Horizon after which each agent's residual hitting mass is below 1%."""
    thr = config.threshold()
    h = max(analytics.residual_horizon(p, thr) for p in config.priors)
    ext = config.extension
    return float(config.entry_times().max() + ext.attempts * h + (ext.attempts - 1) * ext.downtime)


def _draw_quality(seed, reps, agents, attempt, par):
    u1, _ = rng.uniform_pair(seed, reps, agents, attempt)
    return quality_from_uniform(u1, par.mu[agents], par.sigma2[agents])


def step(state, dt, par, z, reps, events=None):
    """Advance ``state`` by ``dt`` with standard normals ``z`` (B, n).

    Returns ``(new_state, flow)`` where ``flow`` (B, n) is each agent's summed
    ``q_j - c`` over links active during the step.
    """
    st = state
    t1 = st.time + dt
    if st.formed is None:
        act = (st.status == ACTIVE).astype(float)
        flow = act * ((act * (st.quality - par.cost)) @ par.adjf)
        rate = _rates(st.status, par.adjf)
        g = None
    else:
        g = st.links(par.adj)
        flow = (g * (st.quality - par.cost)[:, None, :]).sum(axis=2)
        rate = _rates_batch(st.status, par.adj[None] | st.formed, g)
    sig = st.signal + st.quality * rate * dt + np.sqrt(rate * dt / par.tau) * z
    info = st.info + rate * dt
    new = PathState(t1, st.quality, sig, info, st.status.copy(), st.attempts, st.wake.copy(),
                    None if st.formed is None else st.formed.copy())

    m = new.posterior_mean(par.mu, par.sigma2, par.tau)
    drop = (new.status == ACTIVE) & (m < par.thr)
    if drop.any():
        if events is not None:
            for b, i in zip(*np.nonzero(drop)):
                events.append((int(reps[b]), t1, "ostracize", int(i), -1))
                gi = st.links(par.adj)[b, i] if g is None else g[b, i]
                for j in np.flatnonzero(gi):
                    events.append((int(reps[b]), t1, "sever", int(min(i, j)), int(max(i, j))))
        again = drop & (new.attempts < par.R)
        new.status = np.where(drop, np.where(again, WAITING, GONE), new.status)
        new.wake = np.where(again, t1 + par.L, new.wake)
        if new.formed is not None:
            gone = new.status != ACTIVE
            new.formed &= ~(gone[:, :, None] | gone[:, None, :])
        new.hit = drop
    return new, flow


def _rates_batch(status, adj_b, g):
    act = status == ACTIVE
    k = g.sum(axis=2).astype(float)
    pending = ((status == WAITING)[:, None, :] & adj_b).any(axis=2)
    rate = np.where(k > 0, k, np.where(pending, 0.0, 1.0))
    return np.where(act, rate, 0.0)


def _wake(state, par, reps, events):
    """Bring waiting agents whose (re-)entry time has arrived into the network."""
    due = (state.status == WAITING) & (state.wake <= state.time * (1 + 1e-12) + 1e-15)
    if not due.any():
        return
    b, i = np.nonzero(due)
    k = state.attempts[b, i]
    if np.any(k > 0):
        sel = k > 0
        state.quality[b[sel], i[sel]] = _draw_quality(par.seed, reps[b[sel]], i[sel], k[sel], par)
        state.signal[b[sel], i[sel]] = 0.0
        state.info[b[sel], i[sel]] = 0.0
    state.attempts[b, i] += 1
    state.status[b, i] = ACTIVE
    if events is not None:
        for bb, ii, kk in zip(b, i, k):
            events.append((int(reps[bb]), state.time, "enter" if kk == 0 else "reenter", int(ii), -1))


def _form(state, par, reps, events):
    m = state.posterior_mean(par.mu, par.sigma2, par.tau)
    ok = (state.status == ACTIVE) & (m >= par.form_level)
    new = ok[:, :, None] & ok[:, None, :] & ~par.adj[None] & ~state.formed
    n = par.adj.shape[0]
    new &= ~np.eye(n, dtype=bool)[None]
    if new.any():
        state.formed |= new
        if events is not None:
            for b, i, j in zip(*np.nonzero(np.triu(new))):
                events.append((int(reps[b]), state.time, "form", int(i), int(j)))


def _normals(gens, nsteps, n):
    return np.stack([g.standard_normal((nsteps, n)) for g in gens], axis=1)


def run_paths(config, reps, coarsen=1, log_events=False):
    """Simulate the replications ``reps`` on the grid ``dt * coarsen``.

    With ``coarsen > 1`` every coarse increment is the normalised sum of
    ``coarsen`` fine increments, so a coarse run is pathwise coupled to the
    fine one; the difference between them estimates the grid bias.
    """
    eng = config.mc.engine
    if eng.kind != "path":
        raise ValueError("run_paths needs the path engine")
    par = _Params(config)
    reps = np.asarray(reps, dtype=np.int64)
    B, n = reps.size, config.n
    H = float(eng.horizon) if eng.horizon is not None else default_horizon(config)
    fine = float(eng.dt)
    nfine = int(math.ceil(H / fine - 1e-9))
    nfine += (-nfine) % coarsen
    dt = fine * coarsen
    nsteps = nfine // coarsen
    H = nfine * fine

    gens = [np.random.Generator(np.random.Philox(key=int(config.mc.seed) | (int(r) << 64))) for r in reps]
    rr = np.repeat(reps, n)
    aa = np.tile(np.arange(n), B)
    q0 = _draw_quality(par.seed, rr, aa, np.zeros_like(rr), par).reshape(B, n)
    status = np.full((B, n), WAITING)
    state = PathState(0.0, q0, np.zeros((B, n)), np.zeros((B, n)), status,
                      np.zeros((B, n), dtype=np.int64), np.broadcast_to(par.entry, (B, n)).copy(),
                      np.zeros((B, n, n), dtype=bool) if par.form else None)
    events = [] if log_events else None
    times = np.full((B, n), np.inf)
    welfare = np.zeros((B, n))
    decay = -math.expm1(-par.rho * dt) / par.rho

    _wake(state, par, reps, events)
    if par.form:
        _form(state, par, reps, events)
    k = 0
    while k < nsteps:
        blk = min(BLOCK, nsteps - k)
        z = _normals(gens, blk * coarsen, n)
        if coarsen > 1:
            z = z.reshape(blk, coarsen, B, n).sum(axis=1) / math.sqrt(coarsen)
        for s in range(blk):
            t0 = state.time
            state, flow = step(state, dt, par, z[s], reps, events)
            welfare += math.exp(-par.rho * t0) * decay * flow
            if state.hit is not None:
                times = np.where(state.hit, state.time, times)
            _wake(state, par, reps, events)
            if par.form:
                _form(state, par, reps, events)
        k += blk

    g = state.links(par.adj)
    tail = (g * (state.quality - par.cost)[:, None, :]).sum(axis=2)
    welfare += math.exp(-par.rho * H) / par.rho * tail
    present = state.status == ACTIVE
    times = np.where(present, np.inf, times)
    residual = np.array([analytics.unscaled_residual_mass(H, p, par.thr) for p in config.priors])
    return PathRun(welfare, times, state.quality.copy(), state.attempts.copy(), present, H, dt,
                   residual, events or [])


def run_path(config, replication, log_events=True):
    """One replication: (ostracism times, event log, realised qualities)."""
    validate(config)
    r = run_paths(config, [replication], log_events=log_events)
    return r.times[0], r.events, r.quality[0]


def events_csv(events):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["replication", "time", "event_type", "agent_i", "agent_j"])
    for rep, t, kind, i, j in sorted(events, key=lambda e: (e[0], e[1])):
        w.writerow([rep, format(t, ".17g"), kind, i, "" if j < 0 else j])
    return buf.getvalue()


@dataclass
class PathCheck:
    """Path engine vs closed forms for one configuration."""

    survival_freq: np.ndarray
    survival_se: np.ndarray
    survival_exact: np.ndarray
    residual: np.ndarray
    survival_bias: np.ndarray
    welfare_mean: float
    welfare_se: float
    welfare_bias: float
    horizon: float
    dt: float
    replications: int

    def survival_ok(self, z=3.0):
        tol = z * self.survival_se + self.survival_bias + self.residual
        return np.abs(self.survival_freq - self.survival_exact) <= tol

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["quantity", "agent", "path_estimate", "stderr", "grid_bias", "residual_mass", "reference"])
        for i in range(self.survival_freq.size):
            w.writerow(["survival", i, *(format(float(x), ".17g") for x in (
                self.survival_freq[i], self.survival_se[i], self.survival_bias[i],
                self.residual[i], self.survival_exact[i]))])
        w.writerow(["welfare", "", format(self.welfare_mean, ".17g"), format(self.welfare_se, ".17g"),
                    format(self.welfare_bias, ".17g"), "", ""])
        return buf.getvalue()


def path_check(config, threads=1):
    """Survival frequencies and welfare from the path engine with a grid-bias estimate.

    The bias is ``|fine - coarse|`` where the coarse run uses a 4x step on the
    same Brownian increments; first-passage bias is roughly proportional to
    sqrt(dt), so this overstates the fine-grid bias.
    """
    from .welfare import run_chunked

    validate(config)
    R = config.mc.replications

    def fine(r):
        out = run_paths(config, r)
        return np.concatenate([out.welfare, np.isinf(out.times).astype(float)], axis=1)

    def coarse(r):
        out = run_paths(config, r, coarsen=4)
        return np.concatenate([out.welfare, np.isinf(out.times).astype(float)], axis=1)

    n = config.n
    f = run_chunked(fine, R, threads)
    c = run_chunked(coarse, R, threads)
    wf, sf = f[:, :n].sum(axis=1), f[:, n:]
    wc, sc = c[:, :n].sum(axis=1), c[:, n:]
    exact = np.array([analytics.reentry_survival_probability(p, config.threshold(), config.extension.attempts)
                      for p in config.priors])
    eng = config.mc.engine
    H = float(eng.horizon) if eng.horizon is not None else default_horizon(config)
    residual = np.array([analytics.unscaled_residual_mass(H, p, config.threshold()) for p in config.priors])
    return PathCheck(
        survival_freq=sf.mean(axis=0),
        survival_se=sf.std(axis=0, ddof=1) / math.sqrt(R),
        survival_exact=exact,
        residual=residual,
        survival_bias=np.abs(sf.mean(axis=0) - sc.mean(axis=0)),
        welfare_mean=float(wf.mean()),
        welfare_se=float(wf.std(ddof=1) / math.sqrt(R)),
        welfare_bias=float(abs(wf.mean() - wc.mean())),
        horizon=H,
        dt=float(eng.dt),
        replications=R,
    )
