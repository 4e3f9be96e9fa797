"""Unscaled hitting-time sampling and the network mapping to actual ostracism times.

Sampling is done at each agent's base precision: the unscaled budget ``t_i``
is the time its reputation would need to hit the threshold if it sent
information at rate 1 forever.  All network effects live in the event loop
(:func:`map_hitting_times_batch`), where an agent consumes its budget at rate
``k_i(t)`` (its current number of links).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from . import rng
from .analytics import hit_cdf

WAITING, ACTIVE, GONE = 0, 1, 2

_BISECT_MAX = 200
_BISECT_RTOL = 1e-10
_S_LO = 1e-12


class BisectionError(ArithmeticError):
    pass


@dataclass
class HittingRealization:
    times: np.ndarray
    kind: str  # "unscaled" or "actual"

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.kind not in ("unscaled", "actual"):
            raise ValueError(f"kind must be 'unscaled' or 'actual', not {self.kind!r}")

    def finite(self):
        return np.isfinite(self.times)


# ------------------------------------------------------------ sampling

def quality_from_uniform(u, mu, sigma2):
    return mu + np.sqrt(sigma2) * ndtri(u)


def unscaled_times(q, u, mu, sigma2, tau, cost):
    """Invert the hitting-time law of one attempt given its quality.

    ``u`` is uniform on (0, 1).  The law has an atom at infinity of mass
    P(survive | q); ``u`` above the finite mass maps to ``inf``, otherwise to
    the ``t`` solving P(hit by t | q) = u.  Because the law depends on ``t``
    only through ``t * tau`` the root is found in scaled time and divided by
    ``tau`` afterwards, so rescaling ``tau`` rescales finite draws exactly.
    """
    q, u, mu, sigma2, tau = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (q, u, mu, sigma2, tau)))
    a = (mu - cost) / sigma2
    d = q - cost
    hit_mass = np.where(d > 0, np.exp(-2.0 * a * d), 1.0)
    out = np.full(q.shape, np.inf)
    todo = u < hit_mass
    if not np.any(todo):
        return out
    a_, d_, u_ = a[todo], d[todo], u[todo]

    lo = np.full(u_.shape, _S_LO)
    hi = np.ones(u_.shape)
    for _ in range(_BISECT_MAX):
        short = hit_cdf(hi, d_, a_) <= u_
        if not short.any():
            break
        hi = np.where(short, hi * 16.0, hi)
    else:
        raise BisectionError("could not bracket the hitting-time quantile")
    below = hit_cdf(lo, d_, a_) > u_
    llo, lhi = np.log(lo), np.log(hi)
    for _ in range(_BISECT_MAX):
        mid = 0.5 * (llo + lhi)
        up = hit_cdf(np.exp(mid), d_, a_) <= u_
        llo = np.where(up, mid, llo)
        lhi = np.where(up, lhi, mid)
        if np.all(lhi - llo < _BISECT_RTOL):
            break
    else:
        raise BisectionError("hitting-time bisection did not converge in 200 iterations")
    s = np.where(below, _S_LO, np.exp(0.5 * (llo + lhi)))
    out[todo] = s / tau[todo]
    return out


def sample_quality(prior, stream):
    """One quality draw from N(mu, sigma2) for the stream's attempt."""
    u, _ = stream.uniforms()
    return float(quality_from_uniform(u, prior.mu, prior.sigma2))


def sample_unscaled_hitting_time(q, prior, cost, stream):
    if not prior.mu > cost:
        raise ValueError("mu must exceed cost")
    _, u = stream.uniforms()
    return float(unscaled_times(q, u, prior.mu, prior.sigma2, prior.tau, cost))


def draw_attempts(config, reps, agents, attempt):
    """Quality and unscaled budget for each (replication, agent) pair at ``attempt``.

    ``reps`` and ``agents`` are equal-length integer arrays.
    """
    reps = np.asarray(reps, dtype=np.int64)
    agents = np.asarray(agents, dtype=np.int64)
    attempt = np.broadcast_to(np.asarray(attempt, dtype=np.int64), reps.shape)
    mu = np.array([p.mu for p in config.priors])[agents]
    s2 = np.array([p.sigma2 for p in config.priors])[agents]
    tau = np.array([p.tau for p in config.priors])[agents]
    u1, u2 = rng.uniform_pair(config.mc.seed, reps, agents, attempt)
    q = quality_from_uniform(u1, mu, s2)
    return q, unscaled_times(q, u2, mu, s2, tau, config.threshold())


# ------------------------------------------------------------ mapping M

@dataclass
class Spells:
    """Presence intervals per (replication, agent, attempt); unused slots are nan."""

    start: np.ndarray  # (reps, n, R)
    end: np.ndarray  # (reps, n, R); inf for a spell that never ends
    quality: np.ndarray  # (reps, n, R)
    budget: np.ndarray  # (reps, n, R) unscaled budget of each attempt
    attempts: np.ndarray  # (reps, n) number of attempts started

    @property
    def final_end(self):
        idx = self.attempts[..., None] - 1
        return np.take_along_axis(self.end, idx, axis=2)[..., 0]

    def final(self, arr):
        idx = self.attempts[..., None] - 1
        return np.take_along_axis(arr, idx, axis=2)[..., 0]


def _rates(status, adj):
    act = status == ACTIVE
    k = act.astype(float) @ adj
    pending = ((status == WAITING).astype(float) @ adj) > 0
    # no links: silent if a neighbour may still (re)appear, otherwise the
    # base-precision convention for isolated survivors
    rate = np.where(k > 0, k, np.where(pending, 0.0, 1.0))
    return np.where(act, rate, 0.0)


def map_hitting_times_batch(budget, adj, entry=None, R=1, L=0.0, redraw=None, quality=None):
    """Event-driven mapping of unscaled budgets to presence spells.

    ``budget``: (reps, n) first-attempt budgets.  ``adj``: (n, n) 0/1.
    ``entry``: (n,) entry times.  With ``R > 1`` an ostracized agent waits
    ``L`` and re-enters with a fresh budget from ``redraw(rep_idx, agent_idx,
    attempt) -> (quality, budget)``.  Ties in event times (relative 1e-12) are
    processed as one batch.
    """
    budget = np.array(budget, dtype=float)
    reps, n = budget.shape
    adj = np.asarray(adj, dtype=float)
    entry = np.zeros(n) if entry is None else np.asarray(entry, dtype=float)

    start = np.full((reps, n, R), np.nan)
    end = np.full((reps, n, R), np.nan)
    qual = np.full((reps, n, R), np.nan)
    bud = np.full((reps, n, R), np.nan)
    bud[:, :, 0] = budget
    if quality is not None:
        qual[:, :, 0] = quality
    attempts = np.ones((reps, n), dtype=np.int64)

    status = np.where(entry > 0, WAITING, ACTIVE)[None, :].repeat(reps, 0)
    wake = np.broadcast_to(entry, (reps, n)).copy()
    start[:, :, 0] = np.where(entry > 0, np.nan, 0.0)
    t = np.zeros(reps)
    live = np.arange(reps)

    while live.size:
        st = status[live]
        b = budget[live]
        tl = t[live]
        rate = _rates(st, adj)
        can_hit = (rate > 0) & np.isfinite(b)
        with np.errstate(divide="ignore", invalid="ignore"):
            cand_hit = np.where(can_hit, tl[:, None] + b / np.where(can_hit, rate, 1.0), np.inf)
        cand_wake = np.where(st == WAITING, wake[live], np.inf)
        nxt = np.minimum(cand_hit.min(1), cand_wake.min(1))

        fin = np.isfinite(nxt)
        live, st, b, tl, rate, cand_hit, cand_wake, nxt = (
            x[fin] for x in (live, st, b, tl, rate, cand_hit, cand_wake, nxt))
        if not live.size:
            break

        b = b - rate * (nxt - tl)[:, None]
        tol = nxt * (1.0 + 1e-12)
        hit = cand_hit <= tol[:, None]
        woke = (cand_wake <= tol[:, None]) & ~hit

        ri, ai = np.nonzero(hit)
        if ri.size:
            g = live[ri]
            k = attempts[g, ai] - 1
            end[g, ai, k] = nxt[ri]
            b[ri, ai] = 0.0
            again = attempts[g, ai] < R
            st[ri, ai] = np.where(again, WAITING, GONE)
            wake[g[again], ai[again]] = nxt[ri[again]] + L

        ri, ai = np.nonzero(woke)
        if ri.size:
            g = live[ri]
            st[ri, ai] = ACTIVE
            k = attempts[g, ai] - 1
            first = np.isnan(start[g, ai, k]) & (k == 0)
            # first entry uses the pre-drawn budget; re-entries open a new attempt
            re = ~first
            start[g[first], ai[first], 0] = wake[g[first], ai[first]]
            if re.any():
                gr, ar = g[re], ai[re]
                attempts[gr, ar] += 1
                k2 = attempts[gr, ar] - 1
                start[gr, ar, k2] = wake[gr, ar]
                qn, bn = redraw(gr, ar, k2)
                qual[gr, ar, k2] = qn
                bud[gr, ar, k2] = bn
                b[ri[re], ar] = bn

        status[live] = st
        budget[live] = b
        t[live] = nxt

    idx = attempts[..., None] - 1
    last_end = np.take_along_axis(end, idx, axis=2)[..., 0]
    last_end = np.where(np.isnan(last_end), np.inf, last_end)
    np.put_along_axis(end, idx, last_end[..., None], axis=2)
    return Spells(start, end, qual, bud, attempts)


def map_hitting_times(unscaled, constraint, entry_times=None):
    """Actual ostracism times for one realization of unscaled budgets."""
    if unscaled.kind != "unscaled":
        raise ValueError("map_hitting_times expects an unscaled realization")
    sp = map_hitting_times_batch(unscaled.times[None, :], constraint.adjacency(), entry_times)
    return HittingRealization(sp.final_end[0], "actual")


# ------------------------------------------------------------ realizations

def sample_spells(config, reps):
    """Sample qualities and budgets for the given replication indices and map them."""
    reps = np.asarray(reps, dtype=np.int64)
    n = config.n
    rr = np.repeat(reps, n)
    aa = np.tile(np.arange(n), reps.size)
    q, b = draw_attempts(config, rr, aa, 0)
    ext = config.extension

    def redraw(rep_idx, agent_idx, attempt):
        return draw_attempts(config, reps[rep_idx], agent_idx, attempt)

    return map_hitting_times_batch(
        b.reshape(reps.size, n), config.constraint.adjacency(), config.entry_times(),
        R=ext.attempts, L=ext.downtime, redraw=redraw, quality=q.reshape(reps.size, n))


def sample_realization(config, replication):
    """(qualities, unscaled realization, actual realization) for one replication.

    Under re-entry the quality and unscaled budget reported are those of the
    final attempt.
    """
    sp = sample_spells(config, [replication])
    q = sp.final(sp.quality)[0]
    unscaled = HittingRealization(sp.final(sp.budget)[0], "unscaled")
    actual = HittingRealization(sp.final_end[0], "actual")
    return q, unscaled, actual


def realizations_csv(config, replications):
    """Debug export: one row per (replication, agent)."""
    reps = np.arange(replications) if np.isscalar(replications) else np.asarray(replications)
    sp = sample_spells(config, reps)
    q = sp.final(sp.quality)
    b = sp.final(sp.budget)
    t = sp.final_end
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["replication", "agent", "quality", "unscaled_t", "actual_t", "attempts"])
    for r_i, r in enumerate(reps):
        for a in range(config.n):
            w.writerow([int(r), a, _fmt(q[r_i, a]), _fmt(b[r_i, a]), _fmt(t[r_i, a]), int(sp.attempts[r_i, a])])
    return buf.getvalue()


def _fmt(x):
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")
