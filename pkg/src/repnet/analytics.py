"""Closed-form survival quantities and exact stable-network distributions.

Reputation of an agent is the posterior mean of its quality.  Writing
``a = (mu - c) / sigma2`` and ``d = q - c``, the reputation stays above the
threshold ``c`` exactly while a Brownian motion with start ``a``, drift
``tau * d`` and variance ``tau`` per unit time stays positive.  Every formula
below follows from that reduction.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import log_ndtr, ndtr

ENUMERATION_CAP = 20


class DomainError(ValueError):
    pass


def _check(prior, cost):
    if not prior.mu > cost:
        raise DomainError(f"mu must exceed cost (mu={prior.mu}, cost={cost})")


def norm_pdf(x):
    return np.exp(-0.5 * np.square(x)) / math.sqrt(2.0 * math.pi)


def survival_probability(prior, cost):
    """P(agent is never ostracized) = 2 Phi((mu - c) / sigma) - 1."""
    _check(prior, cost)
    z = (prior.mu - cost) / prior.sigma
    # 1 - 2 Phi(-z) keeps precision for large z
    return float(1.0 - 2.0 * ndtr(-z))


def survival_probability_quadrature(prior, cost, tol=1e-10):
    """Same quantity by integrating P(survive | q) against the prior (test oracle)."""
    _check(prior, cost)
    mu, s = prior.mu, prior.sigma
    lo = max(cost, mu - 10 * s)
    hi = mu + 10 * s
    if hi <= lo:
        return 0.0

    def f(q):
        return survival_probability_given_quality(q, prior, cost) * norm_pdf((q - mu) / s) / s

    val, _ = integrate.quad(f, lo, hi, epsabs=tol, epsrel=tol, limit=200)
    return val


def survival_probability_given_quality(q, prior, cost):
    _check(prior, cost)
    if q <= cost:
        return 0.0
    return float(-math.expm1(-2.0 / prior.sigma2 * (prior.mu - cost) * (q - cost)))


def finite_time_survival(q, t, prior, cost):
    """P(reputation has not hit the threshold by time ``t`` | quality ``q``).

    ``t`` is measured at the agent's base precision ``tau``; the value depends
    on ``t`` and ``tau`` only through ``t * tau``.
    """
    _check(prior, cost)
    s = t * prior.tau
    if s <= 0:
        return 1.0
    a = (prior.mu - cost) / prior.sigma2
    d = q - cost
    if math.isinf(s):
        return survival_probability_given_quality(q, prior, cost)
    rs = math.sqrt(s)
    x1 = rs * d + a / rs
    x2 = rs * d - a / rs
    # second term evaluated in log space: exp(-2ad) overflows for d << 0
    second = math.exp(-2.0 * a * d + float(log_ndtr(x2)))
    return float(min(1.0, max(0.0, ndtr(x1) - second)))


def hit_cdf(s, d, a):
    """Vectorised P(hit by scaled time s = t * tau | d = q - c), a = (mu - c) / sigma2.

    Both terms are non-negative so there is no cancellation.
    """
    s = np.asarray(s, dtype=float)
    rs = np.sqrt(s)
    x1 = rs * d + a / rs
    x2 = rs * d - a / rs
    return ndtr(-x1) + np.exp(-2.0 * a * d + log_ndtr(x2))


def hitting_time_pdf(t, prior, cost, tol=1e-10):
    """Unconditional density of the unscaled hitting time at ``t`` (quadrature over q)."""
    _check(prior, cost)
    if t <= 0:
        return 0.0
    mu, s2, tau = prior.mu, prior.sigma2, prior.tau
    s = prior.sigma
    rst = math.sqrt(t * tau)
    a = (mu - cost) / s2
    scale = (mu - cost) / (s2 * math.sqrt(tau)) * t ** -1.5

    def f(q):
        return scale * norm_pdf(rst * (q - cost) + a / rst) * norm_pdf((q - mu) / s) / s

    # the kernel in q has width 1/sqrt(t tau) around `peak`; beyond 40 widths it is < e^-800
    peak = cost - a / (t * tau)
    lo = max(mu - 10 * s, peak - 40.0 / rst)
    hi = min(mu + 10 * s, peak + 40.0 / rst)
    if hi <= lo:
        return 0.0
    pts = [peak] if lo < peak < hi else None
    val, _ = integrate.quad(f, lo, hi, points=pts, epsabs=0.0, epsrel=tol, limit=400)
    return val


def hitting_time_pdf_closed(t, prior, cost):
    """Same density with the Gaussian q-integral done analytically (cross-check)."""
    _check(prior, cost)
    t = np.asarray(t, dtype=float)
    m = prior.mu - cost
    s = t * prior.tau
    v = 1.0 + s * prior.sigma2
    z = m * np.sqrt(v) / (prior.sigma2 * np.sqrt(s))
    return m / (prior.sigma2 * math.sqrt(prior.tau)) * t ** -1.5 * norm_pdf(z) / np.sqrt(v)


def unscaled_residual_mass(t, prior, cost):
    """P(hit happens after time t) for the unscaled clock (finite hits only)."""
    _check(prior, cost)
    mu, s = prior.mu, prior.sigma

    def f(q):
        return finite_time_survival(q, t, prior, cost) * norm_pdf((q - mu) / s) / s

    lo, hi = mu - 10 * s, mu + 10 * s
    pts = [cost] if lo < cost < hi else None
    alive, _ = integrate.quad(f, lo, hi, points=pts, epsabs=1e-12, limit=400)
    return max(0.0, alive - survival_probability(prior, cost))


def residual_horizon(prior, cost, mass=0.01):
    """Smallest unscaled time after which less than ``mass`` of hitting remains."""
    lo, hi = 0.0, 1.0
    while unscaled_residual_mass(hi, prior, cost) >= mass:
        lo, hi = hi, hi * 2.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if unscaled_residual_mass(mid, prior, cost) >= mass:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-3 * hi:
            break
    return hi


def conditional_mean_given_survival(prior, cost):
    """E[q | never ostracized]; the hitting event itself carries E[q] = cost."""
    p = survival_probability(prior, cost)
    return (prior.mu - (1.0 - p) * cost) / p


def reentry_survival_probability(prior, cost, R):
    if R < 1:
        raise DomainError("R must be >= 1")
    p = survival_probability(prior, cost)
    return 1.0 - (1.0 - p) ** R


# ----------------------------------------------------- stable networks

@dataclass(frozen=True)
class StableNetworkDistribution:
    entries: tuple  # ((edge tuple, probability), ...), canonical order

    def probability(self, edges):
        key = tuple(sorted(tuple(sorted(e)) for e in edges))
        for net, p in self.entries:
            if net == key:
                return p
        return 0.0

    def total(self):
        return math.fsum(p for _, p in self.entries)

    def __len__(self):
        return len(self.entries)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["network_edges", "probability"])
        for net, p in self.entries:
            w.writerow([";".join(f"{i}-{j}" for i, j in net), format(p, ".17g")])
        return buf.getvalue()


class EnumerationTooLarge(ValueError):
    pass


def enumerate_stable_networks(constraint, priors, cost, R=1, cap=ENUMERATION_CAP):
    """Exact distribution of the limiting network over all 2^N survival patterns."""
    n = constraint.n
    if n > cap:
        raise EnumerationTooLarge(
            f"{n} agents exceeds the enumeration cap of {cap} (2^{n} realizations); "
            "estimate stable-network frequencies by Monte Carlo instead")
    p = np.array([reentry_survival_probability(pr, cost, R) for pr in priors])
    edges = constraint.sorted_edges()

    codes = np.arange(2 ** n, dtype=np.int64)
    alive = ((codes[:, None] >> np.arange(n)) & 1).astype(bool)
    prob = np.prod(np.where(alive, p, 1.0 - p), axis=1)
    if edges:
        ei = np.array(edges)
        present = alive[:, ei[:, 0]] & alive[:, ei[:, 1]]
    else:
        present = np.zeros((len(codes), 0), dtype=bool)

    packed = np.packbits(present, axis=1) if edges else np.zeros((len(codes), 1), np.uint8)
    uniq, inverse = np.unique(packed, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    order = np.argsort(inverse, kind="stable")
    bounds = np.flatnonzero(np.r_[True, np.diff(inverse[order]) != 0])
    sums = np.add.reduceat(prob[order], bounds)

    out = []
    for k in range(len(uniq)):
        first = order[bounds[k]]
        net = tuple(e for e, on in zip(edges, present[first]) if on)
        out.append((net, float(sums[k])))
    out.sort(key=lambda item: item[0])
    return StableNetworkDistribution(tuple(out))
