"""Domain types, validation and JSON ingestion for simulation runs."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

VARIANTS = ("none", "subsidy", "link_formation", "entry", "reentry")
ENGINES = ("analytic", "path")


class ConfigError(ValueError):
    """A run configuration violates a type invariant."""


@dataclass(frozen=True)
class AgentPrior:
    mu: float
    sigma2: float
    tau: float
    entry_time: float = 0.0

    @property
    def sigma(self):
        return math.sqrt(self.sigma2)


@dataclass(frozen=True)
class NetworkConstraint:
    """Undirected permission graph over ``n`` agents; edges are sorted pairs."""

    n: int
    edges: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "edges", frozenset(tuple(sorted(e)) for e in self.edges))

    @classmethod
    def from_adjacency(cls, matrix):
        a = np.asarray(matrix)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ConfigError("constraint.adjacency: must be a square matrix")
        if not np.array_equal(a, a.T):
            i, j = np.argwhere(a != a.T)[0]
            raise ConfigError(f"constraint.adjacency: not symmetric at ({i}, {j})")
        if np.any(np.diag(a) != 0):
            i = int(np.flatnonzero(np.diag(a))[0])
            raise ConfigError(f"constraint.adjacency: self-loop at agent {i}")
        if not np.all((a == 0) | (a == 1)):
            raise ConfigError("constraint.adjacency: entries must be 0 or 1")
        n = a.shape[0]
        return cls(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n) if a[i, j]))

    def adjacency(self):
        a = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.edges:
            a[i, j] = a[j, i] = True
        return a

    def sorted_edges(self):
        return sorted(self.edges)

    def neighbors(self, i):
        return sorted({j for e in self.edges for j in e if i in e and j != i})

    # common topologies

    @classmethod
    def empty(cls, n):
        return cls(n)

    @classmethod
    def complete(cls, n):
        return cls(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))

    @classmethod
    def line(cls, n):
        return cls(n, frozenset((i, i + 1) for i in range(n - 1)))

    @classmethod
    def ring(cls, n):
        return cls(n, frozenset((i, (i + 1) % n) for i in range(n)))

    @classmethod
    def star(cls, n, center=0):
        return cls(n, frozenset((center, j) for j in range(n) if j != center))

    @classmethod
    def core_periphery(cls, n, core):
        """Core agents linked to everyone; periphery agents only to the core."""
        core = set(core)
        return cls(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)
                                if i in core or j in core))


@dataclass(frozen=True)
class EconomyParams:
    cost: float
    rho: float


@dataclass(frozen=True)
class ExtensionConfig:
    variant: str = "none"
    delta: float = 0.0
    gamma: float = 0.0
    R: int = 1
    L: float = 0.0

    @property
    def threshold_shift(self):
        return self.delta if self.variant == "subsidy" else 0.0

    @property
    def attempts(self):
        return self.R if self.variant == "reentry" else 1

    @property
    def downtime(self):
        return self.L if self.variant == "reentry" else 0.0


@dataclass(frozen=True)
class EngineConfig:
    kind: str = "analytic"
    dt: float | None = None
    horizon: float | None = None


@dataclass(frozen=True)
class MCConfig:
    replications: int = 10_000
    seed: int = 0
    engine: EngineConfig = field(default_factory=EngineConfig)


@dataclass(frozen=True)
class RunConfig:
    priors: tuple
    constraint: NetworkConstraint
    econ: EconomyParams
    extension: ExtensionConfig = field(default_factory=ExtensionConfig)
    mc: MCConfig = field(default_factory=MCConfig)
    experiment: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "priors", tuple(self.priors))

    @property
    def n(self):
        return self.constraint.n

    def threshold(self):
        """Reputation level at which neighbours sever their links."""
        return self.econ.cost - self.extension.threshold_shift

    def entry_times(self):
        return np.array([p.entry_time for p in self.priors], dtype=float)

    def with_priors(self, priors):
        return replace(self, priors=tuple(priors))

    def with_constraint(self, constraint):
        return replace(self, constraint=constraint)

    def with_extension(self, extension):
        return replace(self, extension=extension)

    def with_mc(self, **kw):
        return replace(self, mc=replace(self.mc, **kw))


def _finite(x):
    return isinstance(x, (int, float, np.floating, np.integer)) and math.isfinite(x)


def validate(config):
    """Return ``config`` unchanged if every invariant holds, else raise ConfigError."""
    c = config.econ.cost
    if not _finite(c):
        raise ConfigError("econ.cost: must be a finite real")
    if not (_finite(config.econ.rho) and config.econ.rho > 0):
        raise ConfigError("econ.rho: must be > 0")

    net = config.constraint
    if not (isinstance(net.n, (int, np.integer)) and net.n >= 1):
        raise ConfigError("constraint.n: must be a positive integer")
    for i, j in net.sorted_edges():
        if i == j:
            raise ConfigError(f"constraint.edges: self-loop at agent {i}")
        if not (0 <= i < net.n and 0 <= j < net.n):
            raise ConfigError(f"constraint.edges: pair ({i}, {j}) outside [0, {net.n})")

    if len(config.priors) != net.n:
        raise ConfigError(f"priors: expected {net.n} agents, got {len(config.priors)}")
    ext = config.extension
    for i, p in enumerate(config.priors):
        if not _finite(p.mu):
            raise ConfigError(f"priors[{i}].mu: must be finite")
        if not (_finite(p.sigma2) and p.sigma2 > 0):
            raise ConfigError(f"priors[{i}].sigma2: must be > 0")
        if not (_finite(p.tau) and p.tau > 0):
            raise ConfigError(f"priors[{i}].tau: must be > 0")
        if not (_finite(p.entry_time) and p.entry_time >= 0):
            raise ConfigError(f"priors[{i}].entry_time: must be finite and >= 0")
        if p.entry_time > 0 and ext.variant != "entry":
            raise ConfigError(f"priors[{i}].entry_time: nonzero entry times need the 'entry' variant")
        if not p.mu > c:
            raise ConfigError(f"priors[{i}].mu: mu must exceed cost ({p.mu} <= {c})")

    if ext.variant not in VARIANTS:
        raise ConfigError(f"extension.variant: unknown variant {ext.variant!r}")
    if not (_finite(ext.delta) and ext.delta >= 0):
        raise ConfigError("extension.delta: must be >= 0")
    if not (_finite(ext.gamma) and ext.gamma >= 0):
        raise ConfigError("extension.gamma: must be >= 0")
    if not (isinstance(ext.R, (int, np.integer)) and ext.R >= 1):
        raise ConfigError("extension.R: must be an integer >= 1")
    if not (_finite(ext.L) and ext.L >= 0):
        raise ConfigError("extension.L: must be >= 0")

    mc = config.mc
    if not (isinstance(mc.replications, (int, np.integer)) and mc.replications >= 1):
        raise ConfigError("mc.replications: must be an integer >= 1")
    if not (isinstance(mc.seed, (int, np.integer)) and 0 <= mc.seed < 2**64):
        raise ConfigError("mc.seed: must be an unsigned 64-bit integer")
    eng = mc.engine
    if eng.kind not in ENGINES:
        raise ConfigError(f"mc.engine.kind: unknown engine {eng.kind!r}")
    if eng.kind == "path":
        if not (_finite(eng.dt) and eng.dt > 0):
            raise ConfigError("mc.engine.dt: must be > 0 for the path engine")
        if eng.horizon is not None and not (_finite(eng.horizon) and eng.horizon > eng.dt):
            raise ConfigError("mc.engine.horizon: must exceed dt")
    elif ext.variant == "link_formation":
        raise ConfigError("extension.variant: link_formation needs the path engine")
    return config


# ---------------------------------------------------------------- JSON I/O

def _get(d, key, where, default=...):
    if key in d:
        return d[key]
    if default is ...:
        raise ConfigError(f"{where}.{key}: missing")
    return default


def config_from_dict(d):
    if not isinstance(d, dict):
        raise ConfigError("config: top level must be an object")
    priors = []
    for i, p in enumerate(_get(d, "priors", "config")):
        where = f"priors[{i}]"
        try:
            priors.append(AgentPrior(
                mu=float(_get(p, "mu", where)),
                sigma2=float(_get(p, "sigma2", where)),
                tau=float(_get(p, "tau", where)),
                entry_time=float(_get(p, "entry_time", where, 0.0)),
            ))
        except (TypeError, AttributeError) as exc:
            raise ConfigError(f"{where}: {exc}") from None

    cd = _get(d, "constraint", "config")
    if "adjacency" in cd:
        constraint = NetworkConstraint.from_adjacency(cd["adjacency"])
        if "n" in cd and cd["n"] != constraint.n:
            raise ConfigError("constraint.n: disagrees with adjacency size")
    else:
        n = _get(cd, "n", "constraint")
        edges = _get(cd, "edges", "constraint", [])
        for k, e in enumerate(edges):
            if len(e) != 2:
                raise ConfigError(f"constraint.edges[{k}]: expected a pair")
            if e[0] == e[1]:
                raise ConfigError(f"constraint.edges[{k}]: self-loop at agent {e[0]}")
        constraint = NetworkConstraint(int(n), frozenset(tuple(int(x) for x in e) for e in edges))

    ed = _get(d, "econ", "config")
    econ = EconomyParams(cost=float(_get(ed, "cost", "econ")), rho=float(_get(ed, "rho", "econ")))

    xd = d.get("extension", {"variant": "none"})
    extension = ExtensionConfig(
        variant=xd.get("variant", "none"),
        delta=float(xd.get("delta", 0.0)),
        gamma=float(xd.get("gamma", 0.0)),
        R=xd.get("R", 1),
        L=float(xd.get("L", 0.0)),
    )

    md = d.get("mc", {})
    engd = md.get("engine", {"kind": "analytic"})
    if isinstance(engd, str):
        engd = {"kind": engd}
    engine = EngineConfig(kind=engd.get("kind", "analytic"), dt=engd.get("dt"), horizon=engd.get("horizon"))
    mc = MCConfig(replications=md.get("replications", 10_000), seed=md.get("seed", 0), engine=engine)

    return RunConfig(tuple(priors), constraint, econ, extension, mc, experiment=d.get("experiment", {}))


def config_to_dict(config):
    ext = config.extension
    xd = {"variant": ext.variant}
    if ext.variant == "subsidy":
        xd["delta"] = ext.delta
    elif ext.variant == "link_formation":
        xd["gamma"] = ext.gamma
    elif ext.variant == "reentry":
        xd.update(R=ext.R, L=ext.L)
    eng = config.mc.engine
    engd = {"kind": eng.kind}
    if eng.kind == "path":
        engd.update(dt=eng.dt, horizon=eng.horizon)
    out = {
        "priors": [{"mu": p.mu, "sigma2": p.sigma2, "tau": p.tau, "entry_time": p.entry_time}
                   for p in config.priors],
        "constraint": {"n": config.constraint.n, "edges": [list(e) for e in config.constraint.sorted_edges()]},
        "econ": {"cost": config.econ.cost, "rho": config.econ.rho},
        "extension": xd,
        "mc": {"replications": config.mc.replications, "seed": config.mc.seed, "engine": engd},
    }
    if config.experiment:
        out["experiment"] = config.experiment
    return out


def load_config(path):
    """Parse a JSON config file; JSON syntax errors are reported with line/column."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return config_from_dict(data)
