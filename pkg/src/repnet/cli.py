"""Command-line front end.

Every command reads one JSON config (``--config``), writes one CSV
(``--out``, default stdout) and prints a one-line summary to stdout.  Exit
codes: 0 success, 2 config problem, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analytics, experiments, hitting, pathsim, welfare
from .model import AgentPrior, ConfigError, EngineConfig, config_to_dict, load_config, validate

COMMANDS = ("survival", "stable-nets", "welfare", "compare", "star-sweep", "ring-compare", "entry-sweep",
            "subsidy-sweep", "reentry-sweep", "validate", "path-check", "acceptance")


def _parser():
    p = argparse.ArgumentParser(prog="repnet", description="Reputational learning on networks: simulation CLI")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--out", help="output CSV path (stdout if omitted); a directory for 'acceptance'")
    p.add_argument("--seed", type=int)
    p.add_argument("--replications", type=int)
    p.add_argument("--engine", choices=("analytic", "path"))
    p.add_argument("--dt", type=float, help="path engine step (with --engine path)")
    p.add_argument("--horizon", type=float, help="path engine horizon (with --engine path)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--per-agent", action="store_true", help="add per-agent columns to sweep output")
    p.add_argument("--realizations", type=int, default=0,
                   help="welfare: also dump this many realizations to <out>.realizations.csv")
    p.add_argument("--events", action="store_true", help="path-check: also write <out>.events.csv for replication 0")
    p.add_argument("--criterion", type=int, action="append",
                   help="acceptance: criterion number (repeatable; default all)")
    return p


def _apply_overrides(cfg, args):
    mc = cfg.mc
    if args.seed is not None:
        mc = replace(mc, seed=args.seed)
    if args.replications is not None:
        mc = replace(mc, replications=args.replications)
    eng = mc.engine
    if args.engine is not None:
        eng = replace(eng, kind=args.engine)
    if args.dt is not None:
        eng = replace(eng, dt=args.dt)
    if args.horizon is not None:
        eng = replace(eng, horizon=args.horizon)
    return replace(cfg, mc=replace(mc, engine=eng))


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _need(x, key):
    if key not in x:
        raise ConfigError(f"experiment.{key}: missing")
    return x[key]


def _survival(cfg, args):
    thr = cfg.threshold()
    R = cfg.extension.attempts
    rows = ["agent,p_survive"]
    for i, p in enumerate(cfg.priors):
        rows.append(f"{i},{analytics.reentry_survival_probability(p, thr, R):.17g}")
    return "\n".join(rows) + "\n", f"survival probabilities for {cfg.n} agents"


def _stable(cfg, args):
    d = analytics.enumerate_stable_networks(cfg.constraint, cfg.priors, cfg.threshold(), cfg.extension.attempts)
    return d.to_csv(), f"{len(d)} stable networks, total probability {d.total():.12f}"


def _welfare(cfg, args):
    est = welfare.exante_welfare(cfg, args.threads)
    star, star_pa = welfare.no_learning_welfare(cfg.constraint, cfg.priors, cfg.econ)
    lines = ["agent,welfare_mean,welfare_stderr,no_learning,replications"]
    f = welfare._num
    lines.append(f"total,{f(est.mean)},{f(est.stderr)},{f(star)},{est.replications}")
    for i in range(cfg.n):
        lines.append(f"{i},{f(est.per_agent[i])},{f(est.per_agent_stderr[i])},{f(star_pa[i])},{est.replications}")
    if args.realizations and args.out:
        Path(str(args.out) + ".realizations.csv").write_text(hitting.realizations_csv(cfg, args.realizations))
    return "\n".join(lines) + "\n", f"welfare {est.mean:.6g} ± {est.stderr:.3g} (no-learning {star:.6g})"


def _compare(cfg, args):
    nets, names = experiments._topologies(_need(cfg.experiment, "topologies"), cfg.n)
    rk = welfare.compare_topologies(cfg.priors, cfg.econ, nets, cfg.mc, cfg.extension, args.threads, names)
    best = rk[0]
    return welfare.ranking_csv(rk), f"best {best.name}: {best.estimate.mean:.6g} ± {best.estimate.stderr:.3g}"


def _sweep_summary(sw):
    m = sw.means()
    k = int(np.argmax(m))
    mean, se = sw.estimate(k)
    return f"{len(sw.points)} points; max at {sw.points[k]}: {mean:.6g} ± {se:.3g}"


def _star(cfg, args):
    x = cfg.experiment
    per = AgentPrior(**_need(x, "periphery"))
    if "center_grid" in x:
        grid = [tuple(g) for g in x["center_grid"]]
    else:
        grid = [(m, t) for m in _need(x, "mu_grid") for t in _need(x, "tau_grid")]
    sw = welfare.star_sweep(per, grid, float(_need(x, "center_sigma2")), cfg.econ, cfg.mc,
                            int(x.get("n_periphery", 5)), args.threads)
    return sw.to_csv(args.per_agent), _sweep_summary(sw)


def _ring(cfg, args):
    sizes = [int(n) for n in _need(cfg.experiment, "sizes")]
    if any(n < 3 for n in sizes):
        raise ConfigError("experiment.sizes: ring sizes must be >= 3")
    sw = welfare.ring_compare(cfg.priors[0], cfg.econ, sizes, cfg.mc, args.threads)
    return sw.to_csv(args.per_agent), _sweep_summary(sw)


def _entry(cfg, args):
    x = cfg.experiment
    sw = welfare.entry_sweep(cfg, int(_need(x, "agent")), _need(x, "entry_grid"), args.threads)
    return sw.to_csv(args.per_agent), _sweep_summary(sw)


def _subsidy(cfg, args):
    sw = welfare.subsidy_sweep(cfg, _need(cfg.experiment, "delta_grid"), args.threads)
    return sw.to_csv(args.per_agent), _sweep_summary(sw)


def _reentry(cfg, args):
    x = cfg.experiment
    sw = welfare.reentry_sweep(cfg, _need(x, "R_grid"), _need(x, "L_grid"), x.get("tau_scale_grid", [1.0]),
                               args.threads)
    return sw.to_csv(args.per_agent), _sweep_summary(sw)


def _validate(cfg, args):
    return json.dumps(config_to_dict(cfg), indent=2) + "\n", "config ok"


def _path_check(cfg, args):
    if cfg.mc.engine.kind != "path":
        cfg = replace(cfg, mc=replace(cfg.mc, engine=EngineConfig("path", 1e-3, None)))
        validate(cfg)
    chk = pathsim.path_check(cfg, args.threads)
    if args.events and args.out:
        _, ev, _ = pathsim.run_path(cfg, 0)
        Path(str(args.out) + ".events.csv").write_text(pathsim.events_csv(ev))
    ok = bool(chk.survival_ok().all())
    return chk.to_csv(), (f"path welfare {chk.welfare_mean:.6g} ± {chk.welfare_se:.3g} (grid bias "
                          f"{chk.welfare_bias:.3g}); survival within tolerance: {ok}")


HANDLERS = {
    "survival": _survival, "stable-nets": _stable, "welfare": _welfare, "compare": _compare,
    "star-sweep": _star, "ring-compare": _ring, "entry-sweep": _entry, "subsidy-sweep": _subsidy,
    "reentry-sweep": _reentry, "validate": _validate, "path-check": _path_check,
}


def _acceptance(args):
    res = experiments.run_all(args.criterion, args.threads, args.out)
    failed = [r.number for r in res if not r.ok]
    print(f"{len(res) - len(failed)}/{len(res)} criteria passed" + (f"; failed: {failed}" if failed else ""))
    return 0 if not failed else 1


def run(argv=None):
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    if args.command == "acceptance":
        try:
            return _acceptance(args)
        except Exception as exc:  # pragma: no cover - surfaced to the shell
            print(f"error: {exc}", file=sys.stderr)
            return 1
    if not args.config:
        print("error: --config is required", file=sys.stderr)
        return 2
    try:
        cfg = validate(_apply_overrides(load_config(args.config), args))
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        text, summary = HANDLERS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    _emit(text, args.out)
    # with CSV on stdout the summary goes to stderr so the CSV stays parseable
    print(summary, file=sys.stdout if args.out else sys.stderr)
    return 0


def main():
    sys.exit(run())
