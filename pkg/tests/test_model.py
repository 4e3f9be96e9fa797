import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repnet.model import (AgentPrior, ConfigError, EconomyParams, EngineConfig, ExtensionConfig, MCConfig,
                          NetworkConstraint, RunConfig, config_from_dict, config_to_dict, load_config, validate)


def triangle():
    pr = AgentPrior(2.0, 2.0, 1.0)
    return RunConfig((pr,) * 3, NetworkConstraint.complete(3), EconomyParams(1.0, 1.0))


def test_valid_triangle_returned_unchanged():
    cfg = triangle()
    assert validate(cfg) is cfg


def test_mu_equal_cost_rejected():
    cfg = triangle().with_priors([AgentPrior(1.0, 2.0, 1.0)] + [AgentPrior(2.0, 2.0, 1.0)] * 2)
    with pytest.raises(ConfigError, match=r"priors\[0\]\.mu: mu must exceed cost"):
        validate(cfg)


def test_asymmetric_adjacency_rejected():
    with pytest.raises(ConfigError, match="not symmetric"):
        NetworkConstraint.from_adjacency([[0, 1], [0, 0]])


def test_self_loop_and_range_rejected():
    with pytest.raises(ConfigError, match="self-loop"):
        NetworkConstraint.from_adjacency([[1, 0], [0, 0]])
    bad = triangle().with_constraint(NetworkConstraint(3, frozenset({(0, 5)})))
    with pytest.raises(ConfigError, match="outside"):
        validate(bad)


@pytest.mark.parametrize("field,value,msg", [
    ("sigma2", 0.0, "sigma2"), ("tau", -1.0, "tau"), ("entry_time", math.inf, "entry_time"),
])
def test_prior_invariants(field, value, msg):
    kw = dict(mu=2.0, sigma2=2.0, tau=1.0, entry_time=0.0)
    kw[field] = value
    cfg = triangle().with_priors([AgentPrior(**kw)] * 3)
    with pytest.raises(ConfigError, match=msg):
        validate(cfg)


def test_length_mismatch_and_engine_rules():
    with pytest.raises(ConfigError, match="expected 3 agents"):
        validate(triangle().with_priors([AgentPrior(2.0, 2.0, 1.0)] * 2))
    with pytest.raises(ConfigError, match="dt"):
        validate(triangle().with_mc(engine=EngineConfig("path", None, 5.0)))
    with pytest.raises(ConfigError, match="horizon"):
        validate(triangle().with_mc(engine=EngineConfig("path", 0.1, 0.05)))
    with pytest.raises(ConfigError, match="link_formation"):
        validate(triangle().with_extension(ExtensionConfig("link_formation", gamma=1.0)))
    with pytest.raises(ConfigError, match="entry"):
        validate(triangle().with_priors([AgentPrior(2.0, 2.0, 1.0, 1.0)] * 3))
    with pytest.raises(ConfigError, match="replications"):
        validate(triangle().with_mc(replications=0))


def test_json_round_trip(tmp_path):
    cfg = triangle().with_extension(ExtensionConfig("reentry", R=3, L=0.5))
    p = tmp_path / "c.json"
    p.write_text(json.dumps(config_to_dict(cfg)))
    assert load_config(p) == cfg


def test_json_adjacency_form():
    d = config_to_dict(triangle())
    d["constraint"] = {"adjacency": [[0, 1, 0], [1, 0, 1], [0, 1, 0]]}
    assert config_from_dict(d).constraint == NetworkConstraint.line(3)


def test_json_syntax_error_has_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "priors": [\n')
    with pytest.raises(ConfigError, match=r"line \d+ column \d+"):
        load_config(p)


def test_missing_field_named():
    d = config_to_dict(triangle())
    del d["econ"]["rho"]
    with pytest.raises(ConfigError, match=r"econ\.rho: missing"):
        config_from_dict(d)


def test_topology_constructors():
    assert len(NetworkConstraint.complete(4).edges) == 6
    assert len(NetworkConstraint.ring(5).edges) == 5
    assert NetworkConstraint.star(4).neighbors(0) == [1, 2, 3]
    cp = NetworkConstraint.core_periphery(5, [0, 1])
    assert (0, 1) in cp.edges and (2, 3) not in cp.edges
    assert NetworkConstraint.from_adjacency(NetworkConstraint.ring(4).adjacency().astype(int)) == NetworkConstraint.ring(4)


priors = st.builds(AgentPrior, mu=st.floats(-5, 5), sigma2=st.floats(-1, 5), tau=st.floats(-1, 5),
                   entry_time=st.floats(0, 2))


@settings(max_examples=200, deadline=None)
@given(ps=st.lists(priors, min_size=1, max_size=4), cost=st.floats(-2, 2), rho=st.floats(-1, 3),
       variant=st.sampled_from(["none", "subsidy", "entry", "reentry", "bogus"]), R=st.integers(0, 3))
def test_validate_idempotent_and_invariants(ps, cost, rho, variant, R):
    cfg = RunConfig(tuple(ps), NetworkConstraint.complete(len(ps)), EconomyParams(cost, rho),
                    ExtensionConfig(variant, R=R), MCConfig(10, 1))
    try:
        out = validate(cfg)
    except ConfigError:
        return
    assert validate(out) is out
    assert out.econ.rho > 0
    for p in out.priors:
        assert p.sigma2 > 0 and p.tau > 0 and p.entry_time >= 0 and p.mu > cost
    assert out.extension.R >= 1
