import json
import math

import pytest

from reflectdiff.errors import InputError
from reflectdiff.scenario import ScenarioConfig, builtin_names, load_scenario

BUILTINS = ["cusp", "half_line", "interval_nonlocal", "lens", "oblique_quadrant", "unit_box"]


def test_builtins_load():
    assert builtin_names() == BUILTINS
    for name in BUILTINS:
        sc = load_scenario(name)
        assert sc.name == name
        assert sc.delta <= math.sqrt(sc.dt)
        assert sc.domain.contains([sc.x0])[0]


@pytest.mark.parametrize("name", BUILTINS)
def test_roundtrip_keeps_the_hash(name, tmp_path):
    sc = load_scenario(name)
    path = tmp_path / "s.json"
    path.write_text(sc.dumps())
    again = load_scenario(str(path))
    assert again.hash == sc.hash
    assert again.to_dict() == sc.to_dict()


def test_hash_ignores_name_and_output_but_not_numerics():
    sc = load_scenario("lens")
    d = sc.to_dict()
    d["name"], d["output"] = "renamed", {"dir": "x"}
    assert ScenarioConfig.from_dict(d).hash == sc.hash
    assert sc.with_numerics(dt=2e-3).hash != sc.hash
    assert sc.with_numerics(delta=1e-3).hash != sc.hash
    d["seeds"] = {"default": 1}
    assert ScenarioConfig.from_dict(d).hash != sc.hash


def test_fixture_reference_matches_expanded_domain():
    sc = load_scenario("lens")
    d = sc.to_dict()
    d["domain"] = sc.domain.to_dict()
    assert ScenarioConfig.from_dict(d).hash == sc.hash


def test_with_numerics_sets_delta_everywhere():
    sc = load_scenario("cusp").with_numerics(dt=1e-2, delta=0.05)
    assert sc.dt == 1e-2 and sc.delta == 0.05 and sc.behavior.delta == 0.05


def test_seeds():
    sc = load_scenario("lens")
    assert sc.seed("anything") == sc.seeds["default"]
    d = sc.to_dict()
    d["seeds"]["markov"] = 7
    assert ScenarioConfig.from_dict(d).seed("markov") == 7


def _base():
    return load_scenario("unit_box").to_dict()


@pytest.mark.parametrize("mutate", [
    lambda d: d.pop("x0"),
    lambda d: d.pop("domain"),
    lambda d: d.update(x0=[0.5]),
    lambda d: d.update(domain={"fixture": "nope"}),
    lambda d: d.update(domain={"fixture": "unit_box", "params": {"bad": 1}}),
    lambda d: d["numerics"].update(dt=-1.0),
    lambda d: d["numerics"].update(dt=float("nan")),
    lambda d: d["numerics"].update(delta=0.5),
    lambda d: d["numerics"].update(select_mode="random"),
    lambda d: d["numerics"].update(unknown=1),
    lambda d: d.update(coefficients={"kind": "builtin", "name": "brownian", "dimension": 3}),
    lambda d: d.update(coefficients={"kind": "builtin", "name": "levy", "dimension": 2}),
])
def test_invalid_scenarios(mutate):
    d = _base()
    mutate(d)
    with pytest.raises(InputError):
        ScenarioConfig.from_dict(d)


def test_load_errors(tmp_path):
    with pytest.raises(InputError):
        load_scenario("no_such_scenario")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(InputError):
        load_scenario(str(bad))
    arr = tmp_path / "arr.json"
    arr.write_text(json.dumps([1, 2]))
    with pytest.raises(InputError):
        load_scenario(str(arr))
