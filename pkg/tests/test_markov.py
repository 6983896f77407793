import numpy as np
import pytest

from reflectdiff.errors import InputError, UnderpopulatedBins
from reflectdiff.markov import StoppingRule, run_restart_test
from reflectdiff.scenario import ScenarioConfig, load_scenario


def _half_line():
    return load_scenario("half_line").with_numerics(dt=1e-2, delta=0.02)


def _drift_scenario():
    d = load_scenario("unit_box").to_dict()
    d["coefficients"] = {"kind": "constant", "drift": [1.0, 0.0], "sigma": [[0.0, 0.0], [0.0, 0.0]]}
    d["numerics"].update(dt=1e-2, delta=0.01)
    d["behavior"]["delta"] = 0.01
    d["x0"] = [0.1, 0.5]
    return ScenarioConfig.from_dict(d)


def test_rules_roundtrip_and_validate():
    rules = [StoppingRule.fixed(0.3),
             StoppingRule.hit_halfspace([1.0], 0.05, tol=0.01, horizon=4.0),
             StoppingRule.hit_ball([0.5, 0.5], 0.1, tol=0.02)]
    for r in rules:
        assert StoppingRule.from_dict(r.to_dict()) == r
        assert r.describe()
    with pytest.raises(InputError):
        StoppingRule.hit_halfspace([1.0], 0.5).validate(np.array([0.4]))
    with pytest.raises(InputError):
        StoppingRule.hit_ball([0.0, 0.0], 1.0).validate(np.array([0.5, 0.5]))
    with pytest.raises(InputError):
        StoppingRule("hit").validate(np.array([0.5]))
    with pytest.raises(InputError):
        StoppingRule.from_dict({"kind": "exit"})
    with pytest.raises(InputError):
        StoppingRule.fixed(0.0)


def test_signed_distance():
    r = StoppingRule.hit_halfspace([0.0, 2.0], 1.0)
    assert np.allclose(r.distance([[0.0, 1.0], [3.0, 0.0]]), [0.5, -0.5])
    b = StoppingRule.hit_ball([0.0, 0.0], 1.0)
    assert np.allclose(b.distance([[3.0, 4.0]]), [4.0])


def test_reflected_bm_restart_and_calibration_pass():
    sc = _half_line()
    rule = StoppingRule.hit_halfspace([1.0], 0.04, horizon=5.0)
    rep = run_restart_test(sc, rule, [0.1, 0.3], 300, seed=1, x0=[0.5])
    assert rep.n_stopped == 300 and rep.n_simulated >= 300
    assert rep.passes, rep.min_p
    p = rep.cells[0].pvalues
    assert p.shape == (2, 1) and np.all((0 <= p) & (p <= 1))
    cal = run_restart_test(sc, rule, [0.1], 300, seed=1, x0=[0.5], mode="calibration")
    assert cal.passes


def test_negative_control_fails_ks():
    sc = _half_line()
    rule = StoppingRule.hit_halfspace([1.0], 0.04, horizon=5.0)
    rep = run_restart_test(sc, rule, [0.1], 300, seed=1, x0=[0.5], mode="control",
                           control_start=[2.0])
    assert rep.passes and rep.min_p < 1e-6


def test_deterministic_drift_is_a_point_mass():
    sc = _drift_scenario()
    rep = run_restart_test(sc, StoppingRule.fixed(0.2), [0.1, 0.2], 60, seed=0)
    assert rep.passes
    c = rep.cells[0]
    assert np.all(c.statistics == 0) and np.all(c.pvalues == 1)


def test_bins_are_disjoint_and_skipped_cells_are_reported():
    sc = _half_line()
    rule = StoppingRule.fixed(0.5)
    rep = run_restart_test(sc, rule, [0.1], 200, seed=2, x0=[0.5], bins=20, min_bin=30)
    counted = sum(c.n for c in rep.cells) + sum(n for _, n in rep.skipped)
    assert counted == rep.n_stopped == 200
    cells = [c.cell for c in rep.cells] + [c for c, _ in rep.skipped]
    assert len(set(cells)) == len(cells)
    assert all(n < 30 for _, n in rep.skipped) and all(c.n >= 30 for c in rep.cells)
    d = rep.to_dict()
    assert d["n_stopped"] == 200 and len(d["edges"][0]) == 21


def test_underpopulated_and_unreachable():
    sc = _half_line()
    with pytest.raises(UnderpopulatedBins):
        run_restart_test(sc, StoppingRule.fixed(0.2), [0.1], 20, seed=0, x0=[0.5])
    far = StoppingRule.hit_halfspace([-1.0], -9.0, horizon=0.2)
    with pytest.raises(UnderpopulatedBins):
        run_restart_test(sc, far, [0.1], 10, seed=0, x0=[0.5], max_attempts=1)


def test_run_restart_test_input_errors():
    sc = _half_line()
    rule = StoppingRule.fixed(0.2)
    with pytest.raises(InputError):
        run_restart_test(sc, rule, [0.1], 10, mode="other")
    with pytest.raises(InputError):
        run_restart_test(sc, rule, [0.1], 10, mode="control")
    with pytest.raises(InputError):
        run_restart_test(sc, rule, [-0.1], 10)
    with pytest.raises(InputError):
        run_restart_test(sc, StoppingRule.hit_halfspace([1.0], 1.0), [0.1], 10, x0=[0.5])


def test_worker_count_does_not_change_the_report():
    sc = _half_line()
    rule = StoppingRule.fixed(0.3)
    a = run_restart_test(sc, rule, [0.1], 60, seed=3, x0=[0.5], workers=1)
    b = run_restart_test(sc, rule, [0.1], 60, seed=3, x0=[0.5], workers=4)
    assert a.to_dict() == b.to_dict()
