import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import solve_bvp

from reflectdiff.errors import InputError
from reflectdiff.resolvent import (TestFunction, VGrid, agree, check_derivatives,
                                   estimate_v_grid, estimate_vh_constrained,
                                   estimate_vh_controlled, make_grid, parse_test_function,
                                   viscosity_subsolution_check, viscosity_supersolution_check)
from reflectdiff.scenario import load_scenario

HALF_LINE_VALUE = 2 - math.sqrt(2)


def half_line_oracle(n=20001, length=30.0):
    """Second-order finite differences for v - v''/2 = exp(-x), v'(0) = 0,
    v(length) = 0, with a ghost node at the reflecting end."""
    from scipy.sparse import diags
    from scipy.sparse.linalg import spsolve

    x = np.linspace(0.0, length, n)
    dx = x[1] - x[0]
    c = 0.5 / dx ** 2
    main = np.full(n, 1 + 2 * c)
    lower = np.full(n - 1, -c)
    upper = np.full(n - 1, -c)
    upper[0] = -2 * c  # ghost node v(-dx) = v(dx)
    main[-1], lower[-1] = 1.0, 0.0
    rhs = np.exp(-x)
    rhs[-1] = 0.0
    return x, spsolve(diags([lower, main, upper], [-1, 0, 1], format="csc"), rhs)


def exact_half_line(x):
    return 2 * np.exp(-x) - math.sqrt(2) * np.exp(-math.sqrt(2) * x)


def test_finite_difference_oracle_gives_two_minus_root_two():
    x, v = half_line_oracle()
    assert v[0] == pytest.approx(HALF_LINE_VALUE, abs=1e-6)
    assert np.max(np.abs(v[:2000] - exact_half_line(x[:2000]))) < 1e-6


def test_collocation_oracle_agrees():
    sol = solve_bvp(lambda x, y: np.vstack([y[1], 2 * (y[0] - np.exp(-x))]),
                    lambda a, b: np.array([a[1], b[0]]),
                    np.linspace(0, 30, 400), np.zeros((2, 400)), tol=1e-8, max_nodes=100000)
    assert sol.success
    assert sol.sol(0.0)[0] == pytest.approx(HALF_LINE_VALUE, abs=1e-6)


def _functions():
    return [
        TestFunction.constant(2.5, 2),
        TestFunction.exponential([0.3, -0.7], scale=1.5),
        TestFunction.polynomial([(1.0, (2, 1)), (-0.5, (0, 3)), (2.0, (1, 0))], 2),
        TestFunction.bump([0.2, -0.1], 0.4, height=2.0),
        TestFunction.exponential([-1.0, 0.5]) * 3.0 + TestFunction.bump([0.0, 0.0], 0.7),
        -TestFunction.polynomial([(1.0, (1, 1))], 2),
    ]


@pytest.mark.parametrize("f", _functions(), ids=repr)
def test_derivatives_match_finite_differences(f):
    X = np.random.default_rng(0).uniform(-1, 1, size=(50, 2))
    assert check_derivatives(f, X) < 1e-6


@pytest.mark.parametrize("f", _functions(), ids=repr)
def test_test_function_roundtrip(f):
    g = TestFunction.from_dict(f.to_dict())
    X = np.random.default_rng(1).uniform(-1, 1, size=(20, 2))
    assert np.array_equal(f.value(X), g.value(X))
    assert np.array_equal(f.hess(X), g.hess(X))


@given(st.lists(st.floats(-2, 2), min_size=2, max_size=2),
       st.floats(0.2, 2.0), st.floats(-3, 3))
def test_algebra_is_linear(a, width, c):
    f = TestFunction.exponential(a)
    g = TestFunction.bump([0.1, 0.2], width)
    X = np.array([[0.3, -0.4], [1.0, 0.5]])
    assert np.allclose((f * c + g).value(X), c * f.value(X) + g.value(X))
    assert np.allclose((f * c + g).grad(X), c * f.grad(X) + g.grad(X))


def test_parse_test_function():
    assert parse_test_function("const:1", 2).value([[5.0, 5.0]])[0] == 1.0
    f = parse_test_function("exp:-1", 1)
    assert f.value([[0.0]])[0] == 1.0 and f.value([[1.0]])[0] == pytest.approx(math.exp(-1))
    g = parse_test_function("exp:-1", 2)
    assert g.value([[1.0, 1.0]])[0] == pytest.approx(math.exp(-2))
    b = parse_test_function("bump:0.5,0.5:0.1", 2)
    assert b.value([[0.5, 0.5]])[0] == 1.0
    j = parse_test_function('{"kind": "constant", "c": 3}', 2)
    assert j.value([[0.0, 0.0]])[0] == 3.0
    for bad in ("sin:1", "const:x", "{bad json", '{"kind": "bump", "center": [0]}'):
        with pytest.raises(InputError):
            parse_test_function(bad, 2)


def test_sup_abs():
    sc = load_scenario("unit_box")
    assert TestFunction.constant(-4, 2).sup_abs(sc.domain) == 4
    assert TestFunction.exponential([1.0, 1.0]).sup_abs(sc.domain) == pytest.approx(math.e ** 2)


def _coarse(name, **kw):
    return load_scenario(name).with_numerics(dt=1e-2, delta=0.02, **kw)


@pytest.mark.parametrize("fn", [estimate_vh_controlled, estimate_vh_constrained])
def test_constant_reward_is_the_discount_mass(fn):
    # h = 1 integrates e^{-t} over [0, T] exactly on every path
    sc = _coarse("lens")
    est = fn(sc, TestFunction.constant(1.0, 2), n_paths=20, seed=3, horizon=4.0, workers=1)
    assert est.mean == pytest.approx(1 - math.exp(-4.0), abs=1e-12)
    assert est.stderr < 1e-12
    assert est.truncation_bound == pytest.approx(math.exp(-4.0))


def test_half_line_estimators_are_near_the_oracle():
    sc = _coarse("half_line")
    h = TestFunction.exponential([-1.0])
    a = estimate_vh_controlled(sc, h, n_paths=400, seed=11, horizon=10.0)
    b = estimate_vh_constrained(sc, h, n_paths=400, seed=11, horizon=10.0)
    # coarse steps bias the estimate up by O(sqrt(dt)); this only guards gross errors
    for e in (a, b):
        assert abs(e.mean - HALF_LINE_VALUE) < 0.08
        assert e.stderr < 0.02


def test_estimates_are_reproducible_and_worker_independent():
    sc = _coarse("cusp")
    h = TestFunction.bump([0.3, 0.0], 0.3)
    a = estimate_vh_controlled(sc, h, n_paths=24, seed=5, horizon=3.0, workers=1,
                               keep_values=True)
    b = estimate_vh_controlled(sc, h, n_paths=24, seed=5, horizon=3.0, workers=3,
                               keep_values=True)
    assert np.array_equal(a.values, b.values) and a.mean == b.mean
    assert a.to_dict()["workers"] == 1 and b.to_dict()["workers"] == 3


def test_estimator_input_errors():
    sc = _coarse("lens")
    with pytest.raises(InputError):
        estimate_vh_controlled(sc, TestFunction.constant(1.0, 1), n_paths=4)
    with pytest.raises(InputError):
        estimate_vh_controlled(sc, TestFunction.constant(1.0, 2), n_paths=1)
    with pytest.raises(InputError):
        estimate_vh_controlled(sc, TestFunction.constant(1.0, 2), x0=(1.0,), n_paths=4)


def test_agree():
    sc = _coarse("half_line")
    h = TestFunction.constant(1.0, 1)
    a = estimate_vh_controlled(sc, h, n_paths=4, seed=1, horizon=2.0)
    b = estimate_vh_constrained(sc, h, n_paths=4, seed=2, horizon=2.0)
    assert agree(a, b)
    b.mean += 1e-6
    assert not agree(a, b)


# viscosity checks on synthetic grids


def _half_line_solution():
    return (TestFunction.exponential([-1.0], scale=2.0)
            + TestFunction.exponential([-math.sqrt(2)], scale=-math.sqrt(2)))


def test_exact_solution_passes_both_checks():
    sc = load_scenario("half_line")
    h = TestFunction.exponential([-1.0])
    f = _half_line_solution()
    pts = make_grid(sc.domain, 0.05)
    grid = VGrid(pts, f.value(pts))
    sub = viscosity_subsolution_check(grid, f, sc, h, tolerance=1e-9)
    sup = viscosity_supersolution_check(grid, f, sc, h, tolerance=1e-9)
    assert sub.passes and sup.passes
    assert sub.location == "boundary" and sub.x_star == (0.0,)


def test_interior_bump_breaks_the_subsolution_inequality():
    sc = load_scenario("half_line")
    h = TestFunction.exponential([-1.0])
    f = _half_line_solution()
    pts = make_grid(sc.domain, 0.05)
    grid = VGrid(pts, f.value(pts) + TestFunction.bump([1.0], 0.1, 0.5).value(pts))
    rep = viscosity_subsolution_check(grid, f, sc, h)
    assert rep.location == "interior" and rep.x_star == pytest.approx((1.0,))
    assert rep.residual == pytest.approx(0.5, abs=1e-9)
    assert not rep.passes
    # a dip is a supersolution violation, and a subsolution pass
    grid = VGrid(pts, f.value(pts) - TestFunction.bump([1.0], 0.1, 0.5).value(pts))
    assert not viscosity_supersolution_check(grid, f, sc, h).passes


def test_boundary_maximum_uses_the_reflection_cone():
    # v - f peaks at the reflecting end; f grows inward so the cone test holds
    sc = load_scenario("half_line")
    h = TestFunction.constant(0.0, 1)
    f = TestFunction.polynomial([(1.0, (1,))], 1)
    pts = make_grid(sc.domain, 0.5)
    grid = VGrid(pts, np.full(len(pts), 100.0))
    rep = viscosity_subsolution_check(grid, f, sc, h)
    assert rep.location == "boundary" and rep.cone_max == pytest.approx(1.0)
    assert rep.residual > 0 and rep.passes
    rep = viscosity_subsolution_check(grid, -f, sc, h)
    assert rep.x_star == (10.0,) and not rep.passes


def test_lens_corner_cone():
    sc = load_scenario("lens")
    h = TestFunction.constant(0.0, 2)
    pts = make_grid(sc.domain, 0.1)
    corner = np.all(pts == 0.0, axis=1)
    grid = VGrid(pts, np.where(corner, 10.0, 0.0))
    # grad f = (-1, 0) gives <grad f, g> = -sqrt(2)/2 on both corner directions
    f = TestFunction.polynomial([(-1.0, (1, 0))], 2)
    rep = viscosity_subsolution_check(grid, f, sc, h)
    assert rep.x_star == (0.0, 0.0) and rep.location == "boundary"
    assert rep.cone_max == pytest.approx(-math.sqrt(2) / 2)
    assert rep.residual == pytest.approx(10.0)
    assert not rep.passes
    assert viscosity_subsolution_check(grid, f, sc, h, tolerance=1.0).passes
    assert viscosity_subsolution_check(grid, -f, sc, h).cone_max == pytest.approx(math.sqrt(2) / 2)


def test_vgrid_roundtrip_and_errors():
    g = VGrid(np.array([[0.0], [1.0]]), np.array([1.0, 2.0]), np.array([0.1, 0.1]), {"a": 1})
    h = VGrid.from_dict(g.to_dict())
    assert np.array_equal(h.points, g.points) and np.array_equal(h.stderr, g.stderr)
    with pytest.raises(InputError):
        VGrid.from_dict({"points": [[0.0]], "values": [1.0, 2.0]})
    with pytest.raises(InputError):
        VGrid.from_dict({"points": [[0.0]]})


def test_estimate_v_grid_shares_streams():
    sc = _coarse("interval_nonlocal")
    h = TestFunction.constant(1.0, 1)
    grid = estimate_v_grid(sc, h, spacing=0.25, n_paths=8, seed=2, horizon=2.0)
    assert grid.points.shape == (5, 1)
    assert np.allclose(grid.values, 1 - math.exp(-2.0))
    with pytest.raises(InputError):
        estimate_v_grid(sc, h, estimator="other")
