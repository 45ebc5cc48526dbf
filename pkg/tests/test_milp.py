import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from codedpath.milp import IlpModel, ModelError, export_lp, solve
from oracles import brute_force, random_model


def _model(objective, constraints):
    m = IlpModel()
    for v in sorted({v for v in objective} | {v for c, _, _ in constraints for v in c}):
        m.add_var(v)
    m.set_objective(objective)
    for coefs, sense, rhs in constraints:
        m.add_constraint(coefs, sense, rhs)
    return m


@pytest.mark.parametrize("method", ["bnb", "highs"])
def test_cover(method):
    sol = solve(_model({"x1": 1, "x2": 1}, [({"x1": 1, "x2": 1}, ">=", 1)]), method=method)
    assert sol.status == "optimal" and sol.objective_value == 1 and sol.gap == 0


@pytest.mark.parametrize("method", ["bnb", "highs"])
def test_infeasible(method):
    sol = solve(_model({"x1": 1}, [({"x1": 1}, ">=", 1), ({"x1": 1}, "<=", 0)]), method=method)
    assert sol.status == "infeasible" and not sol.assignment


def test_model_errors():
    m = IlpModel()
    m.add_var("x")
    with pytest.raises(ModelError):
        m.add_var("x")
    with pytest.raises(ModelError):
        m.add_constraint({"x": 1}, "<", 1)
    m.add_constraint({"y": 1}, "<=", 1)
    with pytest.raises(ModelError):
        m.validate()
    m2 = IlpModel()
    m2.add_var("x")
    m2.set_objective({"x": math.inf})
    with pytest.raises(ModelError):
        solve(m2)


def test_unknown_method():
    with pytest.raises(ValueError):
        solve(_model({"x": 1}, []), method="simplex")


def test_timeout_reports_incumbent_and_bound():
    rng = np.random.default_rng(0)
    m = random_model(rng, 14, 20)
    sol = solve(m, time_budget=0.0)
    assert sol.status in ("timeout", "optimal", "infeasible")
    if sol.status == "timeout" and sol.assignment:
        assert not m.violated(sol.assignment)


@pytest.mark.parametrize("method", ["bnb", "highs"])
def test_random_against_enumeration(method):
    rng = np.random.default_rng(11)
    for _ in range(100):
        m = random_model(rng)
        best, _ = brute_force(m)
        sol = solve(m, method=method)
        if best is None:
            assert sol.status == "infeasible"
        else:
            assert sol.status == "optimal"
            assert sol.objective_value == pytest.approx(best, abs=1e-9)
            assert not m.violated(sol.assignment)


def test_export_one_variable():
    m = _model({"x": 1}, [])
    text = export_lp(m)
    assert text.splitlines()[-3:] == ["Binary", " x", "End"]
    assert export_lp(m) == text


def test_export_rejects_unsafe_names():
    m = IlpModel()
    m.add_var("bad name")
    with pytest.raises(ModelError):
        export_lp(m)


def _highs_reimport(text, tmp_path):
    highspy = pytest.importorskip("highspy")
    f = tmp_path / "m.lp"
    f.write_text(text)
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.readModel(str(f))
    h.run()
    status = h.modelStatusToString(h.getModelStatus())
    return status, h.getInfo().objective_function_value


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_export_round_trip_through_highs(tmp_path_factory, seed):
    m = random_model(np.random.default_rng(seed), 10, 12)
    best, _ = brute_force(m)
    status, obj = _highs_reimport(export_lp(m), tmp_path_factory.mktemp("lp"))
    if best is None:
        assert status == "Infeasible"
    else:
        assert status == "Optimal" and obj == pytest.approx(best, abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bnb_property(seed):
    m = random_model(np.random.default_rng(seed), 12, 16)
    best, _ = brute_force(m)
    sol = solve(m)
    assert (sol.status == "infeasible") == (best is None)
    if best is not None:
        assert sol.objective_value == pytest.approx(best, abs=1e-9)
