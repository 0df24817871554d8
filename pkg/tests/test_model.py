import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from selfishsched import BUNDLED_INSTANCES, load_bundled
from selfishsched.errors import MalformedInstance, NonPositiveParameter, ShapeMismatch
from selfishsched.model import (
    AllocationMatrix,
    Application,
    System,
    Worker,
    aggregate,
    build_polytope,
    describe,
    is_feasible,
    load_system,
    random_system,
    same_user_system,
    validate_system,
)


def two_by_two():
    return System.from_vectors([1, 2], [2, 1], [1, 2], [2, 1], label="2x2")


def test_ratios():
    s = two_by_two()
    np.testing.assert_allclose(s.c, [0.5, 2.0])
    np.testing.assert_allclose(s.C, [0.5, 2.0])
    assert Application(3, 4).c == 0.75
    assert Worker(6, 3).C == 2.0


@pytest.mark.parametrize("bad", [0, -1, float("nan"), float("inf")])
def test_non_positive_rejected(bad):
    with pytest.raises(NonPositiveParameter):
        Application(bad, 1)
    with pytest.raises(NonPositiveParameter):
        Worker(1, bad)


def test_validate_errors_name_field():
    raw = {"label": "x", "apps": [{"b": 1, "w": 1}, {"b": 0, "w": 1}], "workers": [{"bandwidth": 1, "power": 1}]}
    with pytest.raises(MalformedInstance) as exc:
        validate_system(raw)
    assert exc.value.field == "$.apps[1].b"
    assert "$.apps[1].b" in str(exc.value)


@pytest.mark.parametrize(
    "raw, field",
    [
        ({"apps": [{"b": 1, "w": 1}], "workers": [{"bandwidth": 1, "power": 1}], "extra": 1}, "$"),
        ({"apps": [], "workers": [{"bandwidth": 1, "power": 1}]}, "$.apps"),
        ({"apps": [{"b": 1}], "workers": [{"bandwidth": 1, "power": 1}]}, "$.apps[0]"),
        ({"apps": [{"b": 1, "w": 1}], "workers": [{"bandwidth": "fast", "power": 1}]}, "$.workers[0].bandwidth"),
        ({"apps": [{"b": 1, "w": 1}], "workers": [{"bandwidth": 1, "power": 1, "ram": 2}]}, "$.workers[0]"),
        ({"label": 3, "apps": [{"b": 1, "w": 1}], "workers": [{"bandwidth": 1, "power": 1}]}, "$.label"),
        ([1, 2], "$"),
    ],
)
def test_validate_rejects(raw, field):
    with pytest.raises(MalformedInstance) as exc:
        validate_system(raw)
    assert exc.value.field == field


def test_load_invalid_json(tmp_path):
    path = tmp_path / "x.json"
    path.write_text("{not json")
    with pytest.raises(MalformedInstance):
        load_system(path)


def test_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    for _ in range(20):
        s = random_system(rng, 3, 2)
        path = tmp_path / "s.json"
        path.write_text(s.to_json())
        back = load_system(path)
        assert back == s
        np.testing.assert_allclose(back.c, s.c, rtol=1e-15)
        np.testing.assert_allclose(back.C, s.C, rtol=1e-15)


@pytest.mark.parametrize("name", BUNDLED_INSTANCES)
def test_bundled_instances_load(name):
    s = load_bundled(name)
    assert s.K >= 1 and s.N >= 1


def test_allocation_matrix_readonly():
    a = AllocationMatrix([[0.5, 0.25], [0.25, 0.5]])
    assert a.shape == (2, 2)
    np.testing.assert_allclose(a.totals, [0.75, 0.75])
    with pytest.raises(ValueError):
        a.rates[0, 0] = 3.0


def test_aggregate():
    np.testing.assert_allclose(aggregate([[0.5, 0.25], [0.25, 0.5]]), [0.75, 0.75])
    np.testing.assert_allclose(aggregate(np.zeros((3, 2))), [0, 0])
    np.testing.assert_allclose(aggregate([[1, 0]]), [1, 0])


def test_feasibility_examples():
    s = two_by_two()
    assert is_feasible(s, [[1, 0], [0, 1]]) == (True, None)
    ok, viol = is_feasible(s, [[2, 0], [0, 0]])
    assert not ok
    assert viol.worker == 1 and viol.kind == "communication"
    ok, viol = is_feasible(s, [[-0.1, 0], [0, 0]])
    assert not ok and viol.kind == "nonnegativity"
    with pytest.raises(ShapeMismatch):
        is_feasible(s, [[1, 0]])


def test_polytope_agrees_with_feasibility():
    rng = np.random.default_rng(1)
    for _ in range(200):
        s = random_system(rng, int(rng.integers(1, 4)), int(rng.integers(1, 4)))
        poly = build_polytope(s)
        scale = 1.0 / np.maximum(s.b.max(), s.w.max()) * np.maximum(s.bandwidth.max(), s.power.max())
        for _ in range(10):
            x = rng.uniform(0, scale, size=poly.n_vars)
            ok, _ = is_feasible(s, x.reshape(s.N, s.K), tol=0.0)
            assert poly.contains(x, tol=0.0) == ok


def test_scaling_keeps_feasible_set():
    rng = np.random.default_rng(2)
    for _ in range(50):
        s = random_system(rng, 3, 2)
        lam = float(np.exp(rng.uniform(-3, 3)))
        t = System.from_vectors(s.b * lam, s.w, s.bandwidth * lam, s.power)
        for _ in range(10):
            a = rng.uniform(0, 1, size=(2, 3)) * np.min(s.bandwidth) / np.max(s.b)
            assert is_feasible(s, a)[0] == is_feasible(t, a)[0]


def test_describe_and_same_user_system():
    s = two_by_two()
    assert "2x2" in describe(s)
    assert same_user_system(s, s.with_workers([Worker(3, 3), Worker(3, 3)]))
    assert not same_user_system(s, s.with_workers([Worker(3, 3)]))


def test_to_dict_is_json():
    s = two_by_two()
    assert json.loads(s.to_json()) == s.to_dict()
    assert validate_system(s.to_dict()) == s


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(1e-3, 1e3), min_size=2, max_size=8))
def test_from_vectors_shapes(values):
    K = len(values) // 2
    s = System.from_vectors(values[:K], values[K:2 * K], [1.0], [1.0])
    assert s.K == K and s.N == 1
