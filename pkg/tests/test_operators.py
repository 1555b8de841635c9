import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fejer.core import ClosedBall, DimensionError, make_rng
from fejer.operators import (
    Affine,
    Ball,
    Box,
    Halfspace,
    Hyperplane,
    Indicator,
    Norm,
    Operator,
    Polyhedron,
    SquaredDistance,
    classify_by_sampling,
    compose,
    convex_combination,
    gradient_step,
    identity,
    project,
    prox,
    reflected_resolvent,
    set_from_dict,
)
from fejer.problems import get_instance

import oracles as O

SETS = [
    Halfspace([1.0, 0.0], 0.0),
    Halfspace([1.0, -2.0], 0.5),
    Hyperplane([0.0, 1.0], 0.0),
    Box([0.0, 0.0], [1.0, 1.0]),
    Ball([0.0, 0.0], 1.0),
    Affine([[1.0, 1.0]], [1.0]),
    Polyhedron((Halfspace([1.0, 0.0], 0.0), Halfspace([0.0, 1.0], 0.0), Halfspace([-1.0, -1.0], 1.0))),
]

pt2 = st.tuples(st.floats(-5, 5), st.floats(-5, 5)).map(np.array)


@pytest.mark.parametrize("s,x,out", [(Halfspace([1.0, 0.0], 0.0), (2, 3), (0, 3)),
                                     (Box([0.0, 0.0], [1.0, 1.0]), (-1, 0.5), (0, 0.5)),
                                     (Ball([0.0, 0.0], 1.0), (3, 4), (0.6, 0.8))])
def test_projection_examples(s, x, out):
    np.testing.assert_allclose(project(s, x), out, atol=1e-15)


def test_projection_errors():
    with pytest.raises(DimensionError):
        project(Ball([0.0, 0.0], 1.0), (1.0, 2.0, 3.0))
    with pytest.raises(TypeError):
        project("disc", (1.0, 2.0))


@pytest.mark.parametrize("s", SETS, ids=lambda s: s.kind)
@settings(max_examples=60, deadline=None)
@given(x=pt2, y=pt2)
def test_projection_inequality_and_idempotence(s, x, y):
    p = s.project(x)
    q = s.project(y)  # a point of the set
    assert s.contains(p)
    np.testing.assert_allclose(s.project(p), p, atol=1e-12)
    assert abs(s.distance(x) - np.linalg.norm(x - p)) <= 1e-9
    lhs = np.sum((x - p) ** 2) + np.sum((p - q) ** 2)
    assert lhs <= np.sum((x - q) ** 2) + 1e-9 * (1 + np.sum((x - q) ** 2))


def test_polyhedron_distance_matches_grid_scan():
    P = SETS[-1]
    A = [h.a for h in P.halfspaces]
    b = [h.beta for h in P.halfspaces]
    for x in [(2.0, 3.0), (-3.0, 1.5), (1.0, -4.0), (-2.0, -2.0)]:
        # the grid scan is an upper bound within one grid spacing
        ref = O.polyhedron_distance_brute(A, b, x)
        assert P.distance(x) <= ref + 1e-12
        assert ref - P.distance(x) <= 8.0 / 800 * 1.5
    X = np.array([(2.0, 3.0), (-0.5, -0.25), (0.3, -3.0)])
    np.testing.assert_allclose(P.distance_many(X), [P.distance(x) for x in X], atol=1e-12)


@pytest.mark.parametrize("s", SETS, ids=lambda s: s.kind)
def test_set_serialisation_round_trip(s):
    back = set_from_dict(s.to_dict())
    x = np.array([1.7, -2.3])
    np.testing.assert_array_equal(back.project(x), s.project(x))


def test_set_constructor_preconditions():
    with pytest.raises(ValueError):
        Halfspace([0.0, 0.0], 1.0)
    with pytest.raises(ValueError):
        Ball([0.0], -1.0)
    with pytest.raises(ValueError):
        Affine([[1.0, 1.0], [2.0, 2.0]], [0.0, 0.0])


@pytest.mark.parametrize("x", [2.3, -0.4, 0.9, -5.0, 1.0])
@pytest.mark.parametrize("gamma", [1.0, 0.5, 2.0])
def test_norm_prox_matches_grid_minimisation(x, gamma):
    got = prox(Norm(1), gamma, [x])[0]
    assert abs(got - O.prox_grid_1d(np.abs, x, gamma)) <= 2e-4


def test_prox_examples():
    assert prox(Norm(1), 1.0, [2.3])[0] == pytest.approx(1.3, abs=1e-15)
    np.testing.assert_allclose(prox(SquaredDistance([0.0, 0.0]), 1.0, [2.0, 0.0]), [1.0, 0.0])
    ref = O.prox_grid_1d(lambda y: 0.5 * y**2, 2.0, 1.0)
    assert abs(ref - 1.0) <= 2e-4
    box = Box([0.0, 0.0], [1.0, 1.0])
    x = np.array([3.0, -2.0])
    np.testing.assert_array_equal(prox(Indicator(box), 0.7, x), box.project(x))


def test_prox_errors():
    with pytest.raises(ValueError):
        prox(Norm(1), 0.0, [1.0])
    with pytest.raises(TypeError):
        prox(abs, 1.0, [1.0])


@settings(max_examples=100, deadline=None)
@given(x=pt2, y=pt2, gamma=st.floats(0.1, 4))
def test_resolvent_inequality_for_norm_prox(x, y, gamma):
    f = Norm(2)
    j = f.prox(x, gamma)
    rhs = (np.sum((y - x) ** 2) - np.sum((j - x) ** 2) - np.sum((j - y) ** 2)) / (2 * gamma)
    assert f.value(j) - f.value(y) <= rhs + 1e-9


def test_reflected_resolvent_examples():
    R = reflected_resolvent(identity(2))
    np.testing.assert_array_equal(R([1.0, 2.0]), [1.0, 2.0])
    line = Hyperplane([0.0, 1.0], 0.0).projector()
    np.testing.assert_array_equal(reflected_resolvent(line)([1.0, 2.0]), [1.0, -2.0])
    assert reflected_resolvent(Norm(1).resolvent(1.0))([0.5])[0] == -0.5
    assert reflected_resolvent(line).kind == "nonexpansive"
    with pytest.raises(ValueError):
        reflected_resolvent(Operator(lambda x: 2 * x, 1, "general"))


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, 3))
def test_reflected_resolvent_keeps_fixed_points(x):
    J = Norm(1).resolvent(1.0)
    R = reflected_resolvent(J)
    assert (R([x])[0] == x) == (J([x])[0] == x)


def test_compose_examples():
    P_U = Halfspace([1.0, 0.0], 0.0).projector()
    P_V = Halfspace([-1.0, 0.0], -1.0).projector()
    np.testing.assert_array_equal(compose([P_U, P_V])([-2.0, 5.0]), [0.0, 5.0])
    I = identity(2)
    assert compose([I]) is I
    assert compose([P_U, P_V]).kind == "nonexpansive"
    with pytest.raises(ValueError):
        compose([])
    with pytest.raises(DimensionError):
        compose([identity(2), identity(3)])


def test_composed_reflections_form_a_rotation_fixing_only_the_origin():
    R1 = reflected_resolvent(Hyperplane([0.0, 1.0], 0.0).projector())
    R2 = reflected_resolvent(Hyperplane([1.0, -1.0], 0.0).projector())
    T = compose([R1, R2])
    pts = ClosedBall([0.0, 0.0], 3.0).sample(500, make_rng(4))
    for x in pts:
        tx = T(x)
        assert abs(np.linalg.norm(tx) - np.linalg.norm(x)) <= 1e-12
        assert np.linalg.norm(tx - x) > 1e-3 * np.linalg.norm(x)
    np.testing.assert_array_equal(T([0.0, 0.0]), [0.0, 0.0])


def test_convex_combination_examples():
    P1 = Halfspace([1.0, 0.0], 0.0).projector()
    P2 = Halfspace([0.0, 1.0], 0.0).projector()
    T = convex_combination([P1], [1.0], [1.0])
    x = np.array([2.0, -1.0])
    np.testing.assert_array_equal(T(x), P1(x))
    T = convex_combination([P1, P2], [0.5, 0.5], [1.0, 1.0])
    np.testing.assert_array_equal(T([2.0, 2.0]), [1.0, 1.0])
    with pytest.raises(ValueError):
        convex_combination([P1, P2], [0.3, 0.7], [2.0, 2.0])
    with pytest.raises(ValueError):
        convex_combination([P1, P2], [0.3, 0.6], [1.0, 1.0])
    with pytest.raises(ValueError):
        convex_combination([P1, P2], [0.5, 0.5], [1.0, 2.5])


def test_gradient_step_examples():
    T = gradient_step(lambda x: x, 1.0, 2)
    np.testing.assert_array_equal(T([3.0, 0.0]), [0.0, 0.0])
    T = gradient_step(lambda x: 0.5 * x, 1.0, 1)
    assert T([2.0])[0] == 1.0
    assert T.kind == "firmly_nonexpansive"
    with pytest.raises(ValueError):
        gradient_step(lambda x: x, 0.0, 1)


def test_gradient_step_fixed_points_are_critical_points():
    grad = lambda x: np.array([x[0] - 1.0, 2.0 * x[1]])  # noqa: E731
    T = gradient_step(grad, 2.0, 2)
    for x in ClosedBall([0.0, 0.0], 2.0).sample(200, make_rng(1)):
        assert np.array_equal(T(x), x) == (not np.any(grad(x)))
    np.testing.assert_array_equal(T([1.0, 0.0]), [1.0, 0.0])


def test_classification_of_projection_doubling_and_specker():
    ball = ClosedBall([0.0, 0.0], 3.0)
    rep = classify_by_sampling(Halfspace([1.0, 1.0], 0.5).projector(), ball, 500, 0)
    assert rep.firmly_nonexpansive.passed and rep.kind == "firmly_nonexpansive"

    rep = classify_by_sampling(Operator(lambda x: 2 * x, 2), ball, 500, 0)
    assert not rep.nonexpansive.passed
    w = rep.nonexpansive.witness
    assert np.linalg.norm(2 * w["x"] - 2 * w["y"]) > np.linalg.norm(w["x"] - w["y"])
    assert rep.kind == "general"

    sp = get_instance("specker")
    rep = classify_by_sampling(sp.operator, ClosedBall([0.5], 0.5), 500, 0)
    assert rep.kind == "firmly_nonexpansive"


def test_quasi_nonexpansive_check_uses_fixed_points():
    # jumps at |x| = 1, yet never moves a point farther from 0
    T = Operator(lambda x: np.where(np.abs(x) < 1, -x, 0.5 * x), 1)
    rep = classify_by_sampling(T, ClosedBall([0.0], 2.0), 800, 2, fixed_points=[[0.0]])
    assert not rep.nonexpansive.passed
    assert rep.quasi_nonexpansive.passed
    assert rep.kind == "quasi_nonexpansive"


def test_classification_is_reproducible():
    T = Ball([0.0, 0.0], 1.0).projector()
    a = classify_by_sampling(T, ClosedBall([0.0, 0.0], 2.0), 300, 9)
    b = classify_by_sampling(T, ClosedBall([0.0, 0.0], 2.0), 300, 9)
    assert a.firmly_nonexpansive.worst_violation == b.firmly_nonexpansive.worst_violation
