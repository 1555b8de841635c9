import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fejer.core import ClosedBall, make_rng
from fejer.moduli import (
    PROBE_GRID,
    ClampTop,
    Compose,
    Const,
    HalfArg,
    Linear,
    Min,
    ModulusContext,
    Power,
    Scaled,
    Table,
    calibrate_semialgebraic_c,
    central_binomial,
    compose_with_metric_regularity,
    convert_f_to_resolvent,
    convert_resolvent_to_f,
    convert_resolvent_to_subdiff,
    convert_subdiff_to_resolvent,
    estimate_modulus_empirical,
    estimate_thresholds,
    float_down,
    modulus_bounded_regularity_pair,
    modulus_contraction,
    modulus_from_convergence_rate,
    modulus_holder,
    modulus_metric_regularity_semialgebraic,
    modulus_orbital_contraction,
    modulus_ppa_weak_sharp,
    modulus_retraction,
    modulus_strongly_accretive,
    modulus_subregularity,
    modulus_weak_sharp,
    node_from_dict,
    semialgebraic_exponent,
)
from fejer.problems import get_instance
from fejer.rates import CeilInv, ConstRate
from fejer.verify import check_modulus_soundness

from oracles import binom_middle, semialgebraic_gamma

ULP = 2.0**-52


def close_below(value: float, exact) -> bool:
    """``value`` is the exact number or at most one ulp under it."""
    exact = Fraction(exact)
    return Fraction(value) <= exact and exact - Fraction(value) <= abs(exact) * Fraction(ULP) * 2


@pytest.mark.parametrize("k,eps,out", [(0.5, 0.1, "0.05"), (0.0, 1, "1"), (0.9, 2, "0.2")])
def test_contraction_modulus(k, eps, out):
    exact = (1 - Fraction(k)) * Fraction(eps)
    assert close_below(modulus_contraction(k)(eps), exact)
    assert abs(modulus_contraction(k)(eps) - float(out)) < 1e-15


@pytest.mark.parametrize("k,eps,out", [(0.5, 1, 0.5), (0.25, 0.4, 0.3)])
def test_orbital_contraction_modulus(k, eps, out):
    assert abs(modulus_orbital_contraction(k)(eps) - out) < 1e-15


@pytest.mark.parametrize("k", [-0.1, 1.0, 2.0])
def test_contraction_constant_out_of_range(k):
    with pytest.raises(ValueError):
        modulus_contraction(k)


@pytest.mark.parametrize("eps", [0.3, 7.0])
def test_retraction_is_identity(eps):
    assert modulus_retraction()(eps) == eps


@pytest.mark.parametrize("mu,g,eps,out", [(1, 1, 0.5, 1.0), (2, 2, 1, 0.5), (1, 4, 0.1, 2e-4)])
def test_holder_modulus(mu, g, eps, out):
    exact = 2 * (Fraction(eps) / Fraction(mu)) ** g
    assert close_below(modulus_holder(mu, g)(eps), exact)
    assert math.isclose(modulus_holder(mu, g)(eps), out, rel_tol=1e-14)


@pytest.mark.parametrize("mu,g", [(0, 1), (-1, 2), (1, 0.5)])
def test_holder_rejects_bad_parameters(mu, g):
    with pytest.raises(ValueError):
        modulus_holder(mu, g)


def test_weak_sharp_and_accretive_lifts():
    assert modulus_weak_sharp(Linear(1.0))(0.2) == 0.2
    assert modulus_weak_sharp(Power(1.0, 2.0))(0.5) == 0.25
    assert modulus_strongly_accretive(Linear(1.0))(0.4) == 0.4
    assert modulus_strongly_accretive(Linear(2.0), 0.5)(1) == 1.0
    # gradient-step form: psi(eps) = m eps scaled by 1/L
    assert close_below(modulus_strongly_accretive(Linear(3.0), 1 / 4)(1.0), Fraction(3, 4))
    with pytest.raises(ValueError):
        modulus_strongly_accretive(Linear(1.0), 0.0)


@pytest.mark.parametrize("k,eps,out", [(2, 1, 0.5), (1, 0.3, 0.3), (10, 5, 0.5)])
def test_subregularity_modulus(k, eps, out):
    assert close_below(modulus_subregularity(k)(eps), Fraction(eps) / k)
    assert math.isclose(modulus_subregularity(k)(eps), out, rel_tol=1e-15)


def test_subregularity_rejects_nonpositive():
    with pytest.raises(ValueError):
        modulus_subregularity(0)


# conversions between f, its resolvent and its subdifferential ---------------------

def f_to_res_oracle(phi, rho, gamma, r, eps):
    p = Fraction(phi(eps))
    return min(Fraction(rho(float(p / 2))), Fraction(gamma) * p / (2 * Fraction(r)), Fraction(1))


@pytest.mark.parametrize("gamma,r,eps,out", [(1, 1, 0.5, 0.25), (4, 1, 1, 0.5), (2, 3, 0.3, 0.1),
                                             (0.5, 2, 8, 1.0)])
def test_f_to_resolvent(gamma, r, eps, out):
    m = convert_f_to_resolvent(Linear(1.0), Linear(1.0), ModulusContext(np.zeros(1), r, gamma))
    assert close_below(m(eps), f_to_res_oracle(lambda e: e, lambda e: e, gamma, r, eps))
    assert math.isclose(m(eps), out, rel_tol=1e-15)


def test_f_to_resolvent_needs_gamma_and_radius():
    with pytest.raises(ValueError):
        convert_f_to_resolvent(Linear(1.0), Linear(1.0), ModulusContext(np.zeros(1), 1.0))
    with pytest.raises(ValueError):
        ModulusContext(np.zeros(1), 0.0, 1.0)


@pytest.mark.parametrize("c,gamma,eps,out", [(1, 0.5, 1, 1.0), (2, 2, 0.5, 0.25), (3, 1, 0.2, 0.18)])
def test_resolvent_to_f(c, gamma, eps, out):
    m = convert_resolvent_to_f(Linear(c), gamma)
    exact = (Fraction(c) * Fraction(eps)) ** 2 / (2 * Fraction(gamma))
    assert close_below(m(eps), exact)
    assert math.isclose(m(eps), out, rel_tol=1e-14)


@pytest.mark.parametrize("c,gamma,r,rp,eps,out", [(1, 1, 2, 1, 1, 0.5), (1, 2, 1.1, 1, 4, 0.05),
                                                  (4, 1, 10, 1, 0.2, 0.1)])
def test_resolvent_to_subdiff(c, gamma, r, rp, eps, out):
    m = convert_resolvent_to_subdiff(Linear(c), gamma, r, rp)
    e = Fraction(eps)
    exact = min(Fraction(c) * e / 2, e / 2, Fraction(r) - Fraction(rp)) / Fraction(gamma)
    assert close_below(m(eps), exact)
    assert math.isclose(m(eps), out, rel_tol=1e-13)


def test_resolvent_to_subdiff_requires_r_prime_below_r():
    with pytest.raises(ValueError):
        convert_resolvent_to_subdiff(Linear(1.0), 1.0, 1.0, 1.0)


@pytest.mark.parametrize("rho,gamma,eps,out", [(1, 1, 0.3, 0.3), (0.5, 2, 1, 1.0), (0.25, 3, 0.5, 0.375)])
def test_subdiff_to_resolvent(rho, gamma, eps, out):
    m = convert_subdiff_to_resolvent(Linear(1.0), Linear(rho), gamma)
    exact = min(Fraction(rho) * Fraction(gamma) * Fraction(eps), Fraction(1))
    assert close_below(m(eps), exact)
    assert math.isclose(m(eps), out, rel_tol=1e-15)


def test_modulus_from_convergence_rate():
    assert modulus_from_convergence_rate(ConstRate(1))(1) == 0.5
    assert modulus_from_convergence_rate(CeilInv(1.0))(0.5) == 0.0625
    assert modulus_from_convergence_rate(CeilInv(1.0, 2.0))(1) == 0.125
    with pytest.raises(ValueError):
        modulus_from_convergence_rate(ConstRate(0))


@pytest.mark.parametrize("n", range(0, 12))
def test_central_binomial_matches_pascal(n):
    assert central_binomial(n) == binom_middle(n)


@pytest.mark.parametrize("n,d", [(1, 1), (2, 2), (3, 1), (2, 3), (4, 2), (5, 1)])
def test_semialgebraic_exponent(n, d):
    assert semialgebraic_exponent(n, d) == semialgebraic_gamma(n, d)


@pytest.mark.parametrize("n,d,m,c,eps,out", [(2, 2, 2, 1, 1, 0.5), (1, 1, 3, 1, 0.3, 0.1), (3, 1, 1, 2, 1, 0.5)])
def test_semialgebraic_metric_regularity(n, d, m, c, eps, out):
    rho = modulus_metric_regularity_semialgebraic(n, d, m, c)
    g = semialgebraic_gamma(n, d)
    assert g.denominator == 1
    exact = (Fraction(eps) / Fraction(c)) ** int(g) / m
    assert close_below(rho(eps), exact)
    assert math.isclose(rho(eps), out, rel_tol=1e-14)


def test_metric_regularity_composition():
    assert math.isclose(compose_with_metric_regularity(Linear(0.5), Linear(0.1))(1), 0.05, rel_tol=1e-15)
    assert compose_with_metric_regularity(Linear(1.0), Linear(0.3))(0.7) == Linear(0.3)(0.7)
    assert compose_with_metric_regularity(modulus_holder(1, 2), Linear(0.5))(1) == 0.5


def test_bounded_regularity_pair():
    assert math.isclose(modulus_bounded_regularity_pair(1.0, 0.5, 4.0)(0.3), 0.1, rel_tol=1e-15)
    assert modulus_bounded_regularity_pair(1.0, Linear(1.0), 1.0)(1) == 0.5
    for e in (0.05, 0.7, 3.0):
        exact = Fraction(2) * Fraction(e) / (Fraction(3) + Fraction(2))
        assert close_below(modulus_bounded_regularity_pair(2.0, Linear(1.0), 3.0)(e), exact)
    with pytest.raises(ValueError):
        modulus_bounded_regularity_pair(0.0, 1.0, 1.0)


@pytest.mark.parametrize("c,b,eps,out", [(1, 0, 1, 0.25), (2, 1, 1, 0.25), (1, 0, 4, 1.0), (1, 3, 0.4, 0.025)])
def test_ppa_weak_sharp(c, b, eps, out):
    m = modulus_ppa_weak_sharp(Linear(c), Linear(1.0), b)
    e = Fraction(eps)
    psi = Fraction(c) * e / 2
    exact = min(psi / 2, psi / (2 * (Fraction(b) + 1)), e / 2, Fraction(1))
    assert close_below(m(eps), exact)
    assert math.isclose(m(eps), out, rel_tol=1e-14)


# node behaviour -------------------------------------------------------------------

def test_nodes_evaluate_their_formula():
    assert Const(2.0)(123.0) == 2.0
    assert ClampTop(0.5, Linear(1.0))(3.0) == 0.5
    assert HalfArg(Linear(1.0))(3.0) == 1.5
    assert Min((Linear(1.0), Const(0.2)))(1.0) == 0.2
    assert Compose(Linear(2.0), Linear(3.0))(1.0) == 6.0
    assert Scaled(3.0, Linear(1.0), den=4.0)(1.0) == 0.75
    t = Table((0.1, 1.0), (0.01, 0.5))
    assert t(0.1) == 0.01 and t(1.0) == 0.5 and t(5.0) == 0.5
    assert math.isclose(t(0.55), 0.255, rel_tol=1e-12)
    assert t(0.05) <= 0.01


def test_modulus_defined_only_for_positive_eps():
    with pytest.raises(ValueError):
        Linear(1.0)(0.0)


def test_rounding_is_downward():
    # 1/3 is not representable: the result must sit just below it
    v = Linear(1.0, den=3.0)(1.0)
    assert Fraction(v) < Fraction(1, 3)
    assert float_down(Fraction(1, 3)) == v


modulus_trees = st.recursive(
    st.one_of(
        st.floats(0.01, 10).map(Linear),
        st.tuples(st.floats(0.1, 5), st.sampled_from([1.0, 2.0, 3.0, 0.5])).map(lambda t: Power(*t)),
        st.floats(0.01, 10).map(Const),
    ),
    lambda kids: st.one_of(
        st.tuples(st.floats(0.1, 4), kids).map(lambda t: Scaled(*t)),
        st.lists(kids, min_size=1, max_size=3).map(lambda k: Min(tuple(k))),
        st.tuples(kids, kids).map(lambda t: Compose(*t)),
        kids.map(HalfArg),
        st.tuples(st.floats(0.1, 5), kids).map(lambda t: ClampTop(*t)),
    ),
    max_leaves=6,
)


@settings(max_examples=150, deadline=None)
@given(modulus_trees)
def test_every_tree_is_positive_monotone_and_serialisable(m):
    m.validate()
    back = node_from_dict(m.to_dict())
    assert back == m
    for e in PROBE_GRID[::7]:
        assert back(e) == m(e)


@settings(max_examples=100, deadline=None)
@given(modulus_trees, st.floats(1e-3, 1e3))
def test_evaluation_is_deterministic(m, e):
    assert m(e) == m(e)


@pytest.mark.parametrize("ctor", [lambda: Linear(0.0), lambda: Power(0.0, 1.0), lambda: Const(-1.0)])
def test_invalid_nodes_rejected(ctor):
    with pytest.raises(ValueError):
        ctor()


# empirical estimation --------------------------------------------------------------

class _Scalar:
    def __init__(self, residual, zero_distance=abs):
        self.residual = lambda x: residual(float(x[0]))
        self.zero_distance = lambda x: zero_distance(float(x[0]))

    def sample_domain(self, ball, n, rng):
        return ball.sample(n, rng)


GRID = (0.05, 0.1, 0.2, 0.5)


def test_estimate_abs_is_close_to_identity():
    t = estimate_modulus_empirical(_Scalar(abs), ClosedBall([0.0], 1.0), GRID, 4000, 0)
    for e, v in zip(t.eps, t.values):
        assert e <= v <= e * 1.02


def test_estimate_square_is_close_to_square():
    t = estimate_modulus_empirical(_Scalar(lambda x: x * x), ClosedBall([0.0], 1.0), GRID, 4000, 0)
    for e, v in zip(t.eps, t.values):
        assert e * e <= v <= e * e * 1.05


def test_estimate_vacuous_when_everything_is_a_zero():
    t = estimate_modulus_empirical(_Scalar(lambda x: 0.0, lambda x: 0.0), ClosedBall([0.0], 1.0), GRID, 50, 0)
    assert set(t.values) == {1e3}


def test_estimate_is_monotone_and_reproducible():
    p = _Scalar(lambda x: abs(x) ** 1.5)
    a = estimate_modulus_empirical(p, ClosedBall([0.0], 2.0), (0.3, 0.1, 1.0, 0.05), 500, 4)
    b = estimate_modulus_empirical(p, ClosedBall([0.0], 2.0), (0.3, 0.1, 1.0, 0.05), 500, 4)
    assert a == b
    assert list(a.values) == sorted(a.values)


def test_estimate_preconditions():
    with pytest.raises(ValueError):
        estimate_modulus_empirical(_Scalar(abs), ClosedBall([0.0], 1.0), GRID, 0, 0)
    with pytest.raises(ValueError):
        estimate_modulus_empirical(_Scalar(abs), ClosedBall([0.0], 1.0), (), 10, 0)


def test_thresholds_match_brute_force():
    pts = ClosedBall([0.0, 0.0], 1.0).sample(300, make_rng(2))
    res = lambda x: float(abs(x[0]) + x[1] ** 2)  # noqa: E731
    dist = lambda x: float(np.linalg.norm(x))  # noqa: E731
    got = estimate_thresholds(res, dist, pts, GRID)
    for e, d in zip(GRID, got):
        brute = min(res(p) for p in pts if dist(p) >= e)
        assert d == brute


def test_calibrated_constant_reproduces_samples():
    grid = (0.1, 0.2, 0.4)
    deltas = (0.02, 0.05, 0.3)
    c = calibrate_semialgebraic_c(grid, deltas, 2, 1, 2)
    rho = modulus_metric_regularity_semialgebraic(2, 1, 2, c)
    assert all(rho(e) <= d * (1 + 1e-12) for e, d in zip(grid, deltas))
    assert any(math.isclose(rho(e), d, rel_tol=1e-9) for e, d in zip(grid, deltas))


# conversions audited on f(x) = x^2 -------------------------------------------------

def test_converted_moduli_for_the_square_pass_sampling():
    for name in ("xsq_resolvent", "xsq_objective", "xsq_subdiff", "xsq_resolvent_from_f",
                 "xsq_resolvent_from_subdiff"):
        rep = check_modulus_soundness(get_instance(name))
        assert rep.passed, (name, rep.witness)


def test_too_generous_modulus_on_the_square_is_caught():
    rep = check_modulus_soundness(get_instance("xsq_objective"), phi=Linear(10.0))
    assert not rep.passed
    x = rep.witness["x"][0]
    assert x * x < 10 * rep.witness["eps"] and abs(x) >= rep.witness["eps"]
