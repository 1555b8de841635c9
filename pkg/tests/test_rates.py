from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fejer.moduli import PROBE_GRID, HalfArg, Linear
from fejer.rates import (
    CeilInv,
    ComposeDiv,
    ComposeMod,
    ConstRate,
    DivergenceError,
    FloorInv,
    Geometric,
    PlusConst,
    RateOfDivergence,
    RateTable,
    cauchy_modulus,
    composed_rate_common_fixed,
    dist_rate,
    finite_termination_index,
    rate_alternating_projections,
    rate_cyclic_two_sets,
    rate_from_dict,
    rate_gradient_descent,
    rate_mann_cat0,
    rate_of_convergence,
    rate_ppa,
    theta_from_sequence,
)
from fejer.schedules import StepSchedule

import oracles as O

EPS = (4.0, 2.0, 1.0, 0.5, 0.3, 0.1, 0.05, 0.013)


def test_combinators():
    a = CeilInv(1.0)
    assert rate_of_convergence(a, Linear(0.5))(0.1) == 40
    assert rate_of_convergence(ConstRate(0), Linear(3.0))(0.7) == 0
    assert rate_of_convergence(CeilInv(1.0, 2.0), Linear(1.0))(1) == 4
    assert dist_rate(a, Linear(0.5))(0.5) == 4
    assert all(dist_rate(a, Linear(1.0))(e) == a(e) for e in EPS)
    assert cauchy_modulus(a, Linear(1.0))(2) == 1
    assert all(cauchy_modulus(a, Linear(0.5))(e) == rate_of_convergence(a, Linear(0.5))(e) for e in EPS)
    assert composed_rate_common_fixed(a, Linear(1.0), Linear(0.1))(0.2) == 100
    assert composed_rate_common_fixed(a, Linear(1.0), Linear(0.3))(0.4) == ComposeMod(a, HalfArg(Linear(0.3)))(0.4)


def test_finite_termination_index():
    assert finite_termination_index(CeilInv(1.0), Linear(0.5), 1) == 2
    # modulus above eps*: the min picks eps*
    assert finite_termination_index(CeilInv(1.0), Linear(3.0), 0.5) == CeilInv(1.0)(0.5)
    assert finite_termination_index(CeilInv(1.0), None, 0.25) == 4
    with pytest.raises(ValueError):
        finite_termination_index(CeilInv(1.0), None, 0)


@pytest.mark.parametrize("rho,b", [(1, 2), (0, 1), (0.7, 1.3), (2.5, 0.5)])
def test_alternating_projection_rate(rho, b):
    r = rate_alternating_projections(rho, b)
    for e in EPS:
        assert r(e) == O.alt_proj_rate(rho, b, e)
    assert r(0.5) == O.alt_proj_rate(rho, b, 0.5)


def test_alternating_projection_examples():
    assert rate_alternating_projections(1, 2)(0.5) == 21
    assert rate_alternating_projections(0, 1)(1) == 2
    with pytest.raises(ValueError):
        rate_alternating_projections(1, 0)


@pytest.mark.parametrize("b", [1, 0.5, 2.2, 3])
def test_gradient_descent_rate(b):
    for e in EPS:
        assert rate_gradient_descent(b)(e) == O.grad_rate(b, e)


def test_gradient_descent_examples():
    assert rate_gradient_descent(1)(1) == 128
    assert rate_gradient_descent(1)(4) == 8
    with pytest.raises(ValueError):
        rate_gradient_descent(-1)


@pytest.mark.parametrize("lam,b", [(0.5, 1), (0.5, 0.5), (0.25, 2), (0.9, 1.5)])
def test_mann_rate(lam, b):
    theta = RateOfDivergence(StepSchedule.constant(lam), "mann")
    r = rate_mann_cat0(theta, b)
    for e in (4.0, 2.0, 1.0, 0.5, 0.3):
        assert r(e) == O.mann_rate(lam, b, e)


def test_mann_examples():
    theta = RateOfDivergence(StepSchedule.constant(0.5), "mann")
    assert rate_mann_cat0(theta, 1)(2) == 15
    assert rate_mann_cat0(theta, 0.5)(1) == 35


@pytest.mark.parametrize("gamma,b", [(1, 3), (1, 1), (0.5, 2), (2, 1.7)])
def test_ppa_rate(gamma, b):
    r = rate_ppa(RateOfDivergence(StepSchedule.constant(gamma), "square"), b)
    for e in (4.0, 2.0, 1.0, 0.5, 0.3):
        assert r(e) == O.ppa_rate(gamma, b, e)


def test_ppa_examples():
    theta = theta_from_sequence(StepSchedule.constant(1.0), squared=True)
    assert rate_ppa(theta, 3)(1) == 18
    assert rate_ppa(theta, 1)(1) == 2


def test_cyclic_two_set_rate():
    r = rate_cyclic_two_sets(1.5)
    for e in EPS:
        assert r(e) == O.floor_div(Fraction(9, 4), Fraction(e) ** 2) + 1


def test_divergence_examples():
    assert theta_from_sequence(StepSchedule.constant(1.0))(5) == 4
    assert theta_from_sequence(StepSchedule.constant(0.5), squared=True)(1) == 3
    with pytest.raises(DivergenceError):
        theta_from_sequence(StepSchedule.power(1.0, 1.0), squared=True)(2)
    with pytest.raises(DivergenceError):
        theta_from_sequence(StepSchedule.constant(0.0))(1)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.05, 3.0), min_size=1, max_size=8), st.integers(0, 30))
def test_divergence_rate_is_the_least_valid_index(vals, n):
    sched = StepSchedule.from_list(vals * 40)
    theta = theta_from_sequence(sched)
    try:
        t = theta(n)
    except DivergenceError:
        assert sum(Fraction(v) for v in sched.values) < n
        return
    assert t == O.theta_scan(lambda k: sched.values[k], n)


@pytest.mark.parametrize("sched,transform", [(StepSchedule.constant(0.3), "identity"),
                                             (StepSchedule.power(1.0, 0.5), "identity"),
                                             (StepSchedule.constant(0.7), "mann"),
                                             (StepSchedule.constant(0.4), "square")])
def test_divergence_check_holds(sched, transform):
    RateOfDivergence(sched, transform).check(60)


def _all_rates():
    theta = RateOfDivergence(StepSchedule.constant(0.5), "mann")
    return [
        CeilInv(2.0, 1.5), FloorInv(3.0, 2.0), PlusConst(2, FloorInv(1.0, 1.0)), ConstRate(5),
        Geometric(0.5, 0.5), RateTable((0.01, 0.1, 1.0), (900, 40, 3)), ComposeMod(CeilInv(1.0), Linear(0.3)),
        ComposeDiv(theta, CeilInv(4.0, 2.0)), rate_alternating_projections(1, 2), rate_gradient_descent(1),
        rate_mann_cat0(theta, 1), rate_ppa(theta_from_sequence(StepSchedule.constant(1.0), True), 3),
        rate_cyclic_two_sets(2),
    ]


@pytest.mark.parametrize("r", _all_rates(), ids=lambda r: r.kind)
def test_rates_are_antitone_natural_and_serialisable(r):
    grid = [e for e in PROBE_GRID if e >= 1e-2]
    r.check_antitone(grid)
    back = rate_from_dict(r.to_dict())
    assert all(back(e) == r(e) and isinstance(r(e), int) for e in grid)


def test_rate_from_dict_rejects_moduli():
    with pytest.raises(ValueError):
        rate_from_dict(Linear(1.0).to_dict())


def test_geometric_rate_matches_direct_search():
    # least n with a k^n < eps
    r = Geometric(0.75, 0.5)
    for e in EPS:
        n = 0
        while Fraction(0.75) * Fraction(0.5) ** n >= Fraction(e):
            n += 1
        assert r(e) == n


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_rate_rounding_never_undercounts(a, e):
    # ceil(a / e^p) with a fractional exponent: value * e^p >= a
    v = CeilInv(a, 1.5)(e)
    assert v >= 0
    assert Fraction(v) ** 2 * Fraction(e) ** 3 >= Fraction(a) ** 2 * (1 - Fraction(1, 10**12))
