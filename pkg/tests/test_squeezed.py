import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from dynephase.squeezed import (
    DELTA,
    DomainError,
    LinearFormParams,
    SqueezedState,
    UndefinedPhaseError,
    efficiency_crossover,
    efficiency_floor,
    from_linear_form,
    heterodyne_introduced,
    intrinsic_phase_variance,
    make_optimal_squeezed,
    markII_introduced,
    mean_photon,
    optimal_n0,
    optimal_zeta,
    theoretical_limit,
    to_linear_form,
    zeta_from_record,
)

# Reference values below were evaluated with mpmath at 40 digits.
N0_1577 = 8.290104681480592631


def test_mean_photon():
    assert mean_photon(SqueezedState(0j)) == 0.0
    assert mean_photon(SqueezedState(1.0)) == 1.0
    assert mean_photon(SqueezedState(2.0, 1.0)) == pytest.approx(5.381097845541815730, rel=1e-14)


@pytest.mark.parametrize("nbar, expected", [
    (1577, N0_1577),
    (1, 0.9268250945175542479),
    (1e4, 10.137165466493736984),
])
def test_optimal_n0(nbar, expected):
    assert optimal_n0(nbar) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("bad", [0.0, -3.0])
def test_nonpositive_nbar_rejected(bad):
    for f in (optimal_n0, theoretical_limit, markII_introduced, heterodyne_introduced):
        with pytest.raises(DomainError):
            f(bad)
    with pytest.raises(DomainError):
        intrinsic_phase_variance(bad, 1.0)
    with pytest.raises(DomainError):
        intrinsic_phase_variance(10.0, bad)


def test_intrinsic_variance():
    assert intrinsic_phase_variance(1577, N0_1577) == pytest.approx(9.508653268568644678e-7, rel=1e-12)
    assert intrinsic_phase_variance(100, 100) == pytest.approx(2.525e-3, rel=1e-14)
    big = 1e4
    assert intrinsic_phase_variance(10.0, big) == pytest.approx((big + 1) / 400.0, rel=1e-15)
    vals = [intrinsic_phase_variance(n, 5.0) for n in (10, 100, 1000)]
    assert vals[0] > vals[1] > vals[2]


def test_limits_and_baselines():
    assert DELTA == 2.43
    assert theoretical_limit(1577) == pytest.approx(9.844751887732860873e-7, rel=1e-13)
    assert theoretical_limit(1) == pytest.approx(0.6075, rel=1e-15)
    assert theoretical_limit(1e6) == pytest.approx(4.061377639491068526e-12, rel=1e-13)
    assert markII_introduced(1577) == pytest.approx(1.996008898089247910e-6, rel=1e-13)
    assert heterodyne_introduced(1577) == pytest.approx(1.585288522511097020e-4, rel=1e-14)
    assert markII_introduced(1) / heterodyne_introduced(1) == 0.5


def test_efficiency_floor():
    assert efficiency_floor(0.98, 1000) == pytest.approx(5.102040816326530612e-6, rel=1e-13)
    for n in (1.0, 77.0, 1e9):
        assert efficiency_floor(1.0, n) == 0.0
    for eta in (0.0, 1.5, -0.1):
        with pytest.raises(DomainError):
            efficiency_floor(eta, 10.0)


def test_crossover_bisection():
    # exact root of n^-1.5 / 8 = (1 - eta) / (4 eta n) is (eta / (2 (1 - eta)))^2 = 600.25
    n = efficiency_crossover(0.98)
    assert n == pytest.approx(600.25, rel=1e-9)
    assert 400 <= n <= 1500
    with pytest.raises(DomainError):
        efficiency_crossover(1.0)


def test_make_optimal_squeezed_1577():
    s = make_optimal_squeezed(1577)
    assert s.xi.imag == 0 and s.alpha.imag == 0 and s.alpha.real > 0
    assert s.zeta.real == pytest.approx(0.5 * math.log(N0_1577 / 1577), rel=1e-12)
    assert s.zeta.real == pytest.approx(-2.624, abs=5e-4)
    assert abs(s.alpha) ** 2 == pytest.approx(1577 - math.sinh(abs(s.xi)) ** 2, rel=1e-12)
    assert optimal_zeta(1577) == pytest.approx(s.zeta.real, rel=1e-14)


def test_make_optimal_squeezed_infeasible():
    with pytest.raises(DomainError):
        make_optimal_squeezed(-1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=1.0, max_value=7.0))
def test_optimal_state_photon_number(log10_n):
    n = 10.0 ** log10_n
    assert mean_photon(make_optimal_squeezed(n)) == pytest.approx(n, rel=1e-9)


def test_linear_form_examples():
    s = from_linear_form(LinearFormParams(0.3 - 0.2j, 0j))
    assert s.alpha == 0.3 - 0.2j and s.xi == 0
    s = from_linear_form(LinearFormParams(0.1, 0.9))
    assert s.alpha == pytest.approx(1.0, rel=1e-14)
    assert s.xi == pytest.approx(-1.4722194895832202300, rel=1e-14)
    with pytest.raises((DomainError, ValueError)):
        LinearFormParams(0.1, 1.0)


_complex = st.builds(complex, st.floats(-30, 30), st.floats(-30, 30))


@settings(max_examples=300, deadline=None)
@given(_complex, st.floats(0.0, 5.0), st.floats(-math.pi, math.pi))
def test_linear_form_round_trip(alpha, r, theta):
    s = SqueezedState(alpha, r * complex(math.cos(theta), math.sin(theta)))
    back = from_linear_form(to_linear_form(s))
    scale = max(abs(alpha), 1.0)
    assert abs(back.alpha - s.alpha) <= 1e-12 * scale * math.cosh(2 * r)
    assert abs(back.xi - s.xi) <= 1e-12 * max(r, 1.0)


@settings(max_examples=100, deadline=None)
@given(_complex, st.builds(complex, st.floats(-0.7, 0.7), st.floats(-0.7, 0.7)))
def test_round_trip_from_linear_side(a, b):
    p = to_linear_form(from_linear_form(LinearFormParams(a, b)))
    assert abs(p.b_lin - b) <= 1e-12
    assert abs(p.a_lin - a) <= 1e-12 * max(abs(a), 1.0) * 10


def test_zeta_from_record_examples():
    z = zeta_from_record(1.0, 0.0)
    assert z.zeta == 0 and z.nbar_est == 1.0 and z.n0 == 1.0
    z = zeta_from_record(0.1, 0.9)
    assert z.zeta == pytest.approx(-1.4722194895832202300, rel=1e-13)
    assert z.nbar_est == pytest.approx(5.2631578947368421053, rel=1e-13)
    assert z.zeta.real == pytest.approx(0.5 * math.log(z.n0 / z.nbar_est), rel=1e-12)
    with pytest.raises(UndefinedPhaseError):
        zeta_from_record(0.0, 0.5)
    with pytest.raises(DomainError):
        zeta_from_record(0.1, 1.0)


@settings(max_examples=100, deadline=None)
@given(st.builds(complex, st.floats(0.1, 20), st.floats(-20, 20)), st.floats(0.0, 4.0),
       st.floats(-math.pi, math.pi))
def test_zeta_from_linear_form_recovers_state(alpha, r, theta):
    s = SqueezedState(alpha, r * complex(math.cos(theta), math.sin(theta)))
    p = to_linear_form(s)
    z = zeta_from_record(p.a_lin, p.b_lin)
    assert abs(z.zeta - s.zeta) <= 1e-12 * max(r, 1.0) * 10
    assert z.nbar_est == pytest.approx(mean_photon(s), rel=1e-10)


def _numerical_n0(nbar):
    res = minimize_scalar(lambda n0: intrinsic_phase_variance(nbar, n0), bounds=(1.0, 60.0),
                          method="bounded", options={"xatol": 1e-10})
    return res.x, res.fun


@pytest.mark.xfail(strict=True, reason="asymptotic n0 sits 4-6% above the exact minimiser "
                                       "throughout 1e3..1e7; the 2% claim does not hold")
@pytest.mark.parametrize("nbar", [1e3, 1e4, 1e5, 1e6, 1e7])
def test_optimal_n0_within_two_percent_of_minimiser(nbar):
    assert _numerical_n0(nbar)[0] == pytest.approx(optimal_n0(nbar), rel=0.02)


@pytest.mark.parametrize("nbar", [1e3, 1e4, 1e5, 1e6, 1e7])
def test_optimal_n0_variance_is_near_minimum(nbar):
    # the minimum is flat: the asymptotic n0 costs about 2% in variance
    n0, vmin = _numerical_n0(nbar)
    assert intrinsic_phase_variance(nbar, optimal_n0(nbar)) <= vmin * 1.025
    assert n0 == pytest.approx(optimal_n0(nbar), rel=0.07)


def test_intrinsic_approaches_limit():
    n = 1e6
    ratio = intrinsic_phase_variance(n, optimal_n0(n)) / theoretical_limit(n)
    assert abs(ratio - 1.0) < 0.05
