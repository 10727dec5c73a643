import cmath
import math

import numpy as np
import pytest

from dynephase import _kernels
from dynephase.policies import (
    ConstantEpsilon,
    Corrected,
    Heterodyne,
    MarkI,
    MarkII,
    TimeEpsilon,
    corrected_phase,
    corrected_triggered,
    describe,
    encode,
    epsilon_schedule,
    feedback_phase,
    interp_estimate,
    parse_policy,
    phase_core,
    phasor_vec,
    policy_from_dict,
    policy_to_dict,
    zeta_estimate_at,
)
from dynephase.record import DyneRecord
from dynephase.sde import TimeGrid, run_trajectory, simulate_ensemble
from dynephase.squeezed import DomainError, make_optimal_squeezed, zeta_from_record

HALF_PI = math.pi / 2
POLICIES = [MarkI(), MarkII(), ConstantEpsilon(0.3), TimeEpsilon(), TimeEpsilon(divisor=1.2),
            Corrected(lam=1e-3), Heterodyne()]


def _random_records(n, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        v = rng.uniform(0.01, 0.99)
        A = complex(*rng.normal(size=2))
        B = v * rng.uniform(0, 0.99) * cmath.exp(1j * rng.uniform(-math.pi, math.pi))
        out.append(DyneRecord(A, B, v))
    return out


def _wrap(x):
    return math.pi - (math.pi - x) % (2 * math.pi)


def test_mark2_feeds_back_on_arg_A():
    rec = DyneRecord(cmath.exp(1j * math.pi / 4), 0.3j, 0.6)
    for v in (0.1, 0.6, 0.95):
        assert feedback_phase(MarkII(), rec, v) == pytest.approx(3 * math.pi / 4, abs=1e-15)


def test_constant_epsilon_endpoints():
    for rec in _random_records(200):
        mk2 = feedback_phase(MarkII(), rec)
        assert _wrap(feedback_phase(ConstantEpsilon(1.0), rec) - mk2) == pytest.approx(0, abs=1e-12)
        best = cmath.phase(rec.C_v) + HALF_PI
        assert _wrap(feedback_phase(ConstantEpsilon(0.0), rec) - best) == pytest.approx(0, abs=1e-12)


def _record_with_args(arg_c, arg_a, v=1.0, r=0.8):
    A = cmath.exp(1j * arg_a)
    B = (r * cmath.exp(1j * arg_c) - A * v) / A.conjugate()
    assert abs(B) < v
    return DyneRecord(A, B, v)


def test_interp_estimate_examples():
    rec = _record_with_args(0.2, 0.6)
    assert cmath.phase(rec.C_v) == pytest.approx(0.2, abs=1e-14)
    assert interp_estimate(rec, 0.0) == pytest.approx(0.2, abs=1e-14)
    assert interp_estimate(rec, 1.0) == pytest.approx(0.6, abs=1e-14)
    assert interp_estimate(rec, 0.25) == pytest.approx(0.3, abs=1e-14)


def test_interp_follows_the_short_way_round():
    rec = _record_with_args(3.0, -3.0)
    # wrapped difference is 2 pi - 6, so halfway sits across the branch cut
    assert interp_estimate(rec, 0.5) == pytest.approx(_wrap(3.0 + (2 * math.pi - 6.0) / 2), abs=1e-13)


def test_epsilon_examples():
    rec = DyneRecord(0.7, 0.25, 0.5)
    assert rec.C_v == pytest.approx(0.525)
    assert epsilon_schedule(rec, 0.5) == pytest.approx(0.1875 / 0.525, rel=1e-14)
    assert epsilon_schedule(rec, 0.5, divisor=1.2) == pytest.approx(0.1875 / 0.525 / 1.2, rel=1e-14)
    assert epsilon_schedule(rec, 0.5, eps_max=0.2) == 0.2
    early = [epsilon_schedule(DyneRecord(0.01, 0j, v), v) for v in (1e-2, 1e-4, 1e-6)]
    assert early[0] > early[1] > early[2] and early[2] < 1e-2
    assert epsilon_schedule(DyneRecord(0j, 0j, 0.3), 0.3) == 1.0


def test_zeta_estimate_examples():
    z = zeta_estimate_at(DyneRecord(0.8 + 0.2j, 0j, 0.5), 0.5)
    assert z.zeta == 0
    v, theta = 0.7, 0.7
    A = 0.9 * cmath.exp(1j * theta)
    B = v * cmath.exp(2j * theta) * math.tanh(0.5)
    z = zeta_estimate_at(DyneRecord(A, B, v), v)
    assert z.zeta.real == pytest.approx(-0.5, rel=1e-13)
    assert abs(z.zeta.imag) < 1e-13
    with pytest.raises(DomainError):
        zeta_estimate_at(DyneRecord(A, 0.8, v), v)


def test_zeta_estimate_matches_final_mapping():
    run = simulate_ensemble(make_optimal_squeezed(400), TimeEpsilon(), TimeGrid.step_rule(400),
                            range(50), 4, random_phase=True)
    for A, B in zip(run.A, run.B):
        zf = zeta_from_record(complex(A), complex(B)).zeta
        zi = zeta_estimate_at(DyneRecord(complex(A), complex(B), 1.0), 1.0).zeta
        assert abs(zf - zi) < 1e-6


def test_corrected_gating():
    for rec in _random_records(200, seed=3):
        early = DyneRecord(rec.A_v, rec.B_v * 0.5 / rec.v, 0.5)
        assert corrected_phase(early, 0.5, 1e-3) == feedback_phase(TimeEpsilon(), early, 0.5)
    # below threshold at v = 0.95: no squeezing recorded at all
    rec = DyneRecord(0.9, 0j, 0.95)
    assert not corrected_triggered(rec, 0.95, 1e-3)
    assert corrected_phase(rec, 0.95, 1e-3) == feedback_phase(TimeEpsilon(), rec, 0.95)


def _b_opt(rec, v):
    C = rec.A_v * v + rec.B_v * rec.A_v.conjugate()
    nbar = abs(C / (v * v - abs(rec.B_v) ** 2)) ** 2
    n0 = math.log(4 * nbar) - 0.25 * math.log(2 * math.pi)
    z = 0.5 * math.log(nbar / n0)
    return v * (C / C.conjugate()) * math.tanh(z)


def test_corrected_steers_towards_optimum():
    rng = np.random.default_rng(11)
    hits = 0
    while hits < 1000:
        v = rng.uniform(0.9, 0.999)
        theta = rng.uniform(-math.pi, math.pi)
        A = rng.uniform(0.5, 1.5) * cmath.exp(1j * theta)
        B = v * math.tanh(rng.uniform(0.5, 6.0)) * cmath.exp(1j * (2 * theta + rng.normal(0, 0.3)))
        rec = DyneRecord(A, B, v)
        if abs(B) >= v or not corrected_triggered(rec, v, 1e-6):
            continue
        hits += 1
        phi = corrected_phase(rec, v, 1e-6)
        step = -cmath.exp(2j * phi)
        assert ((_b_opt(rec, v) - B).conjugate() * step).real > 0


def test_corrected_never_firing_matches_time_eps():
    state, grid = make_optimal_squeezed(400), TimeGrid.step_rule(400)
    a = simulate_ensemble(state, Corrected(lam=1e-3, onset_v=1.0), grid, range(64), 5, random_phase=True)
    b = simulate_ensemble(state, TimeEpsilon(), grid, range(64), 5, random_phase=True)
    assert np.array_equal(a.A, b.A) and np.array_equal(a.theta_hat, b.theta_hat)


def test_epsilon_one_tracks_mark2():
    state, grid = make_optimal_squeezed(400), TimeGrid.step_rule(400)
    col = _kernels.TRACE_COLUMNS.index("phi")
    a = run_trajectory(state, 0.4, ConstantEpsilon(1.0), grid, seed=2, trace=True).trace[:, col]
    b = run_trajectory(state, 0.4, MarkII(), grid, seed=2, trace=True).trace[:, col]
    assert np.max(np.abs(np.angle(np.exp(1j * (a - b))))) < 1e-9


def test_degenerate_record_fallback():
    for pol in POLICIES[:-1]:
        assert feedback_phase(pol, DyneRecord(), 0.0) == pytest.approx(HALF_PI, abs=1e-15)


@pytest.mark.parametrize("policy", POLICIES, ids=describe)
def test_vector_and_scalar_paths_agree(policy):
    code, params = encode(policy)
    for v in (0.05, 0.5, 0.93, 0.999):
        recs = _random_records(64, seed=int(v * 1000))
        A = np.array([r.A_v for r in recs])
        B = np.array([r.B_v * v / r.v for r in recs])
        vec = np.angle(phasor_vec(code, params, A, B, v))
        for a, b, x in zip(A, B, vec):
            assert _wrap(phase_core(code, params, complex(a), complex(b), v) - x) == pytest.approx(0, abs=1e-9)


def test_pure_function_of_record():
    for rec in _random_records(50, seed=9):
        for pol in POLICIES:
            assert feedback_phase(pol, rec) == feedback_phase(pol, DyneRecord(rec.A_v, rec.B_v, rec.v))


@pytest.mark.parametrize("text, expected", [
    ("mark2", MarkII()),
    ("markI", MarkI()),
    ("const-eps:0.6", ConstantEpsilon(0.6)),
    ("time-eps:divisor=1.1", TimeEpsilon(divisor=1.1)),
    ("corrected:lambda=1e-4,divisor=1.2", Corrected(lam=1e-4, divisor=1.2)),
    ("heterodyne:detuning=159", Heterodyne(159.0)),
])
def test_parse_policy(text, expected):
    p = parse_policy(text)
    assert p == expected
    assert parse_policy(describe(p)) == p
    assert policy_from_dict(policy_to_dict(p)) == p


@pytest.mark.parametrize("text", ["nope", "const-eps:1.5", "time-eps:divisor=0.5", "mark2:3"])
def test_parse_policy_rejects(text):
    with pytest.raises(ValueError):
        parse_policy(text)
