import math

import numpy as np
import pytest

from dynephase.rng import (
    CounterRNG,
    normal,
    normal_at,
    normals,
    trajectory_key,
    trajectory_keys,
    wiener_increment,
)


def test_same_seed_same_sequence():
    a, b = CounterRNG(42, 3), CounterRNG(42, 3)
    xs = [wiener_increment(a, 1e-3) for _ in range(100)]
    ys = [wiener_increment(b, 1e-3) for _ in range(100)]
    assert xs == ys
    c = CounterRNG(43, 3)
    assert xs != [wiener_increment(c, 1e-3) for _ in range(100)]


def test_streams_differ_by_trajectory():
    assert trajectory_key(7, 0) != trajectory_key(7, 1)
    assert [normal(trajectory_key(7, 0), j) for j in range(5)] != \
           [normal(trajectory_key(7, 1), j) for j in range(5)]


def test_random_access_matches_sequential():
    rng = CounterRNG(9, 11)
    seq = [rng.standard_normal() for _ in range(50)]
    key = trajectory_key(9, 11)
    assert seq[37] == normal(key, 37)
    assert CounterRNG(9, 11, step=37).standard_normal() == seq[37]


def test_scalar_compiled_and_vector_draws_agree():
    keys = trajectory_keys(123, range(200))
    for step in (0, 1, 999, 123456):
        vec = normals(keys, step)
        for k, x in zip(keys, vec):
            assert normal(int(k), step) == x
            assert normal_at(k, np.uint64(step)) == x


def test_wiener_moments():
    dv = 1e-3
    n = 1_000_000
    keys = trajectory_keys(2024, range(n))
    dw = math.sqrt(dv) * normals(keys, 0)
    se = math.sqrt(dv / n)
    assert abs(dw.mean()) < 4 * se
    assert dw.var() == pytest.approx(dv, rel=0.01)


def test_normal_shape():
    x = normals(trajectory_keys(5, range(200_000)), 3)
    # kurtosis of a Gaussian is 3; tails beyond the ziggurat base layer appear
    assert np.mean(x**4) / np.mean(x**2) ** 2 == pytest.approx(3.0, abs=0.05)
    assert np.mean(np.abs(x) > 3.5) == pytest.approx(4.65e-4, rel=0.3)


def test_wiener_rejects_bad_dv():
    with pytest.raises(ValueError):
        wiener_increment(CounterRNG(0), 0.0)
