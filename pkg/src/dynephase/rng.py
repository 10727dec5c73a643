"""Counter-based Gaussian noise keyed by (master seed, trajectory, step).

Each variate is a pure function of its three indices, so any trajectory (or any
step of it) can be regenerated in isolation and the numba and numpy backends
draw exactly the same numbers. The mixer is the SplitMix64 finaliser; a
trajectory key is a mixed combination of seed and trajectory index, and the
step counter walks a Weyl sequence from that key.

Standard normals come from a 128-layer ziggurat (Doornik's ZIGNOR variant).
Step ``j`` owns the counter block ``[32 j, 32 j + 32)``; a draw consumes one
64-bit word per attempt plus one per wedge or tail test, so the block is never
exhausted in practice (if it were, the last candidate is returned).
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import njit

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_TRAJ_SALT = 0xD1B54A32D192ED03

_U_GAMMA = np.uint64(GAMMA)
_U_M1 = np.uint64(_M1)
_U_M2 = np.uint64(_M2)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_TWO = np.uint64(2)
_INV53 = 1.0 / 9007199254740992.0
_TWO_PI = 2.0 * math.pi


def _mix_int(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def trajectory_key(seed: int, traj: int) -> int:
    """64-bit stream key for trajectory ``traj`` under master ``seed``."""
    return _mix_int(_mix_int(seed) ^ _mix_int((traj * _TRAJ_SALT + GAMMA) & MASK64))


def trajectory_keys(seed: int, indices) -> np.ndarray:
    return np.array([trajectory_key(seed, int(i)) for i in indices], dtype=np.uint64)


def _uniform_int(key: int, counter: int) -> float:
    return ((_mix_int(key + (counter + 1) * GAMMA) >> 11) + 0.5) * _INV53


def _zig_tables(layers=128, r=3.442619855899, area=9.91256303526217e-3):
    x = np.zeros(layers + 1)
    f = lambda t: math.exp(-0.5 * t * t)
    x[0] = area / f(r)
    x[1] = r
    for i in range(2, layers):
        x[i] = math.sqrt(-2.0 * math.log(area / x[i - 1] + f(x[i - 1])))
    x[layers] = 0.0
    return x, x[1:] / x[:-1]


ZIG_X, ZIG_RATIO = _zig_tables()
ZIG_R = float(ZIG_X[1])
BLOCK = 32
_U_BLOCK = np.uint64(BLOCK)
_U_LAYER_MASK = np.uint64(127)


def normal(key: int, step: int) -> float:
    """Standard normal number ``step`` of stream ``key`` (pure-Python reference)."""
    c = step * BLOCK
    end = c + BLOCK
    x = 0.0
    while c < end - 1:
        w = _mix_int(key + (c + 1) * GAMMA)
        c += 1
        u = 2.0 * (((w >> 11) + 0.5) * _INV53) - 1.0
        i = w & 127
        x = u * ZIG_X[i]
        if abs(u) < ZIG_RATIO[i]:
            return float(x)
        if i == 0:
            while c < end - 1:
                a = math.log(_uniform_int(key, c)) / ZIG_R
                y = math.log(_uniform_int(key, c + 1))
                c += 2
                if -2.0 * y >= a * a:
                    return float(a - ZIG_R if u < 0 else ZIG_R - a)
            return float(x)
        f0 = math.exp(-0.5 * (ZIG_X[i] ** 2 - x * x))
        f1 = math.exp(-0.5 * (ZIG_X[i + 1] ** 2 - x * x))
        u2 = _uniform_int(key, c)
        c += 1
        if f1 + u2 * (f0 - f1) < 1.0:
            return float(x)
    return float(x)


@njit(cache=True)
def _mix_u64(z):
    z = (z ^ (z >> _S30)) * _U_M1
    z = (z ^ (z >> _S27)) * _U_M2
    return z ^ (z >> _S31)


@njit(cache=True)
def _unif_u64(key, c):
    return (float(_mix_u64(key + (c + _ONE) * _U_GAMMA) >> _S11) + 0.5) * _INV53


@njit(cache=True)
def normal_at(key, step):
    """Jitted twin of :func:`normal`."""
    c = np.uint64(step) * _U_BLOCK
    end = c + _U_BLOCK - _ONE
    x = 0.0
    while c < end:
        w = _mix_u64(key + (c + _ONE) * _U_GAMMA)
        c += _ONE
        u = 2.0 * ((float(w >> _S11) + 0.5) * _INV53) - 1.0
        i = np.intp(w & _U_LAYER_MASK)
        x = u * ZIG_X[i]
        if abs(u) < ZIG_RATIO[i]:
            return x
        if i == 0:
            while c < end:
                a = math.log(_unif_u64(key, c)) / ZIG_R
                y = math.log(_unif_u64(key, c + _ONE))
                c += _TWO
                if -2.0 * y >= a * a:
                    return a - ZIG_R if u < 0 else ZIG_R - a
            return x
        f0 = math.exp(-0.5 * (ZIG_X[i] ** 2 - x * x))
        f1 = math.exp(-0.5 * (ZIG_X[i + 1] ** 2 - x * x))
        u2 = _unif_u64(key, c)
        c += _ONE
        if f1 + u2 * (f0 - f1) < 1.0:
            return x
    return x


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _U_M1
    z = (z ^ (z >> _S27)) * _U_M2
    return z ^ (z >> _S31)


def _unif_array(keys, c):
    with np.errstate(over="ignore"):
        w = _mix_array(keys + (c + _ONE) * _U_GAMMA)
    return ((w >> _S11).astype(np.float64) + 0.5) * _INV53


def normals(keys: np.ndarray, step: int) -> np.ndarray:
    """Vectorised :func:`normal` for many streams at the same step."""
    n = keys.shape[0]
    out = np.empty(n)
    todo = np.arange(n)
    c = np.full(n, np.uint64(step) * _U_BLOCK, dtype=np.uint64)
    end = np.uint64(step) * _U_BLOCK + _U_BLOCK - _ONE
    last = np.zeros(n)
    while todo.size:
        k, cc = keys[todo], c[todo]
        with np.errstate(over="ignore"):
            w = _mix_array(k + (cc + _ONE) * _U_GAMMA)
        cc = cc + _ONE
        u = 2.0 * (((w >> _S11).astype(np.float64) + 0.5) * _INV53) - 1.0
        i = (w & _U_LAYER_MASK).astype(np.intp)
        x = u * ZIG_X[i]
        last[todo] = x
        accept = np.abs(u) < ZIG_RATIO[i]
        tail = ~accept & (i == 0)
        wedge = ~accept & (i != 0)
        if wedge.any():
            xi = x[wedge]
            f0 = np.exp(-0.5 * (ZIG_X[i[wedge]] ** 2 - xi * xi))
            f1 = np.exp(-0.5 * (ZIG_X[i[wedge] + 1] ** 2 - xi * xi))
            u2 = _unif_array(k[wedge], cc[wedge])
            cc[wedge] += _ONE
            ok = f1 + u2 * (f0 - f1) < 1.0
            accept[np.flatnonzero(wedge)[ok]] = True
        for m in np.flatnonzero(tail):
            out[todo[m]] = _tail_scalar(int(k[m]), int(cc[m]), int(end), float(u[m]), float(x[m]))
        done = accept | tail
        out[todo[accept]] = x[accept]
        c[todo] = cc
        exhausted = ~done & (cc >= end)
        out[todo[exhausted]] = x[exhausted]
        todo = todo[~done & ~exhausted]
    return out


def _tail_scalar(key, c, end, u, x):
    while c < end:
        a = math.log(_uniform_int(key, c)) / ZIG_R
        y = math.log(_uniform_int(key, c + 1))
        c += 2
        if -2.0 * y >= a * a:
            return a - ZIG_R if u < 0 else ZIG_R - a
    return x


class CounterRNG:
    """Sequential view of one trajectory's noise stream."""

    def __init__(self, seed: int, traj: int = 0, step: int = 0):
        self.seed = int(seed) & MASK64
        self.traj = int(traj)
        self.key = trajectory_key(self.seed, self.traj)
        self.step = int(step)

    def standard_normal(self) -> float:
        z = normal(self.key, self.step)
        self.step += 1
        return z


def wiener_increment(rng: CounterRNG, dv: float) -> float:
    """Gaussian increment with mean 0 and variance ``dv``; advances ``rng`` by one step."""
    if not dv > 0:
        raise ValueError(f"dv must be positive, got {dv!r}")
    return math.sqrt(dv) * rng.standard_normal()
