"""Feedback laws for the local-oscillator phase.

Every estimate-based policy sets ``Phi = phi_hat + pi/2``. The kernels work
with the unit phasor e^{i Phi} rather than the angle, since the integrator only
consumes e^{i Phi} and e^{2 i Phi}; for mark I/II this avoids trigonometry
altogether. The scalar kernels are plain ``math``/``cmath`` code, jitted for the
numba backend; ``phasor_vec`` is the lockstep numpy equivalent.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from ._accel import njit
from ._fastmath import LOSSLESS, atan2, sincos, sincos_reduced
from .record import DyneRecord
from .squeezed import DomainError, ZetaDecomposition

HALF_PI = 0.5 * math.pi
TWO_PI = 2.0 * math.pi
_LOG_2PI_QUARTER = 0.25 * math.log(2.0 * math.pi)

# Integer tags used inside the kernels.
HETERODYNE, MARK_I, MARK_II, CONSTANT_EPS, TIME_EPS, CORRECTED = range(6)

# Slots of the float parameter vector handed to the kernels.
P_DETUNING, P_EPSILON, P_DIVISOR, P_LAMBDA, P_ONSET, P_EPS_MAX = range(6)
N_PARAMS = 6


@dataclass(frozen=True)
class Heterodyne:
    """Local oscillator detuned from the signal; ``detuning`` in rad per unit of unscaled time."""

    detuning: float = 500.0
    name = "heterodyne"

    def __post_init__(self):
        if not math.isfinite(self.detuning) or self.detuning <= 0:
            raise ValueError(f"detuning must be positive, got {self.detuning!r}")


@dataclass(frozen=True)
class MarkI:
    name = "mark1"


@dataclass(frozen=True)
class MarkII:
    name = "mark2"


@dataclass(frozen=True)
class ConstantEpsilon:
    epsilon: float
    name = "const-eps"

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon!r}")


@dataclass(frozen=True)
class TimeEpsilon:
    divisor: float = 1.0
    eps_max: float = math.inf
    name = "time-eps"

    def __post_init__(self):
        if not self.divisor >= 1.0:
            raise ValueError(f"divisor must be >= 1, got {self.divisor!r}")
        if not self.eps_max > 0:
            raise ValueError(f"eps_max must be positive, got {self.eps_max!r}")


@dataclass(frozen=True)
class Corrected:
    lam: float = 1e-3
    divisor: float = 1.0
    onset_v: float = 0.9
    eps_max: float = math.inf
    name = "corrected"

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam!r}")
        if not self.divisor >= 1.0:
            raise ValueError(f"divisor must be >= 1, got {self.divisor!r}")
        if not 0.0 <= self.onset_v <= 1.0:
            raise ValueError(f"onset_v must lie in [0, 1], got {self.onset_v!r}")
        if not self.eps_max > 0:
            raise ValueError(f"eps_max must be positive, got {self.eps_max!r}")


FeedbackPolicy = Union[Heterodyne, MarkI, MarkII, ConstantEpsilon, TimeEpsilon, Corrected]


def encode(policy: FeedbackPolicy) -> tuple[int, np.ndarray]:
    """Integer tag and parameter vector consumed by the kernels."""
    p = np.zeros(N_PARAMS)
    p[P_DIVISOR] = 1.0
    p[P_EPS_MAX] = math.inf
    if isinstance(policy, Heterodyne):
        p[P_DETUNING] = policy.detuning
        return HETERODYNE, p
    if isinstance(policy, MarkI):
        return MARK_I, p
    if isinstance(policy, MarkII):
        return MARK_II, p
    if isinstance(policy, ConstantEpsilon):
        p[P_EPSILON] = policy.epsilon
        return CONSTANT_EPS, p
    if isinstance(policy, TimeEpsilon):
        p[P_DIVISOR] = policy.divisor
        p[P_EPS_MAX] = policy.eps_max
        return TIME_EPS, p
    if isinstance(policy, Corrected):
        p[P_DIVISOR] = policy.divisor
        p[P_LAMBDA] = policy.lam
        p[P_ONSET] = policy.onset_v
        p[P_EPS_MAX] = policy.eps_max
        return CORRECTED, p
    raise TypeError(f"not a feedback policy: {policy!r}")


def describe(policy: FeedbackPolicy) -> str:
    """Compact ``name:key=value,...`` string; inverse of :func:`parse_policy`."""
    fields = {
        Heterodyne: ("detuning",),
        ConstantEpsilon: ("epsilon",),
        TimeEpsilon: ("divisor", "eps_max"),
        Corrected: ("lam", "divisor", "onset_v", "eps_max"),
    }.get(type(policy), ())
    parts = []
    for f in fields:
        value = getattr(policy, f)
        if f == "eps_max" and math.isinf(value):
            continue
        parts.append(f"{f}={value:g}")
    return policy.name + (":" + ",".join(parts) if parts else "")


_BY_NAME = {
    "heterodyne": Heterodyne,
    "mark1": MarkI,
    "mark2": MarkII,
    "const-eps": ConstantEpsilon,
    "time-eps": TimeEpsilon,
    "corrected": Corrected,
}
_ALIASES = {"markI": "mark1", "markII": "mark2", "mark-i": "mark1", "mark-ii": "mark2",
            "constant-eps": "const-eps", "lambda": "lam", "eps": "epsilon", "onset": "onset_v"}


def parse_policy(text: str) -> FeedbackPolicy:
    """Parse ``NAME[:k=v,...]``, e.g. ``corrected:lam=1e-3,divisor=1.1`` or ``const-eps:0.6``."""
    name, _, rest = text.strip().partition(":")
    name = _ALIASES.get(name, name)
    if name not in _BY_NAME:
        raise ValueError(f"unknown policy {name!r}; choose from {sorted(_BY_NAME)}")
    cls = _BY_NAME[name]
    kwargs = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            if cls is ConstantEpsilon:
                key, value = "epsilon", key
            else:
                raise ValueError(f"policy parameter {item!r} needs key=value form")
        kwargs[_ALIASES.get(key.strip(), key.strip())] = float(value)
    return cls(**kwargs)


def policy_from_dict(d: dict) -> FeedbackPolicy:
    d = dict(d)
    name = d.pop("name")
    name = _ALIASES.get(name, name)
    if name not in _BY_NAME:
        raise ValueError(f"unknown policy {name!r}; choose from {sorted(_BY_NAME)}")
    return _BY_NAME[name](**{_ALIASES.get(k, k): float(v) for k, v in d.items()})


def policy_to_dict(policy: FeedbackPolicy) -> dict:
    out = {"name": policy.name}
    for k, v in policy.__dict__.items():
        out[k] = None if isinstance(v, float) and math.isinf(v) else v
    return {k: v for k, v in out.items() if v is not None}


# --- scalar kernels --------------------------------------------------------


@njit(cache=True)
def wrap_angle(x):
    """Map ``x`` into (-pi, pi]."""
    return math.pi - (math.pi - x) % TWO_PI


@njit(cache=True)
def heterodyne_phase(v, detuning):
    """Linear LO ramp in unscaled time t = -ln(1 - v)."""
    return -detuning * math.log1p(-v)


@njit(cache=True)
def _mod(z):
    # sqrt of the squared modulus; much cheaper than hypot and overflow is impossible here
    return math.sqrt(z.real * z.real + z.imag * z.imag)


@njit(cache=True)
def _unit(z):
    """z / |z|, or 1 for z = 0."""
    m2 = z.real * z.real + z.imag * z.imag
    if m2 == 0.0:
        return 1.0 + 0j
    r = 1.0 / math.sqrt(m2)
    return complex(z.real * r, z.imag * r)


@njit(inline="always")
def estimate_rc(Ar, Ai, Cr, Ci, epsilon):
    """Real-arithmetic core of :func:`_estimate_phasor`; returns (t, Re, Im).

    Branch-free so that it vectorises across lanes. ``t`` is the interpolation
    rotation; the result is only exact for |t| <= LOSSLESS (callers check).
    """
    mc2 = Cr * Cr + Ci * Ci
    has_c = mc2 > 0.0
    ur = Cr if has_c else Ar
    ui = Ci if has_c else Ai
    m2 = mc2 if has_c else Ar * Ar + Ai * Ai
    inv = 1.0 / math.sqrt(m2) if m2 > 0.0 else 0.0
    ur = ur * inv if m2 > 0.0 else 1.0
    ui = ui * inv
    # arg(A conj(C)); zero whenever either factor vanishes
    t = epsilon * atan2(Ai * Cr - Ar * Ci, Ar * Cr + Ai * Ci)
    s, c = sincos_reduced(t)
    return t, ur * c - ui * s, ur * s + ui * c


@njit(inline="always")
def unit_rc(zr, zi):
    """z / |z| as a pair, or (1, 0) for z = 0."""
    m2 = zr * zr + zi * zi
    inv = 1.0 / math.sqrt(m2) if m2 > 0.0 else 0.0
    return (zr * inv if m2 > 0.0 else 1.0), zi * inv


@njit(inline="always")
def epsilon_rc(Br, Bi, Cr, Ci, v, divisor, eps_max):
    """Time-dependent interpolation weight; 1 where it is undefined (v <= 0 or C = 0)."""
    mod_c = math.sqrt(Cr * Cr + Ci * Ci)
    ok = mod_c > 0.0 and v > 0.0
    k = math.sqrt(v / (1.0 - v)) / divisor if v > 0.0 else 0.0
    eps = (v * v - (Br * Br + Bi * Bi)) / (mod_c if ok else 1.0) * k
    return min(eps, eps_max) if ok else 1.0


@njit(cache=True)
def _estimate_phasor(A, C, epsilon):
    """e^{i phi_hat} for phi_hat = arg C + epsilon * wrap(arg A - arg C), with zero-record fallbacks."""
    t, er, ei = estimate_rc(A.real, A.imag, C.real, C.imag, epsilon)
    if abs(t) > LOSSLESS:
        uc = _unit(C) if C != 0 else _unit(A)
        return uc * complex(math.cos(t), math.sin(t))
    return complex(er, ei)


@njit(cache=True)
def _epsilon(B, C, v, divisor, eps_max):
    return epsilon_rc(B.real, B.imag, C.real, C.imag, v, divisor, eps_max)


@njit(cache=True)
def _optimal_zeta_mag(nbar):
    # Non-negative |zeta_opt|; zero where the asymptotic n0 is not below nbar.
    n0 = math.log(4.0 * nbar) - _LOG_2PI_QUARTER
    if n0 <= 0.0 or n0 >= nbar:
        return 0.0
    return -0.5 * math.log(n0 / nbar)


@njit(cache=True)
def _alt_phasor(A, B, v, lam):
    """e^{i Phi} steering B toward its optimum, or 0 when the trigger does not fire."""
    C = A * v + B * A.conjugate()
    mod_b = _mod(B)
    denom = v * v - mod_b * mod_b
    if C == 0 or denom <= 0.0 or mod_b >= v:
        return 0j
    nbar = (C.real * C.real + C.imag * C.imag) / (denom * denom)
    if nbar <= 0.0:
        return 0j
    zopt = _optimal_zeta_mag(nbar)
    if not math.atanh(mod_b / v) > zopt * math.exp(lam * nbar * (1.0 - v)):
        return 0j
    d = B - v * (C / C.conjugate()) * math.tanh(zopt)
    if d == 0:
        return 0j
    return cmath.sqrt(_unit(d))


@njit(cache=True)
def phasor_core(code, params, A, B, v):
    """e^{i Phi} for policy tag ``code`` given the record (A, B) at time v."""
    if code == HETERODYNE:
        s, c = sincos(heterodyne_phase(v, params[P_DETUNING]))
        return complex(c, s)
    if code == CORRECTED and v >= params[P_ONSET]:
        alt = _alt_phasor(A, B, v, params[P_LAMBDA])
        if alt != 0:
            return alt
    C = A * v + B * A.conjugate()
    if code == MARK_I or code == MARK_II:
        est = _unit(A)
    elif code == CONSTANT_EPS:
        est = _estimate_phasor(A, C, params[P_EPSILON])
    else:
        est = _estimate_phasor(A, C, _epsilon(B, C, v, params[P_DIVISOR], params[P_EPS_MAX]))
    return complex(-est.imag, est.real)


@njit(cache=True)
def phase_core(code, params, A, B, v):
    """Feedback phase in (-pi, pi] for tag ``code``."""
    return cmath.phase(phasor_core(code, params, A, B, v))


# --- public scalar API -----------------------------------------------------


def interp_estimate(record: DyneRecord, epsilon: float) -> float:
    """Phase estimate between arg C (epsilon = 0) and arg A (epsilon = 1).

    Interpolates linearly along the wrapped difference, so it also extends
    continuously to epsilon > 1.
    """
    return cmath.phase(_estimate_phasor(complex(record.A_v), complex(record.C_v), float(epsilon)))


def epsilon_schedule(record: DyneRecord, v: float, divisor: float = 1.0,
                     eps_max: float = math.inf) -> float:
    """Time-dependent interpolation weight; ``eps_max`` clamps it (off by default)."""
    rec = DyneRecord(record.A_v, record.B_v, v)
    return float(_epsilon(complex(rec.B_v), complex(rec.C_v), float(v), float(divisor),
                          float(eps_max)))


def zeta_estimate_at(record: DyneRecord, v: float) -> ZetaDecomposition:
    """Intermediate-time estimate of (nbar, zeta, n0) from a partial record."""
    A, B = complex(record.A_v), complex(record.B_v)
    C = A * v + B * A.conjugate()
    mod_b = abs(B)
    if not v > 0 or mod_b >= v:
        raise DomainError(f"need 0 < |B_v| < v, got |B_v| = {mod_b!r}, v = {v!r}")
    if C == 0:
        raise DomainError("C_v = 0")
    nbar = abs(C / (v * v - mod_b**2)) ** 2
    if mod_b == 0.0:
        zeta = 0j
    else:
        zeta = -(B * cmath.exp(-2j * cmath.phase(C)) / mod_b) * math.atanh(mod_b / v)
    return ZetaDecomposition(nbar, zeta, nbar * math.exp(2.0 * zeta.real))


def corrected_phase(record: DyneRecord, v: float, lam: float, divisor: float = 1.0,
                    onset_v: float = 0.9) -> float:
    return feedback_phase(Corrected(lam, divisor, onset_v), DyneRecord(record.A_v, record.B_v, v), v)


def corrected_triggered(record: DyneRecord, v: float, lam: float, onset_v: float = 0.9) -> bool:
    if v < onset_v:
        return False
    return _alt_phasor(complex(record.A_v), complex(record.B_v), float(v), float(lam)) != 0


def feedback_phase(policy: FeedbackPolicy, record: DyneRecord, v: float | None = None) -> float:
    """LO phase chosen by ``policy`` after observing ``record`` (time defaults to ``record.v``)."""
    v = record.v if v is None else v
    code, params = encode(policy)
    return float(phase_core(code, params, complex(record.A_v), complex(record.B_v), float(v)))


# --- lockstep numpy kernels ------------------------------------------------


def _unit_vec(z, fallback):
    mod = np.abs(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(mod == 0, fallback, z / np.where(mod == 0, 1.0, mod))


def _estimate_phasor_vec(A, C, epsilon):
    ua = _unit_vec(A, 1.0 + 0j)
    uc = _unit_vec(C, 1.0 + 0j)
    t = epsilon * np.angle(A * np.conj(C))
    est = uc * (np.cos(t) + 1j * np.sin(t))
    est = np.where(A == 0, uc, est)
    return np.where(C == 0, ua, est)


def _alt_phasor_vec(A, B, v, lam):
    C = A * v + B * np.conj(A)
    mod_b = np.abs(B)
    denom = v * v - mod_b * mod_b
    ok = (C != 0) & (denom > 0) & (mod_b < v)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        nbar = np.abs(C / np.where(ok, denom, 1.0)) ** 2
        ok &= nbar > 0
        safe_n = np.where(ok, nbar, 1.0)
        n0 = np.log(4.0 * safe_n) - _LOG_2PI_QUARTER
        zopt = np.where((n0 > 0) & (n0 < safe_n), -0.5 * np.log(np.where(n0 > 0, n0, 1.0) / safe_n), 0.0)
        ok &= np.arctanh(np.minimum(mod_b / v, 1.0)) > zopt * np.exp(lam * nbar * (1.0 - v))
        d = B - v * (C / np.conj(C)) * np.tanh(zopt)
    ok &= d != 0
    return np.where(ok, np.sqrt(_unit_vec(d, 1.0 + 0j)), 0j)


def phasor_vec(code: int, params: np.ndarray, A: np.ndarray, B: np.ndarray, v: float) -> np.ndarray:
    """Vectorised :func:`phasor_core` over trajectories sharing the same time ``v``."""
    if code == HETERODYNE:
        return np.full(A.shape, phasor_core(code, params, 0j, 0j, v))
    C = A * v + B * np.conj(A)
    if code in (MARK_I, MARK_II):
        est = _unit_vec(A, 1.0 + 0j)
    elif code == CONSTANT_EPS:
        est = _estimate_phasor_vec(A, C, params[P_EPSILON])
    else:
        mod_c = np.abs(C)
        if v <= 0.0:
            eps = np.ones(A.shape)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                eps = (v * v - (B.real**2 + B.imag**2)) / mod_c * math.sqrt(v / (1.0 - v)) / params[P_DIVISOR]
            eps = np.where(mod_c == 0, 1.0, np.minimum(eps, params[P_EPS_MAX]))
        est = _estimate_phasor_vec(A, C, eps)
    out = 1j * est
    if code == CORRECTED and v >= params[P_ONSET]:
        alt = _alt_phasor_vec(A, B, v, params[P_LAMBDA])
        out = np.where(alt != 0, alt, out)
    return out
