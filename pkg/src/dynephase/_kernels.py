"""Ensemble integrators: one numba kernel (trajectory by trajectory) and one
numpy kernel (all trajectories in lockstep). Both consume the same counter-based
noise and the same policy formulas, so they agree to rounding."""

import math

import numpy as np

from ._accel import njit
from ._fastmath import LOSSLESS
from .policies import (
    CONSTANT_EPS,
    CORRECTED,
    HETERODYNE,
    MARK_I,
    MARK_II,
    P_DIVISOR,
    P_EPS_MAX,
    P_EPSILON,
    P_ONSET,
    epsilon_rc,
    estimate_rc,
    phasor_core,
    phasor_vec,
    unit_rc,
)
from .rng import normal_at, normals

BLOWUP_TOL = 1e-12
_BLOWUP_MOD2 = (1.0 - BLOWUP_TOL) ** 2

OK = 0
BLOWUP = 1
UNDEFINED_ESTIMATE = 2

TRACE_COLUMNS = ("v", "phi", "abs_A", "abs_B", "arg_C")


LANES = 16


@njit(cache=True, error_model="numpy")
def _lane_phasors(code, params, v, m, Ar, Ai, Br, Bi, er, ei, tl):
    """Feedback phasors for the first ``m`` lanes (structure-of-arrays form)."""
    if code == HETERODYNE:
        e = phasor_core(code, params, 0j, 0j, v)
        for l in range(m):
            er[l] = e.real
            ei[l] = e.imag
        return
    if code == MARK_I or code == MARK_II:
        for l in range(m):
            ur, ui = unit_rc(Ar[l], Ai[l])
            er[l] = -ui
            ei[l] = ur
        return
    eps_c = params[P_EPSILON]
    divisor = params[P_DIVISOR]
    eps_max = params[P_EPS_MAX]
    any_big = False
    for l in range(m):
        # C = A v + B conj(A)
        cr = Ar[l] * v + Br[l] * Ar[l] + Bi[l] * Ai[l]
        ci = Ai[l] * v + Bi[l] * Ar[l] - Br[l] * Ai[l]
        if code == CONSTANT_EPS:
            eps = eps_c
        else:
            eps = epsilon_rc(Br[l], Bi[l], cr, ci, v, divisor, eps_max)
        t, ur, ui = estimate_rc(Ar[l], Ai[l], cr, ci, eps)
        tl[l] = t
        any_big |= abs(t) > LOSSLESS
        er[l] = -ui
        ei[l] = ur
    if any_big or (code == CORRECTED and v >= params[P_ONSET]):
        for l in range(m):
            e = phasor_core(code, params, complex(Ar[l], Ai[l]), complex(Br[l], Bi[l]), v)
            er[l] = e.real
            ei[l] = e.imag


@njit(cache=True, error_model="numpy")
def ensemble_numba(code, params, alpha0, b0, keys, n_int, substeps, dv, v_end,
                   checkpoints, trace_rows):
    # Trajectories advance in lockstep blocks of LANES held as separate real
    # arrays, so the branch-free per-lane updates compile to SIMD code. Only
    # the Gaussian draws (rejection sampling) stay scalar.
    n = alpha0.shape[0]
    A_out = np.zeros(n, dtype=np.complex128)
    B_out = np.zeros(n, dtype=np.complex128)
    alpha_out = np.zeros(n, dtype=np.complex128)
    status = np.zeros(n, dtype=np.int8)
    fail_step = np.full(n, -1, dtype=np.int64)
    snaps = np.full((n, checkpoints.shape[0]), np.nan)
    trace = np.full((trace_rows, 5), np.nan)
    sqdv = math.sqrt(dv)
    n_cp = checkpoints.shape[0]

    Ar = np.zeros(LANES)
    Ai = np.zeros(LANES)
    Br = np.zeros(LANES)
    Bi = np.zeros(LANES)
    ar = np.zeros(LANES)
    ai = np.zeros(LANES)
    br = np.zeros(LANES)
    bi = np.zeros(LANES)
    er = np.zeros(LANES)
    ei = np.zeros(LANES)
    tl = np.zeros(LANES)
    dW = np.zeros(LANES)
    key = np.zeros(LANES, dtype=np.uint64)
    alive = np.zeros(LANES, dtype=np.bool_)
    blown = np.zeros(LANES, dtype=np.bool_)

    for start in range(0, n, LANES):
        m = min(LANES, n - start)
        for l in range(m):
            Ar[l] = 0.0
            Ai[l] = 0.0
            Br[l] = 0.0
            Bi[l] = 0.0
            ar[l] = alpha0[start + l].real
            ai[l] = alpha0[start + l].imag
            br[l] = b0[start + l].real
            bi[l] = b0[start + l].imag
            key[l] = keys[start + l]
            alive[l] = True
        j = 0
        cp = 0
        for k in range(n_int):
            v0 = j * dv
            _lane_phasors(code, params, v0, m, Ar, Ai, Br, Bi, er, ei, tl)
            if start == 0 and k < trace_rows:
                cr = Ar[0] * v0 + Br[0] * Ar[0] + Bi[0] * Ai[0]
                ci = Ai[0] * v0 + Bi[0] * Ar[0] - Br[0] * Ai[0]
                trace[k, 0] = v0
                trace[k, 1] = math.atan2(ei[0], er[0])
                trace[k, 2] = math.sqrt(Ar[0] * Ar[0] + Ai[0] * Ai[0])
                trace[k, 3] = math.sqrt(Br[0] * Br[0] + Bi[0] * Bi[0])
                trace[k, 4] = math.atan2(ci, cr)
            for s in range(substeps):
                w = 1.0 - j * dv
                for l in range(m):
                    dW[l] = sqdv * normal_at(key[l], j)
                n_blown = 0
                for l in range(m):
                    x = er[l]
                    y = ei[l]
                    # g = B_v^S / (1 - v) = b / (1 - b conj(B)), finite at v = 1; zero for coherent input
                    dr = 1.0 - (br[l] * Br[l] + bi[l] * Bi[l])
                    di = -(bi[l] * Br[l] - br[l] * Bi[l])
                    inv = 1.0 / (dr * dr + di * di)
                    gr = (br[l] * dr + bi[l] * di) * inv
                    gi = (bi[l] * dr - br[l] * di) * inv
                    bsr = w * gr
                    bsi = w * gi
                    mod2 = bsr * bsr + bsi * bsi
                    bad = alive[l] and mod2 >= _BLOWUP_MOD2
                    blown[l] = bad
                    n_blown += bad
                    live = alive[l] and not bad
                    # (conj(bs) e1 + conj(e1)) * g * dW / (1 - |bs|^2)
                    hr = bsr * x + bsi * y + x
                    hi = bsr * y - bsi * x - y
                    f = dW[l] / (1.0 - mod2) if live else 0.0
                    idv = 2.0 * (ar[l] * x + ai[l] * y) * dv + dW[l]
                    nar = ar[l] + (gr * hr - gi * hi) * f
                    nai = ai[l] + (gr * hi + gi * hr) * f
                    nAr = Ar[l] + x * idv
                    nAi = Ai[l] + y * idv
                    nBr = Br[l] - (x * x - y * y) * dv
                    nBi = Bi[l] - 2.0 * x * y * dv
                    ar[l] = nar
                    ai[l] = nai
                    Ar[l] = nAr if live else Ar[l]
                    Ai[l] = nAi if live else Ai[l]
                    Br[l] = nBr if live else Br[l]
                    Bi[l] = nBi if live else Bi[l]
                if n_blown:
                    for l in range(m):
                        if blown[l]:
                            alive[l] = False
                            status[start + l] = BLOWUP
                            fail_step[start + l] = j
                j += 1
                while cp < n_cp and checkpoints[cp] == j:
                    for l in range(m):
                        if alive[l]:
                            snaps[start + l, cp] = Ar[l] * Ar[l] + Ai[l] * Ai[l]
                    cp += 1
        for l in range(m):
            A_out[start + l] = complex(Ar[l], Ai[l])
            B_out[start + l] = complex(Br[l], Bi[l])
            alpha_out[start + l] = complex(ar[l], ai[l])
    return A_out, B_out, alpha_out, status, fail_step, snaps, trace


def ensemble_numpy(code, params, alpha0, b0, keys, n_int, substeps, dv, v_end,
                   checkpoints, trace_rows):
    n = alpha0.shape[0]
    A = np.zeros(n, dtype=np.complex128)
    B = np.zeros(n, dtype=np.complex128)
    alpha = alpha0.astype(np.complex128).copy()
    b = b0.astype(np.complex128)
    squeezed = b != 0
    alive = np.ones(n, dtype=bool)
    status = np.zeros(n, dtype=np.int8)
    fail_step = np.full(n, -1, dtype=np.int64)
    snaps = np.full((n, len(checkpoints)), np.nan)
    trace = np.full((trace_rows, 5), np.nan)
    sqdv = math.sqrt(dv)
    cp_index = {int(c): col for col, c in enumerate(checkpoints)}
    j = 0
    for k in range(n_int):
        v0 = j * dv
        e1 = phasor_vec(code, params, A, B, v0)
        if k < trace_rows and n:
            C0 = A[0] * v0 + B[0] * np.conj(A[0])
            trace[k] = (v0, np.angle(e1[0]), abs(A[0]), abs(B[0]), np.angle(C0))
        em1 = np.conj(e1)
        e2 = e1 * e1
        for s in range(substeps):
            dW = sqdv * normals(keys, j)
            d = 1.0 - b * np.conj(B)
            g = np.where(squeezed, b * np.conj(d) / (d.real**2 + d.imag**2), 0j)
            bs = (1.0 - j * dv) * g
            mod2 = bs.real**2 + bs.imag**2
            blown = alive & squeezed & (mod2 >= _BLOWUP_MOD2)
            if blown.any():
                status[blown] = BLOWUP
                fail_step[blown] = j
                alive &= ~blown
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(squeezed, g / (1.0 - mod2) * (np.conj(bs) * e1 + em1) * dW, 0j)
            idv = 2.0 * (alpha.real * em1.real - alpha.imag * em1.imag) * dv + dW
            A = np.where(alive, A + e1 * idv, A)
            B = np.where(alive, B - e2 * dv, B)
            alpha = np.where(alive, alpha + step, alpha)
            j += 1
            col = cp_index.get(j)
            if col is not None:
                snaps[:, col] = np.where(alive, A.real**2 + A.imag**2, np.nan)
    return A, B, alpha, status, fail_step, snaps, trace


def final_estimates(code, A, B, v_end):
    """Final phase estimates and status codes (arg A for mark I, arg C otherwise)."""
    C = A * v_end + B * np.conj(A)
    target = A if code == MARK_I else C
    theta = np.angle(target)
    status = np.where(target == 0, UNDEFINED_ESTIMATE, OK).astype(np.int8)
    return theta, status
