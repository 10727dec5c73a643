"""Conditioned evolution of a squeezed input under adaptive dyne detection.

Time is the scaled variable v = 1 - exp(-t) on [0, 1]. The system is tracked
through its scaled amplitude alpha_v and the initial linear-form squeeze b0;
the instantaneous squeeze B_v^S follows in closed form from b0 and the record,
which also cancels the 1/(1-v) prefactor of the amplitude equation so
trajectories run to v = 1 exactly. Integration is Euler-Maruyama on the Ito
equations with the feedback phase held between updates.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._accel import default_backend
from .policies import FeedbackPolicy, describe, encode
from .record import DyneRecord
from .rng import MASK64, _uniform_int, trajectory_key, trajectory_keys
from .squeezed import (
    DomainError,
    SqueezedState,
    ZetaDecomposition,
    theoretical_limit,
    to_linear_form,
    zeta_from_record,
)


class StateBlowupError(RuntimeError):
    """|B_v^S| reached 1 (infinite squeezing) during integration."""

    def __init__(self, message, step=None, v=None):
        super().__init__(message)
        self.step = step
        self.v = v


class UndefinedEstimateError(ValueError):
    """C = 0, so arg C carries no phase information."""


@dataclass(frozen=True)
class TimeGrid:
    """Feedback-update interval ``dv_feedback`` split into ``substeps`` Euler steps.

    The number of feedback intervals is ``round(v_end / dv_feedback)`` (at least
    one), so the interval actually used is ``v_end / n_intervals``.
    """

    dv_feedback: float
    substeps: int = 1
    v_end: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.v_end <= 1.0:
            raise ValueError(f"v_end must lie in (0, 1], got {self.v_end!r}")
        if not 0.0 < self.dv_feedback <= self.v_end:
            raise ValueError(f"dv_feedback must lie in (0, v_end], got {self.dv_feedback!r}")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ValueError(f"substeps must be a positive integer, got {self.substeps!r}")

    @property
    def n_intervals(self) -> int:
        return max(1, round(self.v_end / self.dv_feedback))

    @property
    def n_steps(self) -> int:
        return self.n_intervals * self.substeps

    @property
    def dv(self) -> float:
        """Integration step."""
        return self.v_end / self.n_steps

    @classmethod
    def step_rule(cls, nbar: float, substeps: int = 1, refine: float = 1.0) -> "TimeGrid":
        """Update interval ``nbar * theoretical_limit(nbar) / 25``, optionally divided by ``refine``."""
        return cls(step_rule_dv(nbar) / refine, substeps)


def step_rule_dv(nbar: float) -> float:
    return min(1.0, nbar * theoretical_limit(nbar) / 25.0)


@dataclass(frozen=True)
class SystemState:
    alpha_v: complex
    b0_lin: complex
    v: float = 0.0

    @classmethod
    def from_state(cls, state: SqueezedState) -> "SystemState":
        lin = to_linear_form(state)
        return cls(complex(state.alpha), complex(lin.b_lin), 0.0)


@dataclass(frozen=True)
class TrajectoryOutcome:
    final_record: DyneRecord
    theta_hat: float
    wrapped_error: float
    zeta_diag: ZetaDecomposition | None
    policy_id: str
    seed_path: tuple[int, int]
    true_phase: float = 0.0
    trace: np.ndarray | None = field(default=None, repr=False, compare=False)


# --- single-step operations --------------------------------------------------


def signal_increment(alpha_v: complex, Phi: float, dW: float, dv: float) -> float:
    """Photocurrent increment I dv = 2 Re(alpha_v e^{-i Phi}) dv + dW."""
    return 2.0 * (alpha_v * cmath.exp(-1j * Phi)).real * dv + dW


def update_record(record: DyneRecord, signal_dv: float, Phi: float, dv: float) -> DyneRecord:
    e1 = cmath.exp(1j * Phi)
    return DyneRecord(record.A_v + e1 * signal_dv, record.B_v - e1 * e1 * dv, record.v + dv)


def closed_form_Bs(b0_lin: complex, B_v: complex, v: float) -> complex:
    """Conditioned squeeze B_v^S = (1 - v) / (1/b0 - conj(B_v)); zero for coherent input."""
    if b0_lin == 0:
        return 0j
    return (1.0 - v) * b0_lin / (1.0 - b0_lin * B_v.conjugate())


def step_alpha(state: SystemState, record: DyneRecord, Phi: float, dW: float, dv: float) -> SystemState:
    """One Euler-Maruyama step of the scaled amplitude (no drift term)."""
    b = state.b0_lin
    if b == 0:
        return SystemState(state.alpha_v, b, state.v + dv)
    g = b / (1.0 - b * record.B_v.conjugate())  # = B_v^S / (1 - v)
    bs = (1.0 - state.v) * g
    mod2 = abs(bs) ** 2
    if mod2 >= (1.0 - _kernels.BLOWUP_TOL) ** 2:
        raise StateBlowupError(f"|B_v^S| = {math.sqrt(mod2)!r} at v = {state.v!r}", v=state.v)
    coef = g / (1.0 - mod2) * (bs.conjugate() * cmath.exp(1j * Phi) + cmath.exp(-1j * Phi))
    return SystemState(state.alpha_v + coef * dW, b, state.v + dv)


def final_estimate(record: DyneRecord) -> float:
    C = record.C_v
    if C == 0:
        raise UndefinedEstimateError("C = 0: no phase estimate")
    return cmath.phase(C)


# --- ensembles ----------------------------------------------------------------


def trajectory_phase(seed: int, traj: int) -> float:
    """Uniform true phase in [-pi, pi) for trajectory ``traj`` (counter far from the noise)."""
    key = trajectory_key(seed, traj)
    return 2.0 * math.pi * _uniform_int(key ^ 0x5851F42D4C957F2D, 1 << 62) - math.pi


def initial_conditions(state: SqueezedState, phases: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scaled amplitudes and linear-form squeezes of ``state`` rotated by each phase."""
    lin = to_linear_form(state)
    rot = np.exp(1j * phases)
    return complex(state.alpha) * rot, complex(lin.b_lin) * rot * rot


@dataclass
class EnsembleRun:
    """Raw per-trajectory arrays from one integration call, ordered by trajectory index."""

    indices: np.ndarray
    A: np.ndarray
    B: np.ndarray
    alpha: np.ndarray
    true_phase: np.ndarray
    theta_hat: np.ndarray
    status: np.ndarray
    fail_step: np.ndarray
    snaps: np.ndarray
    v_end: float
    trace: np.ndarray | None = None

    @property
    def errors(self) -> np.ndarray:
        return np.pi - np.mod(np.pi - (self.theta_hat - self.true_phase), 2.0 * np.pi)

    @property
    def ok(self) -> np.ndarray:
        return self.status == _kernels.OK

    @classmethod
    def concatenate(cls, runs: list["EnsembleRun"]) -> "EnsembleRun":
        runs = sorted(runs, key=lambda r: int(r.indices[0]) if len(r.indices) else -1)
        cat = {name: np.concatenate([getattr(r, name) for r in runs])
               for name in ("indices", "A", "B", "alpha", "true_phase", "theta_hat", "status",
                            "fail_step", "snaps")}
        return cls(**cat, v_end=runs[0].v_end, trace=runs[0].trace)


def simulate_ensemble(initial: SqueezedState, policy: FeedbackPolicy, grid: TimeGrid,
                      indices, seed: int, *, random_phase: bool = False,
                      checkpoints=(), trace: bool = False, backend: str | None = None) -> EnsembleRun:
    """Integrate the trajectories numbered ``indices`` and return their raw outcomes.

    ``checkpoints`` are scaled times at which |A_v|^2 is recorded; each is
    snapped to the nearest integration step.
    """
    backend = backend or default_backend()
    indices = np.asarray(indices, dtype=np.int64)
    seed = int(seed) & MASK64
    if random_phase:
        phases = np.array([trajectory_phase(seed, int(i)) for i in indices])
    else:
        phases = np.zeros(len(indices))
    alpha0, b0 = initial_conditions(initial, phases)
    keys = trajectory_keys(seed, indices)
    code, params = encode(policy)
    cps = np.array(sorted({max(1, round(c / grid.dv)) for c in checkpoints}), dtype=np.int64)
    kernel = _kernels.ensemble_numba if backend == "numba" else _kernels.ensemble_numpy
    trace_rows = grid.n_intervals if trace else 0
    A, B, alpha, status, fail_step, snaps, trace_arr = kernel(
        code, params, alpha0, b0, keys, grid.n_intervals, grid.substeps, grid.dv, grid.v_end,
        cps, trace_rows)
    theta, est_status = _kernels.final_estimates(code, A, B, grid.v_end)
    status = np.where(status != _kernels.OK, status, est_status).astype(np.int8)
    return EnsembleRun(indices, A, B, alpha, phases, theta, status, fail_step, snaps,
                       grid.v_end, trace_arr if trace else None)


def outcomes_from_run(run: EnsembleRun, policy: FeedbackPolicy, seed: int) -> list[TrajectoryOutcome]:
    out = []
    errors = run.errors
    for n, idx in enumerate(run.indices):
        if run.status[n] == _kernels.BLOWUP:
            continue
        A, B = complex(run.A[n]), complex(run.B[n])
        try:
            zeta = zeta_from_record(A, B) if run.v_end == 1.0 else None
        except DomainError:
            zeta = None
        out.append(TrajectoryOutcome(DyneRecord(A, B, run.v_end), float(run.theta_hat[n]),
                                     float(errors[n]), zeta, describe(policy), (int(seed), int(idx)),
                                     float(run.true_phase[n])))
    return out


def run_trajectory(initial: SqueezedState, true_phase: float, policy: FeedbackPolicy,
                   grid: TimeGrid, seed: int = 0, index: int = 0, *, trace: bool = False,
                   backend: str | None = None) -> TrajectoryOutcome:
    """Integrate a single trajectory; raises on blow-up or an undefined final estimate.

    The noise is stream ``index`` of master ``seed``, identical to the same
    trajectory inside an ensemble run.
    """
    state = initial.rotated(true_phase) if true_phase else initial
    run = simulate_ensemble(state, policy, grid, [index], seed, trace=trace, backend=backend)
    run.true_phase[:] = true_phase
    if run.status[0] == _kernels.BLOWUP:
        step = int(run.fail_step[0])
        raise StateBlowupError(f"state blow-up at step {step} (v = {step * grid.dv:.6g})",
                               step=step, v=step * grid.dv)
    if run.status[0] == _kernels.UNDEFINED_ESTIMATE:
        raise UndefinedEstimateError("final estimate undefined (zero record)")
    outcome = outcomes_from_run(run, policy, seed)[0]
    if trace:
        outcome = TrajectoryOutcome(**{**outcome.__dict__, "trace": run.trace})
    return outcome


def format_trace(trace: np.ndarray) -> str:
    """Line-delimited ``key=value`` trace records, one per feedback update."""
    lines = []
    for row in trace:
        lines.append(" ".join(f"{k}={x:.10g}" for k, x in zip(_kernels.TRACE_COLUMNS, row)))
    return "\n".join(lines) + ("\n" if lines else "")
