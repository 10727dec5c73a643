"""Circular statistics of phase errors, zeta diagnostics and power-law fits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats as _sps

from .squeezed import DomainError, optimal_n0, optimal_zeta, zeta_from_record

JACKKNIFE_BATCHES = 50
STDERR_METHOD = f"jackknife over {JACKKNIFE_BATCHES} contiguous batches"


def wrap_error(theta_hat: float, true_phase: float) -> float:
    """Estimate error wrapped into (-pi, pi]."""
    d = float(theta_hat) - float(true_phase)
    if not math.isfinite(d):
        raise ValueError("phase error must be finite")
    return math.pi - (math.pi - d) % (2.0 * math.pi)


def _resultant(errors) -> tuple[complex, int]:
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        raise ValueError("no samples")
    return complex(np.mean(np.exp(1j * e))), e.size


def _divergent(r: float, n: int) -> bool:
    # A resultant within three standard deviations of zero (for N > 9) is
    # indistinguishable from a uniform distribution.
    return r == 0.0 or (n > 9 and r < 3.0 / math.sqrt(n))


def holevo_variance(errors) -> float:
    """|<e^{i theta}>|^-2 - 1; ``inf`` when the mean resultant is consistent with zero."""
    R, n = _resultant(errors)
    r = abs(R)
    if _divergent(r, n):
        return math.inf
    return max(0.0, 1.0 / (r * r) - 1.0)


def holevo_divergent(errors) -> bool:
    R, n = _resultant(errors)
    return _divergent(abs(R), n)


def wrapped_variance(errors) -> float:
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        raise ValueError("no samples")
    return float(np.mean(e * e))


@dataclass(frozen=True)
class EnsembleStats:
    n_samples: int
    holevo_variance: float
    wrapped_variance: float
    mean_error: float
    stderr_holevo: float
    failed_count: int = 0
    divergent: bool = False
    stderr_method: str = STDERR_METHOD

    @property
    def stderr_available(self) -> bool:
        return math.isfinite(self.stderr_holevo)

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "holevo_variance": self.holevo_variance,
            "wrapped_variance": self.wrapped_variance,
            "mean_error": self.mean_error,
            "stderr_holevo": self.stderr_holevo,
            "failed_count": self.failed_count,
            "divergent": self.divergent,
            "stderr_method": self.stderr_method,
        }


def jackknife_holevo(errors, batches: int = JACKKNIFE_BATCHES) -> float:
    """Delete-one-batch jackknife standard error of the Holevo variance.

    Samples are split into ``min(batches, N)`` contiguous batches in the given
    order, so the result depends only on the ordered sample. NaN for N < 2.
    """
    e = np.asarray(errors, dtype=float)
    n = e.size
    if n < 2:
        return math.nan
    g = min(batches, n)
    bounds = np.linspace(0, n, g + 1).round().astype(np.int64)
    z = np.exp(1j * e)
    sums = np.array([z[bounds[k]:bounds[k + 1]].sum() for k in range(g)])
    counts = np.diff(bounds).astype(float)
    total, total_n = sums.sum(), counts.sum()
    loo = np.abs((total - sums) / (total_n - counts)) ** 2
    with np.errstate(divide="ignore"):
        est = np.where(loo > 0, 1.0 / loo - 1.0, np.inf)
    if not np.all(np.isfinite(est)):
        return math.inf
    return float(math.sqrt((g - 1) / g * np.sum((est - est.mean()) ** 2)))


def ensemble_stats(errors, failed_count: int = 0) -> EnsembleStats:
    """Summary statistics of wrapped phase errors (failed trajectories excluded)."""
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        return EnsembleStats(0, math.inf, math.nan, math.nan, math.nan, int(failed_count), True)
    hv = holevo_variance(e)
    se = jackknife_holevo(e) if math.isfinite(hv) else math.nan
    return EnsembleStats(int(e.size), hv, wrapped_variance(e), float(np.mean(e)), se,
                         int(failed_count), not math.isfinite(hv))


# --- zeta diagnostics -----------------------------------------------------------


def excess_from_modulus(rms_dzeta: float, n0: float) -> float:
    """Relative excess variance (rms_dzeta)^2 (1 + 4 n0) from a zeta-modulus error."""
    if rms_dzeta < 0 or n0 < 0:
        raise DomainError("inputs must be non-negative")
    return rms_dzeta * rms_dzeta * (1.0 + 4.0 * n0)


def excess_from_phase(rms_arg_zeta: float, n0: float) -> float:
    """Absolute excess variance (rms arg zeta)^2 / (16 n0)."""
    if not n0 > 0:
        raise DomainError(f"n0 must be positive, got {n0!r}")
    return rms_arg_zeta * rms_arg_zeta / (16.0 * n0)


def excess_from_phase_ratio(rms_arg_zeta: float, n0: float, nbar: float) -> float:
    """:func:`excess_from_phase` relative to the leading intrinsic term n0 / (4 nbar^2)."""
    return excess_from_phase(rms_arg_zeta, n0) / (n0 / (4.0 * nbar * nbar))


@dataclass(frozen=True)
class ZetaScatter:
    """Per-trajectory (nbar_est, Re zeta, arg deviation) with rms summaries.

    The arg deviation is the angle of ``-zeta``: optimal states have zeta on
    the negative real axis, so this is the distance from optimum orientation.
    """

    points: np.ndarray
    rms_dev_modulus: float
    rms_dev_phase: float
    skipped: int = 0

    @property
    def fraction_below_optimum(self) -> float:
        """Share of points with Re zeta below the optimal-state curve."""
        if len(self.points) == 0:
            return math.nan
        ref = np.array([optimal_zeta(n) for n in self.points[:, 0]])
        return float(np.mean(self.points[:, 1] < ref))


def _decomposition(outcome):
    z = getattr(outcome, "zeta_diag", None)
    if z is not None:
        return z
    rec = outcome.final_record
    return zeta_from_record(rec.A_v, rec.B_v)


def zeta_scatter(outcomes: Iterable) -> ZetaScatter:
    pts = []
    dmod = []
    skipped = 0
    for o in outcomes:
        try:
            z = _decomposition(o)
        except (DomainError, ValueError):
            skipped += 1
            continue
        if not (z.nbar_est > 0 and math.isfinite(z.nbar_est) and optimal_n0(z.nbar_est) > 0):
            skipped += 1
            continue
        dev = math.atan2(-z.zeta.imag, -z.zeta.real)
        pts.append((z.nbar_est, z.zeta.real, dev))
        dmod.append(abs(z.zeta) - abs(optimal_zeta(z.nbar_est)))
    points = np.array(pts, dtype=float).reshape(-1, 3)
    if not pts:
        return ZetaScatter(points, math.nan, math.nan, skipped)
    rms_m = math.sqrt(float(np.mean(np.square(dmod))))
    rms_p = math.sqrt(float(np.mean(points[:, 2] ** 2)))
    return ZetaScatter(points, rms_m, rms_p, skipped)


# --- power laws -------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    """Least-squares fit of V = prefactor * nbar^(-exponent) in log-log space."""

    exponent: float
    prefactor: float
    exponent_stderr: float
    r_squared: float


def power_law_fit(points: Sequence[tuple[float, float]]) -> FitResult:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise ValueError("need at least three (nbar, variance) points")
    if np.any(~np.isfinite(pts)) or np.any(pts <= 0):
        raise DomainError("power-law fit needs finite positive values")
    res = _sps.linregress(np.log(pts[:, 0]), np.log(pts[:, 1]))
    return FitResult(-float(res.slope), float(math.exp(res.intercept)), float(res.stderr),
                     float(res.rvalue ** 2))
