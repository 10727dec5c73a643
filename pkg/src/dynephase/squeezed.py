"""Squeezed-state algebra, the record-to-state mapping and closed-form limits.

All functions are pure; states are small immutable value objects.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

# Offset in the asymptotic minimum phase variance (ln n + DELTA) / (4 n^2).
DELTA = 2.43

# |B| closer than this to 1 is treated as infinite squeezing and rejected.
B_GUARD = 1e-12


class DomainError(ValueError):
    """Input outside the domain of a formula."""


class UndefinedPhaseError(DomainError):
    """The amplitude is zero, so its phase (and hence zeta) is undefined."""


@dataclass(frozen=True)
class SqueezedState:
    """Gaussian pure state |alpha, xi>."""

    alpha: complex
    xi: complex = 0j

    def __post_init__(self):
        if not (cmath.isfinite(self.alpha) and cmath.isfinite(self.xi)):
            raise DomainError(f"non-finite state parameters {self.alpha!r}, {self.xi!r}")

    @property
    def zeta(self) -> complex:
        """Squeeze parameter with the amplitude phase scaled out, xi * conj(alpha) / alpha."""
        if self.alpha == 0:
            raise UndefinedPhaseError("zeta undefined for alpha = 0")
        return self.xi * self.alpha.conjugate() / self.alpha

    def rotated(self, phase: float) -> "SqueezedState":
        """The same state displaced in phase by ``phase`` (zeta is unchanged)."""
        return SqueezedState(self.alpha * cmath.exp(1j * phase), self.xi * cmath.exp(2j * phase))


@dataclass(frozen=True)
class LinearFormParams:
    """State written as the eigenvalue pair of (a - b_lin a^dagger - a_lin)."""

    a_lin: complex
    b_lin: complex

    def __post_init__(self):
        if not abs(self.b_lin) < 1.0:
            raise DomainError(f"|b_lin| must be < 1, got {abs(self.b_lin)!r}")


@dataclass(frozen=True)
class ZetaDecomposition:
    nbar_est: float
    zeta: complex
    n0: float


def _require_positive(name: str, value: float) -> None:
    if not value > 0 or not math.isfinite(value):
        raise DomainError(f"{name} must be positive and finite, got {value!r}")


def mean_photon(state: SqueezedState) -> float:
    return abs(state.alpha) ** 2 + math.sinh(abs(state.xi)) ** 2


def optimal_n0(nbar: float) -> float:
    """Asymptotically optimal ``n0 = nbar exp(2 zeta)`` for a phase-squeezed state.

    Only meaningful for large ``nbar``; for ``nbar`` of order one the value is
    returned unchanged but is no longer a minimiser.
    """
    _require_positive("nbar", nbar)
    return math.log(4.0 * nbar) - 0.25 * math.log(2.0 * math.pi)


def intrinsic_phase_variance(nbar: float, n0: float) -> float:
    """Phase variance of a squeezed state with mean photon number ``nbar``."""
    _require_positive("nbar", nbar)
    _require_positive("n0", n0)
    return (n0 + 1.0) / (4.0 * nbar**2) + 2.0 * math.erfc(math.sqrt(2.0 * n0))


def theoretical_limit(nbar: float) -> float:
    """Minimum introduced phase variance, (ln nbar + DELTA) / (4 nbar^2)."""
    _require_positive("nbar", nbar)
    return (math.log(nbar) + DELTA) / (4.0 * nbar**2)


def markII_introduced(nbar: float) -> float:
    _require_positive("nbar", nbar)
    return 0.125 * nbar**-1.5


def heterodyne_introduced(nbar: float) -> float:
    _require_positive("nbar", nbar)
    return 0.25 / nbar


def efficiency_floor(eta: float, nbar: float) -> float:
    """Introduced-variance floor for detector efficiency ``eta``."""
    if not 0.0 < eta <= 1.0:
        raise DomainError(f"eta must lie in (0, 1], got {eta!r}")
    _require_positive("nbar", nbar)
    return (1.0 - eta) / (4.0 * eta * nbar)


def efficiency_crossover(eta: float, lo: float = 1.0, hi: float = 1e12) -> float:
    """Photon number above which the mark II introduced variance drops below
    :func:`efficiency_floor`, located by bisection in log nbar."""
    from scipy.optimize import bisect

    if not 0.0 < eta < 1.0:
        raise DomainError(f"crossover needs eta in (0, 1), got {eta!r}")

    def gap(log_n):
        n = math.exp(log_n)
        return math.log(markII_introduced(n)) - math.log(efficiency_floor(eta, n))

    a, b = math.log(lo), math.log(hi)
    if gap(a) * gap(b) > 0:
        raise DomainError(f"no crossover in [{lo:g}, {hi:g}] for eta = {eta!r}")
    return math.exp(bisect(gap, a, b, xtol=1e-12))


def optimal_zeta(nbar: float) -> float:
    """Real, non-positive zeta of the minimum-phase-variance state at ``nbar``."""
    return min(0.0, 0.5 * math.log(optimal_n0(nbar) / nbar))


def make_optimal_squeezed(nbar: float) -> SqueezedState:
    """Phase-squeezed state with real positive amplitude and total mean photon number ``nbar``.

    ``n0`` depends only on the target ``nbar``, so the self-consistency reduces to
    choosing ``zeta = ln(n0 / nbar) / 2`` and giving the coherent part the photons
    left over after squeezing.
    """
    _require_positive("nbar", nbar)
    zeta = optimal_zeta(nbar)
    coherent = nbar - math.sinh(zeta) ** 2
    if coherent <= 0.0:
        raise DomainError(f"nbar = {nbar!r} too small for an optimal squeezed state")
    return SqueezedState(complex(math.sqrt(coherent), 0.0), complex(zeta, 0.0))


def state_intrinsic_variance(state: SqueezedState) -> float:
    """Intrinsic phase variance of ``state`` using its own ``n0 = nbar exp(2 Re zeta)``."""
    nbar = mean_photon(state)
    return intrinsic_phase_variance(nbar, nbar * math.exp(2.0 * state.zeta.real))


def to_linear_form(state: SqueezedState) -> LinearFormParams:
    r = abs(state.xi)
    if r == 0.0:
        return LinearFormParams(state.alpha, 0j)
    b = -(state.xi / r) * math.tanh(r)
    if abs(b) > 1.0 - B_GUARD:
        raise DomainError(f"squeezing |xi| = {r!r} too large to represent")
    return LinearFormParams(state.alpha - b * state.alpha.conjugate(), b)


def _alpha_xi(a: complex, b: complex) -> tuple[complex, complex]:
    mod_b = abs(b)
    if mod_b > 1.0 - B_GUARD:
        raise DomainError(f"|B| must be < 1, got {mod_b!r}")
    alpha = (a + b * a.conjugate()) / (1.0 - mod_b**2)
    xi = 0j if mod_b == 0.0 else -b * math.atanh(mod_b) / mod_b
    return alpha, xi


def from_linear_form(params: LinearFormParams) -> SqueezedState:
    alpha, xi = _alpha_xi(complex(params.a_lin), complex(params.b_lin))
    return SqueezedState(alpha, xi)


def zeta_from_record(A: complex, B: complex) -> ZetaDecomposition:
    """Mean photon number and zeta of the squeezed state selected by a final record (A, B)."""
    alpha, xi = _alpha_xi(complex(A), complex(B))
    if alpha == 0:
        raise UndefinedPhaseError("record maps to alpha = 0")
    zeta = xi * alpha.conjugate() / alpha
    nbar = abs(alpha) ** 2 + math.sinh(abs(xi)) ** 2
    return ZetaDecomposition(nbar, zeta, nbar * math.exp(2.0 * zeta.real))
