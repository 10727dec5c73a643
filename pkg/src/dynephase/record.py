from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class DyneRecord:
    """Sufficient statistics of the photocurrent up to scaled time ``v``.

    ``A_v`` accumulates the signal weighted by e^{i Phi}, ``B_v`` accumulates
    -e^{2 i Phi}; ``C_v`` is derived on demand.
    """

    A_v: complex = 0j
    B_v: complex = 0j
    v: float = 0.0

    @property
    def C_v(self) -> complex:
        return self.A_v * self.v + self.B_v * self.A_v.conjugate()
