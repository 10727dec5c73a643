"""Branch-free atan2 and sincos for the feedback kernels.

The platform libm calls cost 15-35 ns each and, being opaque calls, keep the
lane loops from vectorising. These use the Cephes double-precision rational
and polynomial forms with selects instead of branches, so LLVM can run them
across SIMD lanes. Accuracy is within a couple of ulp of libm. ``sincos``
falls back to ``math`` beyond the exact argument-reduction range; the
vectorisable core ``sincos_reduced`` leaves that check to the caller.
"""

import math

from ._accel import njit

_PIO2 = 1.57079632679489661923
_PIO4 = 0.78539816339744830962
_TAN_PIO8 = 0.41421356237309504880
_MOREBITS = 6.123233995736765886130e-17

_AP0, _AP1, _AP2, _AP3, _AP4 = (
    -8.750608600031904122785e-1,
    -1.615753718733365076637e1,
    -7.500855792314704667340e1,
    -1.228866684490136173410e2,
    -6.485021904942025371773e1,
)
_AQ0, _AQ1, _AQ2, _AQ3, _AQ4 = (
    2.485846490142306297962e1,
    1.650270098316988542046e2,
    4.328810604912902668951e2,
    4.853903996359136964868e2,
    1.945506571482613964425e2,
)

_S0, _S1, _S2, _S3, _S4, _S5 = (
    1.58962301576546568060e-10,
    -2.50507477628578072866e-8,
    2.75573136213857245213e-6,
    -1.98412698295895385996e-4,
    8.33333333332211858878e-3,
    -1.66666666666666307295e-1,
)
_C0, _C1, _C2, _C3, _C4, _C5 = (
    -1.13585365213876817300e-11,
    2.08757008419747316778e-9,
    -2.75573141792967388112e-7,
    2.48015872888517045348e-5,
    -1.38888888888730564116e-3,
    4.16666666666665929218e-2,
)
# pi/2 split so that n * _DP1 and n * _DP2 are exact for |n| < 2^29
_DP1 = 1.57079625129699707031
_DP2 = 7.54978941586159635335e-8
_DP3 = 5.39030285815811905290e-15
_TWO_OVER_PI = 0.63661977236758134308
LOSSLESS = 8.0e8


@njit(inline="always")
def atan2(y, x):
    """Arctangent of y/x in [-pi, pi]; atan2(0, 0) = 0."""
    ax = abs(x)
    ay = abs(y)
    swap = ay > ax
    num = min(ax, ay)
    den = max(ax, ay)
    q = num / den if den > 0.0 else 0.0
    big = q > _TAN_PIO8
    r = (q - 1.0) / (q + 1.0) if big else q
    base = _PIO4 if big else 0.0
    extra = 0.5 * _MOREBITS if big else 0.0
    z = r * r
    p = (((_AP0 * z + _AP1) * z + _AP2) * z + _AP3) * z + _AP4
    s = ((((z + _AQ0) * z + _AQ1) * z + _AQ2) * z + _AQ3) * z + _AQ4
    a = base + (r * (z * p / s) + r + extra)
    a = (_PIO2 - a) + _MOREBITS if swap else a
    a = math.pi - a if x < 0.0 else a
    return -a if y < 0.0 else a


@njit(inline="always")
def sincos_reduced(x):
    """(sin x, cos x) for |x| <= LOSSLESS."""
    n = math.floor(x * _TWO_OVER_PI + 0.5)
    r = ((x - n * _DP1) - n * _DP2) - n * _DP3
    z = r * r
    ps = r + r * z * (((((_S0 * z + _S1) * z + _S2) * z + _S3) * z + _S4) * z + _S5)
    pc = 1.0 - 0.5 * z + z * z * (((((_C0 * z + _C1) * z + _C2) * z + _C3) * z + _C4) * z + _C5)
    quad = int(n) & 3
    s = pc if quad & 1 else ps
    c = ps if quad & 1 else pc
    s = -s if quad & 2 else s
    c = -c if (quad + 1) & 2 else c
    return s, c


@njit(inline="always")
def sincos(x):
    """(sin x, cos x)."""
    if abs(x) > LOSSLESS:
        return math.sin(x), math.cos(x)
    return sincos_reduced(x)
