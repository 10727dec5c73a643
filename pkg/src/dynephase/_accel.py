"""Backend selection for the hot trajectory kernels.

``DYNEPHASE_BACKEND=numpy`` forces the vectorised pure-numpy path; the default
is numba when it imports, else numpy.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

ENV_VAR = "DYNEPHASE_BACKEND"
BACKENDS = ("numba", "numpy")


def default_backend() -> str:
    requested = os.environ.get(ENV_VAR, "").strip().lower()
    if requested and requested not in BACKENDS:
        raise ValueError(f"{ENV_VAR} must be one of {BACKENDS}, got {requested!r}")
    if requested == "numpy" or numba is None:
        return "numpy"
    return "numba"


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity otherwise."""
    if numba is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    return numba.njit(*args, **kwargs)
