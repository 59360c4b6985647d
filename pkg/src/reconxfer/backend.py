"""Numba/numpy backend selection for the hot numeric kernels.

The environment variable RECONXFER_BACKEND picks the implementation used by
reconxfer.kernels:

    auto   (default) numba if importable, otherwise pure numpy
    numba  require numba, fail loudly if missing
    numpy  force the vectorized pure-numpy path

Only deterministic numeric kernels are jitted. Anything touching random
number generation runs through numpy's Generator on every backend so that
seeded runs produce identical data regardless of this flag.
"""

import os

_choice = os.environ.get("RECONXFER_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"RECONXFER_BACKEND must be 'auto', 'numba' or 'numpy', got {_choice!r}"
    )

if _choice == "numpy":
    NUMBA_ENABLED = False
    HAVE_NUMBA = False
else:
    try:
        import numba  # noqa: F401

        HAVE_NUMBA = True
        NUMBA_ENABLED = True
    except ImportError:
        if _choice == "numba":
            raise
        HAVE_NUMBA = False
        NUMBA_ENABLED = False


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"


def njit(*args, **kwargs):
    """numba.njit when the numba backend is active, identity otherwise."""
    if NUMBA_ENABLED:
        import numba

        return numba.njit(*args, cache=True, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(fn):
        return fn

    return wrap
