"""Backend dispatch for the hot kernels.

NCPROB_BACKEND=auto|numba|numpy picks the implementation: `numba` fails
loudly if numba is missing, `numpy` forces the vectorized path, and `auto`
(the default) uses the compiled parallel kernels only when they can actually
win — they chunk work across threads, so on a single-core budget the
BLAS-batched numpy path is faster and is chosen instead.  Resolution happens
on first use and is then pinned for the process.
"""

import os

from . import numpy_impl

_IMPL = None
_NAME = None


def _resolve():
    global _IMPL, _NAME
    if _IMPL is not None:
        return
    choice = os.environ.get("NCPROB_BACKEND", "auto").strip().lower() or "auto"
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(
            f"NCPROB_BACKEND must be auto, numba or numpy (got {choice!r})")
    if choice == "auto" and (os.cpu_count() or 1) < 2:
        choice = "numpy"
    if choice in ("auto", "numba"):
        try:
            from . import numba_impl
            _IMPL, _NAME = numba_impl, "numba"
            return
        except ImportError:
            if choice == "numba":
                raise
    _IMPL, _NAME = numpy_impl, "numpy"


def active_backend() -> str:
    _resolve()
    return _NAME


def weighted_kpi_sum(first, last, sizes, weights, cums, d):
    _resolve()
    return _IMPL.weighted_kpi_sum(first, last, sizes, weights, cums, d)


def realized_moment_maps(A, state_kind, state_vec, N, d, k):
    _resolve()
    return _IMPL.realized_moment_maps(A, state_kind, state_vec, N, d, k)
