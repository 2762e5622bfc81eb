"""Backend selection for the hot loops.

The compiled extension is used when it was built; otherwise the numpy
fallback is loaded.  Set ``TIERSCOPE_PURE=1`` to force the fallback.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("TIERSCOPE_PURE") != "1":
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"


def get_backend(name=None):
    """Return the kernel module for ``name`` ('cython', 'python' or None for active)."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")


def best_split(Xn, yn, order, min_leaf, backend=None):
    """Best variance-reduction split of a node.

    Returns ``(column, sorted_position, threshold, score)``; column is -1 when
    no admissible split exists.  ``order`` is the per-column stable argsort of
    ``Xn``.  Ties in score keep the lowest column, then the lowest threshold.
    """
    impl = get_backend(backend)
    Xn = np.ascontiguousarray(Xn, dtype=np.float64)
    yn = np.ascontiguousarray(yn, dtype=np.float64)
    order = np.ascontiguousarray(order, dtype=np.intp)
    col, pos, thr, score = impl.best_split(Xn, yn, order, int(min_leaf))
    return int(col), int(pos), float(thr), float(score)


def concordance_counts(rank, y, backend=None):
    """Count (concordant, tied-in-y) pairs among all i < j."""
    impl = get_backend(backend)
    rank = np.ascontiguousarray(rank, dtype=np.int64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    conc, ties = impl.concordance_counts(rank, y)
    return int(conc), int(ties)
