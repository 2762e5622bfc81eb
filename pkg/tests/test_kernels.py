import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tierscope import kernels
from tierscope.regions import CartParams, fit_cart

try:
    kernels.get_backend("cython")
    HAVE_EXT = True
except ImportError:
    HAVE_EXT = False

needs_ext = pytest.mark.skipif(not HAVE_EXT, reason="compiled kernels not built")


@st.composite
def node_data(draw):
    n = draw(st.integers(2, 60))
    p = draw(st.integers(1, 6))
    rng = np.random.default_rng(draw(st.integers(0, 2**32)))
    X = rng.integers(0, draw(st.integers(2, 5)), size=(n, p)).astype(np.float64)
    y = np.round(rng.normal(10, 3, size=n), draw(st.integers(0, 3)))
    order = np.argsort(X, axis=0, kind="stable")
    return X, y, order, draw(st.integers(1, max(1, n // 2)))


@needs_ext
@settings(max_examples=300, deadline=None)
@given(node_data())
def test_best_split_backends_identical(case):
    X, y, order, min_leaf = case
    a = kernels.best_split(X, y, order, min_leaf, backend="python")
    b = kernels.best_split(X, y, order, min_leaf, backend="cython")
    assert a == b


@needs_ext
@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=80), st.randoms(use_true_random=False))
def test_concordance_backends_identical(y, rnd):
    rank = list(range(len(y)))
    rnd.shuffle(rank)
    rank = np.array(rank, dtype=np.int64)
    assert kernels.concordance_counts(rank, y, backend="python") == kernels.concordance_counts(
        rank, y, backend="cython"
    )


@needs_ext
def test_trees_identical_across_backends():
    rng = np.random.default_rng(5)
    X = rng.integers(0, 2, size=(300, 12)).astype(np.float64)
    y = X @ rng.uniform(0, 10, 12) + rng.normal(0, 0.5, 300)
    a = fit_cart(X, y, CartParams(min_leaf=3), backend="python")
    b = fit_cart(X, y, CartParams(min_leaf=3), backend="cython")
    assert a.to_dict() == b.to_dict()


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_active_backend_reported():
    assert kernels.BACKEND in ("cython", "python")
