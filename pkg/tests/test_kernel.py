import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kernelsvm.dataset import Dataset
from kernelsvm.kernel import (
    KernelRows,
    KernelSpec,
    kernel_block,
    kernel_row,
    rbf,
    rbf_block,
    track_kernel,
)


def scalar_loop(A, B, gamma):
    return np.array([[rbf(a, b, gamma) for b in B] for a in A])


def test_spec_validation():
    assert KernelSpec(0.5).gamma == 0.5
    for bad in (0, -1, float("inf"), float("nan")):
        with pytest.raises(ValueError):
            KernelSpec(bad)
    with pytest.raises(ValueError):
        KernelSpec(1.0, family="poly")


def test_rbf_examples():
    assert rbf([1.0, 0.0], [0.0, 0.0], 0.5) == pytest.approx(0.60653066, abs=1e-8)
    assert rbf([1.0, 0.0], [0.0, 0.0], 0.5) == math.exp(-0.5)
    x = [0.3, -2.0, 7.5]
    for g in (1e-3, 1.0, 1e3):
        assert rbf(x, x, g) == 1.0


def test_rbf_monotone_in_gamma():
    x, z = [1.0, 2.0], [0.0, 0.5]
    vals = [rbf(x, z, g) for g in (0.01, 0.1, 1.0, 10.0, 100.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-90


def test_rbf_matches_python_accumulation():
    rng = np.random.default_rng(0)
    for _ in range(50):
        x, z = rng.normal(size=(2, 17))
        acc = 0.0
        for a, b in zip(x, z):
            acc += (a - b) * (a - b)
        assert rbf(x, z, 0.3) == math.exp(-0.3 * acc)


def test_rbf_dimension_mismatch():
    with pytest.raises(ValueError):
        rbf([1.0, 2.0], [1.0], 1.0)
    with pytest.raises(ValueError):
        rbf_block(np.ones((2, 3)), np.ones((2, 2)), 1.0)


def test_block_hand_picked_points():
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
    ds = Dataset(X, np.array([0, 1, 0]))
    blk = kernel_block(ds, [0, 1, 2], [0, 1, 2], KernelSpec(0.5))
    expected = np.array([[rbf(a, b, 0.5) for b in X] for a in X])
    assert np.array_equal(blk.values, expected)
    assert blk.values[0, 2] == math.exp(-2.0)
    assert np.array_equal(np.diag(blk.values), np.ones(3))


def test_block_one_by_one_and_row():
    rng = np.random.default_rng(1)
    ds = Dataset(rng.normal(size=(10, 4)), np.zeros(10, dtype=int))
    spec = KernelSpec(0.7)
    assert kernel_block(ds, [3], [5], spec).values[0, 0] == rbf(ds.X[3], ds.X[5], 0.7)
    assert kernel_row(ds, 4, [4], spec).tolist() == [1.0]
    assert kernel_row(ds, 4, [], spec).shape == (0,)
    full = kernel_block(ds, range(10), range(10), spec).values
    assert np.array_equal(kernel_row(ds, 6, range(10), spec), full[6])


def test_block_out_of_range():
    ds = Dataset(np.zeros((3, 2)), np.zeros(3, dtype=int))
    with pytest.raises(ValueError):
        kernel_block(ds, [0, 3], [0], KernelSpec(1.0))
    with pytest.raises(ValueError):
        kernel_row(ds, -1, [0], KernelSpec(1.0))


def test_kernel_rows_match_block():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(300, 7))
    rows = KernelRows(X, KernelSpec(0.2))
    idx = [5, 0, 299]
    cols = rng.choice(300, 120, replace=False)
    assert np.array_equal(rows.rows(idx), rbf_block(X[idx], X, 0.2))
    assert np.array_equal(rows.block(idx, cols), rbf_block(X[idx], X[cols], 0.2))
    assert np.array_equal(rows.against(X[:2]), rbf_block(X[:2], X, 0.2))


def test_thread_count_determinism_large():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(700, 13))
    B = rng.normal(size=(90, 13))
    ref = rbf_block(A, B, 0.05, threads=1)
    for t in (2, 3, 4, 8):
        assert np.array_equal(rbf_block(A, B, 0.05, threads=t), ref)
    rows = KernelRows(A, KernelSpec(0.05), threads=4)
    assert np.array_equal(rows.rows(np.arange(90)), KernelRows(A, KernelSpec(0.05)).rows(np.arange(90)))


def test_track_kernel_counts():
    X = np.zeros((50, 3))
    rows = KernelRows(X, KernelSpec(1.0))
    with track_kernel() as stats:
        rows.rows([1, 2])
        rows.block([0], np.arange(10))
    assert stats.entries == 2 * 50 + 10
    assert stats.largest_block == 100
    assert stats.calls == 2


matrices = st.integers(1, 12).flatmap(
    lambda d: st.tuples(
        arrays(np.float64, st.tuples(st.integers(1, 20), st.just(d)),
               elements=st.floats(-10, 10, allow_subnormal=False)),
        arrays(np.float64, st.tuples(st.integers(1, 20), st.just(d)),
               elements=st.floats(-10, 10, allow_subnormal=False)),
    )
)
gammas = st.floats(1e-3, 10.0)


@given(matrices, gammas)
def test_block_equals_scalar_loop(AB, gamma):
    A, B = AB
    assert np.array_equal(rbf_block(A, B, gamma), scalar_loop(A, B, gamma))


@given(matrices, gammas)
def test_symmetry_exact(AB, gamma):
    A, B = AB
    assert np.array_equal(rbf_block(A, B, gamma), rbf_block(B, A, gamma).T)


@given(matrices, gammas, st.integers(2, 6))
def test_threads_bitwise(AB, gamma, threads):
    A, B = AB
    A = np.tile(A, (20, 1))  # enough rows to split
    assert np.array_equal(rbf_block(A, B, gamma, threads), rbf_block(A, B, gamma, 1))


@given(arrays(np.float64, st.tuples(st.integers(1, 50), st.integers(1, 6)),
              elements=st.floats(-5, 5, allow_subnormal=False)), gammas)
def test_psd_bounds_and_unit_diagonal(X, gamma):
    K = rbf_block(X, X, gamma)
    assert np.min(np.linalg.eigvalsh(K)) >= -1e-8
    assert np.all(K >= 0.0) and np.all(K <= 1.0)
    assert np.array_equal(np.diag(K), np.ones(len(X)))


def test_values_strictly_positive_for_moderate_distances():
    rng = np.random.default_rng(4)
    X = rng.uniform(0, 1, (40, 5))
    assert np.all(rbf_block(X, X, 1.0) > 0.0)
