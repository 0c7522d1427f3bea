"""RBF kernel values, rows and dense blocks.

Squared distances are accumulated left to right over dimensions in double
precision, one entry at a time. Every entry therefore has a single fixed
evaluation order, which makes blocks bitwise independent of how the work is
split across threads and bitwise equal to :func:`rbf`.
"""
from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass

import numba
import numpy as np

__all__ = [
    "KernelSpec",
    "KernelBlock",
    "rbf",
    "rbf_block",
    "kernel_block",
    "kernel_row",
    "track_kernel",
    "KernelRows",
]

FAMILIES = ("rbf",)

# rows per thread below which splitting is not worth the overhead
_MIN_CHUNK = 64
_TILE = 128


@dataclass(frozen=True)
class KernelSpec:
    gamma: float
    family: str = "rbf"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        gamma = float(self.gamma)
        if not gamma > 0 or not math.isfinite(gamma):
            raise ValueError(f"gamma must be a positive finite number, got {self.gamma}")
        object.__setattr__(self, "gamma", gamma)

    def to_dict(self):
        return {"family": self.family, "gamma": self.gamma}


@dataclass(frozen=True)
class KernelBlock:
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray


@numba.njit(nogil=True, cache=True)
def _rbf_scalar(x, z, gamma):
    acc = 0.0
    for k in range(x.shape[0]):
        diff = x[k] - z[k]
        acc += diff * diff
    return math.exp(-gamma * acc)


@numba.njit(nogil=True, cache=True)
def _fill(AT, B, gamma, out, lo, hi):
    # out[c, r] = k(A[r], B[c]) for r in [lo, hi). AT is A transposed (d, m)
    # so the innermost loop runs over contiguous rows of A; rows are taken in
    # cache-sized tiles and four rows of B share each load of a tile.
    d = AT.shape[0]
    p = B.shape[0]
    acc = np.empty((4, _TILE))
    for t0 in range(lo, hi, _TILE):
        t1 = min(t0 + _TILE, hi)
        w = t1 - t0
        c = 0
        while c < p:
            nc = min(4, p - c)
            acc[:, :w] = 0.0
            for k in range(d):
                a = AT[k, t0:t1]
                if nc == 4:
                    b0 = B[c, k]
                    b1 = B[c + 1, k]
                    b2 = B[c + 2, k]
                    b3 = B[c + 3, k]
                    a0 = acc[0]
                    a1 = acc[1]
                    a2 = acc[2]
                    a3 = acc[3]
                    for r in range(w):
                        x = a[r]
                        d0 = x - b0
                        d1 = x - b1
                        d2 = x - b2
                        d3 = x - b3
                        a0[r] += d0 * d0
                        a1[r] += d1 * d1
                        a2[r] += d2 * d2
                        a3[r] += d3 * d3
                else:
                    for q in range(nc):
                        bk = B[c + q, k]
                        aq = acc[q]
                        for r in range(w):
                            diff = a[r] - bk
                            aq[r] += diff * diff
            for q in range(nc):
                for r in range(w):
                    out[c + q, t0 + r] = math.exp(-gamma * acc[q, r])
            c += nc


class _KernelStats:
    """Counts kernel entries produced while a tracker is active."""

    def __init__(self):
        self._lock = threading.Lock()
        self.active = 0
        self.entries = 0
        self.largest_block = 0
        self.calls = 0

    def record(self, m, p):
        if not self.active:
            return
        with self._lock:
            self.entries += m * p
            self.largest_block = max(self.largest_block, m * p)
            self.calls += 1


_stats = _KernelStats()


@contextmanager
def track_kernel():
    """Record kernel work done inside the block.

    Yields an object with ``entries`` (total entries computed),
    ``largest_block`` (entries in the biggest single block) and ``calls``.
    """
    with _stats._lock:
        _stats.active += 1
        _stats.entries = _stats.largest_block = _stats.calls = 0
    try:
        yield _stats
    finally:
        with _stats._lock:
            _stats.active -= 1


def _as_matrix(a, name):
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise ValueError(f"{name} must be a vector or a 2-d array")
    return a


def rbf(x, z, gamma: float) -> float:
    """k(x, z) = exp(-gamma * ||x - z||^2)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    z = np.ascontiguousarray(z, dtype=np.float64)
    if x.ndim != 1 or x.shape != z.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {z.shape}")
    return _rbf_scalar(x, z, float(gamma))


def rbf_block(A, B, gamma: float, threads: int = 1) -> np.ndarray:
    """Dense kernel matrix between the rows of ``A`` and the rows of ``B``.

    Work is split over ``threads`` workers by rows of the larger operand.
    """
    A = _as_matrix(A, "A")
    B = _as_matrix(B, "B")
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    if threads < 1:
        raise ValueError("threads must be >= 1")
    gamma = float(gamma)
    _stats.record(A.shape[0], B.shape[0])
    # the larger operand goes in the vectorised (inner) position
    transpose = A.shape[0] > B.shape[0]
    if transpose:
        A, B = B, A
    out = np.empty((A.shape[0], B.shape[0]))
    if out.size:
        _run(np.ascontiguousarray(B.T), A, gamma, out, threads)
    return np.ascontiguousarray(out.T) if transpose else out


class KernelRows:
    """Kernel rows against a fixed training matrix.

    Keeps a transposed copy of the training data so that each request for
    rows ``k(X[idx], X)`` avoids re-laying out the data. Values are identical
    to :func:`rbf_block`.
    """

    def __init__(self, X, spec: KernelSpec, threads: int = 1):
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.XT = np.ascontiguousarray(self.X.T)
        self.spec = spec
        self.threads = threads

    @property
    def n(self):
        return self.X.shape[0]

    def rows(self, idx) -> np.ndarray:
        """Return the (len(idx), n) block of kernel rows."""
        idx = _indices(idx, self.n, "row")
        return self.against(self.X[idx])

    def block(self, idx, cols) -> np.ndarray:
        """Return k(X[idx], X[cols]) with shape (len(idx), len(cols))."""
        idx = _indices(idx, self.n, "row")
        cols = _indices(cols, self.n, "column")
        _stats.record(idx.size, cols.size)
        out = np.empty((idx.size, cols.size))
        if out.size:
            _run(np.take(self.XT, cols, axis=1), self.X[idx],
                 self.spec.gamma, out, self.threads)
        return out

    def against(self, Z) -> np.ndarray:
        """Return k(Z, X) with shape (len(Z), n)."""
        Z = _as_matrix(Z, "Z")
        if Z.shape[1] != self.X.shape[1]:
            raise ValueError(
                f"dimension mismatch: {Z.shape[1]} vs {self.X.shape[1]}"
            )
        m = Z.shape[0]
        _stats.record(m, self.n)
        out = np.empty((m, self.n))
        if out.size:
            _run(self.XT, Z, self.spec.gamma, out, self.threads)
        return out


def _run(AT, B, gamma, out, threads):
    m = AT.shape[1]
    n_chunks = max(1, min(threads, m // _MIN_CHUNK))
    if n_chunks == 1:
        _fill(AT, B, gamma, out, 0, m)
        return
    bounds = np.linspace(0, m, n_chunks + 1).astype(int)
    with ThreadPoolExecutor(max_workers=n_chunks) as pool:
        futures = [
            pool.submit(_fill, AT, B, gamma, out, lo, hi)
            for lo, hi in zip(bounds[:-1], bounds[1:])
        ]
        for f in futures:
            f.result()


def _data(ds):
    return ds.X if hasattr(ds, "X") else np.asarray(ds, dtype=np.float64)


def _indices(idx, n, name):
    idx = np.asarray(idx, dtype=np.intp).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ValueError(f"{name} index out of range for {n} samples")
    return idx


def kernel_block(ds, rows, cols, spec: KernelSpec, threads: int = 1) -> KernelBlock:
    """Kernel block between rows ``rows`` and ``cols`` of a dataset (or array)."""
    X = _data(ds)
    rows = _indices(rows, X.shape[0], "row")
    cols = _indices(cols, X.shape[0], "column")
    values = rbf_block(X[rows], X[cols], spec.gamma, threads)
    return KernelBlock(rows, cols, values)


def kernel_row(ds, row: int, cols, spec: KernelSpec, threads: int = 1) -> np.ndarray:
    return kernel_block(ds, [row], cols, spec, threads).values[0]
