"""SMO dual decomposition for the box-constrained SVM dual.

Maximises  -1/2 sum_ij a_i a_j y_i y_j k(x_i, x_j) + sum_i a_i
subject to 0 <= a_i <= C and sum_i a_i y_i = 0 (the bias is kept), two
variables at a time. Internally the equivalent minimisation
f(a) = 1/2 a'Qa - e'a with Q_ij = y_i y_j k(x_i, x_j) is tracked through its
gradient G = Qa - e, and the working pair is the maximal violating pair.
"""
from __future__ import annotations

import warnings
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConvergenceWarning
from .kernel import KernelRows, KernelSpec, rbf_block

__all__ = [
    "SmoConfig",
    "DualModel",
    "smo_train",
    "dual_objective",
    "dual_predict",
    "kkt_violation",
]

TAU = 1e-12


@dataclass(frozen=True)
class SmoConfig:
    C: float = 1.0
    tol: float = 1e-3
    max_iter: int = 10_000_000
    cache_mb: float = 512.0
    threads: int = 1
    # full gradient recomputation period, bounds drift of the incremental one
    refresh_every: int = 1_000_000

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass
class DualModel:
    """Trained dual solution.

    ``alpha`` covers every training point; ``support_vectors`` and
    ``dual_coef`` (alpha * y on the support) make prediction self-contained.
    """

    alpha: np.ndarray
    b: float
    support_indices: np.ndarray
    spec: KernelSpec
    C: float
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    converged: bool = True
    n_iter: int = 0
    violation: float = 0.0
    objective_trace: list = field(default_factory=list, repr=False)

    @property
    def n_support(self) -> int:
        return int(self.support_indices.shape[0])

    def decision_function(self, X, threads: int = 1) -> np.ndarray:
        return dual_predict(self, X, threads=threads)


class _RowCache:
    """LRU cache of kernel rows keyed by training index."""

    def __init__(self, rows: KernelRows, cache_mb: float):
        self._rows = rows
        self._data: OrderedDict[int, np.ndarray] = OrderedDict()
        per_row = max(rows.n * 8, 1)
        self.capacity = max(2, int(cache_mb * 2**20 // per_row))
        self.hits = 0
        self.misses = 0

    def get(self, i: int) -> np.ndarray:
        row = self._data.get(i)
        if row is not None:
            self._data.move_to_end(i)
            self.hits += 1
            return row
        self.misses += 1
        row = self._rows.rows([i])[0]
        self._data[i] = row
        if len(self._data) > self.capacity:
            self._data.popitem(last=False)
        return row


def _up_low_masks(alpha, y, C):
    pos = y > 0
    below = alpha < C
    above = alpha > 0
    up = (pos & below) | (~pos & above)
    low = (pos & above) | (~pos & below)
    return up, low


def _violation(G, alpha, y, C):
    """Return (gap, i, j) for the maximal violating pair (lowest index on ties)."""
    yG = -y * G
    up, low = _up_low_masks(alpha, y, C)
    if not up.any() or not low.any():
        return 0.0, -1, -1
    i = int(np.argmax(np.where(up, yG, -np.inf)))
    j = int(np.argmin(np.where(low, yG, np.inf)))
    return float(yG[i] - yG[j]), i, j


def _bias(G, alpha, y, C):
    yG = -y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(yG[free].mean())
    up, low = _up_low_masks(alpha, y, C)
    hi = yG[low].min() if low.any() else yG.max()
    lo = yG[up].max() if up.any() else yG.min()
    return float((hi + lo) / 2)


def _gradient(rows: KernelRows, alpha, y):
    G = -np.ones_like(alpha)
    sv = np.flatnonzero(alpha)
    for start in range(0, sv.size, 256):
        chunk = sv[start:start + 256]
        K = rows.rows(chunk)
        G += y * ((alpha[chunk] * y[chunk]) @ K)
    return G


def kkt_violation(view, spec: KernelSpec, alpha, C: float, threads: int = 1) -> float:
    """Maximal KKT violation of ``alpha`` with the gradient computed from scratch."""
    y = np.asarray(view.y, dtype=np.float64)
    G = _gradient(KernelRows(view.X, spec, threads), np.asarray(alpha, float), y)
    return _violation(G, np.asarray(alpha, float), y, C)[0]


def smo_train(view, spec: KernelSpec, cfg: SmoConfig = SmoConfig(),
              callback=None) -> DualModel:
    """Train on a binary view with SMO.

    ``callback(iteration, alpha, G)`` is invoked after every pair update when
    given; ``alpha`` and ``G`` are the live arrays and must not be modified.
    """
    view.check_two_classes()
    X = view.X
    y = np.asarray(view.y, dtype=np.float64)
    n = y.shape[0]
    C = float(cfg.C)
    rows = KernelRows(X, spec, cfg.threads)
    cache = _RowCache(rows, cfg.cache_mb)

    alpha = np.zeros(n)
    G = -np.ones(n)
    converged = False
    gap = np.inf
    it = 0
    while it < cfg.max_iter:
        gap, i, j = _violation(G, alpha, y, C)
        if gap <= cfg.tol:
            converged = True
            break
        Ki = cache.get(i)
        Kj = cache.get(j)
        yi, yj = y[i], y[j]
        ai, aj = alpha[i], alpha[j]
        # Q_ii = K_ii, Q_jj = K_jj and y_i y_j Q_ij = K_ij
        Kii, Kjj, Kij = Ki[i], Kj[j], Ki[j]
        if yi != yj:
            quad = max(Kii + Kjj - 2 * Kij, TAU)
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            quad = max(Kii + Kjj - 2 * Kij, TAU)
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > C:
                if ni > C:
                    ni, nj = C, total - C
                if nj > C:
                    nj, ni = C, total - C
            else:
                if nj < 0:
                    nj, ni = 0.0, total
                if ni < 0:
                    ni, nj = 0.0, total
        dai, daj = ni - ai, nj - aj
        alpha[i], alpha[j] = ni, nj
        # G += Q_i dai + Q_j daj, with Q_t = y_t * y * K_t
        G += y * (yi * dai * Ki + yj * daj * Kj)
        it += 1
        if it % cfg.refresh_every == 0:
            G = _gradient(rows, alpha, y)
        if callback is not None:
            callback(it, alpha, G)

    if not converged:
        warnings.warn(
            f"SMO stopped after {it} iterations with KKT violation {gap:.3g} > tol",
            ConvergenceWarning,
            stacklevel=2,
        )
    b = _bias(G, alpha, y, C)
    support = np.flatnonzero(alpha > 0)
    return DualModel(
        alpha=alpha,
        b=b,
        support_indices=support,
        spec=spec,
        C=C,
        support_vectors=np.array(X[support]),
        dual_coef=alpha[support] * y[support],
        converged=converged,
        n_iter=it,
        violation=float(gap),
    )


def dual_objective(view, spec: KernelSpec, alpha, C: float | None = None) -> float:
    """Dual objective value; ``alpha`` must lie in the box [0, C]."""
    alpha = np.asarray(alpha, dtype=np.float64)
    y = np.asarray(view.y, dtype=np.float64)
    if alpha.shape != y.shape:
        raise ValueError("alpha must have one entry per training point")
    if np.any(alpha < 0) or (C is not None and np.any(alpha > C)):
        raise ValueError("alpha is not box-feasible")
    ay = alpha * y
    K = rbf_block(view.X, view.X, spec.gamma)
    return float(-0.5 * ay @ K @ ay + alpha.sum())


def dual_predict(model: DualModel, X, threads: int = 1):
    """Decision value(s) sum_s alpha_s y_s k(x_s, x) + b.

    Returns a float for a single vector, an array for a 2-d batch.
    """
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    X2 = X[None, :] if single else X
    d = model.support_vectors.shape[1] if model.support_vectors.ndim == 2 else None
    if d is not None and X2.shape[1] != d:
        raise ValueError(f"dimension mismatch: model has {d} features, got {X2.shape[1]}")
    if model.dual_coef.size == 0:
        out = np.full(X2.shape[0], float(model.b))
    else:
        K = rbf_block(X2, model.support_vectors, model.spec.gamma, threads)
        # row-wise sum: each value is independent of the batch it came in
        out = (K * model.dual_coef).sum(axis=1) + model.b
    return float(out[0]) if single else out
