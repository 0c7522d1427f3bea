"""Test error, (1 - AUC) and one-versus-one multiclass training and voting."""
from __future__ import annotations

import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .dataset import Dataset, binary_view
from .kernel import KernelSpec
from .solvers import model_size, train_binary

__all__ = [
    "EvalReport",
    "OvoPair",
    "OvoModel",
    "error_rate",
    "one_minus_auc",
    "ovo_train",
    "ovo_predict",
    "ovo_decisions",
]


@dataclass(frozen=True)
class EvalReport:
    error_pct: float
    n_test: int
    one_minus_auc_pct: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.error_pct <= 100.0:
            raise ValueError("error_pct must lie in [0, 100]")

    def to_dict(self):
        return {
            "error_pct": self.error_pct,
            "one_minus_auc_pct": self.one_minus_auc_pct,
            "n_test": self.n_test,
        }


def error_rate(predictions, truth) -> float:
    """Percentage of entries where ``predictions`` differs from ``truth``.

    Computed as 100 minus the accuracy percentage so the two agree exactly.
    """
    p = np.asarray(predictions).reshape(-1)
    t = np.asarray(truth).reshape(-1)
    if p.size != t.size:
        raise ValueError(f"length mismatch: {p.size} predictions, {t.size} labels")
    if p.size == 0:
        raise ValueError("error_rate needs at least one prediction")
    return 100.0 - 100.0 * np.count_nonzero(p == t) / p.size


def one_minus_auc(scores, truth) -> float:
    """100 * (1 - AUC) with AUC the Mann-Whitney statistic.

    Tied scores between a positive and a negative earn half credit. Uses
    average ranks, so the cost is O(n log n).
    """
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    t = np.asarray(truth).reshape(-1)
    if s.size != t.size:
        raise ValueError(f"length mismatch: {s.size} scores, {t.size} labels")
    pos = t > 0
    n_pos = int(np.count_nonzero(pos))
    n_neg = t.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positive and negative labels")
    ranks = rankdata(s)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    auc = u / (n_pos * n_neg)
    return 100.0 * (1.0 - auc)


@dataclass
class OvoPair:
    positive: int
    negative: int
    model: object
    seconds: float = 0.0


@dataclass
class OvoModel:
    """One binary model per unordered class pair; the lower id is positive."""

    class_ids: np.ndarray
    pairs: list = field(default_factory=list)
    solver: str = ""

    def __post_init__(self):
        k = len(self.class_ids)
        if len(self.pairs) != k * (k - 1) // 2:
            raise ValueError(f"{k} classes need {k * (k - 1) // 2} pairs, got {len(self.pairs)}")
        keys = {(p.positive, p.negative) for p in self.pairs}
        if len(keys) != len(self.pairs):
            raise ValueError("duplicate class pair")

    @property
    def train_seconds(self) -> float:
        """Summed solver time over all pairs."""
        return float(sum(p.seconds for p in self.pairs))

    @property
    def size(self) -> int:
        return sum(model_size(p.model) for p in self.pairs)

    @property
    def is_binary(self) -> bool:
        return len(self.class_ids) == 2


def _train_pair(ds, solver, spec, config, pos, neg):
    view = binary_view(ds, pos, neg)
    start = time.perf_counter()
    model = train_binary(solver, view, spec, config)
    return OvoPair(pos, neg, model, time.perf_counter() - start)


def ovo_train(ds: Dataset, solver: str, spec: KernelSpec, config,
              parallel: bool = False, max_workers: int | None = None) -> OvoModel:
    """Train k(k-1)/2 pairwise models; any pair failing fails the ensemble.

    Each pair's time covers its solver call only. With ``parallel`` the
    pairs run concurrently, each with its own solver state.
    """
    classes = [int(c) for c in ds.class_ids]
    if len(classes) < 2:
        raise ValueError("one-versus-one needs at least two classes")
    todo = list(itertools.combinations(classes, 2))
    if parallel and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            futures = [pool.submit(_train_pair, ds, solver, spec, config, p, q)
                       for p, q in todo]
            pairs = [f.result() for f in futures]
    else:
        pairs = [_train_pair(ds, solver, spec, config, p, q) for p, q in todo]
    return OvoModel(np.asarray(classes, dtype=np.int64), pairs, solver)


def ovo_decisions(model: OvoModel, X, threads: int = 1) -> np.ndarray:
    """Decision values, one column per pair, shape (n, n_pairs)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return np.column_stack([
        np.asarray(p.model.decision_function(X, threads=threads)).reshape(-1)
        for p in model.pairs
    ])


def ovo_predict(model: OvoModel, X, threads: int = 1):
    """Class id by majority vote; ties go to the lowest class id.

    A positive decision value is a vote for the pair's positive (lower) class.
    Returns an int for a single vector, an array for a 2-d batch.
    """
    single = np.asarray(X).ndim == 1
    D = ovo_decisions(model, X, threads)
    ids = list(model.class_ids)
    col = {c: i for i, c in enumerate(ids)}
    votes = np.zeros((D.shape[0], len(ids)), dtype=np.int64)
    for k, p in enumerate(model.pairs):
        win_pos = D[:, k] > 0
        votes[win_pos, col[p.positive]] += 1
        votes[~win_pos, col[p.negative]] += 1
    # class_ids is sorted, so argmax's first maximum is the lowest id
    out = model.class_ids[np.argmax(votes, axis=1)]
    return int(out[0]) if single else out
