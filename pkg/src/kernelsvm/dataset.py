"""Labeled datasets: LibSVM text I/O, [0, 1] feature scaling, subsampling and
binary (+1/-1) views.

Features are stored densely once parsed; the sparse text form is only a wire
format.
"""
from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .exceptions import ParseError

__all__ = [
    "Sample",
    "Scaling",
    "Dataset",
    "BinaryView",
    "parse_libsvm",
    "load_libsvm",
    "dump_libsvm",
    "fit_scale",
    "apply_scale",
    "subsample",
    "binary_view",
]


class Sample(NamedTuple):
    features: np.ndarray
    label: int


@dataclass(frozen=True)
class Scaling:
    """Per-dimension (min, max) pairs taken from a training set."""

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        mins = _readonly(np.asarray(self.mins, dtype=np.float64))
        maxs = _readonly(np.asarray(self.maxs, dtype=np.float64))
        if mins.shape != maxs.shape or mins.ndim != 1:
            raise ValueError("mins and maxs must be 1-d arrays of equal length")
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)

    @property
    def d(self) -> int:
        return self.mins.shape[0]

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.d:
            raise ValueError(
                f"data has {X.shape[-1]} features, scaling was fit on {self.d}"
            )
        span = self.maxs - self.mins
        constant = span == 0
        out = (X - self.mins) / np.where(constant, 1.0, span)
        out[..., constant] = 0.0
        return out

    @classmethod
    def fit(cls, X: np.ndarray) -> "Scaling":
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("cannot fit scaling on an empty dataset")
        return cls(X.min(axis=0), X.max(axis=0))


@dataclass(frozen=True)
class Dataset:
    """Immutable dense dataset.

    ``X`` has shape (n, d); ``labels`` holds arbitrary integer class ids.
    """

    X: np.ndarray
    labels: np.ndarray
    scaling: Scaling | None = None
    name: str = ""
    class_ids: tuple = field(init=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        labels = np.asarray(self.labels)
        if X.ndim != 2:
            raise ValueError("X must be 2-d")
        if labels.shape != (X.shape[0],):
            raise ValueError("labels must have one entry per row of X")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            as_int = labels.astype(np.int64)
            if not np.array_equal(as_int, labels):
                raise ValueError("labels must be integers")
            labels = as_int
        labels = labels.astype(np.int64)
        object.__setattr__(self, "X", _readonly(X))
        object.__setattr__(self, "labels", _readonly(labels))
        object.__setattr__(
            self, "class_ids", tuple(int(c) for c in np.unique(labels))
        )

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def samples(self) -> list[Sample]:
        return [Sample(x, int(c)) for x, c in zip(self.X, self.labels)]

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.intp)
        return Dataset(self.X[rows], self.labels[rows], self.scaling, self.name)

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            np.array_equal(self.X, other.X)
            and np.array_equal(self.labels, other.labels)
            and self.scaling == other.scaling
        )

    __hash__ = None


@dataclass(frozen=True)
class BinaryView:
    """Rows of a dataset restricted to two classes with targets in {-1, +1}."""

    X: np.ndarray
    y: np.ndarray
    rows: np.ndarray | None = None
    positive_class: int = 1
    negative_class: int = -1

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise ValueError("X must be (n, d) and y must have length n")
        if not np.all((y == 1.0) | (y == -1.0)):
            raise ValueError("binary targets must be -1 or +1")
        object.__setattr__(self, "X", _readonly(X))
        object.__setattr__(self, "y", _readonly(y))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def check_two_classes(self):
        if self.n == 0:
            raise ValueError("binary view is empty")
        if np.all(self.y == self.y[0]):
            raise ValueError("binary view contains a single class")


def _readonly(a: np.ndarray) -> np.ndarray:
    if a.flags.writeable:
        a = a.copy()
        a.flags.writeable = False
    return a


def _parse_label(token: str, lineno: int) -> int:
    try:
        return int(token)
    except ValueError:
        pass
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"bad label {token!r}", lineno) from None
    if not value.is_integer():
        raise ParseError(f"label {token!r} is not an integer", lineno)
    return int(value)


def parse_libsvm(stream: Iterable[str] | str, n_features: int | None = None,
                 name: str = "") -> Dataset:
    """Parse LibSVM text ("label idx:val ...", 1-based increasing indices).

    ``stream`` is an iterable of lines or a whole string. Lines starting with
    '#' and blank lines are skipped. ``n_features`` overrides the inferred
    dimensionality (maximum index seen); it must not be smaller.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    labels: list[int] = []
    rows: list[tuple[list[int], list[float]]] = []
    max_index = 0
    for lineno, line in enumerate(stream, start=1):
        if line.startswith("#"):
            continue
        tokens = line.split()
        if not tokens:
            continue
        labels.append(_parse_label(tokens[0], lineno))
        idx: list[int] = []
        vals: list[float] = []
        last = 0
        for tok in tokens[1:]:
            key, sep, val = tok.partition(":")
            if not sep:
                raise ParseError(f"malformed token {tok!r}", lineno)
            try:
                j = int(key)
                v = float(val)
            except ValueError:
                raise ParseError(f"malformed token {tok!r}", lineno) from None
            if j < 1:
                raise ParseError(f"feature index {j} < 1", lineno)
            if j <= last:
                raise ParseError(
                    f"feature indices not strictly increasing at {tok!r}", lineno
                )
            last = j
            idx.append(j - 1)
            vals.append(v)
        max_index = max(max_index, last)
        rows.append((idx, vals))
    if not rows:
        raise ParseError("no samples in input")
    d = max_index
    if n_features is not None:
        if n_features < max_index:
            raise ParseError(
                f"feature index {max_index} exceeds n_features={n_features}"
            )
        d = n_features
    X = np.zeros((len(rows), d), dtype=np.float64)
    for i, (idx, vals) in enumerate(rows):
        X[i, idx] = vals
    return Dataset(X, np.asarray(labels, dtype=np.int64), name=name)


def load_libsvm(path: str | os.PathLike, n_features: int | None = None) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        return parse_libsvm(fh, n_features=n_features,
                            name=os.path.basename(os.fspath(path)))


def dump_libsvm(ds: Dataset, stream=None) -> str | None:
    """Write ``ds`` in LibSVM format (zeros omitted, shortest round-trip floats).

    Returns the text if ``stream`` is None.
    """
    out = io.StringIO() if stream is None else stream
    for x, label in zip(ds.X, ds.labels):
        parts = [str(int(label))]
        for j in np.flatnonzero(x):
            parts.append(f"{j + 1}:{float(x[j])!r}")
        out.write(" ".join(parts) + "\n")
    return out.getvalue() if stream is None else None


def fit_scale(train: Dataset) -> Dataset:
    """Return ``train`` mapped to [0, 1] per feature, carrying its scaling."""
    scaling = Scaling.fit(train.X)
    return apply_scale(train, scaling)


def apply_scale(ds: Dataset, scaling: Scaling) -> Dataset:
    """Apply training-set scaling. Values outside the training range are kept."""
    if scaling is None:
        raise ValueError("apply_scale requires scaling from fit_scale")
    return Dataset(scaling.transform(ds.X), ds.labels, scaling, ds.name)


def subsample(ds: Dataset, m: int, seed) -> Dataset:
    """Pick ``m`` rows uniformly without replacement, keeping their order."""
    if not 0 < m <= ds.n:
        raise ValueError(f"subsample size must be in (0, {ds.n}], got {m}")
    rng = np.random.default_rng(seed)
    rows = np.sort(rng.choice(ds.n, size=m, replace=False))
    return ds.take(rows)


def binary_view(ds: Dataset, positive_class: int, negative_class: int) -> BinaryView:
    for c in (positive_class, negative_class):
        if c not in ds.class_ids:
            raise ValueError(f"class {c} not present in dataset")
    if positive_class == negative_class:
        raise ValueError("positive and negative class must differ")
    rows = np.flatnonzero(
        (ds.labels == positive_class) | (ds.labels == negative_class)
    )
    y = np.where(ds.labels[rows] == positive_class, 1.0, -1.0)
    return BinaryView(ds.X[rows], y, rows, positive_class, negative_class)
