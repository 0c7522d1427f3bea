"""scikit-learn compatible wrappers around the solvers.

Labels may be any hashable values; they are encoded as 0..k-1 and more than
two classes are handled one-versus-one.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .dataset import Dataset, Scaling
from .kernel import KernelSpec
from .metrics import ovo_decisions, ovo_predict, ovo_train
from .smo import SmoConfig
from .spsvm import SpSvmConfig

__all__ = ["UnitScaler", "SMOClassifier", "SparsePrimalSVC", "PrimalNewtonSVC"]


class UnitScaler(TransformerMixin, BaseEstimator):
    """Map each feature to [0, 1] using the minima and maxima seen in ``fit``.

    Constant features map to 0. Test values outside the training range are
    not clipped.
    """

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.scaling_ = Scaling.fit(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "scaling_")
        X = check_array(X, dtype=np.float64)
        return self.scaling_.transform(X)


class _KernelSVC(ClassifierMixin, BaseEstimator):
    _solver = ""

    def _config(self):
        raise NotImplementedError

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        check_classification_targets(y)
        self.classes_, codes = np.unique(y, return_inverse=True)
        if self.classes_.size < 2:
            raise ValueError("need samples of at least two classes")
        self.n_features_in_ = X.shape[1]
        spec = KernelSpec(self.gamma)
        self.ovo_ = ovo_train(Dataset(X, codes), self._solver, spec, self._config())
        self.train_seconds_ = self.ovo_.train_seconds
        return self

    def decision_function(self, X):
        """Binary: one score per row, positive for ``classes_[1]``.

        Multiclass: one column per class pair in ``ovo_.pairs`` order, positive
        for the pair's first class.
        """
        check_is_fitted(self, "ovo_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        D = ovo_decisions(self.ovo_, X, getattr(self, "threads", 1))
        # the binary pair has classes_[0] as its positive class
        return -D[:, 0] if self.classes_.size == 2 else D

    def predict(self, X):
        check_is_fitted(self, "ovo_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        codes = ovo_predict(self.ovo_, X, getattr(self, "threads", 1))
        return self.classes_[np.asarray(codes, dtype=np.intp)]


class SMOClassifier(_KernelSVC):
    """RBF SVM trained on the dual with SMO."""

    _solver = "smo"

    def __init__(self, C=1.0, gamma=1.0, tol=1e-3, max_iter=10_000_000,
                 cache_mb=512.0, threads=1):
        self.C = C
        self.gamma = gamma
        self.tol = tol
        self.max_iter = max_iter
        self.cache_mb = cache_mb
        self.threads = threads

    def _config(self):
        return SmoConfig(C=self.C, tol=self.tol, max_iter=self.max_iter,
                         cache_mb=self.cache_mb, threads=self.threads)


class SparsePrimalSVC(_KernelSVC):
    """RBF SVM with a greedily grown basis, trained in the primal."""

    _solver = "spsvm"

    def __init__(self, C=1.0, gamma=1.0, epsilon=5e-6, candidate_size=59,
                 batch_size=50, max_basis=None, newton_tol=1e-5,
                 newton_max_iter=50, seed=0, threads=1):
        self.C = C
        self.gamma = gamma
        self.epsilon = epsilon
        self.candidate_size = candidate_size
        self.batch_size = batch_size
        self.max_basis = max_basis
        self.newton_tol = newton_tol
        self.newton_max_iter = newton_max_iter
        self.seed = seed
        self.threads = threads

    def _config(self):
        return SpSvmConfig(
            C=self.C, epsilon=self.epsilon, candidate_size=self.candidate_size,
            batch_size=self.batch_size, max_basis=self.max_basis,
            newton_tol=self.newton_tol, newton_max_iter=self.newton_max_iter,
            seed=self.seed, threads=self.threads,
        )


class PrimalNewtonSVC(_KernelSVC):
    """RBF SVM with squared hinge loss, Newton on the full kernel matrix."""

    _solver = "newton"

    def __init__(self, C=1.0, gamma=1.0, newton_tol=1e-5, newton_max_iter=50, threads=1):
        self.C = C
        self.gamma = gamma
        self.newton_tol = newton_tol
        self.newton_max_iter = newton_max_iter
        self.threads = threads

    def _config(self):
        return SpSvmConfig(C=self.C, newton_tol=self.newton_tol,
                           newton_max_iter=self.newton_max_iter, threads=self.threads)
