"""Sparse primal SVM with greedy basis selection and Newton reoptimisation.

The model is f(x) = sum_{j in J} beta_j k(x_j, x) + b over a basis set J of
training points, trained by minimising

    1/2 beta' K_JJ beta + C/2 sum_i max(0, 1 - y_i (beta' k_Ji + b))^2

over (beta, b). J starts empty and grows in stages: a random candidate set
is scored by a one-dimensional Newton estimate of the objective decrease, the
best candidate joins J, and after ``batch_size`` additions (beta, b) is
re-optimised with damped Newton steps. Training stops when the training
error stops moving relative to the number of vectors added, when J reaches
``max_basis`` or when every point is in J.

With J fixed to all training points the same machinery is the full primal
Newton solver (:func:`primal_newton_train`).

All heavy lifting is dense: candidate kernel rows, the |J| x n kernel block,
and the |J| x |J| Hessian products. Kernel storage stays O(|J| n).
"""
from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from threadpoolctl import threadpool_limits

from .exceptions import SolverError
from .kernel import KernelRows, KernelSpec, rbf_block

__all__ = [
    "SpSvmConfig",
    "SparsePrimalModel",
    "TraceRecord",
    "SolverTrace",
    "SparseState",
    "sparse_objective",
    "newton_reoptimize",
    "score_candidates",
    "select_and_grow",
    "spsvm_train",
    "primal_newton_train",
    "sp_predict",
]

REG_START = 1e-8
REG_DOUBLINGS = 8


@dataclass(frozen=True)
class SpSvmConfig:
    C: float = 1.0
    epsilon: float = 5e-6
    candidate_size: int = 59
    batch_size: int = 50
    max_basis: int | None = None  # None -> min(n, 2000)
    newton_tol: float = 1e-5
    newton_max_iter: int = 50
    max_halvings: int = 30
    seed: int = 0
    threads: int = 1
    # False keeps b at 0 and optimises beta alone
    fit_intercept: bool = True

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("C must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.candidate_size < 1 or self.batch_size < 1:
            raise ValueError("candidate_size and batch_size must be >= 1")
        if self.max_basis is not None and self.max_basis < self.batch_size:
            raise ValueError("max_basis must be >= batch_size")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass
class SparsePrimalModel:
    basis: np.ndarray
    basis_vectors: np.ndarray
    beta: np.ndarray
    b: float
    spec: KernelSpec
    C: float

    @property
    def n_basis(self) -> int:
        return int(self.basis.shape[0])

    def decision_function(self, X, threads: int = 1) -> np.ndarray:
        return sp_predict(self, X, threads=threads)


@dataclass
class TraceRecord:
    n_basis: int
    objective: float
    train_error: float
    seconds: float
    newton_iter: int


@dataclass
class SolverTrace:
    records: list = field(default_factory=list)
    stop_reason: str = ""

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]


class SparseState:
    """Working state: basis J, the kernel rows K[J, :], (beta, b) and outputs.

    ``o`` caches beta' k_Ji + b for every training point.
    """

    def __init__(self, view, spec: KernelSpec, C: float, threads: int = 1,
                 capacity: int = 16):
        self.X = np.asarray(view.X, dtype=np.float64)
        self.y = np.asarray(view.y, dtype=np.float64)
        self.n = self.y.shape[0]
        self.spec = spec
        self.C = float(C)
        self.rows = KernelRows(self.X, spec, threads)
        self.J: list[int] = []
        self.in_J = np.zeros(self.n, dtype=bool)
        self._K = np.empty((max(1, min(capacity, self.n)), self.n))
        self.beta = np.zeros(0)
        self.b = 0.0
        self.o = np.zeros(self.n)
        self.exhausted = False
        self.newton_iter = 0
        # objective after every accepted Newton step of the last solve
        self.newton_history: list[float] = []

    @property
    def m(self) -> int:
        return len(self.J)

    @property
    def K(self) -> np.ndarray:
        """Kernel rows of the basis against all training points, (|J|, n)."""
        return self._K[: self.m]

    @property
    def K_JJ(self) -> np.ndarray:
        return self._K[: self.m][:, self.J]

    @property
    def kernel_storage(self) -> int:
        """Number of kernel values held by the state."""
        return self._K.size

    def add(self, j: int, krow: np.ndarray, beta_j: float = 0.0):
        if self.in_J[j]:
            raise ValueError(f"index {j} already in the basis")
        if self.m == self._K.shape[0]:
            grown = np.empty((min(2 * self._K.shape[0], self.n), self.n))
            grown[: self.m] = self._K[: self.m]
            self._K = grown
        self._K[self.m] = krow
        self.J.append(int(j))
        self.in_J[j] = True
        self.beta = np.append(self.beta, beta_j)
        if beta_j:
            self.o += beta_j * krow

    def recompute_outputs(self):
        self.o = self.beta @ self.K + self.b if self.m else np.full(self.n, self.b)

    def objective(self, beta=None, o=None) -> float:
        beta = self.beta if beta is None else beta
        o = self.o if o is None else o
        slack = np.maximum(0.0, 1.0 - self.y * o)
        reg = 0.5 * beta @ (self.K_JJ @ beta) if self.m else 0.0
        return float(reg + 0.5 * self.C * slack @ slack)

    def gradient(self):
        """Gradient of the objective with respect to (beta, b)."""
        active = self.y * self.o < 1.0
        r = self.o[active] - self.y[active]
        K = self.K
        g_beta = self.K_JJ @ self.beta + self.C * (K[:, active] @ r)
        g_b = self.C * r.sum()
        return g_beta, float(g_b)

    def gradient_norm(self, grad=None) -> float:
        """Infinity norm of the gradient divided by C * n."""
        g_beta, g_b = self.gradient() if grad is None else grad
        gmax = max(np.abs(g_beta).max(initial=0.0), abs(g_b))
        return gmax / (self.C * self.n)

    def hessian(self):
        active = self.y * self.o < 1.0
        m = self.m
        KA = self.K[:, active]
        H = np.empty((m + 1, m + 1))
        H[:m, :m] = self.K_JJ + self.C * (KA @ KA.T)
        col = self.C * KA.sum(axis=1)
        H[:m, m] = col
        H[m, :m] = col
        H[m, m] = self.C * np.count_nonzero(active)
        return H

    def training_error(self) -> float:
        """Fraction of training points on the wrong side (o > 0 means +1)."""
        pred = np.where(self.o > 0, 1.0, -1.0)
        return float(np.mean(pred != self.y))

    def to_model(self) -> SparsePrimalModel:
        basis = np.asarray(self.J, dtype=np.intp)
        return SparsePrimalModel(
            basis=basis,
            basis_vectors=self.X[basis].copy(),
            beta=self.beta.copy(),
            b=float(self.b),
            spec=self.spec,
            C=self.C,
        )


def sparse_objective(state: SparseState, check: bool = False) -> float:
    """Objective of ``state``; ``check`` verifies the cached outputs first."""
    if check:
        fresh = state.beta @ state.K + state.b if state.m else np.full(state.n, state.b)
        if not np.allclose(fresh, state.o, rtol=1e-9, atol=1e-9):
            raise SolverError("cached outputs are stale")
    return state.objective()


def _blas_threads(threads: int):
    # OpenBLAS sizes its buffers for the CPUs seen at load time; asking for
    # more threads than that can crash inside LAPACK
    usable = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count()
    return threadpool_limits(limits=max(1, min(threads, usable or 1)), user_api="blas")


def _factor(H, m):
    try:
        return cho_factor(H, lower=False, check_finite=False)
    except LinAlgError:
        pass
    trace = np.trace(H[:m, :m]) if m else 1.0
    lam = REG_START * (trace / max(m, 1) if trace > 0 else 1.0)
    eye = np.eye(H.shape[0])
    for _ in range(REG_DOUBLINGS + 1):
        try:
            return cho_factor(H + lam * eye, lower=False, check_finite=False)
        except LinAlgError:
            lam *= 2
    raise SolverError("Newton system is singular even after regularisation")


def newton_reoptimize(state: SparseState, cfg: SpSvmConfig) -> SparseState:
    """Damped Newton on (beta, b) for the current basis.

    At least one step is attempted. Iteration stops once the scaled gradient
    norm is at most ``cfg.newton_tol``, after ``cfg.newton_max_iter`` steps, or
    when no halving of the step decreases the objective. Accepted steps never
    increase the objective.
    """
    if state.m == 0:
        raise ValueError("basis is empty")
    m = state.m
    obj = state.objective()
    state.newton_history = [obj]
    grad = state.gradient()
    if not cfg.fit_intercept:
        grad = (grad[0], 0.0)
    it = 0
    while it < cfg.newton_max_iter:
        if cfg.fit_intercept:
            factor = _factor(state.hessian(), m)
            step = -cho_solve(factor, np.append(*grad), check_finite=False)
            d_beta, d_b = step[:m], step[m]
        else:
            factor = _factor(state.hessian()[:m, :m], m)
            d_beta = -cho_solve(factor, grad[0], check_finite=False)
            d_b = 0.0
        d_o = d_beta @ state.K + d_b
        t = 1.0
        for _ in range(cfg.max_halvings + 1):
            beta_new = state.beta + t * d_beta
            o_new = state.o + t * d_o
            obj_new = state.objective(beta_new, o_new)
            if obj_new <= obj:
                break
            t *= 0.5
        else:
            break
        it += 1
        state.beta = beta_new
        state.b = state.b + t * d_b
        state.o = o_new
        state.newton_history.append(obj_new)
        if obj_new == obj:
            break
        obj = obj_new
        grad = state.gradient()
        if not cfg.fit_intercept:
            grad = (grad[0], 0.0)
        if state.gradient_norm(grad) <= cfg.newton_tol:
            break
    state.newton_iter = it
    state.recompute_outputs()
    return state


def score_candidates(state: SparseState, candidates):
    """One-dimensional Newton estimate of the objective decrease per candidate.

    For candidate c entering at beta_c = 0 the partial derivative is
    g_c = sum_{j in J} beta_j k(x_c, x_j) + C sum_{i in A} (o_i - y_i) k(x_c, x_i)
    and the curvature h_c = k(x_c, x_c) + C sum_{i in A} k(x_c, x_i)^2, with A
    the margin violators; the score is g_c^2 / (2 h_c).

    Only kernel values against A and J are computed. Returns
    ``(scores, g, h, cross)`` where ``cross`` is sum_j beta_j k(x_c, x_j).
    """
    candidates = np.asarray(candidates, dtype=np.intp)
    if candidates.size == 0:
        raise ValueError("no candidates to score: selection exhausted")
    active = np.flatnonzero(state.y * state.o < 1.0)
    r = state.o[active] - state.y[active]
    na = active.size
    Kc = state.rows.block(candidates, np.concatenate([active, state.J]).astype(np.intp))
    KcA = Kc[:, :na]
    cross = Kc[:, na:] @ state.beta if state.m else np.zeros(candidates.size)
    g = cross + state.C * (KcA @ r)
    # k(x, x) = 1 for the RBF kernel
    h = 1.0 + state.C * np.einsum("ij,ij->i", KcA, KcA)
    return g * g / (2.0 * h), g, h, cross


def _loss_along(state: SparseState, krow, t):
    o = state.o + t * krow
    slack = np.maximum(0.0, 1.0 - state.y * o)
    return 0.5 * state.C * slack @ slack


def select_and_grow(state: SparseState, cfg: SpSvmConfig, rng, max_basis: int) -> int:
    """Add up to ``cfg.batch_size`` basis vectors; return how many were added.

    Each new coefficient starts at its one-dimensional Newton value and is
    halved (down to zero) until the objective does not increase.
    """
    added = 0
    for _ in range(cfg.batch_size):
        if state.m >= max_basis:
            break
        pool = np.flatnonzero(~state.in_J)
        if pool.size == 0:
            state.exhausted = True
            break
        size = min(cfg.candidate_size, pool.size)
        cands = np.sort(rng.choice(pool, size=size, replace=False))
        scores, g, h, cross = score_candidates(state, cands)
        k = int(np.argmax(scores))
        c = int(cands[k])
        krow = state.rows.rows([c])[0]

        # objective change for beta_c = t: t*cross + t^2/2 * k_cc + loss change
        kcc = krow[c]
        base = _loss_along(state, krow, 0.0)
        t = -g[k] / h[k]
        for _ in range(cfg.max_halvings):
            delta = t * cross[k] + 0.5 * t * t * kcc + _loss_along(state, krow, t) - base
            if delta <= 0:
                break
            t *= 0.5
        else:
            t = 0.0
        state.add(c, krow, t)
        added += 1
    return added


def spsvm_train(view, spec: KernelSpec, cfg: SpSvmConfig = SpSvmConfig()):
    """Train the sparse primal SVM. Returns ``(SparsePrimalModel, SolverTrace)``."""
    view.check_two_classes()
    n = view.n
    max_basis = min(n, cfg.max_basis if cfg.max_basis is not None else 2000)
    rng = np.random.default_rng(cfg.seed)
    trace = SolverTrace()
    with _blas_threads(cfg.threads):
        state = SparseState(view, spec, cfg.C, cfg.threads,
                            capacity=min(max_basis, 2 * cfg.batch_size))
        start = time.perf_counter()
        prev_err = None
        while True:
            added = select_and_grow(state, cfg, rng, max_basis)
            if added == 0:
                trace.stop_reason = "exhausted" if state.exhausted else "max_basis"
                break
            newton_reoptimize(state, cfg)
            err = state.training_error()
            trace.records.append(TraceRecord(
                n_basis=state.m,
                objective=state.objective(),
                train_error=err,
                seconds=time.perf_counter() - start,
                newton_iter=state.newton_iter,
            ))
            if prev_err is not None and abs(prev_err - err) / added < cfg.epsilon:
                trace.stop_reason = "epsilon"
                break
            if state.m >= max_basis:
                trace.stop_reason = "max_basis"
                break
            prev_err = err
    return state.to_model(), trace


def primal_newton_train(view, spec: KernelSpec, C: float = 1.0,
                        cfg: SpSvmConfig | None = None) -> SparsePrimalModel:
    """Full primal Newton: the sparse solver with every training point in J.

    Builds the complete n x n kernel matrix, so only suitable for small n.
    Only the Newton settings and ``threads`` of ``cfg`` are used.
    """
    view.check_two_classes()
    cfg = SpSvmConfig(C=C) if cfg is None else cfg
    n = view.n
    with _blas_threads(cfg.threads):
        state = SparseState(view, spec, C, cfg.threads, capacity=n)
        K = state.rows.rows(np.arange(n))
        for j in range(n):
            state.add(j, K[j])
        del K
        newton_reoptimize(state, SpSvmConfig(
            C=C, newton_tol=cfg.newton_tol, newton_max_iter=cfg.newton_max_iter,
            max_halvings=cfg.max_halvings, threads=cfg.threads,
            fit_intercept=cfg.fit_intercept,
        ))
    return state.to_model()


def sp_predict(model: SparsePrimalModel, X, threads: int = 1):
    """Decision value(s) sum_{j in J} beta_j k(x_j, x) + b."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    X2 = X[None, :] if single else X
    if model.n_basis == 0:
        out = np.full(X2.shape[0], float(model.b))
    else:
        if X2.shape[1] != model.basis_vectors.shape[1]:
            raise ValueError(
                f"dimension mismatch: model has {model.basis_vectors.shape[1]} "
                f"features, got {X2.shape[1]}"
            )
        K = rbf_block(X2, model.basis_vectors, model.spec.gamma, threads)
        # row-wise sum: each value is independent of the batch it came in
        out = (K * model.beta).sum(axis=1) + model.b
    return float(out[0]) if single else out
