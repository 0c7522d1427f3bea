"""Independent reference solvers used by the tests."""
import math

import numpy as np

from kernelsvm.kernel import rbf


def kernel_matrix(X, gamma):
    """Plain double loop over the scalar kernel."""
    n = len(X)
    K = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            K[i, j] = rbf(X[i], X[j], gamma)
    return K


def primal_objective(K, y, beta, b, C):
    """1/2 beta'K beta + C/2 sum max(0, 1 - y(K beta + b))^2 (full basis)."""
    o = K @ beta + b
    slack = np.maximum(0.0, 1.0 - y * o)
    return 0.5 * beta @ K @ beta + 0.5 * C * slack @ slack


def loop_sparse_objective(X, y, J, beta, b, C, gamma):
    """O(n |J|) loop evaluation of the sparse primal objective."""
    reg = 0.0
    for a, ja in enumerate(J):
        for c, jc in enumerate(J):
            reg += beta[a] * beta[c] * rbf(X[ja], X[jc], gamma)
    loss = 0.0
    for i in range(len(y)):
        o = b
        for a, ja in enumerate(J):
            o += beta[a] * rbf(X[ja], X[i], gamma)
        loss += max(0.0, 1.0 - y[i] * o) ** 2
    return 0.5 * reg + 0.5 * C * loss


def gd_primal_oracle(K, y, C, iters=200_000, tol=1e-15):
    """Nesterov accelerated gradient descent with adaptive restart.

    Minimises the full-basis primal objective over (beta, b) with step 1/L,
    L an upper bound on the Hessian norm over every active set.
    """
    n = len(y)
    M = np.zeros((n + 1, n + 1))
    Kb = np.hstack([K, np.ones((n, 1))])
    M[:n, :n] = K
    M += C * Kb.T @ Kb
    L = np.linalg.eigvalsh(M)[-1]
    x = np.zeros(n + 1)
    z = x.copy()
    t = 1.0

    def f(v):
        return primal_objective(K, y, v[:n], v[n], C)

    def grad(v):
        o = K @ v[:n] + v[n]
        act = y * o < 1.0
        r = np.where(act, o - y, 0.0)
        return np.append(K @ v[:n] + C * K @ r, C * r.sum())

    fx = f(x)
    for _ in range(iters):
        x_new = z - grad(z) / L
        f_new = f(x_new)
        if f_new > fx:  # restart momentum
            t = 1.0
            z = x.copy()
            continue
        t_new = (1 + math.sqrt(1 + 4 * t * t)) / 2
        z = x_new + (t - 1) / t_new * (x_new - x)
        if fx - f_new <= tol * max(1.0, abs(fx)):
            x, fx = x_new, f_new
            break
        x, fx, t = x_new, f_new, t_new
    return x[:n], x[n], fx


def qp_dual_oracle(K, y, C):
    """Maximise the SVM dual with cvxopt's interior point QP solver."""
    from cvxopt import matrix, solvers

    n = len(y)
    P = matrix(np.outer(y, y) * K)
    q = matrix(-np.ones(n))
    G = matrix(np.vstack([-np.eye(n), np.eye(n)]))
    h = matrix(np.hstack([np.zeros(n), np.full(n, C)]))
    A = matrix(y.reshape(1, -1).astype(float))
    bvec = matrix(0.0)
    solvers.options.update({"show_progress": False, "abstol": 1e-12,
                            "reltol": 1e-12, "feastol": 1e-12, "maxiters": 200})
    sol = solvers.qp(P, q, G, h, A, bvec)
    alpha = np.clip(np.array(sol["x"]).ravel(), 0.0, C)
    return alpha, -sol["primal objective"]


def golden_section(f, lo, hi, tol=1e-10, max_iter=500):
    """Minimise a unimodal function on [lo, hi]."""
    phi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * (1 + abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = f(d)
    x = (a + b) / 2
    return x, f(x)
