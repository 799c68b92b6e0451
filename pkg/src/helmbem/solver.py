"""Full GMRES with optional right preconditioning by a diagonal."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class SolverError(RuntimeError):
    pass


@dataclass
class SolveReport:
    iterations: int
    residual_history: list
    solution: np.ndarray
    converged: bool
    true_residual: float = float("nan")
    extra: dict = field(default_factory=dict)


def _givens(a, b):
    if b == 0:
        return 1.0, 0.0
    if a == 0:
        return 0.0, 1.0
    h = math.hypot(abs(a), abs(b))
    c = abs(a) / h
    s = (a / abs(a)) * np.conj(b) / h
    return c, s


def gmres(apply_A, rhs, right_precond_diagonal=None, tol: float = 1e-5, max_iter: int = 2000,
          reorth_threshold: float = 0.7) -> SolveReport:
    """Solve A x = rhs from x0 = 0 without restarts.

    ``apply_A`` is a callable or anything with ``@``.  With a diagonal
    ``d`` the iteration runs on A diag(d) y = rhs and returns x = d * y.
    The stopping test uses the (preconditioned) Arnoldi residual relative to
    ||rhs||; the true residual of the original system is reported as well.
    """
    b = np.asarray(rhs, dtype=complex)
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    matmul = apply_A if callable(apply_A) else (lambda v: apply_A @ v)
    n = b.shape[0]
    d = None if right_precond_diagonal is None else np.asarray(right_precond_diagonal, dtype=complex)
    if d is not None and d.shape != (n,):
        raise ValueError(f"preconditioner of length {d.shape} for system of size {n}")
    op = matmul if d is None else (lambda v: matmul(d * v))
    beta = float(np.linalg.norm(b))
    if beta == 0.0:
        return SolveReport(0, [], np.zeros(n, dtype=complex), True, 0.0)
    m = min(max_iter, n)
    V = np.zeros((m + 1, n), dtype=complex)
    H = np.zeros((m + 1, m), dtype=complex)
    cs = np.zeros(m)
    sn = np.zeros(m, dtype=complex)
    g = np.zeros(m + 1, dtype=complex)
    g[0] = beta
    V[0] = b / beta
    history = []
    converged = False
    k = 0
    for k in range(m):
        w = np.asarray(op(V[k]), dtype=complex)
        if w.shape != (n,):
            raise ValueError("operator returned a vector of the wrong length")
        if not np.all(np.isfinite(w)):
            raise SolverError(f"non-finite operator output at iteration {k + 1}")
        norm0 = np.linalg.norm(w)
        for j in range(k + 1):
            h = np.vdot(V[j], w)
            H[j, k] += h
            w = w - h * V[j]
        if np.linalg.norm(w) < reorth_threshold * norm0:
            for j in range(k + 1):
                h = np.vdot(V[j], w)
                H[j, k] += h
                w = w - h * V[j]
        hn = float(np.linalg.norm(w))
        H[k + 1, k] = hn
        for j in range(k):
            t = cs[j] * H[j, k] + sn[j] * H[j + 1, k]
            H[j + 1, k] = -np.conj(sn[j]) * H[j, k] + cs[j] * H[j + 1, k]
            H[j, k] = t
        c, s = _givens(H[k, k], H[k + 1, k])
        cs[k], sn[k] = c, s
        H[k, k] = c * H[k, k] + s * H[k + 1, k]
        H[k + 1, k] = 0.0
        g[k + 1] = -np.conj(s) * g[k]
        g[k] = c * g[k]
        res = abs(g[k + 1]) / beta
        if not math.isfinite(res):
            raise SolverError(f"breakdown at iteration {k + 1}")
        history.append(res)
        if res <= tol:
            converged = True
            break
        if hn == 0.0:
            # happy breakdown: the Krylov space is invariant
            converged = True
            break
        V[k + 1] = w / hn
    iters = len(history)
    y = np.zeros(iters, dtype=complex)
    if iters:
        R = H[:iters, :iters]
        y = _back_substitute(R, g[:iters])
    x = V[:iters].T @ y
    if d is not None:
        x = d * x
    true_res = float(np.linalg.norm(b - matmul(x)) / beta)
    return SolveReport(iters, history, x, converged, true_res)


def _back_substitute(R, g):
    n = len(g)
    y = np.zeros(n, dtype=complex)
    for i in range(n - 1, -1, -1):
        y[i] = (g[i] - R[i, i + 1:] @ y[i + 1:]) / R[i, i]
    return y
