"""Dense complex linear algebra: diagonally preconditioned restarted GMRES
with modified Gram-Schmidt, a direct LU fallback, and spectrum diagnostics."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceError, ParameterError, PreconditionerError, SizeError


@dataclass(frozen=True)
class SolveOptions:
    tolerance: float = 1e-5
    restart: int = 200
    max_iterations: int = 1000
    preconditioner: str = "jacobi"
    method: str = "gmres"
    dense_cap: int = 20000

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ParameterError("tolerance must be positive")
        if self.restart < 1:
            raise ParameterError("restart must be >= 1")
        if self.preconditioner not in ("none", "jacobi"):
            raise ParameterError("preconditioner must be 'none' or 'jacobi'")
        if self.method not in ("gmres", "lu"):
            raise ParameterError("method must be 'gmres' or 'lu'")


@dataclass
class SolveReport:
    iterations: int
    residual: float
    wall_time: float
    method: str
    residual_history: list = field(default_factory=list)


def _as_operator(M):
    """Accept a SystemMatrix-like object or a plain ndarray."""
    if hasattr(M, "matvec"):
        return M.matvec, M.diagonal, M.shape[0]
    A = np.asarray(M)
    return (lambda x: A @ x), (lambda: np.diagonal(A).copy()), A.shape[0]


def gmres(matvec, b, tol=1e-5, restart=200, maxiter=1000, precond_diag=None):
    """Left-preconditioned restarted GMRES (modified Gram-Schmidt Arnoldi,
    Givens least squares).  Returns (x, history of preconditioned relative
    residuals, iterations)."""
    n = len(b)
    if precond_diag is not None:
        dinv = 1.0 / precond_diag
        apply_p = lambda r: dinv * r
    else:
        apply_p = lambda r: r
    pb = apply_p(b)
    bnorm = np.linalg.norm(pb)
    if bnorm == 0.0:
        return np.zeros(n, dtype=complex), [0.0], 0

    x = np.zeros(n, dtype=complex)
    history = []
    total = 0
    while total < maxiter:
        r = apply_p(b - matvec(x))
        beta = np.linalg.norm(r)
        if beta / bnorm <= tol:
            break
        m = min(restart, maxiter - total)
        V = np.zeros((m + 1, n), dtype=complex)
        H = np.zeros((m + 1, m), dtype=complex)
        cs = np.zeros(m, dtype=complex)
        sn = np.zeros(m, dtype=complex)
        g = np.zeros(m + 1, dtype=complex)
        g[0] = beta
        V[0] = r / beta
        j_done = 0
        converged = False
        for j in range(m):
            w = apply_p(matvec(V[j]))
            for i in range(j + 1):
                H[i, j] = np.vdot(V[i], w)
                w -= H[i, j] * V[i]
            H[j + 1, j] = np.linalg.norm(w)
            if H[j + 1, j] != 0.0:
                V[j + 1] = w / H[j + 1, j]
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -np.conj(sn[i]) * H[i, j] + np.conj(cs[i]) * H[i + 1, j]
                H[i, j] = t
            denom = np.sqrt(abs(H[j, j]) ** 2 + abs(H[j + 1, j]) ** 2)
            if denom == 0.0:
                cs[j], sn[j] = 1.0, 0.0
            else:
                cs[j] = np.conj(H[j, j]) / denom
                sn[j] = np.conj(H[j + 1, j]) / denom
            H[j, j] = cs[j] * H[j, j] + sn[j] * H[j + 1, j]
            H[j + 1, j] = 0.0
            g[j + 1] = -np.conj(sn[j]) * g[j]
            g[j] = cs[j] * g[j]
            total += 1
            j_done = j + 1
            history.append(abs(g[j + 1]) / bnorm)
            if history[-1] <= tol or H[j, j] == 0.0:
                converged = True
                break
        if j_done > 0:
            y = sla.solve_triangular(H[:j_done, :j_done], g[:j_done], lower=False)
            x = x + V[:j_done].T @ y
        if converged:
            r = apply_p(b - matvec(x))
            if np.linalg.norm(r) / bnorm <= tol * (1 + 1e-12):
                break
    else:
        raise ConvergenceError(
            f"GMRES did not reach {tol:g} within {maxiter} iterations "
            f"(last residual {history[-1] if history else float('nan'):.3e})",
            residual_history=history)
    final = np.linalg.norm(apply_p(b - matvec(x))) / bnorm
    if final > tol * (1 + 1e-9) and total >= maxiter:
        raise ConvergenceError(
            f"GMRES stalled at residual {final:.3e}", residual_history=history)
    return x, history, total


def solve(M, b, opts: SolveOptions | None = None):
    """Solve the assembled system; returns (coefficients, SolveReport)."""
    opts = opts or SolveOptions()
    matvec, diagonal, n = _as_operator(M)
    b = np.asarray(b, dtype=complex)
    if len(b) != n:
        raise ParameterError(f"dimension mismatch: matrix {n}, rhs {len(b)}")
    t0 = time.time()
    if opts.method == "lu":
        A = M.dense(cap=opts.dense_cap) if hasattr(M, "dense") else np.asarray(M)
        lu, piv = sla.lu_factor(A)
        x = sla.lu_solve((lu, piv), b)
        bn = np.linalg.norm(b)
        res = np.linalg.norm(A @ x - b) / bn if bn > 0 else 0.0
        return x, SolveReport(iterations=1, residual=float(res),
                              wall_time=time.time() - t0, method="lu")
    diag = None
    if opts.preconditioner == "jacobi":
        diag = diagonal()
        if np.any(diag == 0.0):
            raise PreconditionerError("zero diagonal entry; jacobi preconditioner unavailable")
    x, history, iters = gmres(matvec, b, tol=opts.tolerance, restart=opts.restart,
                              maxiter=opts.max_iterations, precond_diag=diag)
    bn = np.linalg.norm(b)
    res = np.linalg.norm(matvec(x) - b) / bn if bn > 0 else 0.0
    return x, SolveReport(iterations=iters, residual=float(res),
                          wall_time=time.time() - t0, method="gmres",
                          residual_history=history)


def eigen_diagnostics(M, preconditioned: bool = False, cap: int = 6000):
    """Dense spectrum of the system matrix (or of diag(M)^-1 M)."""
    matvec, diagonal, n = _as_operator(M)
    if n > cap:
        raise SizeError(f"dimension {n} above the eigenvalue cap {cap}")
    A = M.dense(cap=cap) if hasattr(M, "dense") else np.asarray(M, dtype=complex)
    if preconditioned:
        d = diagonal()
        if np.any(d == 0.0):
            raise PreconditionerError("zero diagonal entry; cannot precondition")
        A = A / d[:, None]
    return np.linalg.eigvals(A)
