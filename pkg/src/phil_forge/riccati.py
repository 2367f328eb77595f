"""Continuous algebraic Riccati equations via the matrix sign function.

Solves ``A'X + XA - (XB + S) R^-1 (B'X + S') + Q = 0`` for the stabilizing
``X``.  ``R`` may be indefinite, which is what the H-infinity Riccati
equations need.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .errors import IterationDivergedError, NoStabilizingSolutionError

__all__ = ["matrix_sign", "solve_care", "care_residual"]


def matrix_sign(H, tol=1e-12, max_iter=100):
    """Newton iteration with determinant scaling for ``sign(H)``.

    Returns the sign matrix and the number of iterations used.  Raises
    :class:`IterationDivergedError` if the iteration has not settled after
    ``max_iter`` steps, which happens when ``H`` has (nearly) imaginary
    eigenvalues.
    """
    Z = np.array(H, dtype=float)
    N = Z.shape[0]
    for it in range(1, max_iter + 1):
        try:
            Zi = np.linalg.inv(Z)
        except np.linalg.LinAlgError as exc:
            raise IterationDivergedError("sign iteration hit a singular matrix") from exc
        sign, logdet = np.linalg.slogdet(Z)
        c = np.exp(-logdet / N) if sign != 0 and np.isfinite(logdet) else 1.0
        Z_new = 0.5 * (c * Z + Zi / c)
        if not np.all(np.isfinite(Z_new)):
            raise IterationDivergedError("sign iteration produced non-finite entries")
        delta = np.linalg.norm(Z_new - Z, 1)
        Z = Z_new
        if delta <= tol * np.linalg.norm(Z, 1):
            return Z, it
    raise IterationDivergedError(f"sign iteration did not converge in {max_iter} steps")


def _reduced(A, B, Q, R, S):
    Ri_St = np.linalg.solve(R, S.T)
    Ri_Bt = np.linalg.solve(R, B.T)
    Abar = A - B @ Ri_St
    G = B @ Ri_Bt
    Qbar = Q - S @ Ri_St
    return Abar, 0.5 * (G + G.T), 0.5 * (Qbar + Qbar.T)


def care_residual(A, B, Q, R, S, X):
    K = np.linalg.solve(R, B.T @ X + S.T)
    return A.T @ X + X @ A - (X @ B + S) @ K + Q


def solve_care(A, B, Q, R, S=None, tol=1e-8, sign_tol=1e-12, max_iter=100,
               refine_steps=3):
    """Stabilizing solution of the continuous algebraic Riccati equation.

    Parameters
    ----------
    A, B, Q, R, S
        Problem data; ``S`` (cross term, ``n x m``) defaults to zero.
    tol
        Required relative residual ``||Res(X)||_F <= tol * max(||X||_F, 1)``.
    sign_tol, max_iter
        Convergence control of the sign iteration.
    refine_steps
        Maximum number of Newton defect-correction steps; refinement stops as
        soon as the residual bound holds.

    Returns
    -------
    X : ndarray
        Symmetric stabilizing solution.
    residual : float
        Frobenius norm of the Riccati residual at ``X``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    n, m = B.shape
    S = np.zeros((n, m)) if S is None else np.atleast_2d(np.asarray(S, dtype=float))
    Abar, G, Qbar = _reduced(A, B, Q, R, S)
    H = np.block([[Abar, -G], [-Qbar, -Abar.T]])
    W, _ = matrix_sign(H, tol=sign_tol, max_iter=max_iter)
    # stable invariant subspace [I; X] spans the null space of W + I
    lhs = np.vstack([W[:n, n:], W[n:, n:] + np.eye(n)])
    rhs = -np.vstack([W[:n, :n] + np.eye(n), W[n:, :n]])
    X, _, rank, _ = np.linalg.lstsq(lhs, rhs, rcond=None)
    if rank < n:
        raise NoStabilizingSolutionError("stable invariant subspace is not a graph")
    X = 0.5 * (X + X.T)

    def residual(X):
        return care_residual(A, B, Q, R, S, X)

    res = residual(X)
    for _ in range(refine_steps):
        if np.linalg.norm(res) <= tol * max(np.linalg.norm(X), 1.0):
            break
        Acl = Abar - G @ X
        dX = solve_continuous_lyapunov(Acl.T, -res)
        X = X + 0.5 * (dX + dX.T)
        res = residual(X)
    if not np.all(np.isfinite(X)):
        raise NoStabilizingSolutionError("Riccati solution is not finite")
    Acl = Abar - G @ X
    if np.max(np.linalg.eigvals(Acl).real) >= 0:
        raise NoStabilizingSolutionError("solution does not stabilize A - B K")
    return X, float(np.linalg.norm(res))
