"""Continuous-to-discrete conversion: zero-order hold and bilinear (Tustin)."""
from __future__ import annotations

import numpy as np

from .errors import DomainMismatchError, SingularTransformError
from .lti import StateSpace

__all__ = ["matrix_exponential", "zoh", "bilinear", "bilinear_inverse"]

# Pade coefficients and 1-norm thresholds for degrees 3, 5, 7, 9, 13
# (Higham, "The scaling and squaring method for the matrix exponential
# revisited", SIAM J. Matrix Anal. Appl. 26, 2005).
_PADE = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
         960960.0, 16380.0, 182.0, 1.0),
}
_THETA = {3: 1.495585217958292e-2, 5: 2.539398330063230e-1,
          7: 9.504178996162932e-1, 9: 2.097847961257068e0,
          13: 5.371920351148152e0}


def _pade_uv(A, m):
    b = _PADE[m]
    n = A.shape[0]
    I = np.eye(n)
    A2 = A @ A
    if m == 13:
        A4 = A2 @ A2
        A6 = A4 @ A2
        U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
                 + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I)
        V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
             + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I)
        return U, V
    powers = [I, A2]
    for _ in range(2, (m + 1) // 2):
        powers.append(powers[-1] @ A2)
    U = sum(b[2 * k + 1] * powers[k] for k in range((m + 1) // 2))
    V = sum(b[2 * k] * powers[k] for k in range((m + 1) // 2))
    return A @ U, V


def matrix_exponential(M) -> np.ndarray:
    """``exp(M)`` by scaling and squaring with a diagonal Pade approximant."""
    A = np.array(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix_exponential needs a square matrix")
    if A.size == 0:
        return A.copy()
    norm = np.linalg.norm(A, 1)
    for m in (3, 5, 7, 9):
        if norm <= _THETA[m]:
            U, V = _pade_uv(A, m)
            return np.linalg.solve(V - U, V + U)
    s = 0
    if norm > _THETA[13]:
        s = max(0, int(np.ceil(np.log2(norm / _THETA[13]))))
    U, V = _pade_uv(A / 2.0 ** s, 13)
    E = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        E = E @ E
    return E


def zoh(g: StateSpace, Ts: float) -> StateSpace:
    """Zero-order-hold discretization (exact at the sampling instants for held inputs)."""
    if g.is_discrete:
        raise DomainMismatchError("zoh expects a continuous-time model")
    n, m = g.n_states, g.n_inputs
    M = np.zeros((n + m, n + m))
    M[:n, :n] = g.A
    M[:n, n:] = g.B
    E = matrix_exponential(M * Ts)
    return StateSpace(E[:n, :n], E[:n, n:], g.C, g.D, Ts)


def _tustin(A, B, C, D, alpha):
    """Map ``s = alpha (z - 1)/(z + 1)`` forward (continuous -> discrete)."""
    n = A.shape[0]
    if n == 0:
        return A, B, C, D
    if np.min(np.abs(np.linalg.eigvals(A) - alpha)) <= 1e-12 * alpha:
        raise SingularTransformError(
            "continuous pole at s = 2/Ts; the bilinear map is singular")
    Wi = np.linalg.inv(alpha * np.eye(n) - A)
    r = np.sqrt(2.0 * alpha)
    return (Wi @ (alpha * np.eye(n) + A), r * Wi @ B, r * C @ Wi,
            D + C @ Wi @ B)


def _tustin_inverse(A, B, C, D, alpha):
    n = A.shape[0]
    if n == 0:
        return A, B, C, D
    if np.min(np.abs(np.linalg.eigvals(A) + 1.0)) <= 1e-12:
        raise SingularTransformError("discrete pole at z = -1; cannot undo the bilinear map")
    Wi = np.linalg.inv(A + np.eye(n))
    r = np.sqrt(2.0 * alpha)
    return (alpha * Wi @ (A - np.eye(n)), r * Wi @ B, r * C @ Wi,
            D - C @ Wi @ B)


def bilinear(g: StateSpace, Ts: float, alpha: float | None = None) -> StateSpace:
    """Tustin discretization ``s = (2/Ts)(z - 1)/(z + 1)`` without pre-warping.

    ``alpha`` overrides the ``2/Ts`` constant; the returned model is still
    tagged with sample time ``Ts``.
    """
    if g.is_discrete:
        raise DomainMismatchError("bilinear expects a continuous-time model")
    alpha = 2.0 / Ts if alpha is None else alpha
    return StateSpace(*_tustin(g.A, g.B, g.C, g.D, alpha), dt=Ts)


def bilinear_inverse(g: StateSpace, alpha: float | None = None) -> StateSpace:
    """Continuous model whose Tustin image (same ``alpha``) is ``g``."""
    if not g.is_discrete:
        raise DomainMismatchError("bilinear_inverse expects a discrete-time model")
    alpha = 2.0 / g.dt if alpha is None else alpha
    return StateSpace(*_tustin_inverse(g.A, g.B, g.C, g.D, alpha), dt=None)
