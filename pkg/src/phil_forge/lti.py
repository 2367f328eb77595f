"""Linear time-invariant state-space models.

A :class:`StateSpace` carries ``(A, B, C, D)`` and a sample time ``dt``;
``dt is None`` marks a continuous-time model.  All operations are pure and
return new objects.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize

from .errors import (
    AlgebraicLoopError,
    DegenerateDenominatorError,
    DimensionMismatchError,
    DomainMismatchError,
    NearPoleError,
    NonProperError,
    UnstableSystemError,
)

__all__ = [
    "StateSpace",
    "TransferFunction",
    "PartitionedPlant",
    "realize_tf",
    "series",
    "parallel",
    "block_diagonal",
    "lft_lower",
    "is_stable",
    "poles",
    "freq_response",
    "sigma_max",
    "hinf_norm",
    "delay_block",
    "step_states",
    "simulate",
    "static_gain",
    "balance_states",
    "balanced_truncation",
]

STAB_EPS = 1e-9


def _as_matrix(M, rows=None, cols=None):
    M = np.array(M, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    elif M.ndim == 1:
        M = M.reshape(1, -1) if M.size else M.reshape(rows or 0, cols or 0)
    return M


@dataclass(frozen=True, eq=False)
class StateSpace:
    """State-space model ``x' = A x + B u``, ``y = C x + D u``.

    ``dt`` is the sample time in seconds for a discrete model and ``None``
    for a continuous one.  ``n = 0`` is allowed and describes a static gain.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    dt: float | None = None

    def __post_init__(self):
        D = _as_matrix(self.D)
        p, m = D.shape
        A = np.array(self.A, dtype=float)
        n = A.shape[0] if A.size else 0
        A = A.reshape(n, n)
        B = np.array(self.B, dtype=float).reshape(n, m)
        C = np.array(self.C, dtype=float).reshape(p, n)
        for M in (A, B, C, D):
            M.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)
        if self.dt is not None:
            if not self.dt > 0:
                raise ValueError(f"sample time must be positive, got {self.dt}")
            object.__setattr__(self, "dt", float(self.dt))

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.D.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.D.shape[0]

    @property
    def is_discrete(self) -> bool:
        return self.dt is not None

    def __repr__(self):
        kind = f"dt={self.dt:g}" if self.is_discrete else "continuous"
        return (f"StateSpace(n={self.n_states}, inputs={self.n_inputs}, "
                f"outputs={self.n_outputs}, {kind})")

    def select(self, outputs=None, inputs=None) -> "StateSpace":
        """Sub-system keeping the given output and input indices."""
        rows = slice(None) if outputs is None else list(outputs)
        cols = slice(None) if inputs is None else list(inputs)
        return StateSpace(self.A, self.B[:, cols], self.C[rows, :],
                          self.D[rows, :][:, cols], self.dt)

    def scale(self, out_scale=None, in_scale=None) -> "StateSpace":
        """Multiply output channels by ``out_scale`` and inputs by ``in_scale``."""
        B, C, D = self.B, self.C, self.D
        if in_scale is not None:
            s = np.asarray(in_scale, dtype=float)
            if s.shape != (self.n_inputs,):
                raise DimensionMismatchError("input scale length mismatch")
            B = B * s[None, :]
            D = D * s[None, :]
        if out_scale is not None:
            s = np.asarray(out_scale, dtype=float)
            if s.shape != (self.n_outputs,):
                raise DimensionMismatchError("output scale length mismatch")
            C = C * s[:, None]
            D = D * s[:, None]
        return StateSpace(self.A, B, C, D, self.dt)

    def similarity(self, T, Tinv=None) -> "StateSpace":
        """State change ``x = T xn``."""
        T = np.asarray(T, dtype=float)
        Tinv = np.linalg.inv(T) if Tinv is None else Tinv
        return StateSpace(Tinv @ self.A @ T, Tinv @ self.B, self.C @ T,
                          self.D, self.dt)


@dataclass(frozen=True)
class TransferFunction:
    """SISO rational transfer function, coefficients in descending powers."""

    num: tuple
    den: tuple
    dt: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "num", tuple(float(c) for c in np.atleast_1d(self.num)))
        object.__setattr__(self, "den", tuple(float(c) for c in np.atleast_1d(self.den)))

    def __call__(self, x):
        return np.polyval(self.num, x) / np.polyval(self.den, x)


@dataclass(frozen=True, eq=False)
class PartitionedPlant:
    """Generalized plant with inputs ``(w, u)`` and outputs ``(z, y)``."""

    sys: StateSpace
    n_w: int
    n_u: int
    n_z: int
    n_y: int
    input_names: tuple = ()
    output_names: tuple = ()

    def __post_init__(self):
        if self.n_w + self.n_u != self.sys.n_inputs:
            raise DimensionMismatchError(
                f"n_w + n_u = {self.n_w + self.n_u} but plant has "
                f"{self.sys.n_inputs} inputs")
        if self.n_z + self.n_y != self.sys.n_outputs:
            raise DimensionMismatchError(
                f"n_z + n_y = {self.n_z + self.n_y} but plant has "
                f"{self.sys.n_outputs} outputs")
        for attr, count in (("input_names", self.sys.n_inputs),
                            ("output_names", self.sys.n_outputs)):
            names = tuple(getattr(self, attr))
            if not names:
                prefix = "in" if attr == "input_names" else "out"
                names = tuple(f"{prefix}{k}" for k in range(count))
            if len(names) != count:
                raise DimensionMismatchError(f"{attr} needs {count} labels")
            object.__setattr__(self, attr, names)

    @property
    def w_names(self):
        return self.input_names[:self.n_w]

    @property
    def u_names(self):
        return self.input_names[self.n_w:]

    @property
    def z_names(self):
        return self.output_names[:self.n_z]

    @property
    def y_names(self):
        return self.output_names[self.n_z:]

    def blocks(self):
        """Return ``(A, B1, B2, C1, C2, D11, D12, D21, D22)``."""
        s, nw, nz = self.sys, self.n_w, self.n_z
        return (s.A, s.B[:, :nw], s.B[:, nw:], s.C[:nz], s.C[nz:],
                s.D[:nz, :nw], s.D[:nz, nw:], s.D[nz:, :nw], s.D[nz:, nw:])


def static_gain(D, dt=None) -> StateSpace:
    D = _as_matrix(D)
    return StateSpace(np.zeros((0, 0)), np.zeros((0, D.shape[1])),
                      np.zeros((D.shape[0], 0)), D, dt)


def realize_tf(tf: TransferFunction) -> StateSpace:
    """Controllable canonical realization of a proper SISO transfer function."""
    den = np.asarray(tf.den, dtype=float)
    num = np.trim_zeros(np.asarray(tf.num, dtype=float), "f")
    if den.size == 0 or den[0] == 0.0:
        raise DegenerateDenominatorError("leading denominator coefficient is zero")
    if num.size == 0:
        num = np.zeros(1)
    n = den.size - 1
    if num.size - 1 > n:
        raise NonProperError(
            f"numerator degree {num.size - 1} exceeds denominator degree {n}")
    a = den / den[0]
    b = np.concatenate([np.zeros(n + 1 - num.size), num]) / den[0]
    d = b[0]
    if n == 0:
        return static_gain([[d]], tf.dt)
    A = np.zeros((n, n))
    A[0, :] = -a[1:]
    A[1:, :-1] = np.eye(n - 1)
    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    C = (b[1:] - d * a[1:]).reshape(1, n)
    return StateSpace(A, B, C, [[d]], tf.dt)


def _check_domains(*systems):
    dts = {s.dt for s in systems}
    if len(dts) > 1:
        raise DomainMismatchError(f"systems live in different domains: {sorted(map(str, dts))}")
    return systems[0].dt


def series(g1: StateSpace, g2: StateSpace) -> StateSpace:
    """Cascade ``u -> g1 -> g2 -> y``; the response is ``G2 @ G1``."""
    dt = _check_domains(g1, g2)
    if g1.n_outputs != g2.n_inputs:
        raise DimensionMismatchError(
            f"g1 has {g1.n_outputs} outputs but g2 has {g2.n_inputs} inputs")
    n1, n2 = g1.n_states, g2.n_states
    A = np.block([[g1.A, np.zeros((n1, n2))], [g2.B @ g1.C, g2.A]])
    B = np.vstack([g1.B, g2.B @ g1.D])
    C = np.hstack([g2.D @ g1.C, g2.C])
    return StateSpace(A, B, C, g2.D @ g1.D, dt)


def parallel(g1: StateSpace, g2: StateSpace) -> StateSpace:
    dt = _check_domains(g1, g2)
    if g1.D.shape != g2.D.shape:
        raise DimensionMismatchError(f"port shapes differ: {g1.D.shape} vs {g2.D.shape}")
    n1, n2 = g1.n_states, g2.n_states
    A = np.block([[g1.A, np.zeros((n1, n2))], [np.zeros((n2, n1)), g2.A]])
    return StateSpace(A, np.vstack([g1.B, g2.B]), np.hstack([g1.C, g2.C]),
                      g1.D + g2.D, dt)


def block_diagonal(*systems: StateSpace) -> StateSpace:
    if not systems:
        raise ValueError("need at least one system")
    dt = _check_domains(*systems)

    def bd(mats, shapes):
        # explicit placement keeps zero-sized blocks' extents
        out = np.zeros((sum(r for r, _ in shapes), sum(c for _, c in shapes)))
        i = j = 0
        for M, (r, c) in zip(mats, shapes):
            out[i:i + r, j:j + c] = M
            i += r
            j += c
        return out

    ns = [s.n_states for s in systems]
    ms = [s.n_inputs for s in systems]
    ps = [s.n_outputs for s in systems]
    A = bd([s.A for s in systems], list(zip(ns, ns)))
    B = bd([s.B for s in systems], list(zip(ns, ms)))
    C = bd([s.C for s in systems], list(zip(ps, ns)))
    D = bd([s.D for s in systems], list(zip(ps, ms)))
    return StateSpace(A, B, C, D, dt)


def lft_lower(P: PartitionedPlant, K: StateSpace) -> StateSpace:
    """Lower linear fractional transformation ``F_l(P, K)``: the map ``w -> z``."""
    _check_domains(P.sys, K)
    if K.n_inputs != P.n_y or K.n_outputs != P.n_u:
        raise DimensionMismatchError(
            f"controller is {K.n_outputs}x{K.n_inputs}, plant needs "
            f"{P.n_u}x{P.n_y}")
    A, B1, B2, C1, C2, D11, D12, D21, D22 = P.blocks()
    Ak, Bk, Ck, Dk = K.A, K.B, K.C, K.D
    loop = np.eye(P.n_u) - Dk @ D22
    if np.linalg.cond(loop) > 1e12:
        raise AlgebraicLoopError("I - DK D22 is singular; the loop is ill-posed")
    M = np.linalg.inv(loop)
    # u = Ux x + Uk xk + Uw w ; y = Yx x + Yk xk + Yw w
    Ux, Uk, Uw = M @ Dk @ C2, M @ Ck, M @ Dk @ D21
    Yx, Yk, Yw = C2 + D22 @ Ux, D22 @ Uk, D21 + D22 @ Uw
    Acl = np.block([[A + B2 @ Ux, B2 @ Uk], [Bk @ Yx, Ak + Bk @ Yk]])
    Bcl = np.vstack([B1 + B2 @ Uw, Bk @ Yw])
    Ccl = np.hstack([C1 + D12 @ Ux, D12 @ Uk])
    Dcl = D11 + D12 @ Uw
    return StateSpace(Acl, Bcl, Ccl, Dcl, P.sys.dt)


def poles(g: StateSpace) -> np.ndarray:
    if g.n_states == 0:
        return np.zeros(0, dtype=complex)
    return np.linalg.eigvals(g.A)


def is_stable(g: StateSpace, eps: float = STAB_EPS) -> bool:
    """Asymptotic stability with margin ``eps``; marginal poles count as unstable."""
    p = poles(g)
    if p.size == 0:
        return True
    if g.is_discrete:
        return bool(np.max(np.abs(p)) < 1.0 - eps)
    return bool(np.max(p.real) < -eps)


def _eval_points(g, omega):
    omega = np.asarray(omega, dtype=float)
    if g.is_discrete:
        return np.exp(1j * omega)
    return 1j * omega


def freq_response(g: StateSpace, omega) -> np.ndarray:
    """Evaluate ``C (zeta I - A)^-1 B + D``.

    ``omega`` is in rad/s for continuous models and rad/sample for discrete
    ones (``zeta = exp(j omega)``).  A scalar ``omega`` gives a ``(p, m)``
    complex matrix, an array gives shape ``(len(omega), p, m)``.
    """
    scalar = np.ndim(omega) == 0
    zeta = np.atleast_1d(_eval_points(g, omega))
    out = np.broadcast_to(g.D.astype(complex), (zeta.size,) + g.D.shape).copy()
    n = g.n_states
    if n:
        lam = poles(g)
        gap = np.min(np.abs(zeta[:, None] - lam[None, :]), axis=1)
        if np.any(gap <= 1e-12 * (1.0 + np.abs(zeta))):
            raise NearPoleError("evaluation point coincides with a pole")
        M = zeta[:, None, None] * np.eye(n)[None] - g.A[None]
        X = np.linalg.solve(M, np.broadcast_to(g.B.astype(complex), (zeta.size, n, g.n_inputs)))
        out += g.C[None] @ X
    return out[0] if scalar else out


def sigma_max(G: np.ndarray) -> np.ndarray:
    """Largest singular value of each matrix in a stack."""
    if G.shape[-1] == 0 or G.shape[-2] == 0:
        return np.zeros(G.shape[:-2])
    if G.shape[-1] == 1 or G.shape[-2] == 1:
        return np.sqrt(np.sum(np.abs(G) ** 2, axis=(-2, -1)))
    return np.linalg.svd(G, compute_uv=False)[..., 0]


def _frequency_grid(g: StateSpace, n_grid: int) -> np.ndarray:
    lam = poles(g)
    if g.is_discrete:
        base = np.concatenate([[0.0], np.logspace(-6, 0, n_grid) * np.pi])
        extra = np.abs(np.angle(lam))
        return np.unique(np.concatenate([base, extra]))
    mags = np.abs(lam[np.abs(lam) > 0])
    lo = 1e-3 * mags.min() if mags.size else 1e-3
    hi = 1e3 * mags.max() if mags.size else 1e3
    base = np.concatenate([[0.0], np.logspace(np.log10(lo), np.log10(hi), n_grid)])
    return np.unique(np.concatenate([base, np.abs(lam.imag)]))


def hinf_norm(g: StateSpace, rel_tol: float = 1e-3, n_grid: int = 2000,
              return_peak: bool = False):
    """H-infinity norm of a stable system by refined frequency gridding.

    A dense logarithmic grid (augmented with the pole frequencies) locates the
    candidate peaks of the largest singular value; each of the best candidates
    is then polished by a bounded scalar search between its grid neighbours.
    """
    if not is_stable(g):
        raise UnstableSystemError("H-infinity norm requires a stable system")
    if g.n_inputs == 0 or g.n_outputs == 0:
        return (0.0, 0.0) if return_peak else 0.0
    grid = _frequency_grid(g, max(int(n_grid), 1000))
    sv = sigma_max(freq_response(g, grid))
    best = float(sv.max())
    w_best = float(grid[int(sv.argmax())])
    if not g.is_discrete:
        d_inf = float(sigma_max(g.D[None])[0])
        if d_inf > best:
            best, w_best = d_inf, np.inf
    # local maxima, best first
    interior = np.where((sv[1:-1] >= sv[:-2]) & (sv[1:-1] >= sv[2:]))[0] + 1
    cand = list(interior[np.argsort(sv[interior])[::-1][:8]])
    for k in (0, len(grid) - 1):
        cand.append(k)
    for k in cand:
        lo_w, hi_w = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
        if hi_w <= lo_w:
            continue
        res = optimize.minimize_scalar(
            lambda w: -sigma_max(freq_response(g, np.array([w])))[0],
            bounds=(lo_w, hi_w), method="bounded",
            options={"xatol": max(1e-12, rel_tol * 1e-3 * max(hi_w - lo_w, 1e-12))})
        if -res.fun > best:
            best, w_best = float(-res.fun), float(res.x)
    return (best, w_best) if return_peak else best


def delay_block(k: int, dt: float, channels: int = 1) -> StateSpace:
    """Discrete pure delay ``z^-k`` applied to ``channels`` independent signals."""
    if k < 0 or int(k) != k:
        raise ValueError(f"delay must be a nonnegative integer, got {k}")
    k = int(k)
    if k == 0:
        return static_gain(np.eye(channels), dt)
    A = np.zeros((k, k))
    A[1:, :-1] = np.eye(k - 1)
    B = np.zeros((k, 1))
    B[0, 0] = 1.0
    C = np.zeros((1, k))
    C[0, -1] = 1.0
    one = StateSpace(A, B, C, [[0.0]], dt)
    return one if channels == 1 else block_diagonal(*([one] * channels))


def step_states(g: StateSpace, x, u):
    """One step of a discrete model: returns ``(A x + B u, C x + D u)``.

    ``x`` and ``u`` may be vectors or matrices whose columns are independent
    trajectories.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape[0] != g.n_states or u.shape[0] != g.n_inputs:
        raise DimensionMismatchError(
            f"expected state {g.n_states} and input {g.n_inputs}, got "
            f"{x.shape[0]} and {u.shape[0]}")
    return g.A @ x + g.B @ u, g.C @ x + g.D @ u


def simulate(g: StateSpace, u, x0=None) -> np.ndarray:
    """Response of a discrete model to an input sequence of shape ``(N, m)``."""
    if not g.is_discrete:
        raise DomainMismatchError("simulate needs a discrete-time model")
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    x = np.zeros(g.n_states) if x0 is None else np.asarray(x0, dtype=float)
    y = np.empty((u.shape[0], g.n_outputs))
    for k in range(u.shape[0]):
        x, y[k] = step_states(g, x, u[k])
    return y


def balance_states(g: StateSpace) -> StateSpace:
    """Diagonal similarity that equilibrates the row/column norms of ``A``."""
    if g.n_states == 0:
        return g
    from scipy.linalg import matrix_balance

    _, (scale, _) = matrix_balance(g.A, permute=False, separate=True)
    return g.similarity(np.diag(scale), np.diag(1.0 / scale))


def balanced_truncation(g: StateSpace, tol: float = 1e-10):
    """Remove states whose Hankel singular values are below ``tol * max``.

    Returns the reduced model and the twice-the-tail error bound on the
    H-infinity norm of the difference.
    """
    from scipy import linalg

    if not is_stable(g):
        raise UnstableSystemError("balanced truncation needs a stable system")
    if g.n_states == 0:
        return g, 0.0
    if g.is_discrete:
        P = linalg.solve_discrete_lyapunov(g.A, g.B @ g.B.T)
        Q = linalg.solve_discrete_lyapunov(g.A.T, g.C.T @ g.C)
    else:
        P = linalg.solve_continuous_lyapunov(g.A, -g.B @ g.B.T)
        Q = linalg.solve_continuous_lyapunov(g.A.T, -g.C.T @ g.C)
    # square-root method with eigen-based factors (semi-definite safe)
    def factor(M):
        w, V = np.linalg.eigh((M + M.T) / 2)
        return V * np.sqrt(np.clip(w, 0.0, None))

    Lp, Lq = factor(P), factor(Q)
    U, hsv, Vt = np.linalg.svd(Lq.T @ Lp)
    keep = int(np.sum(hsv > tol * max(hsv[0], np.finfo(float).tiny)))
    if keep == 0:
        return static_gain(g.D, g.dt), 2.0 * float(hsv.sum())
    s = np.sqrt(hsv[:keep])
    T = Lp @ Vt[:keep].T / s
    Ti = (U[:, :keep] / s).T @ Lq.T
    red = StateSpace(Ti @ g.A @ T, Ti @ g.B, g.C @ T, g.D, g.dt)
    return red, 2.0 * float(hsv[keep:].sum())


def _stack(systems: Sequence[StateSpace]) -> StateSpace:
    """Vertical stack of systems sharing one input vector."""
    gd = block_diagonal(*systems)
    m = systems[0].n_inputs
    shared = np.vstack([np.eye(m)] * len(systems))
    return StateSpace(gd.A, gd.B @ shared, gd.C, gd.D @ shared, gd.dt)
