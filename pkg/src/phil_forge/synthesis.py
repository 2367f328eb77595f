"""Discrete-time H-infinity synthesis and closed-loop validation.

The discrete plant is mapped to a continuous surrogate by the inverse
bilinear transform, which carries the unit disk onto the left half-plane
and leaves the H-infinity norm of every interconnection unchanged.  The
surrogate problem is solved with the two-Riccati central controller for a
general ``D11`` (Zhou, Doyle and Glover, *Robust and Optimal Control*,
ch. 17), and the controller is mapped back with the same bilinear map.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import lti
from .discretize import bilinear, bilinear_inverse
from .errors import (
    DimensionMismatchError,
    GammaInfeasibleError,
    IterationDivergedError,
    NoStabilizingSolutionError,
    NotDetectableError,
    NotStabilizableError,
    RankDeficientD12Error,
    RankDeficientD21Error,
    RiccatiDivergenceError,
)
from .lti import PartitionedPlant, StateSpace
from .riccati import solve_care

__all__ = [
    "SynthesisOptions",
    "ControllerRealization",
    "ValidationReport",
    "synthesize",
    "gamma_feasible",
    "validate_closed_loop",
]


@dataclass(frozen=True)
class SynthesisOptions:
    gamma_lo: float = 1e-2
    gamma_hi: float = 1e4
    gamma_rel_tol: float = 1e-3
    riccati_tol: float = 1e-8
    max_iters: int = 200
    bracket_expansions: int = 3
    # bilinear constant of the continuous surrogate, s = alpha (z-1)/(z+1)
    surrogate_alpha: float = 1.0
    reduce_order: bool = False

    def __post_init__(self):
        if not 0 < self.gamma_lo < self.gamma_hi:
            raise ValueError("need 0 < gamma_lo < gamma_hi")
        if self.gamma_rel_tol <= 0 or self.riccati_tol <= 0 or self.max_iters < 1:
            raise ValueError("tolerances and max_iters must be positive")


@dataclass(frozen=True, eq=False)
class ControllerRealization:
    sys: StateSpace
    gamma_achieved: float
    synthesis_report: dict = field(default_factory=dict)


# ----------------------------------------------------------------------------
# surrogate problem preparation


@dataclass
class _Normalized:
    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    D11: np.ndarray
    u_map: np.ndarray  # u = u_map @ u_normalized
    y_map: np.ndarray  # y_normalized = y_map @ y

    @property
    def dims(self):
        return (self.B1.shape[1], self.B2.shape[1], self.C1.shape[0], self.C2.shape[0])


def _normalize(A, B1, B2, C1, C2, D11, D12, D21, tol=1e-10):
    p1, m2 = D12.shape
    p2, m1 = D21.shape
    if p1 < m2 or np.linalg.matrix_rank(D12, tol * max(1.0, np.abs(D12).max())) < m2:
        raise RankDeficientD12Error("D12 must have full column rank")
    if m1 < p2 or np.linalg.matrix_rank(D21, tol * max(1.0, np.abs(D21).max())) < p2:
        raise RankDeficientD21Error("D21 must have full row rank")
    Q, R = np.linalg.qr(D12, mode="complete")
    Uz = np.hstack([Q[:, m2:], Q[:, :m2]])
    R12 = R[:m2]
    Q2, R2 = np.linalg.qr(D21.T, mode="complete")
    Uw = np.hstack([Q2[:, p2:], Q2[:, :p2]])
    R21 = R2[:p2]
    R12i = np.linalg.inv(R12)
    R21ti = np.linalg.inv(R21.T)
    return _Normalized(A=A, B1=B1 @ Uw, B2=B2 @ R12i, C1=Uz.T @ C1,
                       C2=R21ti @ C2, D11=Uz.T @ D11 @ Uw,
                       u_map=R12i, y_map=R21ti)


def _d11_bound(N: _Normalized) -> float:
    m1, m2, p1, p2 = N.dims
    D = N.D11
    top = D[:p1 - m2, :]
    left = D[:, :m1 - p2]
    b1 = np.linalg.norm(top, 2) if top.size else 0.0
    b2 = np.linalg.norm(left, 2) if left.size else 0.0
    return max(b1, b2)


@dataclass
class _Solution:
    gamma: float
    X: np.ndarray
    Y: np.ndarray
    res_x: float
    res_y: float
    rho: float


def _riccati_pair(N: _Normalized, gamma: float, tol: float):
    """Solve both H-infinity Riccati equations at ``gamma``.

    Returns ``(solution, reason)``; ``solution`` is ``None`` when ``gamma``
    is infeasible and ``reason`` tells why.
    """
    m1, m2, p1, p2 = N.dims
    n = N.A.shape[0]
    if gamma <= _d11_bound(N) * (1 + 1e-12):
        return None, "d11"
    D12 = np.vstack([np.zeros((p1 - m2, m2)), np.eye(m2)])
    D21 = np.hstack([np.zeros((p2, m1 - p2)), np.eye(p2)])
    D1s = np.hstack([N.D11, D12])
    Ds1 = np.vstack([N.D11, D21])
    R = D1s.T @ D1s
    R[:m1, :m1] -= gamma ** 2 * np.eye(m1)
    Rt = Ds1 @ Ds1.T
    Rt[:p1, :p1] -= gamma ** 2 * np.eye(p1)
    B = np.hstack([N.B1, N.B2])
    C = np.vstack([N.C1, N.C2])
    if n == 0:
        X = Y = np.zeros((0, 0))
        return _Solution(gamma, X, Y, 0.0, 0.0, 0.0), "ok"
    try:
        X, rx = solve_care(N.A, B, N.C1.T @ N.C1, R, N.C1.T @ D1s, tol=tol)
        Y, ry = solve_care(N.A.T, C.T, N.B1 @ N.B1.T, Rt, N.B1 @ Ds1.T, tol=tol)
    except (NoStabilizingSolutionError, IterationDivergedError, np.linalg.LinAlgError):
        return None, "riccati"
    for M, r in ((X, rx), (Y, ry)):
        if r > tol * max(np.linalg.norm(M), 1.0):
            return None, "residual"
        if np.min(np.linalg.eigvalsh(M)) < -1e-9 * max(np.linalg.norm(M, 2), 1.0):
            return None, "indefinite"
    rho = float(np.max(np.abs(np.linalg.eigvals(X @ Y))))
    if rho >= gamma ** 2 * (1 - 1e-9):
        return None, "coupling"
    return _Solution(gamma, X, Y, rx, ry, rho), "ok"


def _central_controller(N: _Normalized, sol: _Solution) -> StateSpace:
    m1, m2, p1, p2 = N.dims
    n = N.A.shape[0]
    g2 = sol.gamma ** 2
    D12 = np.vstack([np.zeros((p1 - m2, m2)), np.eye(m2)])
    D21 = np.hstack([np.zeros((p2, m1 - p2)), np.eye(p2)])
    D1s = np.hstack([N.D11, D12])
    Ds1 = np.vstack([N.D11, D21])
    R = D1s.T @ D1s
    R[:m1, :m1] -= g2 * np.eye(m1)
    Rt = Ds1 @ Ds1.T
    Rt[:p1, :p1] -= g2 * np.eye(p1)
    B = np.hstack([N.B1, N.B2])
    C = np.vstack([N.C1, N.C2])
    X, Y = sol.X, sol.Y

    F = -np.linalg.solve(R, D1s.T @ N.C1 + B.T @ X)
    L = -np.linalg.solve(Rt.T, (N.B1 @ Ds1.T + Y @ C.T).T).T
    F2 = F[m1:]
    F12 = F[m1 - p2:m1]
    L2 = L[:, p1:]
    L12 = L[:, p1 - m2:p1]

    k1, k2 = p1 - m2, m1 - p2
    D1111 = N.D11[:k1, :k2]
    D1112 = N.D11[:k1, k2:]
    D1121 = N.D11[k1:, :k2]
    D1122 = N.D11[k1:, k2:]
    W1 = np.linalg.inv(g2 * np.eye(k1) - D1111 @ D1111.T)
    W2 = np.linalg.inv(g2 * np.eye(k2) - D1111.T @ D1111)
    Dh11 = -D1121 @ D1111.T @ W1 @ D1112 - D1122
    Dh12 = np.linalg.cholesky(np.eye(m2) - D1121 @ W2 @ D1121.T)
    Dh21 = np.linalg.cholesky(np.eye(p2) - D1112.T @ W1 @ D1112).T

    Z = np.linalg.inv(np.eye(n) - Y @ X / g2)
    Bh2 = Z @ (N.B2 + L12) @ Dh12
    Ch2 = -Dh21 @ (N.C2 + F12)
    Bh1 = -Z @ L2 + Bh2 @ np.linalg.solve(Dh12, Dh11)
    Ch1 = F2 + Dh11 @ np.linalg.solve(Dh21, Ch2)
    Ah = N.A + B @ F + Bh1 @ np.linalg.solve(Dh21, Ch2)
    return StateSpace(Ah, Bh1, Ch1, Dh11, None)


def _undo_normalization(K: StateSpace, N: _Normalized) -> StateSpace:
    # u = u_map u', y' = y_map y
    return StateSpace(K.A, K.B @ N.y_map, N.u_map @ K.C, N.u_map @ K.D @ N.y_map, K.dt)


def _restore_d22(K: StateSpace, D22: np.ndarray) -> StateSpace:
    """Controller for the plant with feedthrough ``D22`` from one designed without it."""
    if not np.any(D22):
        return K
    M = np.linalg.inv(np.eye(K.n_outputs) + K.D @ D22)
    Ck = M @ K.C
    Dk = M @ K.D
    return StateSpace(K.A - K.B @ D22 @ Ck, K.B - K.B @ D22 @ Dk, Ck, Dk, K.dt)


def _pbh_check(A, M, side, tol=1e-9):
    """PBH rank test on the non-strictly-stable discrete modes."""
    n = A.shape[0]
    for lam in np.linalg.eigvals(A) if n else []:
        if abs(lam) < 1.0 - tol:
            continue
        if side == "input":
            test = np.hstack([A - lam * np.eye(n), M])
        else:
            test = np.vstack([A - lam * np.eye(n), M])
        if np.linalg.matrix_rank(test, 1e-9 * max(1.0, np.abs(test).max())) < n:
            return False
    return True


def _p12_is_zero(A, B2, C1, D12):
    if np.any(D12):
        return False
    M = B2
    for _ in range(max(A.shape[0], 1)):
        if np.any(np.abs(C1 @ M) > 1e-14 * max(1.0, np.abs(C1).max())):
            return False
        M = A @ M
    return True


def _balanced(N: _Normalized, tol=1e-14) -> _Normalized:
    """Balanced coordinates for the surrogate.

    Without this the two Riccati solutions can differ in scale by many
    orders of magnitude and ``I - Y X / gamma^2`` becomes numerically
    singular long before the coupling condition is reached.
    """
    m1, p1 = N.B1.shape[1], N.C1.shape[0]
    B = np.hstack([N.B1, N.B2])
    C = np.vstack([N.C1, N.C2])
    g = StateSpace(N.A, B, C, np.zeros((C.shape[0], B.shape[1])))
    red, _ = lti.balanced_truncation(g, tol)
    return _Normalized(red.A, red.B[:, :m1], red.B[:, m1:], red.C[:p1], red.C[p1:],
                       N.D11, N.u_map, N.y_map)


class _Problem:
    """Surrogate problem ready for gamma iteration."""

    def __init__(self, plant: PartitionedPlant, opts: SynthesisOptions):
        self.plant = plant
        self.opts = opts
        cont = bilinear_inverse(plant.sys, alpha=opts.surrogate_alpha)
        P = PartitionedPlant(cont, plant.n_w, plant.n_u, plant.n_z, plant.n_y)
        A, B1, B2, C1, C2, D11, D12, D21, D22 = P.blocks()
        self.D22 = D22.copy()
        N = _normalize(A, B1, B2, C1, C2, D11, D12, D21)
        self.N = _balanced(N) if lti.is_stable(cont) else N

    def feasible(self, gamma):
        return _riccati_pair(self.N, gamma, self.opts.riccati_tol)

    def controller(self, sol: _Solution) -> StateSpace:
        Kn = _central_controller(self.N, sol)
        Kc = _restore_d22(_undo_normalization(Kn, self.N), self.D22)
        return bilinear(Kc, self.plant.sys.dt, alpha=self.opts.surrogate_alpha)


def gamma_feasible(plant: PartitionedPlant, gamma: float,
                   opts: SynthesisOptions | None = None) -> bool:
    """Whether the Riccati conditions admit a controller achieving ``gamma``."""
    opts = SynthesisOptions() if opts is None else opts
    sol, _ = _Problem(plant, opts).feasible(gamma)
    return sol is not None


def synthesize(plant: PartitionedPlant, opts: SynthesisOptions | None = None) -> ControllerRealization:
    """Suboptimal H-infinity controller by bisection on gamma.

    The returned controller stabilizes ``plant`` and its closed-loop norm,
    checked independently by frequency sweep, is at most
    ``gamma_achieved * (1 + gamma_rel_tol)``.
    """
    opts = SynthesisOptions() if opts is None else opts
    if not plant.sys.is_discrete:
        raise DimensionMismatchError("synthesize expects a discrete-time plant")
    A, B1, B2, C1, C2, D11, D12, D21, D22 = plant.blocks()
    dt = plant.sys.dt

    if _p12_is_zero(A, B2, C1, D12) and lti.is_stable(plant.sys):
        K = lti.static_gain(np.zeros((plant.n_u, plant.n_y)), dt)
        gamma = lti.hinf_norm(lti.lft_lower(plant, K), rel_tol=opts.gamma_rel_tol)
        return ControllerRealization(K, gamma, {"trivial": True, "history": []})

    if not _pbh_check(A, B2, "input"):
        raise NotStabilizableError("(A, B2) has an uncontrollable unstable mode")
    if not _pbh_check(A, C2, "output"):
        raise NotDetectableError("(C2, A) has an unobservable unstable mode")

    prob = _Problem(plant, opts)
    history = []
    reasons = []

    def test(gamma):
        sol, why = prob.feasible(gamma)
        history.append((float(gamma), sol is not None))
        reasons.append(why)
        return sol

    lo = max(opts.gamma_lo, _d11_bound(prob.N))
    hi = opts.gamma_hi
    best = test(hi)
    expansions = 0
    while best is None and expansions < opts.bracket_expansions:
        lo, hi = hi, hi * 10.0
        expansions += 1
        best = test(hi)
    if best is None:
        if "residual" in reasons:
            raise RiccatiDivergenceError("Riccati residual bound failed at every gamma tried")
        raise GammaInfeasibleError(f"no feasible gamma up to {hi:g}")
    it = 0
    if lo < hi:
        sol = test(lo)
        if sol is not None:
            # the bracket floor is already achievable
            best, hi = sol, lo
    while hi / lo - 1.0 > opts.gamma_rel_tol and it < opts.max_iters:
        mid = math.sqrt(lo * hi)
        sol = test(mid)
        if sol is None:
            lo = mid
        else:
            hi, best = mid, sol
        it += 1

    # Numerical safety: back off gamma until the realized controller verifies.
    tries = []
    gamma = hi
    for _ in range(8):
        K = prob.controller(best)
        cl = lti.lft_lower(plant, K)
        stable = lti.is_stable(cl)
        norm = lti.hinf_norm(cl, rel_tol=1e-4) if stable else math.inf
        tries.append({"gamma": gamma, "stable": stable, "norm": norm})
        if stable and norm <= gamma * (1.0 + opts.gamma_rel_tol):
            break
        gamma *= 1.0 + 10.0 * opts.gamma_rel_tol
        best = None
        while best is None:
            best = test(gamma)
            if best is None:
                gamma *= 1.0 + 10.0 * opts.gamma_rel_tol
    else:
        raise GammaInfeasibleError("could not realize a verified controller near the optimum")

    reduction_bound = 0.0
    if opts.reduce_order and lti.is_stable(K):
        K, reduction_bound = lti.balanced_truncation(K, 1e-6)

    report = {
        "history": history,
        "iterations": it,
        "bracket_expansions": expansions,
        "riccati_residuals": (best.res_x, best.res_y),
        "spectral_radius_XY": best.rho,
        "verification": tries,
        "closed_loop_norm": tries[-1]["norm"],
        "reduction_error_bound": reduction_bound,
        "trivial": False,
    }
    return ControllerRealization(K, float(gamma), report)


# ----------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    stable: bool
    f_max: float
    frequencies_hz: np.ndarray
    channel_gain_db: dict | None  # (z_name, w_name) -> max gain in dB up to f_max
    channel_curves_db: dict | None  # (z_name, w_name) -> gain in dB per frequency
    hinf_norm: float | None
    violations: list

    @property
    def passed(self) -> bool:
        return self.stable and not self.violations


def _controller_sys(K):
    return K.sys if isinstance(K, ControllerRealization) else K


def validate_closed_loop(plant: PartitionedPlant, K, f_max: float = 1000.0,
                         n_points: int = 500, f_min: float | None = None) -> ValidationReport:
    """Check stability and that every closed-loop channel stays below 0 dB up to ``f_max``."""
    Ks = _controller_sys(K)
    if Ks.n_inputs != plant.n_y or Ks.n_outputs != plant.n_u:
        raise DimensionMismatchError("controller does not fit the plant partition")
    cl = lti.lft_lower(plant, Ks)
    dt = plant.sys.dt
    f_min = f_max * 1e-4 if f_min is None else f_min
    freqs = np.concatenate([[0.0], np.logspace(np.log10(f_min), np.log10(f_max), n_points)])
    if not lti.is_stable(cl):
        return ValidationReport(False, f_max, freqs, None, None, None, [])
    G = lti.freq_response(cl, 2 * np.pi * freqs * dt)
    gains = 20 * np.log10(np.maximum(np.abs(G), 1e-300))
    peak, curves, violations = {}, {}, []
    for i, zn in enumerate(plant.z_names):
        for j, wn in enumerate(plant.w_names):
            key = (zn, wn)
            curves[key] = gains[:, i, j]
            peak[key] = float(gains[:, i, j].max())
            if peak[key] >= 0.0:
                violations.append(key)
    return ValidationReport(True, f_max, freqs, peak, curves, lti.hinf_norm(cl), violations)
