"""Fixed-step co-simulation of the interfaced loop and the SCR sweep.

The three phases are independent replicas of the single-phase loop driven
by phase-shifted sources; they are stepped together as three columns of
one state matrix.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .circuits import PhilScenario
from .errors import (
    BracketInvalidError,
    DimensionMismatchError,
    EmptyTraceError,
    NonFiniteStateError,
    PhilForgeError,
)
from .interfaces import ITM_DEFAULT_CUTOFF, InterfaceAlgorithm, itm_interface
from .lti import PartitionedPlant, StateSpace, lft_lower
from .plant import ACT_NAMES, PHYSICAL_OUTPUTS, physical_interconnection

__all__ = [
    "SIGNAL_NAMES",
    "PHASES",
    "SIGNAL_BOUNDS",
    "SimTrace",
    "AccuracyMetrics",
    "SweepRow",
    "three_phase_source",
    "closed_loop_system",
    "run_closed_loop",
    "accuracy_metrics",
    "sweep_scr",
    "find_itm_threshold",
]

SIGNAL_NAMES = ("V_grid", "V1", "I1", "Vc", "Id", "V", "J_B", "V_ref", "I_ref")
PHASES = ("a", "b", "c")

# magnitudes of the normalization table; divergence is declared at a
# multiple of these
SIGNAL_BOUNDS = {
    "V_grid": 120.0, "V1": 120.0, "Vc": 120.0, "V_ref": 120.0,
    "I1": 10.0, "Id": 10.0, "I_ref": 10.0,
    "V": 200.0, "J_B": 15.0,
}
DIVERGENCE_FACTOR = 50.0


def n_samples(duration: float, Ts: float) -> int:
    if duration < 0:
        raise ValueError("duration must be nonnegative")
    # round first so that 1.0 / 50e-6 counts as 20000 samples
    return int(math.ceil(round(duration / Ts, 9)))


def three_phase_source(v_rms: float, f0: float, Ts: float, duration: float) -> np.ndarray:
    """Balanced sinusoidal source, shape ``(3, N)``; phase ``k`` lags by ``2 pi k / 3``."""
    if v_rms <= 0 or f0 <= 0 or Ts <= 0:
        raise ValueError("source parameters must be positive")
    t = np.arange(n_samples(duration, Ts)) * Ts
    shift = 2.0 * np.pi * np.arange(3)[:, None] / 3.0
    return v_rms * math.sqrt(2.0) * np.sin(2.0 * np.pi * f0 * t[None, :] - shift)


@dataclass
class SimTrace:
    sample_time: float
    f0: float
    signals: dict  # name -> (3, N) array, rows follow PHASES
    diverged: bool = False
    divergence_index: int | None = None
    phases: tuple = PHASES

    @property
    def n_samples(self) -> int:
        return self.signals["V_grid"].shape[1]

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.sample_time

    def __getitem__(self, name) -> np.ndarray:
        return self.signals[name]


@dataclass(frozen=True)
class AccuracyMetrics:
    stable: bool
    ss_rms_eV: float = math.nan
    ss_rms_eI: float = math.nan
    ss_rms_tV: float = math.nan
    ss_rms_tI: float = math.nan
    peak_eV: float = math.nan
    peak_eI: float = math.nan


def closed_loop_system(plant: PartitionedPlant, interface: StateSpace) -> StateSpace:
    """Map ``V_grid -> (z..., V, J_B)`` of the interfaced physical loop.

    The actuation commands are exposed by appending pass-through rows to
    the performance block before closing the loop.
    """
    A, B1, B2, C1, C2, D11, D12, D21, D22 = plant.blocks()
    nu = plant.n_u
    Cz = np.vstack([C1, np.zeros((nu, A.shape[0]))])
    Dz = np.block([[D11, D12], [np.zeros((nu, plant.n_w)), np.eye(nu)]])
    sys = StateSpace(A, plant.sys.B, np.vstack([Cz, C2]),
                     np.vstack([Dz, plant.sys.D[plant.n_z:]]), plant.sys.dt)
    aug = PartitionedPlant(sys, n_w=plant.n_w, n_u=nu, n_z=plant.n_z + nu, n_y=plant.n_y)
    return lft_lower(aug, interface)


def run_closed_loop(scenario: PhilScenario, interface: InterfaceAlgorithm,
                    duration: float = 1.0, divergence_factor: float = DIVERGENCE_FACTOR,
                    v_grid: np.ndarray | None = None) -> SimTrace:
    """Step the interfaced loop for all three phases.

    The run stops at the first sample where any signal exceeds
    ``divergence_factor`` times its bound; later samples are NaN and the
    trace is flagged as diverged.  ``v_grid`` overrides the source with a
    ``(3, N)`` array.

    Raises
    ------
    NonFiniteStateError
        If the state becomes non-finite before the bound check fires (for
        instance with ``divergence_factor=inf``).
    """
    Ts = scenario.sample_time
    if not math.isclose(interface.sample_time, Ts, rel_tol=1e-12):
        raise ValueError(f"interface runs at {interface.sample_time}, scenario at {Ts}")
    plant = physical_interconnection(scenario)
    cl = closed_loop_system(plant, interface.realization)
    if v_grid is None:
        v_grid = three_phase_source(scenario.v_grid_rms, scenario.f0, Ts, duration)
    v_grid = np.asarray(v_grid, dtype=float)
    if v_grid.ndim != 2 or v_grid.shape[0] != len(PHASES):
        raise DimensionMismatchError("v_grid must have shape (3, N)")
    N = v_grid.shape[1]
    out_names = PHYSICAL_OUTPUTS + ACT_NAMES
    limits = divergence_factor * np.array([SIGNAL_BOUNDS[n] for n in out_names])
    w_limit = divergence_factor * SIGNAL_BOUNDS["V_grid"]

    A, B, C, D = cl.A, cl.B[:, 0], cl.C, cl.D[:, 0]
    Y = np.full((len(out_names), len(PHASES), N), np.nan)
    x = np.zeros((cl.n_states, len(PHASES)))
    diverged, where = False, None
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(N):
            w = v_grid[:, k]
            y = C @ x + np.outer(D, w)
            Y[:, :, k] = y
            if np.any(np.abs(y) > limits[:, None]) or np.any(np.abs(w) > w_limit):
                diverged, where = True, k
                break
            x = A @ x + np.outer(B, w)
            if not np.all(np.isfinite(x)):
                raise NonFiniteStateError(f"state became non-finite after sample {k}", k + 1)

    signals = {"V_grid": v_grid.copy()}
    for i, name in enumerate(out_names):
        signals[name] = Y[i]
    signals = {name: signals[name] for name in SIGNAL_NAMES}
    return SimTrace(Ts, scenario.f0, signals, diverged, where)


def _window(trace: SimTrace, settle_fraction: float) -> slice:
    N = trace.n_samples
    start = int(math.floor(settle_fraction * N))
    periods = math.floor((N - start) * trace.sample_time * trace.f0 + 1e-9)
    if periods >= 1:
        length = int(round(periods / (trace.f0 * trace.sample_time)))
        start = max(N - length, 0)
    return slice(start, N)


def _rms(x) -> float:
    return float(np.sqrt(np.mean(np.square(x), axis=-1)).max())


def accuracy_metrics(trace: SimTrace, settle_fraction: float = 0.5) -> AccuracyMetrics:
    """Steady-state accuracy and transparency errors, worst phase.

    The window is the final ``1 - settle_fraction`` of the run, shortened
    to a whole number of fundamental periods when at least one fits.
    """
    if trace.n_samples == 0:
        raise EmptyTraceError("trace has no samples")
    if not 0.0 <= settle_fraction < 1.0:
        raise ValueError("settle_fraction must lie in [0, 1)")
    if trace.diverged:
        return AccuracyMetrics(False)
    s = trace.signals
    win = _window(trace, settle_fraction)
    eV = (s["V1"] - s["Vc"])[:, win]
    eI = (s["I1"] - s["Id"])[:, win]
    tV = max(_rms((s["V1"] - s["V_ref"])[:, win]), _rms((s["Vc"] - s["V_ref"])[:, win]))
    tI = max(_rms((s["I1"] - s["I_ref"])[:, win]), _rms((s["Id"] - s["I_ref"])[:, win]))
    return AccuracyMetrics(True, _rms(eV), _rms(eI), tV, tI,
                           float(np.abs(eV).max()), float(np.abs(eI).max()))


@dataclass(frozen=True)
class SweepRow:
    scr: float
    stable: bool
    metrics: AccuracyMetrics
    error: str | None = None
    trace: SimTrace | None = field(default=None, repr=False, compare=False)


def _thread_count(n_jobs: int) -> int:
    cap = os.environ.get("PHIL_FORGE_THREADS")
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = max(1, int(cap))
        except ValueError:
            pass
    return max(1, min(limit, n_jobs))


def _sweep_row(template, interface, scr, duration, settle_fraction, keep_trace):
    try:
        trace = run_closed_loop(template.with_scr(scr), interface, duration)
    except (PhilForgeError, ValueError) as exc:
        return SweepRow(scr, False, AccuracyMetrics(False), f"{type(exc).__name__}: {exc}")
    if trace.n_samples == 0:
        return SweepRow(scr, True, AccuracyMetrics(True), None, trace if keep_trace else None)
    metrics = accuracy_metrics(trace, settle_fraction)
    return SweepRow(scr, metrics.stable, metrics, None, trace if keep_trace else None)


def sweep_scr(template: PhilScenario, interface, scr_values, duration: float = 1.0,
              settle_fraction: float = 0.5, keep_traces: bool = False) -> list:
    """Run the loop at every short-circuit ratio with one fixed interface.

    ``interface`` is an :class:`InterfaceAlgorithm` or a factory called once
    with ``template``; it is never redesigned for the swept ratios.  Row
    failures are recorded in :attr:`SweepRow.error` and do not stop the
    sweep.  Parallelism is capped by ``PHIL_FORGE_THREADS``.
    """
    scr_values = [float(s) for s in scr_values]
    if any(not s > 0 for s in scr_values):
        raise ValueError("short-circuit ratios must be positive")
    if not scr_values:
        return []
    if not isinstance(interface, InterfaceAlgorithm):
        interface = interface(template)

    def job(scr):
        return _sweep_row(template, interface, scr, duration, settle_fraction, keep_traces)

    workers = _thread_count(len(scr_values))
    if workers == 1:
        return [job(s) for s in scr_values]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, scr_values))


def _itm_stable(template, interface, scr, duration) -> bool:
    try:
        return not run_closed_loop(template.with_scr(scr), interface, duration).diverged
    except NonFiniteStateError:
        return False


def find_itm_threshold(template: PhilScenario, filter_cutoff: float = ITM_DEFAULT_CUTOFF,
                       S_lo: float = 0.1, S_hi: float = 5.0, tol: float = 0.01,
                       duration: float = 1.0) -> float:
    """Smallest stable short-circuit ratio of the ITM loop, by bisection.

    ``S_lo`` must give a divergent run and ``S_hi`` a bounded one.  Returns
    the midpoint of the final bracket, whose width is at most ``tol``.
    """
    if not 0 < S_lo < S_hi or tol <= 0:
        raise ValueError("need 0 < S_lo < S_hi and tol > 0")
    itm = itm_interface(filter_cutoff, template.sample_time)
    if _itm_stable(template, itm, S_lo, duration):
        raise BracketInvalidError(f"ITM loop is already stable at S = {S_lo}")
    if not _itm_stable(template, itm, S_hi, duration):
        raise BracketInvalidError(f"ITM loop is not stable at S = {S_hi}")
    lo, hi = S_lo, S_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _itm_stable(template, itm, mid, duration):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
