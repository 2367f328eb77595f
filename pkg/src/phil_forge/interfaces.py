"""Interface algorithms acting on physical measurements.

Every interface is a discrete model with inputs ``(V1, Vc, I1, Id)`` and
outputs ``(V, J_B)``.  Loop delays belong to the plant, not to the
interface.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import CutoffAboveNyquistError, DimensionMismatchError
from .lti import StateSpace
from .plant import ACT_NAMES, MEAS_NAMES, ScalingSpec, lowpass
from .synthesis import ControllerRealization

__all__ = ["InterfaceKind", "InterfaceAlgorithm", "itm_interface", "wrap_scaled_controller"]

ITM_DEFAULT_CUTOFF = 140.0


class InterfaceKind(enum.Enum):
    ITM = "itm"
    HINF = "hinf"


@dataclass(frozen=True, eq=False)
class InterfaceAlgorithm:
    kind: InterfaceKind
    realization: StateSpace
    filter_cutoff: float | None = None
    controller: ControllerRealization | None = None

    def __post_init__(self):
        r = self.realization
        if not r.is_discrete:
            raise ValueError("interface realization must be discrete")
        if r.n_inputs != len(MEAS_NAMES) or r.n_outputs != len(ACT_NAMES):
            raise DimensionMismatchError(
                f"interface must map {len(MEAS_NAMES)} measurements to "
                f"{len(ACT_NAMES)} actuations, got {r.n_outputs}x{r.n_inputs}")

    @property
    def sample_time(self) -> float:
        return self.realization.dt

    @property
    def label(self) -> str:
        return self.kind.value


def itm_interface(filter_cutoff: float = ITM_DEFAULT_CUTOFF, Ts: float = 50e-6) -> InterfaceAlgorithm:
    """Voltage-type ideal transformer method.

    ``V`` follows ``V1`` with unit gain and ``J_B`` is a first-order
    low-passed copy of ``Id``.  The single state belongs to the filter.
    """
    if not 0.0 < filter_cutoff < 0.5 / Ts:
        raise CutoffAboveNyquistError(
            f"ITM cutoff {filter_cutoff} Hz must lie in (0, {0.5 / Ts} Hz)")
    lp = lowpass(filter_cutoff, Ts)
    # columns follow (V1, Vc, I1, Id)
    B = np.zeros((1, 4))
    B[:, 3] = lp.B[:, 0]
    C = np.zeros((2, 1))
    C[1] = lp.C[0]
    D = np.zeros((2, 4))
    D[0, 0] = 1.0
    D[1, 3] = lp.D[0, 0]
    return InterfaceAlgorithm(InterfaceKind.ITM, StateSpace(lp.A, B, C, D, Ts),
                              filter_cutoff=float(filter_cutoff))


def wrap_scaled_controller(K: ControllerRealization, scaling: ScalingSpec | None = None) -> InterfaceAlgorithm:
    """Express a controller designed on normalized signals in physical units.

    Measurements are multiplied by their reciprocal bounds before entering
    ``K`` and the normalized actuation is multiplied by the actuation bounds.
    """
    scaling = ScalingSpec() if scaling is None else scaling
    g = K.sys if isinstance(K, ControllerRealization) else K
    if g.n_inputs != len(scaling.y_scales) or g.n_outputs != len(scaling.u_scales):
        raise DimensionMismatchError("controller ports do not match the scaling spec")
    dy = np.asarray(scaling.y_scales)
    du = np.asarray(scaling.u_scales)
    wrapped = g.scale(out_scale=du, in_scale=dy)
    controller = K if isinstance(K, ControllerRealization) else None
    return InterfaceAlgorithm(InterfaceKind.HINF, wrapped, controller=controller)
