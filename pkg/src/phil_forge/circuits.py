"""Circuit models of the grid side, the amplified device and their direct coupling.

All three models are continuous-time and single-phase.  The grid side is a
Thevenin source ``V_grid`` behind ``Z1(s) = R1 + L1 s``, loaded by a shunt
resistor ``R_j`` in parallel with the controlled current source ``J_B``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NonProperError
from .lti import (
    StateSpace,
    TransferFunction,
    balance_states,
    balanced_truncation,
    is_stable,
    realize_tf,
    static_gain,
)

__all__ = [
    "AMPLIFIER_NUM",
    "AMPLIFIER_DEN",
    "DelaySpec",
    "PhilScenario",
    "GridImpedance",
    "grid_impedance_from_scr",
    "build_ros",
    "build_dut",
    "build_ref",
]

# Identified amplifier model, 6.221e9 / (s^2 + 1.255e5 s + 6.099e9)
AMPLIFIER_NUM = (6.221e9,)
AMPLIFIER_DEN = (1.0, 1.255e5, 6.099e9)


@dataclass(frozen=True)
class DelaySpec:
    """Integer sample delays of the interface loop.

    ``meas_delay_steps`` follows the measurement order ``(V1, Vc, I1, Id)``;
    ``act_delay_steps`` follows ``(V, J_B)``.  ``ros_act_extra`` is added on
    ``J_B`` to break the algebraic loop through the grid simulation.
    """

    meas_delay_steps: tuple = (1, 1, 1, 1)
    act_delay_steps: tuple = (1, 0)
    ros_act_extra: int = 1

    def __post_init__(self):
        meas = tuple(int(k) for k in self.meas_delay_steps)
        act = tuple(int(k) for k in self.act_delay_steps)
        if len(meas) != 4 or len(act) != 2:
            raise ValueError("need 4 measurement delays and 2 actuation delays")
        if min(meas + act) < 0:
            raise ValueError("delays must be nonnegative")
        if int(self.ros_act_extra) < 1:
            raise ValueError("ros_act_extra must be at least 1")
        object.__setattr__(self, "meas_delay_steps", meas)
        object.__setattr__(self, "act_delay_steps", act)
        object.__setattr__(self, "ros_act_extra", int(self.ros_act_extra))

    @property
    def jb_total(self) -> int:
        return self.act_delay_steps[1] + self.ros_act_extra


@dataclass(frozen=True)
class PhilScenario:
    v_grid_rms: float = 120.0
    f0: float = 60.0
    shunt_resistance: float = 1000.0
    dut_resistance: float = 24.0
    scr: float = 1.0
    xr_ratio: float = 1.0
    amplifier_num: tuple = AMPLIFIER_NUM
    amplifier_den: tuple = AMPLIFIER_DEN
    sample_time: float = 50e-6
    delays: DelaySpec = field(default_factory=DelaySpec)

    def __post_init__(self):
        for name in ("v_grid_rms", "f0", "shunt_resistance", "dut_resistance",
                     "scr", "sample_time"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value}")
        if not (np.isfinite(self.xr_ratio) and self.xr_ratio >= 0):
            raise ValueError(f"xr_ratio must be nonnegative, got {self.xr_ratio}")
        num = tuple(float(c) for c in self.amplifier_num)
        den = tuple(float(c) for c in self.amplifier_den)
        if len(np.trim_zeros(num, "f")) > len(np.trim_zeros(den, "f")):
            raise NonProperError("amplifier numerator degree exceeds denominator degree")
        object.__setattr__(self, "amplifier_num", num)
        object.__setattr__(self, "amplifier_den", den)

    @property
    def rated_power(self) -> float:
        """Per-phase rating of the resistive device, ``V^2 / R2``."""
        return self.v_grid_rms ** 2 / self.dut_resistance

    def with_scr(self, scr: float) -> "PhilScenario":
        return replace(self, scr=scr)


@dataclass(frozen=True)
class GridImpedance:
    R1: float
    L1: float

    def __call__(self, s):
        return self.R1 + self.L1 * s


def grid_impedance_from_scr(scenario: PhilScenario) -> GridImpedance:
    """Split the nominal grid impedance ``|Z| = V^2 / (S P_rated)`` by the X/R ratio."""
    z_mag = scenario.v_grid_rms ** 2 / (scenario.scr * scenario.rated_power)
    R1 = z_mag / math.sqrt(1.0 + scenario.xr_ratio ** 2)
    L1 = R1 * scenario.xr_ratio / (2.0 * math.pi * scenario.f0)
    return GridImpedance(R1, L1)


def _negligible_inductance(L, R, Ts) -> bool:
    # past 1e9 * 2/Ts the Tustin image of the pole is within 1e-9 of z = -1;
    # such a branch is replaced by its static limit
    return L == 0.0 or R * Ts > 2e9 * L


def build_ros(scenario: PhilScenario, z1: GridImpedance) -> StateSpace:
    """Grid side: inputs ``(V_grid, J_B)``, outputs ``(V1, I1)``.

    The state is the current through ``Z1``; ``V1 = R_j (I1 - J_B)``.
    """
    Rj = scenario.shunt_resistance
    R_tot = Rj + z1.R1
    if _negligible_inductance(z1.L1, R_tot, scenario.sample_time):
        return static_gain(np.array([[Rj, -Rj * z1.R1], [1.0, Rj]]) / R_tot)
    L1 = z1.L1
    return StateSpace([[-R_tot / L1]], [[1.0 / L1, Rj / L1]], [[Rj], [1.0]],
                      [[0.0, -Rj], [0.0, 0.0]])


def build_dut(scenario: PhilScenario) -> StateSpace:
    """Amplifier and resistive device: input ``V``, outputs ``(Vc, Id)``."""
    amp = realize_tf(TransferFunction(scenario.amplifier_num, scenario.amplifier_den))
    # canonical form of the identified model has entries near 1e10
    amp = balanced_truncation(amp, 1e-10)[0] if is_stable(amp) else balance_states(amp)
    out = np.array([[1.0], [1.0 / scenario.dut_resistance]])
    return StateSpace(amp.A, amp.B, out @ amp.C, out @ amp.D)


def build_ref(scenario: PhilScenario, z1: GridImpedance) -> StateSpace:
    """Direct coupling of grid and device loads: input ``V_grid``, outputs ``(V_ref, I_ref)``."""
    R2 = scenario.dut_resistance
    if _negligible_inductance(z1.L1, R2 + z1.R1, scenario.sample_time):
        return static_gain(np.array([[R2], [1.0]]) / (R2 + z1.R1))
    L1 = z1.L1
    return StateSpace([[-(R2 + z1.R1) / L1]], [[1.0 / L1]], [[R2], [1.0]],
                      [[0.0], [0.0]])
