"""Discrete-time generalized plant for interface synthesis and simulation.

The assembler wires the discretized grid, device and reference models with
the loop delays, then folds in channel normalization and frequency weights.
Grid-side and reference models (and all weights) use the bilinear map; the
amplifier and device use zero-order hold.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .circuits import (
    DelaySpec,
    PhilScenario,
    build_dut,
    build_ref,
    build_ros,
    grid_impedance_from_scr,
)
from .discretize import bilinear, zoh
from .errors import AlgebraicLoopError, CutoffAboveNyquistError, DimensionMismatchError
from .lti import PartitionedPlant, StateSpace, block_diagonal, delay_block, static_gain

__all__ = [
    "DelaySpec",
    "PartitionedPlant",
    "ScalingSpec",
    "WeightSpec",
    "Objective",
    "lowpass",
    "highpass",
    "assemble_plant",
    "apply_scaling",
    "physical_interconnection",
    "MEAS_NAMES",
    "ACT_NAMES",
]

MEAS_NAMES = ("V1", "Vc", "I1", "Id")
ACT_NAMES = ("V", "J_B")
NOISE_NAMES = ("nu1", "nu2", "nu3", "nu4")


class Objective(enum.Enum):
    TRANSPARENCY = "transparency"
    ACCURACY = "accuracy"


_ERRORS = {
    Objective.TRANSPARENCY: (("V1", "V_ref"), ("I1", "I_ref"),
                             ("Vc", "V_ref"), ("Id", "I_ref")),
    Objective.ACCURACY: (("V1", "Vc"), ("I1", "Id")),
}


@dataclass(frozen=True)
class ScalingSpec:
    """Channel normalization.

    Input scales are the physical magnitude of a unit normalized input;
    output scales are reciprocal bounds, so a signal at its bound maps to 1.
    ``z_scales`` follows the transparency ordering
    ``(V1-V_ref, I1-I_ref, Vc-V_ref, Id-I_ref, V, J_B)``.
    """

    w_scale: float = 120.0 * math.sqrt(2.0)
    u_scales: tuple = (200.0, 15.0)
    z_scales: tuple = (1 / 6.0, 1 / 0.5, 1 / 6.0, 1 / 0.5, 1 / 200.0, 1 / 15.0)
    y_scales: tuple = (1 / 120.0, 1 / 120.0, 1 / 10.0, 1 / 10.0)

    def __post_init__(self):
        for name, count in (("u_scales", 2), ("z_scales", 6), ("y_scales", 4)):
            vals = tuple(float(v) for v in getattr(self, name))
            if len(vals) != count:
                raise DimensionMismatchError(f"{name} needs {count} entries")
            object.__setattr__(self, name, vals)
        object.__setattr__(self, "w_scale", float(self.w_scale))
        if min((self.w_scale,) + self.u_scales + self.z_scales + self.y_scales) <= 0:
            raise ValueError("all scalings must be strictly positive")

    def z_for(self, objective: Objective) -> tuple:
        if objective is Objective.TRANSPARENCY:
            return self.z_scales
        return (self.z_scales[0], self.z_scales[1]) + self.z_scales[4:]


@dataclass(frozen=True)
class WeightSpec:
    """First-order shaping filters (cutoffs in Hz) and the measurement-noise level."""

    w_filter: float = 1000.0
    error_filters: tuple = (1000.0, 1000.0, 1000.0, 1000.0)
    actuation_filters: tuple = (1000.0, 1000.0)
    noise_weight: float = 1e-4

    def __post_init__(self):
        err = tuple(float(v) for v in self.error_filters)
        act = tuple(float(v) for v in self.actuation_filters)
        if len(err) != 4 or len(act) != 2:
            raise DimensionMismatchError("need 4 error filters and 2 actuation filters")
        object.__setattr__(self, "error_filters", err)
        object.__setattr__(self, "actuation_filters", act)
        if min((self.w_filter,) + err + act) <= 0:
            raise ValueError("filter cutoffs must be strictly positive")
        if self.noise_weight < 0:
            raise ValueError("noise_weight must be nonnegative")

    def check_nyquist(self, Ts: float):
        nyq = 0.5 / Ts
        for name, value in (("w_filter", self.w_filter),
                            *(("error_filters", v) for v in self.error_filters),
                            *(("actuation_filters", v) for v in self.actuation_filters)):
            if value >= nyq:
                raise CutoffAboveNyquistError(
                    f"{name} cutoff {value} Hz is not below Nyquist {nyq} Hz")


def lowpass(cutoff_hz: float, Ts: float, gain: float = 1.0) -> StateSpace:
    """Bilinear image of ``gain * c / (s + c)``, ``c = 2 pi cutoff``."""
    c = 2.0 * math.pi * cutoff_hz
    return bilinear(StateSpace([[-c]], [[c]], [[gain]], [[0.0]]), Ts)


def highpass(cutoff_hz: float, Ts: float, gain: float = 1.0) -> StateSpace:
    """Bilinear image of ``gain * s / (s + c)``."""
    c = 2.0 * math.pi * cutoff_hz
    return bilinear(StateSpace([[-c]], [[c]], [[-gain]], [[gain]]), Ts)


def _wire(blocks, inputs, outputs, dt):
    """Close named-signal connections around a set of blocks.

    ``blocks`` is a list of ``(system, input_specs, output_names)``; every
    input spec is a signal name or a ``{signal: coefficient}`` mapping over
    block outputs and external ``inputs``.  ``outputs`` is a list of specs
    of the same kind.
    """
    systems = [b[0] for b in blocks]
    G = block_diagonal(*systems)
    sig = {}
    for sys_, _, names in blocks:
        if len(names) != sys_.n_outputs:
            raise DimensionMismatchError(f"block outputs {names} do not match system")
        for name in names:
            if name in sig:
                raise ValueError(f"signal {name!r} defined twice")
            sig[name] = len(sig)
    ext = {name: k for k, name in enumerate(inputs)}

    def row(spec):
        spec = {spec: 1.0} if isinstance(spec, str) else spec
        r_sig = np.zeros(len(sig))
        r_ext = np.zeros(len(ext))
        for name, coef in spec.items():
            if name in sig:
                r_sig[sig[name]] += coef
            elif name in ext:
                r_ext[ext[name]] += coef
            else:
                raise KeyError(f"unknown signal {name!r}")
        return r_sig, r_ext

    in_rows = [row(spec) for _, specs, _ in blocks for spec in specs]
    if len(in_rows) != G.n_inputs:
        raise DimensionMismatchError("block input specs do not match systems")
    F = np.array([r[0] for r in in_rows]).reshape(G.n_inputs, len(sig))
    Gin = np.array([r[1] for r in in_rows]).reshape(G.n_inputs, len(ext))
    out_rows = [row(spec) for spec in outputs]
    H = np.array([r[0] for r in out_rows]).reshape(len(outputs), len(sig))
    J = np.array([r[1] for r in out_rows]).reshape(len(outputs), len(ext))

    loop = np.eye(G.n_outputs) - G.D @ F
    if np.linalg.cond(loop) > 1e12:
        raise AlgebraicLoopError("interconnection contains an algebraic loop")
    E = np.linalg.inv(loop)
    A = G.A + G.B @ F @ E @ G.C
    B = G.B @ (F @ E @ G.D @ Gin + Gin)
    C = H @ E @ G.C
    D = H @ E @ G.D @ Gin + J
    return StateSpace(A, B, C, D, dt)


def _components(scenario: PhilScenario):
    Ts = scenario.sample_time
    z1 = grid_impedance_from_scr(scenario)
    ros = bilinear(build_ros(scenario, z1), Ts)
    dut = zoh(build_dut(scenario), Ts)
    ref = bilinear(build_ref(scenario, z1), Ts)
    return ros, dut, ref


def _core_blocks(scenario: PhilScenario, v_source: str, v_cmd, jb_cmd):
    """Grid, device, reference and delay blocks shared by every plant variant."""
    Ts = scenario.sample_time
    dl = scenario.delays
    ros, dut, ref = _components(scenario)
    blocks = [
        (delay_block(dl.act_delay_steps[0], Ts), [v_cmd], ["V_app"]),
        (delay_block(dl.jb_total, Ts), [jb_cmd], ["J_B_app"]),
        (ros, [v_source, "J_B_app"], ["V1", "I1"]),
        (dut, ["V_app"], ["Vc", "Id"]),
        (ref, [v_source], ["V_ref", "I_ref"]),
    ]
    for name, k in zip(MEAS_NAMES, dl.meas_delay_steps):
        blocks.append((delay_block(k, Ts), [name], [f"{name}_meas"]))
    return blocks


def assemble_plant(scenario: PhilScenario, scaling: ScalingSpec | None = None,
                   weights: WeightSpec | None = None,
                   objective: Objective | str = Objective.TRANSPARENCY) -> PartitionedPlant:
    """Normalized, weighted model-matching plant.

    Inputs are ``(V_grid, nu1..nu4, V, J_B)``: the grid voltage, four
    fictitious measurement noises of normalized size ``noise_weight`` and the
    two actuation commands.  Outputs are the weighted performance channels
    of ``objective`` followed by the measurements ``(V1, Vc, I1, Id)``.
    """
    scaling = ScalingSpec() if scaling is None else scaling
    weights = WeightSpec() if weights is None else weights
    objective = Objective(objective)
    Ts = scenario.sample_time
    weights.check_nyquist(Ts)

    blocks = [(lowpass(weights.w_filter, Ts), ["V_grid"], ["Vg"])]
    blocks += _core_blocks(scenario, "Vg", "V", "J_B")
    errors = _ERRORS[objective]
    cutoffs = weights.error_filters[:len(errors)]
    for k, ((a, b), fc) in enumerate(zip(errors, cutoffs)):
        blocks.append((lowpass(fc, Ts), [{a: 1.0, b: -1.0}], [f"e{k}"]))
    for name, fc in zip(ACT_NAMES, weights.actuation_filters):
        blocks.append((highpass(fc, Ts), [name], [f"{name}_hp"]))

    y_scales = scaling.y_scales
    outputs = [f"e{k}" for k in range(len(errors))] + ["V_hp", "J_B_hp"]
    for k, name in enumerate(MEAS_NAMES):
        # noise is sized in normalized units, hence the division
        outputs.append({f"{name}_meas": 1.0,
                        NOISE_NAMES[k]: weights.noise_weight / y_scales[k]})
    inputs = ["V_grid", *NOISE_NAMES, *ACT_NAMES]
    sys = _wire(blocks, inputs, outputs, Ts)

    z_names = tuple(f"{a}-{b}" for a, b in errors) + ACT_NAMES
    plant = PartitionedPlant(sys, n_w=5, n_u=2, n_z=len(z_names), n_y=4,
                             input_names=tuple(inputs),
                             output_names=z_names + MEAS_NAMES)
    return apply_scaling(plant, scaling, objective)


def apply_scaling(plant: PartitionedPlant, scaling: ScalingSpec,
                  objective: Objective | str = Objective.TRANSPARENCY) -> PartitionedPlant:
    """Multiply every channel by its scale; noise inputs are left untouched."""
    objective = Objective(objective)
    z = scaling.z_for(objective)
    if plant.n_z != len(z) or plant.n_y != 4 or plant.n_u != 2:
        raise DimensionMismatchError(
            f"plant partition ({plant.n_z}, {plant.n_y}) does not match the scaling")
    in_scale = [scaling.w_scale] + [1.0] * (plant.n_w - 1) + list(scaling.u_scales)
    out_scale = list(z) + list(scaling.y_scales)
    return PartitionedPlant(plant.sys.scale(out_scale, in_scale), plant.n_w,
                            plant.n_u, plant.n_z, plant.n_y,
                            plant.input_names, plant.output_names)


PHYSICAL_OUTPUTS = ("V1", "I1", "Vc", "Id", "V_ref", "I_ref")


def physical_interconnection(scenario: PhilScenario) -> PartitionedPlant:
    """Unscaled, unweighted plant in physical units, delays included.

    Inputs are ``(V_grid, V, J_B)``.  The performance outputs are the
    undelayed circuit signals ``(V1, I1, Vc, Id, V_ref, I_ref)``; the
    measurement outputs are the delayed ``(V1, Vc, I1, Id)``.
    """
    blocks = _core_blocks(scenario, "V_grid", "V", "J_B")
    outputs = list(PHYSICAL_OUTPUTS) + [f"{n}_meas" for n in MEAS_NAMES]
    inputs = ["V_grid", *ACT_NAMES]
    sys = _wire(blocks, inputs, outputs, scenario.sample_time)
    return PartitionedPlant(sys, n_w=1, n_u=2, n_z=6, n_y=4,
                            input_names=tuple(inputs),
                            output_names=PHYSICAL_OUTPUTS + MEAS_NAMES)
