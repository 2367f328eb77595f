"""Model-matching H-infinity interfaces for power hardware-in-the-loop setups.

The package builds the grid, device and reference circuit models, assembles
the weighted model-matching plant, synthesizes a discrete H-infinity
controller and validates it in a fixed-step three-phase co-simulation
against an ideal-transformer-method baseline.
"""
from .circuits import DelaySpec, GridImpedance, PhilScenario, grid_impedance_from_scr
from .config import RunConfig, load_config, parse_config
from .discretize import bilinear, bilinear_inverse, matrix_exponential, zoh
from .interfaces import InterfaceAlgorithm, InterfaceKind, itm_interface, wrap_scaled_controller
from .lti import (
    PartitionedPlant,
    StateSpace,
    TransferFunction,
    block_diagonal,
    delay_block,
    freq_response,
    hinf_norm,
    is_stable,
    lft_lower,
    parallel,
    realize_tf,
    series,
    step_states,
)
from .plant import (
    Objective,
    ScalingSpec,
    WeightSpec,
    apply_scaling,
    assemble_plant,
    physical_interconnection,
)
from .riccati import solve_care
from .simulation import (
    AccuracyMetrics,
    SimTrace,
    accuracy_metrics,
    find_itm_threshold,
    run_closed_loop,
    sweep_scr,
    three_phase_source,
)
from .synthesis import (
    ControllerRealization,
    SynthesisOptions,
    ValidationReport,
    synthesize,
    validate_closed_loop,
)

__version__ = "0.1.0"
