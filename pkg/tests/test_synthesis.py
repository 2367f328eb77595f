import math

import numpy as np
import pytest

from phil_forge import lti
from phil_forge.circuits import PhilScenario
from phil_forge.errors import (
    DimensionMismatchError,
    NotStabilizableError,
    RankDeficientD12Error,
    RankDeficientD21Error,
)
from phil_forge.lti import PartitionedPlant, StateSpace, static_gain
from phil_forge.plant import ScalingSpec, assemble_plant
from phil_forge.synthesis import (
    ControllerRealization,
    SynthesisOptions,
    gamma_feasible,
    synthesize,
    validate_closed_loop,
)

TS = 50e-6


def test_default_design_is_sound(default_plant, default_controller):
    K = default_controller
    assert K.sys.dt == TS and K.gamma_achieved > 0
    assert (K.sys.n_inputs, K.sys.n_outputs) == (4, 2)
    cl = lti.lft_lower(default_plant, K.sys)
    assert lti.is_stable(cl)
    assert lti.hinf_norm(cl, rel_tol=1e-4) <= K.gamma_achieved * 1.001


def test_default_design_meets_zero_db(default_plant, default_controller):
    rep = validate_closed_loop(default_plant, default_controller, f_max=1000.0)
    assert rep.stable and rep.passed
    assert all(g < 0.0 for g in rep.channel_gain_db.values())
    assert len(rep.channel_gain_db) == default_plant.n_z * default_plant.n_w


def test_bisection_feasibility_is_monotone(default_controller):
    hist = default_controller.synthesis_report["history"]
    assert len(hist) > 5
    ordered = sorted(hist)
    flags = [ok for _, ok in ordered]
    # once feasible, every larger gamma must be feasible
    first = flags.index(True)
    assert all(flags[first:])


def test_gamma_within_tolerance_of_infimum(default_plant, default_controller):
    K = default_controller
    infeasible = [g for g, ok in K.synthesis_report["history"] if not ok]
    assert infeasible and max(infeasible) < K.gamma_achieved
    assert not gamma_feasible(default_plant, max(infeasible))
    assert gamma_feasible(default_plant, K.gamma_achieved)


def test_riccati_residuals_recorded(default_controller):
    rx, ry = default_controller.synthesis_report["riccati_residuals"]
    assert math.isfinite(rx) and math.isfinite(ry)


def _static_plant():
    D = np.array([[1.0, 0.5, 1.0],
                  [0.3, -0.8, 0.4],
                  [1.0, 0.7, 0.2]])
    return PartitionedPlant(static_gain(D, TS), n_w=2, n_u=1, n_z=2, n_y=1)


def _static_cost(P, k):
    D = P.sys.D
    P11, P12, P21, P22 = D[:2, :2], D[:2, 2:], D[2:, :2], D[2:, 2:]
    if abs(1 - P22[0, 0] * k) < 1e-9:
        return math.inf
    return np.linalg.norm(P11 + P12 @ (k / (1 - P22 * k)) @ P21, 2)


def test_static_plant_against_brute_force_gain_search():
    # for a memoryless plant a static gain is optimal, so a dense scalar
    # search gives the optimal level
    P = _static_plant()
    coarse = np.linspace(-20, 20, 4001)
    costs = [_static_cost(P, k) for k in coarse]
    k0 = coarse[int(np.argmin(costs))]
    fine = np.linspace(k0 - 0.02, k0 + 0.02, 4001)
    best = min(min(costs), min(_static_cost(P, k) for k in fine))
    K = synthesize(P)
    assert K.gamma_achieved == pytest.approx(best, rel=2e-3)
    assert K.gamma_achieved >= best * (1 - 1e-6)


def test_trivial_case_without_control_authority():
    rng = np.random.default_rng(2)
    A = np.diag([0.5, -0.3])
    B = np.hstack([rng.standard_normal((2, 1)), np.zeros((2, 1))])
    C = np.vstack([rng.standard_normal((1, 2)), rng.standard_normal((1, 2))])
    D = np.array([[0.2, 0.0], [1.0, 0.0]])
    P = PartitionedPlant(StateSpace(A, B, C, D, TS), 1, 1, 1, 1)
    K = synthesize(P)
    assert np.all(K.sys.D == 0) and K.sys.n_states == 0
    p11 = StateSpace(A, B[:, :1], C[:1], D[:1, :1], TS)
    assert K.gamma_achieved == pytest.approx(lti.hinf_norm(p11), rel=1e-6)


def test_regularity_errors():
    A = np.array([[0.5]])
    # two identical actuators: D12 of the surrogate has rank one
    P = PartitionedPlant(StateSpace(A, [[1.0, 1.0, 1.0]], [[1.0], [1.0], [1.0]],
                                    [[0.0, 1.0, 1.0], [0.0, 2.0, 2.0], [1.0, 0.0, 0.0]], TS),
                         1, 2, 2, 1)
    with pytest.raises(RankDeficientD12Error):
        synthesize(P)
    # two identical sensors: D21 of the surrogate has rank one
    P = PartitionedPlant(StateSpace(A, [[1.0, 1.0, 1.0]], [[1.0], [1.0], [1.0]],
                                    [[1.0, 1.0, 1.0], [1.0, 2.0, 0.0], [1.0, 2.0, 0.0]], TS),
                         2, 1, 1, 2)
    with pytest.raises(RankDeficientD21Error):
        synthesize(P)


def test_not_stabilizable():
    A = np.diag([2.0, 0.5])
    B = np.array([[1.0, 0.0], [0.0, 1.0]])
    C = np.array([[1.0, 1.0], [1.0, 1.0]])
    D = np.array([[0.0, 1.0], [1.0, 0.0]])
    P = PartitionedPlant(StateSpace(A, B, C, D, TS), 1, 1, 1, 1)
    with pytest.raises(NotStabilizableError):
        synthesize(P)


def test_zero_controller_on_large_p11_fails_validation():
    P = PartitionedPlant(static_gain([[2.0, 1.0], [1.0, 0.0]], TS), 1, 1, 1, 1,
                         input_names=("w", "u"), output_names=("z", "y"))
    rep = validate_closed_loop(P, static_gain(0.0, TS))
    assert rep.stable and not rep.passed
    assert rep.violations == [("z", "w")]
    assert rep.channel_gain_db[("z", "w")] == pytest.approx(20 * np.log10(2.0))


def test_sign_flipped_controller_destabilizes(default_plant, default_controller):
    K = default_controller.sys
    flipped = StateSpace(K.A, K.B, -K.C, -K.D, K.dt)
    cl = lti.lft_lower(default_plant, flipped)
    assert np.max(np.abs(lti.poles(cl))) > 1.0
    rep = validate_closed_loop(default_plant, flipped)
    assert not rep.stable and not rep.passed
    assert rep.channel_gain_db is None and rep.hinf_norm is None


def test_validation_dimension_check(default_plant):
    with pytest.raises(DimensionMismatchError):
        validate_closed_loop(default_plant, static_gain(np.zeros((2, 3)), TS))


def test_scale_covariance_and_tightened_bound(default_plant, default_controller):
    sc = PhilScenario()
    base = ScalingSpec()
    tight = ScalingSpec(z_scales=(base.z_scales[0] * 10,) + base.z_scales[1:])
    P2 = assemble_plant(sc, tight)
    w = np.linspace(0.001, 3.0, 50)
    g1 = lti.freq_response(lti.lft_lower(default_plant, default_controller.sys), w)
    g2 = lti.freq_response(lti.lft_lower(P2, default_controller.sys), w)
    assert np.allclose(g2[:, 0], 10 * g1[:, 0], rtol=1e-9, atol=1e-14)
    assert np.allclose(g2[:, 1:], g1[:, 1:], rtol=1e-9, atol=1e-14)
    # a tenfold tighter bound on V1 - V_ref is not attainable
    K2 = synthesize(P2)
    rep = validate_closed_loop(P2, K2)
    assert K2.gamma_achieved > 1.0 and not rep.passed


def test_options_validation():
    with pytest.raises(ValueError):
        SynthesisOptions(gamma_lo=2.0, gamma_hi=1.0)
    with pytest.raises(ValueError):
        SynthesisOptions(gamma_rel_tol=0.0)


def test_reduced_order_option(default_plant):
    K = synthesize(default_plant, SynthesisOptions(reduce_order=True))
    assert isinstance(K, ControllerRealization)
    assert K.synthesis_report["reduction_error_bound"] <= 1e-6 or not lti.is_stable(K.sys)
