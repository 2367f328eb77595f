import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from conftest import random_stable
from phil_forge import lti
from phil_forge.discretize import bilinear, bilinear_inverse, matrix_exponential, zoh
from phil_forge.errors import DomainMismatchError, SingularTransformError
from phil_forge.lti import StateSpace, TransferFunction, static_gain

TS = 50e-6


def test_bilinear_integrator_textbook():
    d = bilinear(StateSpace([[0.0]], [[1.0]], [[1.0]], [[0.0]]), 2.0)
    # (z + 1)/(z - 1) evaluated on the unit circle
    for w in (0.3, 1.0, 2.5):
        z = np.exp(1j * w)
        assert lti.freq_response(d, w)[0, 0] == pytest.approx((z + 1) / (z - 1))
    assert np.allclose(d.A, [[1.0]])


def test_bilinear_static_and_first_order_pole():
    assert bilinear(static_gain(7.0), TS).D[0, 0] == 7.0
    Ts = 1e-4
    d = bilinear(lti.realize_tf(TransferFunction([1], [1, 1])), Ts)
    assert d.A[0, 0] == pytest.approx((1 - Ts / 2) / (1 + Ts / 2), rel=1e-14)
    assert d.A[0, 0] == pytest.approx(0.999900004999750, rel=1e-14)


def test_bilinear_rejects_pole_at_two_over_ts():
    g = StateSpace([[2.0 / TS]], [[1.0]], [[1.0]], [[0.0]])
    with pytest.raises(SingularTransformError):
        bilinear(g, TS)
    with pytest.raises(SingularTransformError):
        bilinear_inverse(StateSpace([[-1.0]], [[1.0]], [[1.0]], [[0.0]], TS))
    with pytest.raises(DomainMismatchError):
        bilinear(static_gain(1.0, TS), TS)
    with pytest.raises(DomainMismatchError):
        zoh(static_gain(1.0, TS), TS)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 5))
def test_bilinear_prewarped_frequency_match_and_dc(seed, n):
    rng = np.random.default_rng(seed)
    g = random_stable(rng, n, 2, 2)
    # keep the bandwidth below 1 kHz
    g = StateSpace(g.A * 2 * np.pi * 100, g.B * 2 * np.pi * 100, g.C, g.D)
    d = bilinear(g, TS)
    assert np.allclose(lti.freq_response(d, 0.0), lti.freq_response(g, 0.0), rtol=1e-12, atol=1e-12)
    w = rng.uniform(1e-3, 3.0, 20)
    warped = (2 / TS) * np.tan(w / 2)
    assert np.allclose(lti.freq_response(d, w), lti.freq_response(g, warped), rtol=1e-9, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.1, 1e5))
def test_bilinear_inverse_round_trip(seed, alpha):
    rng = np.random.default_rng(seed)
    g = random_stable(rng, 3, 2, 2)
    back = bilinear_inverse(bilinear(g, TS, alpha), alpha)
    w = np.logspace(-2, 2, 20)
    assert np.allclose(lti.freq_response(back, w), lti.freq_response(g, w), rtol=1e-8, atol=1e-8)


def test_zoh_examples():
    d = zoh(StateSpace([[0.0]], [[1.0]], [[1.0]], [[0.0]]), TS)
    assert d.A[0, 0] == 1.0 and d.B[0, 0] == pytest.approx(TS, rel=1e-15)
    B = np.arange(6.0).reshape(3, 2)
    d = zoh(StateSpace(np.zeros((3, 3)), B, np.eye(3), np.zeros((3, 2))), TS)
    assert np.array_equal(d.A, np.eye(3)) and np.allclose(d.B, TS * B, rtol=1e-15)


def test_zoh_first_order_closed_form():
    a = 3.0
    d = zoh(StateSpace([[-a]], [[1.0]], [[1.0]], [[0.0]]), TS)
    N = 200
    y = lti.simulate(d, np.ones(N))[:, 0]
    t = np.arange(N) * TS
    assert np.allclose(y, (1 - np.exp(-a * t)) / a, rtol=0, atol=1e-8)


def _rk4_step_response(g, t_end, h):
    """Dense fixed-step RK4 of dx/dt = A x + B under a unit step."""
    x = np.zeros(g.n_states)
    b = g.B[:, 0]
    f = lambda x: g.A @ x + b
    out = [x.copy()]
    steps = int(round(t_end / h))
    for _ in range(steps):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(x.copy())
    return np.array(out)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 6))
def test_zoh_step_invariance_against_dense_simulation(seed, n):
    rng = np.random.default_rng(seed)
    g = random_stable(rng, n, 1, 1)
    g = StateSpace(g.A * 2000.0, g.B * 2000.0, g.C, g.D)
    N = 20
    y = lti.simulate(zoh(g, TS), np.ones(N))[:, 0]
    X = _rk4_step_response(g, (N - 1) * TS, TS / 1000)[::1000]
    ref = X @ g.C[0] + g.D[0, 0]
    assert np.allclose(y, ref, rtol=1e-8, atol=1e-10)


def test_matrix_exponential_examples():
    assert np.array_equal(matrix_exponential(np.zeros((3, 3))), np.eye(3))
    assert np.allclose(matrix_exponential(np.diag([0.5, -2.0])), np.diag(np.exp([0.5, -2.0])), rtol=1e-14)
    assert np.allclose(matrix_exponential([[0.0, 1.0], [0.0, 0.0]]), [[1, 1], [0, 1]], rtol=0, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 8), st.floats(1e-4, 10.0))
def test_matrix_exponential_inverse_identity(seed, n, norm):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, n))
    M *= norm / np.linalg.norm(M, 2)
    E = matrix_exponential(M)
    assert np.allclose(E @ matrix_exponential(-M), np.eye(n), rtol=0, atol=1e-10)
    oracle = scipy.linalg.expm(M)
    assert np.allclose(E, oracle, rtol=1e-11, atol=1e-13 * np.abs(oracle).max())
