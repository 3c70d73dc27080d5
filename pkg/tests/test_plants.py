import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from balsi.errors import DomainError
from balsi.plants import (BoxSet, NoiseSpec, check_structure, lti_chain, lti_param_count,
                          measure, wing_rock)
from balsi.runner import run_scenario
from balsi.scenario import preset

THETA_WR = np.array([-26.67, 0.76485, -2.9225, 0.0, 1.5])


def test_wing_rock_dimensions_and_selector():
    plant = wing_rock(1.0, 15.0, THETA_WR)
    assert (plant.n, plant.m, plant.l) == (3, 1, 5)
    np.testing.assert_array_equal(plant.C, [[0.0, 1.0, 0.0]])
    assert plant.box.lower[4] == 1.0 and np.all(np.isinf(plant.box.lower[:4]))
    assert check_structure(plant.structure, seed=3) < 1e-10


def test_wing_rock_zero_state():
    plant = wing_rock(1.0, 15.0, THETA_WR)
    np.testing.assert_array_equal(plant.f(np.zeros(3), np.zeros(1)), np.zeros(3))
    np.testing.assert_array_equal(plant.g(np.zeros(3), np.zeros(1)), np.zeros((3, 5)))


def test_wing_rock_vector_field():
    plant = wing_rock(1.0, 15.0, THETA_WR)
    x, u = np.array([0.3, -0.2, 0.1]), np.array([0.7])
    zeta = [x[0], x[1], abs(x[0]) * x[1], abs(x[1]) * x[1], x[2]]
    expected = [x[1], float(np.dot(zeta, THETA_WR)), -15.0 * x[2] + 15.0 * u[0]]
    np.testing.assert_allclose(plant.xdot(x, u), expected, rtol=1e-14)


@pytest.mark.parametrize("kappa, mu, theta5", [(0.0, 15.0, 1.5), (1.0, -1.0, 1.5),
                                               (1.0, 15.0, 0.9)])
def test_wing_rock_rejects_bad_arguments(kappa, mu, theta5):
    theta = THETA_WR.copy()
    theta[4] = theta5
    with pytest.raises(DomainError):
        wing_rock(kappa, mu, theta)


@pytest.mark.parametrize("n, l", [(1, 2), (2, 5), (3, 9), (4, 14)])
def test_lti_parameter_count(n, l):
    assert lti_param_count(n) == l
    plant = lti_chain(n, 1.0, np.ones(l))
    assert plant.l == l
    np.testing.assert_array_equal(plant.C, np.eye(n))


def test_lti_regressor_scalar():
    plant = lti_chain(1, 1.0, [0.5, 2.0])
    np.testing.assert_array_equal(plant.g(np.array([2.0]), np.array([3.0])), [[2.0, 3.0]])
    assert plant.xdot(np.array([2.0]), np.array([3.0]))[0] == pytest.approx(0.5 * 2 + 2.0 * 3)


def test_lti_regressor_second_order():
    theta = np.array([0.5, 2.0, -1.0, 0.3, 1.5])
    plant = lti_chain(2, 1.0, theta)
    x, u = np.array([1.0, -2.0]), np.array([0.5])
    A = np.array([[0.5, 2.0], [-1.0, 0.3]])
    b = np.array([0.0, 1.5])
    np.testing.assert_allclose(plant.xdot(x, u), A @ x + b * u[0], rtol=1e-14)


@pytest.mark.parametrize("theta", [[0.5, 0.9], [0.5, 2.0, 1.0], [0.5, np.nan]])
def test_lti_rejects_inadmissible_theta(theta):
    with pytest.raises(DomainError):
        lti_chain(1, 1.0, theta)


def test_measure_without_noise_returns_state():
    x = np.array([0.1, 0.2, 0.3])
    np.testing.assert_array_equal(measure(x, 0.37, NoiseSpec()), x)


def test_measure_sinusoidal_noise():
    noise = NoiseSpec(0.01, 7.0, np.ones(3))
    x = np.array([0.1, 0.2, 0.3])
    np.testing.assert_allclose(measure(x, 1.0 / 28.0, noise), x + 0.01, rtol=0, atol=1e-15)
    np.testing.assert_array_equal(measure(x, 0.0, noise), x)


def test_noise_rejects_negative_amplitude():
    with pytest.raises(DomainError):
        NoiseSpec(-1.0, 1.0)


def test_box_rejects_inverted_bounds():
    with pytest.raises(DomainError):
        BoxSet(np.array([1.0]), np.array([0.0]))


_vec = arrays(np.float64, 4, elements=st.floats(-1e3, 1e3))


@settings(max_examples=200, deadline=None)
@given(_vec, _vec, _vec, _vec)
def test_box_projection_idempotent_and_nonexpansive(a, b, p, q):
    box = BoxSet(np.minimum(a, b), np.maximum(a, b))
    pp = box.project(p)
    np.testing.assert_array_equal(box.project(pp), pp)
    assert box.contains(pp)
    assert np.linalg.norm(pp - box.project(q)) <= np.linalg.norm(p - q) * (1 + 1e-12) + 1e-12


def test_open_loop_limit_cycle():
    result = run_scenario(preset("wingrock_open_loop"))
    ts = np.linspace(20.0, 40.0, 2001)
    norms = np.linalg.norm(result.sample(ts)[0], axis=1)
    assert norms.min() > 0.05
