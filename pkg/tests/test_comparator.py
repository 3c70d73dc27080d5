import numpy as np
import pytest
from _support import preset_run

from balsi import scenario as scn
from balsi.comparator import (ComparatorState, comparator_rhs, projection_factor,
                              run_comparator)
from balsi.control import WingRockLaw
from balsi.errors import DomainError
from balsi.hybrid import IntegratorConfig, closed_loop_rhs, integrate_flow
from balsi.kernels import kern
from balsi.plants import wing_rock

THETA = np.array([-26.67, 0.76485, -2.9225, 0.0, 1.5])
LAW = WingRockLaw(1.5, 15.0)
PLANT = wing_rock(1.0, 15.0, THETA)
CFG = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14)


def test_zero_state_gives_no_adaptation_and_no_control():
    dtheta, u = comparator_rhs(ComparatorState(1.35 * THETA), np.zeros(3), LAW, 1.0)
    np.testing.assert_array_equal(dtheta, np.zeros(5))
    assert u == 0.0


@pytest.mark.parametrize("theta5, drive, expected", [
    (1.0, 0.3, 1.0),       # at kappa, unguarded branch
    (1.2, -0.3, 1.0),      # above kappa
    (0.999, -0.3, 0.0),    # on the floor, pushing down: frozen
    (0.9995, -0.3, 0.5),   # halfway through the guard band
    (0.999, 0.3, 1.0),     # on the floor, pushing up
])
def test_projection_factor(theta5, drive, expected):
    assert projection_factor(theta5, drive, 1.0, 0.001) == pytest.approx(expected, abs=1e-9)


def test_entry_checks():
    th = THETA.copy()
    th[4] = 0.99
    with pytest.raises(DomainError):
        comparator_rhs(ComparatorState(th), np.ones(3), LAW, 1.0)
    with pytest.raises(DomainError):
        comparator_rhs(ComparatorState(THETA, eps=1.5), np.ones(3), LAW, 1.0)
    with pytest.raises(DomainError):
        ComparatorState(THETA, gamma=-1.0)
    lti = scn.build_plant(scn.preset("lti_chain_n2"))
    with pytest.raises(DomainError):
        run_comparator(lti, LAW, THETA, [1.0, 0.0], 1.0)


def test_update_direction_and_control():
    x = np.array([0.2, -0.1, 0.05])
    theta = 1.35 * THETA
    dtheta, u = comparator_rhs(ComparatorState(theta, gamma=10.0), x, LAW, 1.0)
    vx2 = LAW.grad_V(theta, x)[1]
    zeta = np.array(kern.wingrock_zeta(*x))
    np.testing.assert_allclose(dtheta, 10.0 * vx2 * zeta, rtol=1e-14)
    phi_th = np.array(kern.wingrock_phi_theta(theta, x[0], x[1], 1.5))
    assert u == pytest.approx(LAW.k(theta, x)[0] + 10.0 * vx2 * phi_th @ zeta / 15.0, rel=1e-14)


def test_zero_gain_equals_fixed_estimate_loop():
    theta0 = 1.35 * THETA
    x0 = np.array([0.4, 0.0, 0.0])
    run = run_comparator(PLANT, LAW, theta0, x0, 2.0, gamma=0.0, cfg=CFG)
    ref, _, _, _ = integrate_flow(closed_loop_rhs(PLANT, LAW, theta0), 0.0, x0, 2.0, CFG)
    for t in np.linspace(0.0, 2.0, 41):
        np.testing.assert_array_equal(run.theta(t), theta0)
        np.testing.assert_allclose(run.x(t), ref(t), atol=1e-9)


def test_estimate_floor_and_dip_on_second_condition():
    run = preset_run("wingrock_ic2_em").traj
    ts = np.unique(np.concatenate([run.sol.ts, np.linspace(0, run.t_end, 4001)]))
    theta5 = np.array([run.theta(t)[4] for t in ts])
    floor = 1.0 - 0.001
    rel_tol = preset_run("wingrock_ic2_em").scenario.integrator.rel_tol
    assert theta5.min() >= floor - rel_tol * (1.0 + 1.0)
    assert theta5.min() < 1.0   # enters the guard band below kappa


def test_estimate_does_not_converge():
    result = preset_run("wingrock_ic2_em")
    err = np.linalg.norm(result.theta_final - THETA)
    assert err > 1e-2 * np.linalg.norm(THETA)


def test_drift_from_true_parameter_bounded_by_adaptation_integral():
    x0 = np.array([-0.35, -0.5, 0.05])
    run = run_comparator(PLANT, LAW, THETA, x0, 4.0, cfg=CFG)
    ts = np.linspace(0.0, 4.0, 8001)
    integrand = []
    for t in ts:
        x, th = run.x(t), run.theta(t)
        integrand.append(abs(LAW.grad_V(th, x)[1]) * np.linalg.norm(kern.wingrock_zeta(*x)))
    bound = 10.0 * np.trapezoid(integrand, ts)
    drift = max(np.linalg.norm(run.theta(t) - THETA) for t in ts)
    assert drift <= bound * (1 + 1e-3) + 1e-9
    # the state still decays while the estimate wanders
    assert np.linalg.norm(run.x(4.0)) < 0.1 * np.linalg.norm(x0)
