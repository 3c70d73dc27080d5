"""Extended-matching adaptive backstepping for the wing-rock plant (baseline).

The estimate evolves continuously by a gradient law driven by dV/dx2 and the
regressor zeta(x); theta_5 carries a smooth projection that keeps it above
kappa - eps.  Near the floor the guarded branch decays at rate
gamma |dV/dx2 zeta_5| / eps, so an explicit stepper may undershoot the floor
by an amount of the order of the integration tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control import WingRockLaw, _wr_theta
from .errors import DomainError
from .hybrid import IntegratorConfig, integrate_flow
from .kernels import kern
from .plants import measure


@dataclass(frozen=True)
class ComparatorState:
    theta: np.ndarray
    gamma: float = 10.0
    eps: float = 0.001

    def __post_init__(self):
        if not self.gamma >= 0:
            raise DomainError("gamma must be nonnegative")
        if not self.eps > 0:
            raise DomainError("eps must be positive")


def projection_factor(theta5, drive, kappa, eps):
    """Multiplier of the theta_5 update; ``drive`` = dV/dx2 * zeta_5."""
    if theta5 >= kappa or drive >= 0.0:
        return 1.0
    return 1.0 - min(1.0, (kappa - theta5) / eps)


def _rhs_parts(theta, x, law, gamma, eps, kappa):
    x1, x2, x3 = float(x[0]), float(x[1]), float(x[2])
    zeta = np.array(kern.wingrock_zeta(x1, x2, x3))
    vx2 = kern.wingrock_clf_grad(theta, x1, x2, x3, law.L)[1]
    dtheta = gamma * vx2 * zeta
    dtheta[4] *= projection_factor(theta[4], vx2 * zeta[4], kappa, eps)
    phi_th = np.array(kern.wingrock_phi_theta(theta, x1, x2, law.L))
    u = (kern.wingrock_feedback(theta, x1, x2, x3, law.L, law.mu)
         + gamma * vx2 * float(phi_th @ zeta) / law.mu)
    return dtheta, u


def comparator_rhs(state, x, law, kappa):
    """(d theta / dt, u) for the extended-matching design at state ``x``."""
    theta = _wr_theta(state.theta)
    if not state.eps < kappa:
        raise DomainError("need 0 < eps < kappa")
    if theta[4] < kappa - state.eps:
        raise DomainError(f"theta_5 = {theta[4]} is below kappa - eps = {kappa - state.eps}")
    return _rhs_parts(theta, x, law, state.gamma, state.eps, kappa)


@dataclass
class ComparatorRun:
    """Dense record of plant state and estimate under the comparator."""

    sol: object
    t_end: float
    n: int
    law: WingRockLaw
    gamma: float
    eps: float
    kappa: float
    noise: object = None
    nfev: int = 0

    def x(self, t):
        return self.sol(t)[: self.n]

    def theta(self, t):
        return self.sol(t)[self.n:]

    def u(self, t):
        y = self.sol(t)
        x = y[: self.n]
        if self.noise is not None and self.noise.active:
            x = measure(x, t, self.noise)
        theta = np.ascontiguousarray(y[self.n:])
        return _rhs_parts(theta, x, self.law, self.gamma, self.eps, self.kappa)[1]


def run_comparator(plant, law, theta0, x0, t_final, gamma=10.0, eps=0.001,
                   noise=None, cfg=IntegratorConfig()):
    """Integrate plant and estimate jointly on [0, t_final] as one segment."""
    if plant.name != "wing_rock":
        raise DomainError("the extended-matching comparator is defined for the wing-rock plant")
    kappa = plant.structure.params["kappa"]
    state = ComparatorState(np.asarray(theta0, float), gamma, eps)
    comparator_rhs(state, np.asarray(x0, float), law, kappa)  # entry checks
    n = plant.n
    noisy = noise is not None and noise.active

    def rhs(t, y):
        x = y[:n]
        xm = measure(x, t, noise) if noisy else x
        theta = np.ascontiguousarray(y[n:])
        dtheta, u = _rhs_parts(theta, xm, law, gamma, eps, kappa)
        out = np.empty_like(y)
        out[:n] = plant.xdot(x, np.array([u]))
        out[n:] = dtheta
        return out

    y0 = np.concatenate([np.asarray(x0, float), state.theta])
    sol, t_end, _, nfev = integrate_flow(rhs, 0.0, y0, float(t_final), cfg)
    return ComparatorRun(sol, t_end, n, law, gamma, eps, kappa, noise, nfev)
