"""Certainty-equivalence nominal feedback laws and their Lyapunov functions."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError
from .kernels import kern
from .plants import lti_row_offsets


class FeedbackLaw:
    """u = k(theta, x) with a CLF V(theta, x) decaying at rate 2*sigma."""

    sigma: float
    m: int = 1

    def k(self, theta, x):
        raise NotImplementedError

    def V(self, theta, x):
        raise NotImplementedError

    def grad_V(self, theta, x):
        raise NotImplementedError


# ---------------------------------------------------------------- wing rock

def _wr_theta(theta):
    theta = np.ascontiguousarray(theta, dtype=float)
    if theta.shape != (5,):
        raise DomainError("wing rock parameter vector must have 5 entries")
    if not theta[4] > 0.0:
        raise DomainError("theta_5 must be positive (it divides the virtual control)")
    return theta


def wingrock_phi(theta, x1, x2, L):
    """Virtual control for x3 and its partials: (phi, dphi/dx1, dphi/dx2)."""
    return kern.wingrock_phi(_wr_theta(theta), float(x1), float(x2), float(L))


def wingrock_phi_theta(theta, x1, x2, L):
    """d phi / d theta as a length-5 array."""
    return np.array(kern.wingrock_phi_theta(_wr_theta(theta), float(x1), float(x2), float(L)))


def wingrock_feedback(theta, x, L, mu):
    """Backstepping control for the wing-rock plant at parameter ``theta``."""
    if not L > 1.0 or not mu > 0.0:
        raise DomainError("wing rock feedback needs L > 1 and mu > 0")
    return kern.wingrock_feedback(_wr_theta(theta), float(x[0]), float(x[1]), float(x[2]),
                                  float(L), float(mu))


def wingrock_clf(theta, x, L):
    """V = (x1^2 + (x2 + L x1)^2 + (x3 - phi)^2) / 2."""
    return kern.wingrock_clf(_wr_theta(theta), float(x[0]), float(x[1]), float(x[2]), float(L))


class WingRockLaw(FeedbackLaw):
    """Backstepping law for the wing-rock plant; decay rate sigma = L - 1."""

    def __init__(self, L=1.5, mu=15.0):
        if not L > 1.0 or not mu > 0.0:
            raise DomainError("wing rock law needs L > 1 and mu > 0")
        self.L = float(L)
        self.mu = float(mu)
        self.sigma = self.L - 1.0

    def k(self, theta, x):
        return np.array([wingrock_feedback(theta, x, self.L, self.mu)])

    def k_scalar(self, theta, x1, x2, x3):
        # hot path: theta already validated by the caller
        return kern.wingrock_feedback(theta, x1, x2, x3, self.L, self.mu)

    def V(self, theta, x):
        return wingrock_clf(theta, x, self.L)

    def grad_V(self, theta, x):
        th = _wr_theta(theta)
        return np.array(kern.wingrock_clf_grad(th, float(x[0]), float(x[1]), float(x[2]), self.L))

    def __repr__(self):
        return f"WingRockLaw(L={self.L}, mu={self.mu})"


# ---------------------------------------------------------------- LTI chain

@dataclass(frozen=True)
class LtiDesign:
    P: np.ndarray
    gain: np.ndarray
    sigma: float

    def closed_loop_matrix(self, theta):
        """A_cl such that xdot = A_cl x under u = gain' x."""
        n = self.gain.size
        return lti_closed_loop(theta, n, self.gain)


def lti_closed_loop(theta, n, gain):
    theta = np.asarray(theta, dtype=float)
    offs = lti_row_offsets(n)
    A = np.zeros((n, n))
    for i, off in enumerate(offs):
        A[i, :i + 1] = theta[off:off + i + 1]
        sup = theta[off + i + 1]
        if i + 1 < n:
            A[i, i + 1] += sup
        else:
            A[i, :] += sup * np.asarray(gain)
    return A


def lti_design(theta, n, sigma, kappa=0.0):
    """Recursive quadratic CLF and linear gain for the LTI chain.

    Builds P and the gain one state at a time: P grows by the error coordinate
    x_{n+1} - gain' x, and the new gain makes the derivative of x'Px equal to
    -2 sigma x'Px exactly.
    """
    theta = np.asarray(theta, dtype=float)
    n = int(n)
    if theta.shape != (n * (n + 3) // 2,):
        raise DomainError(f"LTI chain of order {n} needs {n * (n + 3) // 2} parameters")
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    offs = lti_row_offsets(n)

    def th(i, j):
        # 1-based theta_{i,j}
        return theta[offs[i - 1] + j - 1]

    for i in range(1, n + 1):
        if not th(i, i + 1) >= kappa or not th(i, i + 1) > 0.0:
            raise DomainError(f"theta_{{{i},{i + 1}}} = {th(i, i + 1)} violates the lower bound")

    P = np.array([[0.5]])
    gain = np.array([-(th(1, 1) + sigma) / th(1, 2)])
    for m in range(1, n):
        # extend from order m to order m + 1
        Pn = np.empty((m + 1, m + 1))
        Pn[:m, :m] = P + 0.5 * np.outer(gain, gain)
        Pn[:m, m] = Pn[m, :m] = -0.5 * gain
        Pn[m, m] = 0.5
        lead = th(m + 1, m + 2)
        g_new = np.empty(m + 1)
        for i in range(1, m + 1):
            acc = sum(gain[j - 1] * th(j, i) for j in range(i, m + 1))
            if i >= 2:
                acc += gain[i - 2] * th(i - 1, i)
            acc += -2.0 * th(m, m + 1) * P[m - 1, i - 1] - th(m + 1, i) + sigma * gain[i - 1]
            g_new[i - 1] = acc / lead
        g_new[m] = (gain[m - 1] * th(m, m + 1) - sigma - th(m + 1, m + 1)) / lead
        P, gain = Pn, g_new
    return LtiDesign(P, gain, float(sigma))


@lru_cache(maxsize=256)
def _cached_design(theta_key, n, sigma):
    return lti_design(np.array(theta_key), n, sigma)


class LtiLaw(FeedbackLaw):
    """u = gain(theta)' x with V = x' P(theta) x."""

    def __init__(self, n, sigma):
        if not sigma > 0:
            raise DomainError("sigma must be positive")
        self.n = int(n)
        self.sigma = float(sigma)

    def design(self, theta):
        return _cached_design(tuple(float(v) for v in theta), self.n, self.sigma)

    def k(self, theta, x):
        return np.array([self.design(theta).gain @ np.asarray(x, float)])

    def V(self, theta, x):
        x = np.asarray(x, float)
        return float(x @ self.design(theta).P @ x)

    def grad_V(self, theta, x):
        return 2.0 * self.design(theta).P @ np.asarray(x, float)

    def __repr__(self):
        return f"LtiLaw(n={self.n}, sigma={self.sigma})"


def lyapunov_decay_residual(plant, law, theta, x):
    """grad V . (nominal vector field) + 2 sigma V, evaluated at (theta, x).

    Nonpositive values certify the decay inequality at that point.  The
    nominal field uses ``theta`` both in the controller and in the plant;
    ``plant`` may be a PlantModel or a bare PlantStructure.
    """
    structure = getattr(plant, "structure", plant)
    x = np.asarray(x, float)
    u = law.k(theta, x)
    xdot = structure.flow(x, u, np.asarray(theta, float))
    return float(law.grad_V(theta, x) @ xdot + 2.0 * law.sigma * law.V(theta, x))
