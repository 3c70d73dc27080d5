"""Plants of the form xdot = f(x, u) + g(x, u) theta.

A plant is split in two objects.  :class:`PlantStructure` carries everything a
controller or identifier is allowed to know (f, g, the selector matrix C and
the admissible box).  :class:`PlantModel` pairs a structure with the hidden
ground-truth parameter vector; only the simulator right-hand side and the
post-hoc verifier read ``theta_true``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError
from .kernels import kern

_CHECK_SAMPLES = 100
_CHECK_TOL = 1e-10


@dataclass(frozen=True)
class BoxSet:
    """Closed box {theta : lower <= theta <= upper}; bounds may be infinite."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float)
        hi = np.array(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DomainError("box bounds must be 1-D arrays of equal length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo > hi):
            raise DomainError("box needs lower <= upper in every coordinate")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unbounded(cls, dim):
        return cls(np.full(dim, -np.inf), np.full(dim, np.inf))

    @property
    def dim(self):
        return self.lower.size

    @property
    def bounded(self):
        """Indices of coordinates carrying at least one finite bound."""
        return np.flatnonzero(np.isfinite(self.lower) | np.isfinite(self.upper))

    def project(self, theta):
        return np.clip(np.asarray(theta, dtype=float), self.lower, self.upper)

    def contains(self, theta, tol=0.0):
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(theta >= self.lower - tol) and np.all(theta <= self.upper + tol))


@dataclass(frozen=True)
class NoiseSpec:
    """Deterministic measurement error amplitude * sin(2 pi frequency t) * direction."""

    amplitude: float = 0.0
    frequency: float = 0.0
    direction: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.amplitude >= 0.0:
            raise DomainError("noise amplitude must be >= 0")

    @property
    def active(self):
        return self.amplitude > 0.0


def measure(x, t, noise):
    """Return the measured state x + e(t)."""
    x = np.asarray(x, dtype=float)
    if noise is None or not noise.active:
        return x
    direction = np.ones_like(x) if noise.direction is None else np.asarray(noise.direction, float)
    return x + noise.amplitude * np.sin(2.0 * np.pi * noise.frequency * t) * direction


@dataclass(frozen=True)
class PlantStructure:
    """Known part of the plant: f, g, the selector C and the admissible box.

    ``selected(x, u)`` returns ``(C f(x, u), C g(x, u))``; plants may supply a
    faster closed form than the generic matrix products.
    """

    name: str
    n: int
    m: int
    l: int
    f: Callable
    g: Callable
    C: np.ndarray
    box: BoxSet
    params: dict = field(default_factory=dict)
    selected_fn: Optional[Callable] = None

    def selected(self, x, u):
        if self.selected_fn is not None:
            return self.selected_fn(x, u)
        return self.C @ self.f(x, u), self.C @ self.g(x, u)

    def flow(self, x, u, theta):
        """f(x, u) + g(x, u) theta for a caller-supplied theta."""
        return self.f(x, u) + self.g(x, u) @ theta


@dataclass(frozen=True)
class PlantModel:
    structure: PlantStructure
    theta_true: np.ndarray

    n = property(lambda self: self.structure.n)
    m = property(lambda self: self.structure.m)
    l = property(lambda self: self.structure.l)
    f = property(lambda self: self.structure.f)
    g = property(lambda self: self.structure.g)
    C = property(lambda self: self.structure.C)
    box = property(lambda self: self.structure.box)
    name = property(lambda self: self.structure.name)

    def xdot(self, x, u):
        """True plant vector field (simulator use only)."""
        return self.structure.flow(x, u, self.theta_true)


def check_structure(structure, seed=0):
    """Verify f(0,0)=0, g(0,0)=0 and the selector condition on random samples.

    Returns the worst selector residual ``|(I - C'(CC')^-1 C) g(x, u)|``.
    """
    n, m, l = structure.n, structure.m, structure.l
    f0 = np.asarray(structure.f(np.zeros(n), np.zeros(m)))
    g0 = np.asarray(structure.g(np.zeros(n), np.zeros(m)))
    if f0.shape != (n,) or g0.shape != (n, l):
        raise DomainError(f"{structure.name}: f/g have wrong shapes {f0.shape}, {g0.shape}")
    if np.max(np.abs(f0), initial=0.0) > 0.0 or np.max(np.abs(g0), initial=0.0) > 0.0:
        raise DomainError(f"{structure.name}: need f(0,0) = 0 and g(0,0) = 0")
    C = np.atleast_2d(structure.C)
    if C.shape[1] != n or np.linalg.matrix_rank(C) != C.shape[0]:
        raise DomainError(f"{structure.name}: C must have full row rank and n columns")
    proj = np.eye(n) - C.T @ np.linalg.solve(C @ C.T, C)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(_CHECK_SAMPLES):
        x = rng.normal(size=n)
        u = rng.normal(size=m)
        gx = structure.g(x, u)
        worst = max(worst, float(np.max(np.abs(proj @ gx), initial=0.0)))
        cf, cg = structure.selected(x, u)
        if not (np.allclose(cf, C @ structure.f(x, u), rtol=1e-12, atol=1e-12)
                and np.allclose(cg, C @ gx, rtol=1e-12, atol=1e-12)):
            raise DomainError(f"{structure.name}: selected() disagrees with C f, C g")
    if worst > _CHECK_TOL:
        raise DomainError(f"{structure.name}: g leaves the range of C' (residual {worst:.3g})")
    return worst


def _make_model(structure, theta_true):
    theta_true = np.array(theta_true, dtype=float)
    if theta_true.shape != (structure.l,) or not np.all(np.isfinite(theta_true)):
        raise DomainError(f"{structure.name}: theta must be a finite vector of length {structure.l}")
    if not structure.box.contains(theta_true):
        raise DomainError(f"{structure.name}: theta_true lies outside the admissible set")
    check_structure(structure)
    theta_true.flags.writeable = False
    return PlantModel(structure, theta_true)


# ---------------------------------------------------------------- wing rock

def wing_rock_structure(kappa, mu):
    if not kappa > 0 or not mu > 0:
        raise DomainError("wing rock needs kappa > 0 and mu > 0")
    kappa = float(kappa)
    mu = float(mu)

    def f(x, u):
        return np.array([x[1], 0.0, -mu * x[2] + mu * u[0]])

    def g(x, u):
        out = np.zeros((3, 5))
        out[1] = kern.wingrock_zeta(x[0], x[1], x[2])
        return out

    def selected(x, u):
        return np.zeros(1), np.asarray(kern.wingrock_zeta(x[0], x[1], x[2])).reshape(1, 5)

    box = BoxSet(np.array([-np.inf] * 4 + [kappa]), np.full(5, np.inf))
    return PlantStructure("wing_rock", 3, 1, 5, f, g, np.array([[0.0, 1.0, 0.0]]), box,
                          params={"kappa": kappa, "mu": mu}, selected_fn=selected)


def wing_rock(kappa, mu, theta_true):
    """Wing-rock roll dynamics with first-order actuator.

    x = (roll angle, roll rate, actuator state); theta multiplies
    zeta(x) = (x1, x2, |x1| x2, |x2| x2, x3) in the roll-rate equation.
    """
    structure = wing_rock_structure(kappa, mu)
    theta_true = np.asarray(theta_true, dtype=float)
    if theta_true.shape == (5,) and theta_true[4] < kappa:
        raise DomainError(f"wing rock needs theta_5 >= kappa = {kappa}")
    return _make_model(structure, theta_true)


# ---------------------------------------------------------------- LTI chain

def lti_param_count(n):
    return n * (n + 3) // 2


def lti_row_offsets(n):
    """Start index of row i (0-based) inside the stacked parameter vector."""
    return [i * (i + 3) // 2 for i in range(n)]


def lti_superdiagonal(n):
    """Indices of theta_{i,i+1}, i = 1..n."""
    return [off + i + 1 for i, off in enumerate(lti_row_offsets(n))]


def lti_chain_structure(n, kappa):
    if int(n) != n or n < 1:
        raise DomainError("lti_chain needs an integer n >= 1")
    if not kappa > 0:
        raise DomainError("lti_chain needs kappa > 0")
    n = int(n)
    l = lti_param_count(n)
    offsets = lti_row_offsets(n)

    def f(x, u):
        return np.zeros(n)

    def g(x, u):
        xe = np.concatenate([np.asarray(x, float), np.asarray(u, float)[:1]])
        out = np.zeros((n, l))
        for i, off in enumerate(offsets):
            out[i, off:off + i + 2] = xe[:i + 2]
        return out

    lower = np.full(l, -np.inf)
    lower[lti_superdiagonal(n)] = kappa
    box = BoxSet(lower, np.full(l, np.inf))
    return PlantStructure(f"lti_chain{n}", n, 1, l, f, g, np.eye(n), box,
                          params={"n": n, "kappa": float(kappa)},
                          selected_fn=lambda x, u: (f(x, u), g(x, u)))


def lti_chain(n, kappa, theta_true):
    """Controllable chain xdot_i = sum_{j<=i} th_ij x_j + th_{i,i+1} x_{i+1}, x_{n+1} = u."""
    return _make_model(lti_chain_structure(n, kappa), theta_true)
