"""Closed-loop hybrid integration between events and trigger localisation.

Between two events the estimate is frozen and the plant, together with any
auxiliary ODEs (identifier accumulators), is integrated with an adaptive
Dormand-Prince 4(5) stepper.  A segment ends after T or at the first time the
Lyapunov value rises by a(x(tau_i)) above its value at tau_i, whichever comes
first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import RK45
from scipy.integrate._ivp.common import OdeSolution

from .errors import DomainError, NonFiniteState, StepFailure
from .plants import measure

TIMEOUT = "timeout"
TRIGGER = "trigger"
HORIZON = "horizon"


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_step: float = 0.05
    event_tol: float = 1e-9
    samples: int = 8

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "event_tol"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if not self.event_tol < self.max_step:
            raise DomainError("event_tol must be smaller than max_step")
        if int(self.samples) < 1:
            raise DomainError("samples must be >= 1")


@dataclass(frozen=True)
class TriggerSpec:
    """Timeout T and threshold a(x) = A2 |x|^2 + A4 |x|^4."""

    T: float = 0.4
    A2: float = 2e5
    A4: float = 2e5

    def __post_init__(self):
        if not self.T > 0:
            raise DomainError("T must be positive")
        if not self.A2 > 0 or not self.A4 >= 0:
            raise DomainError("need A2 > 0 and A4 >= 0")

    def a(self, x):
        r2 = float(np.dot(x, x))
        return self.A2 * r2 + self.A4 * r2 * r2


@dataclass
class Segment:
    """Solution on [t0, t1] with the estimate held at ``theta``.

    ``sol`` interpolates the full integrated vector (state first, then any
    auxiliary variables); ``kind`` says why the segment ended.
    """

    t0: float
    t1: float
    theta: np.ndarray
    sol: OdeSolution
    y0: np.ndarray
    y1: np.ndarray
    kind: str
    n: int
    nfev: int = 0

    def x(self, t):
        return self.sol(t)[: self.n]

    def aux(self, t):
        return self.sol(t)[self.n:]


@dataclass
class HybridTrajectory:
    """Piecewise record of a run: consecutive segments sharing end points."""

    n: int
    segments: list = field(default_factory=list)

    @property
    def t_end(self):
        return self.segments[-1].t1 if self.segments else 0.0

    @property
    def event_times(self):
        """tau_0 = 0 followed by every event that ended a segment."""
        ts = [self.segments[0].t0] if self.segments else [0.0]
        ts += [s.t1 for s in self.segments if s.kind != HORIZON]
        return np.array(ts)

    @property
    def event_kinds(self):
        return [s.kind for s in self.segments if s.kind != HORIZON]

    def segment_at(self, t):
        """Segment containing ``t``; the later one at an event time."""
        for seg in self.segments:
            if seg.t0 <= t < seg.t1:
                return seg
        return self.segments[-1]

    def x(self, t):
        return self.segment_at(t).x(t)

    def theta(self, t):
        return self.segment_at(t).theta


class AuxiliaryOde:
    """Extra ODEs carried with the plant; ``deriv`` writes into ``out``."""

    size = 0

    def deriv(self, t, x, xm, u, s, out):
        raise NotImplementedError


def integrate_flow(rhs, t0, y0, t_bound, cfg, on_step=None):
    """Integrate y' = rhs(t, y) on [t0, t_bound] and return (OdeSolution, t_end, y_end, nfev).

    ``on_step(interp, t_old, t_new)`` may return a time r in (t_old, t_new];
    integration then stops exactly at r.  The last step is redone from
    ``t_old`` with ``t_bound = r`` so that the stored solution ends on a
    genuine step rather than on the interpolant.
    """
    y0 = np.asarray(y0, dtype=float)
    if not np.all(np.isfinite(y0)):
        raise NonFiniteState(f"non-finite initial state at t={t0}")
    if t_bound <= t0:
        return _constant_solution(t0, y0), t0, y0.copy(), 0
    ts, interps = [t0], []
    nfev = 0
    solver = _make_solver(rhs, t0, y0, t_bound, cfg)
    while solver.status == "running":
        t_old, y_old = solver.t, solver.y.copy()
        msg = solver.step()
        if solver.status == "failed":
            raise StepFailure(f"integrator failed at t={t_old}: {msg}")
        if not np.all(np.isfinite(solver.y)):
            raise NonFiniteState(f"state became non-finite near t={solver.t}")
        interp = solver.dense_output()
        stop = on_step(interp, t_old, solver.t) if on_step is not None else None
        if stop is not None and stop < solver.t:
            nfev += solver.nfev
            sub, _, y_end, sub_nfev = integrate_flow(rhs, t_old, y_old, stop, cfg)
            ts.extend(sub.ts[1:])
            interps.extend(sub.interpolants)
            return OdeSolution(np.array(ts), interps), stop, y_end, nfev + sub_nfev
        ts.append(solver.t)
        interps.append(interp)
        if stop is not None:
            break
    nfev += solver.nfev
    return OdeSolution(np.array(ts), interps), ts[-1], solver.y.copy(), nfev


def _make_solver(rhs, t0, y0, t_bound, cfg):
    def guarded(t, y):
        # a NaN derivative would otherwise stall RK45's step-size control
        dy = rhs(t, y)
        if not np.all(np.isfinite(dy)):
            raise NonFiniteState(f"right-hand side became non-finite at t={t}")
        return dy

    return RK45(guarded, t0, y0, t_bound, max_step=cfg.max_step, rtol=cfg.rel_tol,
                atol=cfg.abs_tol, vectorized=False)


class _Const:
    def __init__(self, y):
        self.y = y

    def __call__(self, t):
        t = np.asarray(t)
        if t.ndim == 0:
            return self.y.copy()
        return np.repeat(self.y[:, None], t.size, axis=1)


def _constant_solution(t0, y0):
    return OdeSolution(np.array([t0, t0]), [_Const(y0.copy())])


def detect_trigger(h, t_lo, t_hi, event_tol, samples=8):
    """First upward zero crossing of ``h`` in (t_lo, t_hi], or None.

    ``h`` is sampled at ``samples`` interior points plus t_hi; the first
    bracket with h < 0 on the left and h >= 0 on the right is bisected to
    width ``event_tol``.  The returned time is the right end of the final
    bracket, so h(r) >= 0.
    """
    grid = np.linspace(t_lo, t_hi, samples + 2)[1:]
    left, h_left = t_lo, h(t_lo)
    for t in grid:
        ht = h(t)
        if ht >= 0.0 and h_left < 0.0:
            lo, hi = left, t
            while hi - lo > event_tol:
                mid = 0.5 * (lo + hi)
                if h(mid) >= 0.0:
                    hi = mid
                else:
                    lo = mid
            return hi
        left, h_left = t, ht
    return None


def closed_loop_rhs(plant, law, theta, noise=None, aux=None):
    """Right-hand side of plant + auxiliary ODEs under u = k(theta, measured x)."""
    n = plant.n
    theta = np.ascontiguousarray(theta, dtype=float)
    noisy = noise is not None and noise.active

    def rhs(t, y):
        x = y[:n]
        xm = measure(x, t, noise) if noisy else x
        u = law.k(theta, xm)
        out = np.empty_like(y)
        out[:n] = plant.xdot(x, u)
        if aux is not None:
            aux.deriv(t, x, xm, u, y[n:], out[n:])
        return out

    return rhs


def integrate_segment(plant, law, theta, x0, tau, trigger, cfg=IntegratorConfig(),
                      aux=None, aux0=None, noise=None, t_stop=np.inf):
    """Integrate one inter-event interval starting at ``tau`` from ``x0``.

    Returns a :class:`Segment` ending at min(tau + T, r, t_stop), with kind
    ``timeout``, ``trigger`` or ``horizon``.
    """
    x0 = np.asarray(x0, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(x0)):
        raise NonFiniteState(f"non-finite state at t={tau}")
    if aux is not None and aux0 is None:
        aux0 = np.zeros(aux.size)
    y0 = x0 if aux is None else np.concatenate([x0, aux0])
    n = plant.n
    t_timeout = tau + trigger.T
    t_bound = min(t_timeout, t_stop)
    rhs = closed_loop_rhs(plant, law, theta, noise, aux)

    xm0 = measure(x0, tau, noise) if noise is not None and noise.active else x0
    on_step = None
    if np.any(xm0 != 0.0):
        level = law.V(theta, xm0) + trigger.a(xm0)
        noisy = noise is not None and noise.active

        def on_step(interp, t_old, t_new):
            def h(t):
                x = interp(t)[:n]
                if noisy:
                    x = measure(x, t, noise)
                return law.V(theta, x) - level
            return detect_trigger(h, t_old, t_new, cfg.event_tol, cfg.samples)

    sol, t_end, y_end, nfev = integrate_flow(rhs, tau, y0, t_bound, cfg, on_step)
    if t_end < t_bound:
        kind = TRIGGER
    elif t_bound == t_timeout:
        kind = TIMEOUT
    else:
        kind = HORIZON
    return Segment(tau, t_end, theta.copy(), sol, y0, y_end, kind, n, nfev)
