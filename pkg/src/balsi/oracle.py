"""Direct double-integral evaluation of the identifier quantities (test oracle).

With a(t) = C x(t) - int_0^t C f and G(t) = int_0^t C g, the regression
errors are p(t, s) = a(t) - a(s) and q(t, s) = G(t) - G(s).  The double
integrals of q'p and q'q over [t0, tau]^2 are evaluated by the composite
trapezoid rule on a uniform grid; for product weights the double sum
collapses to single sums:

    sum_ab w_a w_b (G_a - G_b)'(a_a - a_b) = 2 W sum_a w_a G_a' a_a - 2 (sum w G)'(sum w a).

The running integrals of C f and C g come from Gauss-Legendre rules on every
grid cell, split at event times where the control jumps.
"""

from __future__ import annotations

import warnings

import numpy as np

from .errors import DomainError, GridTooCoarse
from .plants import measure


def _signals(traj, structure, law, noise):
    """Callables returning (C x_meas, C f, C g) along the recorded run."""
    noisy = noise is not None and noise.active

    def at(t, seg):
        x = seg.x(t)
        xm = measure(x, t, noise) if noisy else x
        u = law.k(seg.theta, xm)
        cf, cg = structure.selected(xm, u)
        return structure.C @ xm, np.asarray(cf, float), np.asarray(cg, float)

    return at


def _segment_for(traj, a, b):
    mid = 0.5 * (a + b)
    for seg in traj.segments:
        if seg.t0 <= mid <= seg.t1:
            return seg
    raise DomainError(f"time {mid} lies outside the recorded trajectory")


def _cumulative(traj, at, grid, gauss):
    """Running integrals of C f and C g at the grid nodes, and C x at the nodes."""
    nodes, weights = np.polynomial.legendre.leggauss(gauss)
    events = [s.t1 for s in traj.segments]
    cx, F, G = [], [], []
    acc_f = acc_g = None
    for k, t in enumerate(grid):
        seg = traj.segment_at(t) if t < traj.t_end else traj.segments[-1]
        cxk, cfk, cgk = at(t, seg)
        if acc_f is None:
            acc_f, acc_g = np.zeros_like(cfk), np.zeros_like(cgk)
        if k > 0:
            lo = grid[k - 1]
            cuts = [lo] + [e for e in events if lo < e < t] + [t]
            for a, b in zip(cuts[:-1], cuts[1:]):
                sub = _segment_for(traj, a, b)
                half, mid = 0.5 * (b - a), 0.5 * (a + b)
                for z, w in zip(nodes, weights):
                    _, cf, cg = at(mid + half * z, sub)
                    acc_f = acc_f + w * half * cf
                    acc_g = acc_g + w * half * cg
        cx.append(cxk)
        F.append(acc_f.copy())
        G.append(acc_g.copy())
    return np.array(cx), np.array(F), np.array(G)


def _trapezoid(a, G, h):
    """Composite trapezoid values of the two double integrals."""
    w = np.full(a.shape[0], h)
    w[0] = w[-1] = 0.5 * h
    W = w.sum()
    # G: (N, j, l), a: (N, j)
    sGa = np.einsum("k,kjl,kj->l", w, G, a)
    sGG = np.einsum("k,kjl,kjm->lm", w, G, G)
    mG = np.einsum("k,kjl->jl", w, G)
    ma = np.einsum("k,kj->j", w, a)
    Y = 2.0 * W * sGa - 2.0 * mG.T @ ma
    Q = 2.0 * W * sGG - 2.0 * mG.T @ mG
    return Y, 0.5 * (Q + Q.T)


def quadrature_oracle(traj, structure, law, tau, grid=256, noise=None, t_origin=0.0,
                      gauss=8, rtol=1e-4):
    """Reference (Y, Q) over [t_origin, tau]^2 from the dense trajectory.

    A second evaluation on half the grid gives a Richardson error estimate;
    :class:`GridTooCoarse` is warned when it exceeds ``rtol`` relative.
    """
    if grid < 16:
        raise DomainError("grid must be at least 16")
    if tau > traj.t_end + 1e-12 or tau < t_origin:
        raise DomainError("tau must lie inside the recorded trajectory")
    l, j = structure.l, structure.C.shape[0]
    if tau == t_origin:
        return np.zeros(l), np.zeros((l, l))
    at = _signals(traj, structure, law, noise)
    ts = np.linspace(t_origin, tau, grid + 1)
    cx, F, G = _cumulative(traj, at, ts, gauss)
    a = cx - F
    h = (tau - t_origin) / grid
    Y, Q = _trapezoid(a, G, h)
    Yc, Qc = _trapezoid(a[::2], G[::2], 2 * h) if grid % 2 == 0 else (Y, Q)
    err = max(np.linalg.norm(Y - Yc) / 3.0 / max(np.linalg.norm(Y), 1e-300),
              np.linalg.norm(Q - Qc) / 3.0 / max(np.linalg.norm(Q), 1e-300))
    if err > rtol and (np.linalg.norm(Q) > 0 or np.linalg.norm(Y) > 0):
        warnings.warn(f"quadrature grid {grid} too coarse: estimated relative error {err:.2e}",
                      GridTooCoarse, stacklevel=2)
    return Y, Q
