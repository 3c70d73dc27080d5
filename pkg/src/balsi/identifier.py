"""Batch least-squares identifier: accumulator ODEs and the event-time update.

The accumulators z, B, w, phi, Y, Q (and dQ/dt) are integrated alongside the
plant.  At every event the estimate moves to the point of Theta closest to the
previous estimate among those consistent with Y = Q theta (exact mode), or
minimises |theta - theta_prev|^2 + beta |Y - Q theta|^2 (regularized mode).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qp
from .errors import DomainError
from .kernels import kern


@dataclass(frozen=True)
class IdentifierLayout:
    """Offsets of each accumulator inside the packed state vector."""

    j: int
    l: int

    @property
    def ntri(self):
        return self.l * (self.l + 1) // 2

    @property
    def size(self):
        j, l = self.j, self.l
        return j + l * j + l + j + l + 2 * self.ntri

    def slices(self):
        j, l, nt = self.j, self.l, self.ntri
        edges = np.cumsum([0, j, l * j, l, j, l, nt, nt])
        names = ("z", "B", "w", "phi", "Y", "Q", "Qdot")
        return {k: slice(int(a), int(b)) for k, a, b in zip(names, edges[:-1], edges[1:])}

    def unpack(self, s, t_origin=0.0):
        sl = self.slices()
        s = np.asarray(s, dtype=float)
        return IdentifierState(
            z=s[sl["z"]].copy(),
            B=s[sl["B"]].reshape(self.l, self.j).copy(),
            w=s[sl["w"]].copy(),
            phi=s[sl["phi"]].copy(),
            Y=s[sl["Y"]].copy(),
            Q=tril_to_sym(s[sl["Q"]], self.l),
            Qdot=tril_to_sym(s[sl["Qdot"]], self.l),
            t_origin=float(t_origin),
        )

    def Y_Q(self, s):
        sl = self.slices()
        return np.array(s[sl["Y"]], dtype=float), tril_to_sym(s[sl["Q"]], self.l)


def tril_to_sym(tri, l):
    out = np.zeros((l, l))
    rows, cols = np.tril_indices(l)
    out[rows, cols] = tri
    out[cols, rows] = tri
    return out


def sym_to_tril(M):
    rows, cols = np.tril_indices(M.shape[0])
    return np.asarray(M)[rows, cols]


@dataclass
class IdentifierState:
    z: np.ndarray
    B: np.ndarray
    w: np.ndarray
    phi: np.ndarray
    Y: np.ndarray
    Q: np.ndarray
    Qdot: np.ndarray
    t_origin: float = 0.0

    @classmethod
    def zeros(cls, j, l, t_origin=0.0):
        return cls(np.zeros(j), np.zeros((l, j)), np.zeros(l), np.zeros(j), np.zeros(l),
                   np.zeros((l, l)), np.zeros((l, l)), float(t_origin))

    @property
    def layout(self):
        return IdentifierLayout(self.z.size, self.Y.size)

    def pack(self):
        return np.concatenate([self.z, self.B.ravel(), self.w, self.phi, self.Y,
                               sym_to_tril(self.Q), sym_to_tril(self.Qdot)])


def identifier_rhs(s, t, x, u, structure):
    """Time derivative of the accumulators, returned as a new IdentifierState.

    ``structure`` supplies C and the measured regressors; ``x`` is the state
    the identifier sees (the measured state when noise is present).
    """
    if t < s.t_origin:
        raise DomainError("identifier evaluated before its time origin")
    layout = s.layout
    out = np.empty(layout.size)
    accumulate(t - s.t_origin, structure, x, u, s.pack(), out)
    return layout.unpack(out, s.t_origin)


def accumulate(tl, structure, x, u, packed, out):
    """Packed-state version of :func:`identifier_rhs` used inside the integrator."""
    cf, cg = structure.selected(x, u)
    cx = structure.C @ x
    kern.identifier_deriv(float(tl), np.ascontiguousarray(cg, dtype=float),
                          np.ascontiguousarray(cf, dtype=float),
                          np.ascontiguousarray(cx, dtype=float), packed, out)


def reinitialize(s, t):
    """Zero every accumulator and restart the local clock at ``t``."""
    return IdentifierState.zeros(s.z.size, s.Y.size, t_origin=t)


@dataclass(frozen=True)
class UpdateConfig:
    """Settings of the event-time parameter update.

    ``feas_tol`` decides when the previous estimate already satisfies
    Y = Q theta: the residual must be below feas_tol * (1 + |Q| |theta| + |Y|).
    ``method`` picks the QP algorithm: "active_set" enumerates the faces of
    the box and is exact; "iterative" runs Dykstra (exact mode) or projected
    gradient (regularized mode).
    """

    mode: str = "exact"
    beta: float = 1e17
    rank_tol: float = 1e-9
    qp_tol: float = 1e-10
    qp_max_iter: int = 100000
    feas_tol: float = 1e-8
    method: str = "active_set"

    def __post_init__(self):
        if self.mode not in ("exact", "regularized"):
            raise DomainError(f"unknown update mode {self.mode!r}")
        if self.method not in ("active_set", "iterative"):
            raise DomainError(f"unknown QP method {self.method!r}")
        if not self.beta > 0:
            raise DomainError("beta must be positive")
        if not 0.0 < self.rank_tol < 1e-3:
            raise DomainError("rank_tol must lie in (0, 1e-3)")
        if not self.qp_tol > 0 or not self.feas_tol > 0:
            raise DomainError("qp_tol and feas_tol must be positive")
        if int(self.qp_max_iter) < 1:
            raise DomainError("qp_max_iter must be >= 1")


def is_consistent(theta, Y, Q, feas_tol):
    theta = np.asarray(theta, float)
    res = np.linalg.norm(Q @ theta - Y)
    scale = 1.0 + np.linalg.norm(Q, 2) * np.linalg.norm(theta) + np.linalg.norm(Y)
    return res <= feas_tol * scale


def update_exact(theta_prev, Y, Q, box, cfg=UpdateConfig()):
    """Closest point of {theta in box : Q theta = Y} to ``theta_prev``."""
    theta_prev = np.asarray(theta_prev, float)
    Q = 0.5 * (np.asarray(Q, float) + np.asarray(Q, float).T)
    Y = np.asarray(Y, float)
    if box.contains(theta_prev) and is_consistent(theta_prev, Y, Q, cfg.feas_tol):
        return theta_prev.copy()
    return qp.min_distance_affine_box(theta_prev, Y, Q, box, cfg.rank_tol, method=cfg.method,
                                      tol=cfg.qp_tol, max_iter=cfg.qp_max_iter)


def update_regularized(theta_prev, Y, Q, box, beta, cfg=UpdateConfig(mode="regularized")):
    """argmin over the box of |theta - theta_prev|^2 + beta |Y - Q theta|^2."""
    if not beta > 0:
        raise DomainError("beta must be positive")
    theta_prev = np.asarray(theta_prev, float)
    Q = 0.5 * (np.asarray(Q, float) + np.asarray(Q, float).T)
    Y = np.asarray(Y, float)
    return qp.regularized_box(theta_prev, Y, Q, box, beta, method=cfg.method,
                              tol=cfg.qp_tol, max_iter=cfg.qp_max_iter)


def update(theta_prev, Y, Q, box, cfg):
    if cfg.mode == "exact":
        return update_exact(theta_prev, Y, Q, box, cfg)
    return update_regularized(theta_prev, Y, Q, box, cfg.beta, cfg)


def nullspace_dim(Q, rank_tol=1e-9):
    """Number of eigenvalues of Q below rank_tol * max(1, lambda_max)."""
    lam = np.linalg.eigvalsh(0.5 * (np.asarray(Q, float) + np.asarray(Q, float).T))
    thr = rank_tol * max(1.0, float(lam[-1]) if lam.size else 0.0)
    return int(np.count_nonzero(lam <= thr))


class IdentifierAux:
    """Accumulator ODEs packaged for the hybrid integrator (driven by measured x)."""

    def __init__(self, structure, t_origin=0.0):
        self.structure = structure
        self.t_origin = float(t_origin)
        self.layout = IdentifierLayout(structure.C.shape[0], structure.l)
        self.size = self.layout.size

    def deriv(self, t, x, xm, u, s, out):
        accumulate(t - self.t_origin, self.structure, xm, u, s, out)
