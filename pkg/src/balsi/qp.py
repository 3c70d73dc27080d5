"""Small strictly convex QPs over a box, as needed by the identifier update.

Two problems are solved:

* least distance to ``theta_prev`` over {theta in box : Q theta = Y}, where the
  equality is read through the eigendecomposition of Q with eigenvalues below
  ``rank_tol * max(1, lambda_max)`` discarded;
* the penalised problem |theta - theta_prev|^2 + beta |Y - Q theta|^2 over the box.

The default algorithm enumerates faces of the box (every bounded coordinate is
free, at its lower bound or at its upper bound).  For a strictly convex
objective the minimiser of the problem restricted to the optimal face, with
the remaining coordinates unconstrained, is the global minimiser; so the best
box-feasible face solution is exact.  The iterative alternatives are Dykstra's
alternating projections and projected gradient.
"""

from __future__ import annotations

import itertools

import numpy as np

from .errors import InfeasibleConstraint, NonConvergence

MAX_FACES = 4096


def affine_constraints(Q, Y, rank_tol):
    """Rows U_r' and right-hand side c with {U_r' theta = c} the thresholded set."""
    lam, U = np.linalg.eigh(Q)
    thr = rank_tol * max(1.0, float(lam[-1]))
    keep = lam > thr
    Ur = U[:, keep]
    c = (Ur.T @ Y) / lam[keep]
    return Ur.T, c


def _faces(box):
    """Yield (fixed indices, fixed values) for every face of the box."""
    lo, hi = box.lower, box.upper
    choices = []
    for i in range(box.dim):
        opts = [None]
        if np.isfinite(lo[i]):
            opts.append(lo[i])
        if np.isfinite(hi[i]) and hi[i] != lo[i]:
            opts.append(hi[i])
        if lo[i] == hi[i]:
            opts = [lo[i]]
        choices.append(opts)
    for combo in itertools.product(*choices):
        idx = np.array([i for i, v in enumerate(combo) if v is not None], dtype=int)
        vals = np.array([combo[i] for i in idx], dtype=float)
        yield idx, vals


def _face_count(box):
    count = 1
    for lo, hi in zip(box.lower, box.upper):
        if lo == hi:
            continue
        count *= 1 + int(np.isfinite(lo)) + int(np.isfinite(hi))
    return count


def _in_box(theta, box, tol):
    slack = tol * (1.0 + np.abs(theta))
    return bool(np.all(theta >= box.lower - slack) and np.all(theta <= box.upper + slack))


def _svd(M):
    W, s, Zt = np.linalg.svd(M, full_matrices=False)
    return W, s, Zt.T


def _least_distance(a, M, d):
    """argmin |v - a| s.t. M v = d (least squares if inconsistent); also the residual."""
    if M.shape[0] == 0:
        return a.copy(), 0.0
    if M.shape[1] == 0:
        return a.copy(), float(np.linalg.norm(d))
    W, s, Z = _svd(M)
    rank = int(np.count_nonzero(s > s[0] * 1e-13)) if s.size else 0
    r = d - M @ a
    v = a + Z[:, :rank] @ ((W[:, :rank].T @ r) / s[:rank])
    return v, float(np.linalg.norm(M @ v - d))


def min_distance_affine_box(theta_prev, Y, Q, box, rank_tol, method="active_set",
                            tol=1e-10, max_iter=100000):
    """Projection of ``theta_prev`` onto {theta in box : Q theta = Y}."""
    A, c = affine_constraints(Q, Y, rank_tol)
    if method == "iterative" or _face_count(box) > MAX_FACES:
        return dykstra(theta_prev, A, c, box, tol, max_iter)
    eq_scale = 1.0 + float(np.linalg.norm(c))
    best, best_obj = None, np.inf
    for idx, vals in _faces(box):
        free = np.setdiff1d(np.arange(box.dim), idx)
        d = c - A[:, idx] @ vals
        v, res = _least_distance(theta_prev[free], A[:, free], d)
        if res > 1e-9 * eq_scale:
            continue
        cand = theta_prev.copy()
        cand[idx] = vals
        cand[free] = v
        if not _in_box(cand, box, 1e-12):
            continue
        obj = float(np.sum((cand - theta_prev) ** 2))
        if obj < best_obj:
            best, best_obj = cand, obj
    if best is None:
        raise InfeasibleConstraint("no parameter in the admissible set satisfies Y = Q theta")
    return box.project(best)


def _affine_projector(A, c):
    """Return a function projecting onto {v : A v = c} (A has orthonormal rows)."""
    def proj(v):
        return v - A.T @ (A @ v - c)
    return proj


def dykstra(theta_prev, A, c, box, tol=1e-10, max_iter=100000):
    """Dykstra's alternating projections between {A v = c} and the box.

    ``A`` must have orthonormal rows (as returned by :func:`affine_constraints`).
    """
    proj_aff = _affine_projector(A, c)
    x = np.asarray(theta_prev, float).copy()
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    for it in range(int(max_iter)):
        y = proj_aff(x + p)
        p = x + p - y
        x_new = box.project(y + q)
        q = y + q - x_new
        change = np.linalg.norm(x_new - x)
        x = x_new
        if change <= tol * (1.0 + np.linalg.norm(x)):
            gap = np.linalg.norm(A @ x - c)
            if gap <= 1e3 * tol * (1.0 + np.linalg.norm(c)):
                return x
            if gap > 1e-6 * (1.0 + np.linalg.norm(c)):
                # settled at a positive distance: the two sets do not meet
                raise InfeasibleConstraint("no parameter in the admissible set satisfies "
                                           "Y = Q theta")
    raise NonConvergence(f"Dykstra did not converge in {max_iter} iterations")


def _penalised_free(a, M, y, beta):
    """argmin |v - a|^2 + beta |M v - y|^2 without constraints (SVD form)."""
    if M.shape[1] == 0:
        return a.copy()
    W, s, Z = _svd(M)
    r = y - M @ a
    gain = beta * s / (1.0 + beta * s * s)
    return a + Z @ (gain * (W.T @ r))


def penalised_objective(theta, theta_prev, Y, Q, beta):
    return float(np.sum((theta - theta_prev) ** 2) + beta * np.sum((Y - Q @ theta) ** 2))


def regularized_box(theta_prev, Y, Q, box, beta, method="active_set", tol=1e-10,
                    max_iter=100000):
    """argmin over the box of |theta - theta_prev|^2 + beta |Y - Q theta|^2."""
    if method == "iterative" or _face_count(box) > MAX_FACES:
        return projected_gradient(theta_prev, Y, Q, box, beta, tol, max_iter)
    best, best_obj = None, np.inf
    for idx, vals in _faces(box):
        free = np.setdiff1d(np.arange(box.dim), idx)
        rhs = Y - Q[:, idx] @ vals
        cand = theta_prev.copy()
        cand[idx] = vals
        cand[free] = _penalised_free(theta_prev[free], Q[:, free], rhs, beta)
        if not _in_box(cand, box, 1e-12):
            continue
        obj = penalised_objective(cand, theta_prev, Y, Q, beta)
        if obj < best_obj:
            best, best_obj = cand, obj
    # the face with every bounded coordinate pinned to a finite bound is always feasible
    return box.project(best)


def projected_gradient(theta_prev, Y, Q, box, beta, tol=1e-10, max_iter=100000):
    """Projected gradient with step 1 / (2 (1 + beta lambda_max(Q)^2))."""
    lam_max = float(np.linalg.eigvalsh(Q)[-1]) if Q.size else 0.0
    step = 1.0 / (2.0 * (1.0 + beta * lam_max ** 2))
    x = box.project(theta_prev)
    for _ in range(int(max_iter)):
        grad = 2.0 * (x - theta_prev) - 2.0 * beta * Q.T @ (Y - Q @ x)
        x_new = box.project(x - step * grad)
        if np.linalg.norm(x_new - x) <= tol * (1.0 + np.linalg.norm(x)):
            return x_new
        x = x_new
    raise NonConvergence(f"projected gradient did not converge in {max_iter} iterations")
