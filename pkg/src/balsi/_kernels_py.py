"""Pure-Python hot kernels (fallback for the compiled ``_kernels`` module).

Every function here has a twin with the same signature in ``_kernels.pyx``.
Parameter vectors ``th`` are length-5 sequences (theta_1..theta_5).
"""

import numpy as np


def wingrock_zeta(x1, x2, x3):
    return (x1, x2, abs(x1) * x2, abs(x2) * x2, x3)


def _beta(t3, t4, x1, x2):
    return 1.0 + 0.5 * t3 * t3 * x1 * x1 + 0.5 * t4 * t4 * x2 * x2


def wingrock_phi(th, x1, x2, L):
    """Virtual control phi(theta, x1, x2) and its partials (phi, dphi/dx1, dphi/dx2)."""
    t1, t2, t3, t4, t5 = (float(v) for v in th)
    s = x2 + L * x1
    b = _beta(t3, t4, x1, x2)
    gam = L + b + 0.25 * L * L * b * b
    dgam = 1.0 + 0.5 * L * L * b
    inv5 = 1.0 / t5
    phi = -inv5 * ((1.0 + t1) * x1 + t2 * x2) - inv5 * gam * s
    phi_x1 = -inv5 * ((1.0 + t1) + dgam * t3 * t3 * x1 * s + gam * L)
    phi_x2 = -inv5 * (t2 + dgam * t4 * t4 * x2 * s + gam)
    return phi, phi_x1, phi_x2


def wingrock_phi_theta(th, x1, x2, L):
    """Gradient of phi with respect to (theta_1, ..., theta_5)."""
    t1, t2, t3, t4, t5 = (float(v) for v in th)
    s = x2 + L * x1
    b = _beta(t3, t4, x1, x2)
    gam = L + b + 0.25 * L * L * b * b
    dgam = 1.0 + 0.5 * L * L * b
    inv5 = 1.0 / t5
    phi = -inv5 * ((1.0 + t1) * x1 + t2 * x2) - inv5 * gam * s
    return (-inv5 * x1,
            -inv5 * x2,
            -inv5 * dgam * t3 * x1 * x1 * s,
            -inv5 * dgam * t4 * x2 * x2 * s,
            -phi * inv5)


def wingrock_feedback(th, x1, x2, x3, L, mu):
    t1, t2, t3, t4, t5 = (float(v) for v in th)
    phi, phi_x1, phi_x2 = wingrock_phi(th, x1, x2, L)
    drift2 = t1 * x1 + t2 * x2 + t3 * abs(x1) * x2 + t4 * abs(x2) * x2 + t5 * x3
    return (x3 - t5 * (x2 + L * x1) / mu + phi_x1 * x2 / mu
            + phi_x2 * drift2 / mu - L * (x3 - phi) / mu)


def wingrock_clf(th, x1, x2, x3, L):
    phi = wingrock_phi(th, x1, x2, L)[0]
    s = x2 + L * x1
    e = x3 - phi
    return 0.5 * (x1 * x1 + s * s + e * e)


def wingrock_clf_grad(th, x1, x2, x3, L):
    phi, phi_x1, phi_x2 = wingrock_phi(th, x1, x2, L)
    s = x2 + L * x1
    e = x3 - phi
    return (x1 + L * s - e * phi_x1, s - e * phi_x2, e)


def identifier_deriv(tl, G, F, X, s, out):
    """Right-hand side of the batch least-squares accumulator ODEs.

    Packed state layout (j = rows of G, l = columns):
    z[j] | B[l*j] | w[l] | phi[j] | Y[l] | tril(Q) | tril(dQ/dt).
    ``tl`` is the time elapsed since the accumulator was last zeroed.
    """
    j, l = G.shape
    nt = l * (l + 1) // 2
    iz, iB = 0, j
    iw = iB + l * j
    iphi = iw + l
    iY = iphi + j
    iQ = iY + l
    iQd = iQ + nt
    z = s[iz:iB]
    B = s[iB:iw].reshape(l, j)
    w = s[iw:iphi]
    phi = s[iphi:iY]
    out[iz:iB] = X
    out[iB:iw] = (tl * G.T).ravel()
    out[iw:iphi] = G.T @ (z + phi) + B @ F
    out[iphi:iY] = tl * F
    out[iY:iQ] = 2.0 * (B @ X - w)
    out[iQ:iQd] = s[iQd:iQd + nt]
    S = B @ G
    rows, cols = np.tril_indices(l)
    out[iQd:iQd + nt] = 2.0 * (S[rows, cols] + S[cols, rows])
