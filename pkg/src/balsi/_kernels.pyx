# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; mirrors ``_kernels_py`` signature for signature."""

from libc.math cimport fabs


cpdef tuple wingrock_zeta(double x1, double x2, double x3):
    return (x1, x2, fabs(x1) * x2, fabs(x2) * x2, x3)


cdef inline void _phi(double t1, double t2, double t3, double t4, double t5,
                      double x1, double x2, double L,
                      double* phi, double* phi_x1, double* phi_x2) nogil:
    cdef double s = x2 + L * x1
    cdef double b = 1.0 + 0.5 * t3 * t3 * x1 * x1 + 0.5 * t4 * t4 * x2 * x2
    cdef double gam = L + b + 0.25 * L * L * b * b
    cdef double dgam = 1.0 + 0.5 * L * L * b
    cdef double inv5 = 1.0 / t5
    phi[0] = -inv5 * ((1.0 + t1) * x1 + t2 * x2) - inv5 * gam * s
    phi_x1[0] = -inv5 * ((1.0 + t1) + dgam * t3 * t3 * x1 * s + gam * L)
    phi_x2[0] = -inv5 * (t2 + dgam * t4 * t4 * x2 * s + gam)


cpdef tuple wingrock_phi(const double[::1] th, double x1, double x2, double L):
    cdef double phi, p1, p2
    _phi(th[0], th[1], th[2], th[3], th[4], x1, x2, L, &phi, &p1, &p2)
    return (phi, p1, p2)


cpdef tuple wingrock_phi_theta(const double[::1] th, double x1, double x2, double L):
    cdef double t1 = th[0], t2 = th[1], t3 = th[2], t4 = th[3], t5 = th[4]
    cdef double s = x2 + L * x1
    cdef double b = 1.0 + 0.5 * t3 * t3 * x1 * x1 + 0.5 * t4 * t4 * x2 * x2
    cdef double dgam = 1.0 + 0.5 * L * L * b
    cdef double inv5 = 1.0 / t5
    cdef double phi, p1, p2
    _phi(t1, t2, t3, t4, t5, x1, x2, L, &phi, &p1, &p2)
    return (-inv5 * x1,
            -inv5 * x2,
            -inv5 * dgam * t3 * x1 * x1 * s,
            -inv5 * dgam * t4 * x2 * x2 * s,
            -phi * inv5)


cpdef double wingrock_feedback(const double[::1] th, double x1, double x2, double x3,
                               double L, double mu):
    cdef double t1 = th[0], t2 = th[1], t3 = th[2], t4 = th[3], t5 = th[4]
    cdef double phi, p1, p2
    _phi(t1, t2, t3, t4, t5, x1, x2, L, &phi, &p1, &p2)
    cdef double drift2 = t1 * x1 + t2 * x2 + t3 * fabs(x1) * x2 + t4 * fabs(x2) * x2 + t5 * x3
    return (x3 - t5 * (x2 + L * x1) / mu + p1 * x2 / mu
            + p2 * drift2 / mu - L * (x3 - phi) / mu)


cpdef double wingrock_clf(const double[::1] th, double x1, double x2, double x3, double L):
    cdef double phi, p1, p2
    _phi(th[0], th[1], th[2], th[3], th[4], x1, x2, L, &phi, &p1, &p2)
    cdef double s = x2 + L * x1
    cdef double e = x3 - phi
    return 0.5 * (x1 * x1 + s * s + e * e)


cpdef tuple wingrock_clf_grad(const double[::1] th, double x1, double x2, double x3, double L):
    cdef double phi, p1, p2
    _phi(th[0], th[1], th[2], th[3], th[4], x1, x2, L, &phi, &p1, &p2)
    cdef double s = x2 + L * x1
    cdef double e = x3 - phi
    return (x1 + L * s - e * p1, s - e * p2, e)


cpdef void identifier_deriv(double tl, const double[:, ::1] G, const double[::1] F,
                            const double[::1] X, const double[::1] s,
                            double[::1] out):
    cdef Py_ssize_t j = G.shape[0], l = G.shape[1]
    cdef Py_ssize_t nt = l * (l + 1) // 2
    cdef Py_ssize_t iB = j, iw = j + l * j
    cdef Py_ssize_t iphi = iw + l, iY = iw + l + j
    cdef Py_ssize_t iQ = iY + l, iQd = iY + l + nt
    cdef Py_ssize_t a, i, k, p
    cdef double acc, acc2, sik, ski
    with nogil:
        for a in range(j):
            out[a] = X[a]
            out[iphi + a] = tl * F[a]
        for i in range(l):
            acc = 0.0
            acc2 = 0.0
            for a in range(j):
                out[iB + i * j + a] = tl * G[a, i]
                acc = acc + G[a, i] * (s[a] + s[iphi + a]) + s[iB + i * j + a] * F[a]
                acc2 = acc2 + s[iB + i * j + a] * X[a]
            out[iw + i] = acc
            out[iY + i] = 2.0 * (acc2 - s[iw + i])
        for p in range(nt):
            out[iQ + p] = s[iQd + p]
        p = 0
        for i in range(l):
            for k in range(i + 1):
                sik = 0.0
                ski = 0.0
                for a in range(j):
                    sik = sik + s[iB + i * j + a] * G[a, k]
                    ski = ski + s[iB + k * j + a] * G[a, i]
                out[iQd + p] = 2.0 * (sik + ski)
                p = p + 1
