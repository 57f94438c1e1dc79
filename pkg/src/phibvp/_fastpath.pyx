# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twin of the scalar (N=1) iteration kernels in ``_purepath``.

Only the closed-form operator variants are handled here (variant 0: the
p = 2 curvature map, variant 1: general p > 1); everything else stays on the
numpy path.  The update order and damping policy mirror ``_purepath``
line-for-line so both backends agree to rounding.
"""

from libc.math cimport sqrt, fabs, pow, INFINITY

import numpy as np


cdef inline double _phi_inv(double z, int variant, double p, double a) noexcept nogil:
    cdef double s, rho, pc
    if variant == 0:
        return a * z / sqrt(1.0 + z * z)
    s = fabs(z)
    if s == 0.0:
        return 0.0
    pc = p / (p - 1.0)
    if s <= 1.0:
        rho = pow(s, pc / p) * pow(1.0 + pow(s, pc), -1.0 / p)
    else:
        rho = pow(1.0 + pow(s, -pc), -1.0 / p)
    if z > 0.0:
        return a * rho
    return -a * rho


def neumann_picard_1d(double[::1] u, double[::1] h, double x, double y,
                      double kappa, double dt, double big_t,
                      int variant, double p, double a,
                      double tol, int max_iter, double relax,
                      double relax_floor):
    """In-place damped Picard sweep; returns (residual, iterations, relax)."""
    cdef Py_ssize_t m = u.shape[0] - 1
    cdef Py_ssize_t i
    cdef int it = 0
    cdef double s_acc, w, path_prev, path_i, trapz_path, trapz_h
    cdef double anchor, resid, prev, diff, un
    cdef double[::1] v = np.empty(m, dtype=np.float64)
    cdef double[::1] path = np.empty(m + 1, dtype=np.float64)

    trapz_h = 0.5 * (h[0] + h[m])
    for i in range(1, m):
        trapz_h += h[i]
    trapz_h *= dt

    prev = INFINITY
    resid = INFINITY
    while it < max_iter:
        it += 1
        # midpoint fluxes and ball-valued slopes
        s_acc = 0.5 * dt * (u[0] - h[0])
        v[0] = _phi_inv(x + kappa * s_acc, variant, p, a)
        for i in range(1, m):
            s_acc += dt * (u[i] - h[i])
            v[i] = _phi_inv(x + kappa * s_acc, variant, p, a)
        # forward path and its trapezoid integral
        path[0] = 0.0
        path_prev = 0.0
        trapz_path = 0.5 * path_prev
        for i in range(m):
            path_i = path_prev + dt * v[i]
            path[i + 1] = path_i
            if i + 1 < m:
                trapz_path += path_i
            path_prev = path_i
        trapz_path += 0.5 * path[m]
        trapz_path *= dt
        anchor = ((y - x) / kappa + trapz_h - trapz_path) / big_t
        # residual and damped update
        resid = 0.0
        for i in range(m + 1):
            diff = fabs(anchor + path[i] - u[i])
            if diff > resid:
                resid = diff
        if resid <= tol:
            for i in range(m + 1):
                u[i] = anchor + path[i]
            break
        if resid > prev and relax > relax_floor:
            relax = 0.5 * relax
            if relax < relax_floor:
                relax = relax_floor
        for i in range(m + 1):
            un = anchor + path[i]
            u[i] = u[i] + relax * (un - u[i])
        prev = resid
    return resid, it, relax


def dirichlet_picard_1d(double[::1] u, double[::1] h, double x, double c_mid,
                        double kappa, double dt,
                        int variant, double p, double a,
                        double tol, int max_iter, double relax,
                        double relax_floor):
    """In-place damped shooting sweep; returns (u_end, residual, iterations, relax)."""
    cdef Py_ssize_t m = u.shape[0] - 1
    cdef Py_ssize_t i
    cdef int it = 0
    cdef double s_acc, resid, prev, diff, un_prev, un_i
    cdef double[::1] v = np.empty(m, dtype=np.float64)
    cdef double[::1] u_new = np.empty(m + 1, dtype=np.float64)

    u[0] = x
    prev = INFINITY
    resid = INFINITY
    while it < max_iter:
        it += 1
        s_acc = 0.0
        v[0] = _phi_inv(c_mid, variant, p, a)
        for i in range(1, m):
            s_acc += dt * (u[i] - h[i])
            v[i] = _phi_inv(c_mid + kappa * s_acc, variant, p, a)
        u_new[0] = x
        un_prev = x
        resid = 0.0
        for i in range(m):
            un_i = un_prev + dt * v[i]
            u_new[i + 1] = un_i
            diff = fabs(un_i - u[i + 1])
            if diff > resid:
                resid = diff
            un_prev = un_i
        if resid <= tol:
            for i in range(m + 1):
                u[i] = u_new[i]
            break
        if resid > prev and relax > relax_floor:
            relax = 0.5 * relax
            if relax < relax_floor:
                relax = relax_floor
        for i in range(1, m + 1):
            u[i] = u[i] + relax * (u_new[i] - u[i])
        prev = resid
    return u[m], resid, it, relax
