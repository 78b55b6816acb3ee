# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled segment assembly for the chamber ring (see _kernels_py for the reference)."""

from libc.math cimport sqrt


def segment_forces(const double[:, ::1] x, const double[:, ::1] w,
                   const double[::1] L, const double[::1] tau,
                   double k_lin, double k_cub, double c_visc,
                   double ck, double cc,
                   double[:, ::1] F, double[:, :, ::1] G):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t s, j, bad = -1
    cdef double dx, dy, dvx, dvy, l2, L2, L3, E, Edot, P, dPdE, a, b
    with nogil:
        for s in range(n):
            j = s + 1
            if j == n:
                j = 0
            dx = x[j, 0] - x[s, 0]
            dy = x[j, 1] - x[s, 1]
            dvx = w[j, 0] - w[s, 0]
            dvy = w[j, 1] - w[s, 1]
            l2 = dx * dx + dy * dy
            L2 = L[s] * L[s]
            if l2 < 1e-18 * L2:
                bad = s
                break
            L3 = L2 * L[s]
            E = 0.5 * (l2 - L2) / L2
            Edot = (dx * dvx + dy * dvy) / L2
            P = k_lin * E + k_cub * E * E * E + tau[s] + c_visc * Edot
            dPdE = k_lin + 3.0 * k_cub * E * E
            a = P / L[s]
            F[j, 0] += a * dx
            F[j, 1] += a * dy
            F[s, 0] -= a * dx
            F[s, 1] -= a * dy
            b = ck / L3
            G[s, 0, 0] = b * (dPdE * dx * dx + c_visc * dx * dvx) + ck * a + cc * c_visc * dx * dx / L3
            G[s, 0, 1] = b * (dPdE * dx * dy + c_visc * dx * dvy) + cc * c_visc * dx * dy / L3
            G[s, 1, 0] = b * (dPdE * dy * dx + c_visc * dy * dvx) + cc * c_visc * dy * dx / L3
            G[s, 1, 1] = b * (dPdE * dy * dy + c_visc * dy * dvy) + ck * a + cc * c_visc * dy * dy / L3
    return bad
