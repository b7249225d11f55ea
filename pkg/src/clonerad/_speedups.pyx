# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled RK4 kernel for the equivalent gain/loss ODE.

Same contract as :mod:`clonerad._purepy`; see there for the argument layout.
"""

import numpy as np
from libc.math cimport isfinite


cdef inline void _rhs(double g, double eta, double chi, double lam,
                      double* dg, double* deta) noexcept nogil:
    dg[0] = (chi - lam) * g + lam
    deta[0] = -eta * lam / g


cdef Py_ssize_t _integrate(const double[::1] chi, const double[::1] lam, double h,
                           double[::1] g_out, double[::1] eta_out,
                           double* g_end, double* eta_end) noexcept nogil:
    cdef Py_ssize_t n = (chi.shape[0] - 1) // 2
    cdef Py_ssize_t i, j
    cdef bint store = g_out.shape[0] > 0
    cdef double g = 1.0, eta = 1.0, hh = 0.5 * h
    cdef double k1g, k1e, k2g, k2e, k3g, k3e, k4g, k4e, gt
    if store:
        g_out[0] = g
        eta_out[0] = eta
    for i in range(n):
        j = 2 * i
        _rhs(g, eta, chi[j], lam[j], &k1g, &k1e)
        gt = g + hh * k1g
        if not (gt > 0.0):
            g_end[0] = g; eta_end[0] = eta
            return i
        _rhs(gt, eta + hh * k1e, chi[j + 1], lam[j + 1], &k2g, &k2e)
        gt = g + hh * k2g
        if not (gt > 0.0):
            g_end[0] = g; eta_end[0] = eta
            return i
        _rhs(gt, eta + hh * k2e, chi[j + 1], lam[j + 1], &k3g, &k3e)
        gt = g + h * k3g
        if not (gt > 0.0):
            g_end[0] = g; eta_end[0] = eta
            return i
        _rhs(gt, eta + h * k3e, chi[j + 2], lam[j + 2], &k4g, &k4e)
        g = g + h / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g)
        eta = eta + h / 6.0 * (k1e + 2.0 * k2e + 2.0 * k3e + k4e)
        if not (g > 0.0 and isfinite(g) and isfinite(eta)):
            g_end[0] = g; eta_end[0] = eta
            return i + 1
        if store:
            g_out[i + 1] = g
            eta_out[i + 1] = eta
    g_end[0] = g
    eta_end[0] = eta
    return -1


def rk4_gain_loss(const double[::1] chi, const double[::1] lam, double h):
    cdef Py_ssize_t n = (chi.shape[0] - 1) // 2
    g_arr = np.empty(n + 1)
    eta_arr = np.empty(n + 1)
    cdef double[::1] gv = g_arr
    cdef double[::1] ev = eta_arr
    cdef double g_end, eta_end
    cdef Py_ssize_t fail
    with nogil:
        fail = _integrate(chi, lam, h, gv, ev, &g_end, &eta_end)
    return g_arr, eta_arr, fail


def rk4_gain_loss_final(const double[::1] chi, const double[::1] lam, double h):
    cdef double[::1] empty = np.empty(0)
    cdef double g_end, eta_end
    cdef Py_ssize_t fail
    with nogil:
        fail = _integrate(chi, lam, h, empty, empty, &g_end, &eta_end)
    return g_end, eta_end, fail
