"""Pure-Python RK4 kernel for the equivalent gain/loss ODE.

Integrates ``G' = (chi - lam) G + lam`` and ``eta' = -eta lam / G`` from
``G(0) = eta(0) = 1`` with ``n`` fixed steps of size ``h``. The fields are
passed pre-sampled at half-step nodes: ``chi[2i]`` at ``z_i``,
``chi[2i + 1]`` at ``z_i + h/2`` and ``chi[2i + 2]`` at ``z_{i+1}``, so both
arrays have length ``2n + 1``.

Both kernels return a failure index alongside the result: ``-1`` on success,
otherwise the step at which ``G`` stopped being positive and finite.
"""

import math

import numpy as np


def _integrate(chi, lam, h, g_traj, eta_traj):
    n = (len(chi) - 1) // 2
    hh = 0.5 * h
    g = eta = 1.0
    for i in range(n):
        j = 2 * i
        c0, c1, c2 = chi[j], chi[j + 1], chi[j + 2]
        l0, l1, l2 = lam[j], lam[j + 1], lam[j + 2]

        k1g = (c0 - l0) * g + l0
        k1e = -eta * l0 / g
        gt = g + hh * k1g
        if not gt > 0.0:
            return g, eta, i
        k2g = (c1 - l1) * gt + l1
        k2e = -(eta + hh * k1e) * l1 / gt
        gt = g + hh * k2g
        if not gt > 0.0:
            return g, eta, i
        k3g = (c1 - l1) * gt + l1
        k3e = -(eta + hh * k2e) * l1 / gt
        gt = g + h * k3g
        if not gt > 0.0:
            return g, eta, i
        k4g = (c2 - l2) * gt + l2
        k4e = -(eta + h * k3e) * l2 / gt

        g = g + h / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g)
        eta = eta + h / 6.0 * (k1e + 2.0 * k2e + 2.0 * k3e + k4e)
        if not (g > 0.0 and math.isfinite(g) and math.isfinite(eta)):
            return g, eta, i + 1
        if g_traj is not None:
            g_traj.append(g)
            eta_traj.append(eta)
    return g, eta, -1


def rk4_gain_loss(chi, lam, h):
    chi = np.asarray(chi, dtype=float).tolist()
    lam = np.asarray(lam, dtype=float).tolist()
    n = (len(chi) - 1) // 2
    g_traj, eta_traj = [1.0], [1.0]
    _, _, fail = _integrate(chi, lam, h, g_traj, eta_traj)
    g_arr = np.empty(n + 1)
    eta_arr = np.empty(n + 1)
    g_arr[: len(g_traj)] = g_traj
    eta_arr[: len(eta_traj)] = eta_traj
    return g_arr, eta_arr, fail


def rk4_gain_loss_final(chi, lam, h):
    chi = np.asarray(chi, dtype=float).tolist()
    lam = np.asarray(lam, dtype=float).tolist()
    return _integrate(chi, lam, h, None, None)
