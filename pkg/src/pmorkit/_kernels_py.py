"""Pure NumPy segment assembly; reference implementation of ``_kernels.pyx``.

Segment ``s`` joins node ``s`` to node ``s + 1`` (cyclically). Its axial
stress resultant is ``P = k_lin E + k_cub E^3 + tau_s + c_visc dE/dt`` with
Green strain ``E = (l^2 - L^2) / (2 L^2)``, and it pushes ``P * (x_j - x_i) / L``
onto node ``j`` (the negative onto node ``i``).

``G[s]`` receives ``ck * dF_j/dx_j + cc * dF_j/dv_j``; the full 4x4 segment
block is ``[[G, -G], [-G, G]]``.
"""

import numpy as np


def segment_forces(x, w, L, tau, k_lin, k_cub, c_visc, ck, cc, F, G):
    delta = np.roll(x, -1, axis=0) - x
    dvel = np.roll(w, -1, axis=0) - w
    l2 = np.einsum("ij,ij->i", delta, delta)
    L2 = L * L
    bad = np.flatnonzero(l2 < 1e-18 * L2)
    if bad.size:
        return int(bad[0])
    L3 = L2 * L
    E = 0.5 * (l2 - L2) / L2
    Edot = np.einsum("ij,ij->i", delta, dvel) / L2
    P = k_lin * E + k_cub * E**3 + tau + c_visc * Edot
    dPdE = k_lin + 3.0 * k_cub * E * E
    a = P / L
    f = a[:, None] * delta
    F += np.roll(f, 1, axis=0)
    F -= f
    outer = delta[:, :, None] * delta[:, None, :]
    G[...] = (ck * dPdE / L3)[:, None, None] * outer
    G += (ck * c_visc / L3)[:, None, None] * (delta[:, :, None] * dvel[:, None, :])
    G += (cc * c_visc / L3)[:, None, None] * outer
    G[:, 0, 0] += ck * a
    G[:, 1, 1] += ck * a
    return -1
