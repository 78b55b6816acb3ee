"""Desk-scale nonlinear structural model of a contracting chamber.

The chamber wall is a closed polygonal ring of point masses. Consecutive
nodes are joined by Green-strain springs (linear plus cubic stress law,
strain-rate viscosity and an additive active fiber stress). Every node is
tied to its reference position by a spring-dashpot, a linear curvature
penalty on the displacement field keeps the string from wrinkling under
negative transmural pressure, two adjacent nodes at
the bottom of the ring are pinned, and the cavity pressure acts as a
follower load along the current outward edge normals.

Units: mm, s, kPa, g. Forces are per unit depth in kPa*mm^2 (mN); the
nodal inertia ``masses * rho_scale`` is converted from g to mN*s^2/mm.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import DegenerateGeometryError, InvalidInputError

__all__ = [
    "ChamberMesh",
    "ChamberMaterial",
    "StructState",
    "ChamberModel",
    "structural_residual",
    "structural_jacobian",
    "cavity_volume",
    "polygon_is_simple",
    "volume_increment",
]

G_TO_FORCE = 1e-3  # g*mm/s^2 -> mN
_BEND_STENCIL = np.array([1.0, -4.0, 6.0, -4.0, 1.0])


def _frozen(arr):
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ChamberMesh:
    """Ring geometry.

    ``node_count`` nodes sit at angles ``2*pi*(i + 0.5)/N`` on a circle of
    radius ``radius``; this keeps the ring mirror-symmetric about the
    vertical axis so the pinned pair (bottom) and the marked set (top) are
    centred.
    """

    node_count: int = 100
    radius: float = 25.0
    node_mass: float = 0.5
    marked_count: int = 10
    pinned_count: int = 2

    def __post_init__(self):
        if self.node_count < 8:
            raise InvalidInputError("node_count must be at least 8")
        if not self.radius > 0 or not self.node_mass > 0:
            raise InvalidInputError("radius and node_mass must be positive")
        if not 0 <= self.pinned_count < self.node_count:
            raise InvalidInputError("pinned_count out of range")
        if not 0 <= self.marked_count <= self.node_count:
            raise InvalidInputError("marked_count out of range")

    @property
    def n_dof(self) -> int:
        return 2 * self.node_count

    @cached_property
    def angles(self) -> np.ndarray:
        return _frozen(2.0 * np.pi * (np.arange(self.node_count) + 0.5) / self.node_count)

    @cached_property
    def reference_positions(self) -> np.ndarray:
        th = self.angles
        return _frozen(self.radius * np.column_stack([np.cos(th), np.sin(th)]))

    @property
    def masses(self) -> np.ndarray:
        return np.full(self.node_count, self.node_mass)

    def _nearest(self, angle, count):
        gap = np.abs(np.angle(np.exp(1j * (self.angles - angle))))
        return np.sort(np.argsort(gap, kind="stable")[:count])

    @property
    def marked_nodes(self) -> np.ndarray:
        return self._nearest(0.5 * np.pi, self.marked_count)

    @property
    def pinned_nodes(self) -> np.ndarray:
        return self._nearest(1.5 * np.pi, self.pinned_count)

    @property
    def pinned_dofs(self) -> np.ndarray:
        nodes = self.pinned_nodes
        return np.sort(np.concatenate([2 * nodes, 2 * nodes + 1]))

    @cached_property
    def segment_lengths(self) -> np.ndarray:
        X = self.reference_positions
        return _frozen(np.linalg.norm(np.roll(X, -1, axis=0) - X, axis=1))

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ChamberMaterial:
    k_lin: float = 200.0
    k_cub: float = 1000.0
    c_visc: float = 5.0
    k_v: float = 0.5
    c_v: float = 0.05
    rho_scale: float = 1.0
    k_bend: float = 2.0

    def __post_init__(self):
        if not self.k_lin > 0:
            raise InvalidInputError("k_lin must be positive")
        if min(self.k_cub, self.c_visc, self.k_v, self.c_v, self.k_bend) < 0:
            raise InvalidInputError("k_cub, c_visc, k_v, c_v, k_bend must be non-negative")
        if not self.rho_scale > 0:
            raise InvalidInputError("rho_scale must be positive")

    def to_dict(self):
        return asdict(self)


@dataclass
class StructState:
    d: np.ndarray
    v: np.ndarray
    a: np.ndarray
    tau: np.ndarray = field(default=None)

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        if self.tau is None:
            self.tau = np.zeros(self.d.size // 2)
        self.tau = np.asarray(self.tau, dtype=float)
        if not (self.d.shape == self.v.shape == self.a.shape):
            raise InvalidInputError("d, v, a must have the same length")

    @classmethod
    def zeros(cls, mesh: ChamberMesh) -> "StructState":
        n = mesh.n_dof
        return cls(np.zeros(n), np.zeros(n), np.zeros(n), np.zeros(mesh.node_count))


def polygon_is_simple(xy: np.ndarray) -> bool:
    """True when no two non-adjacent edges of the closed polygon intersect."""
    p = xy
    q = np.roll(xy, -1, axis=0)
    n = len(p)

    def orient(a, b, c):
        return ((b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1])
                - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0]))

    A, B = p[:, None, :], q[:, None, :]
    C, D = p[None, :, :], q[None, :, :]
    o1 = orient(A, B, C)
    o2 = orient(A, B, D)
    o3 = orient(C, D, A)
    o4 = orient(C, D, B)
    cross = (o1 * o2 < 0) & (o3 * o4 < 0)
    i, j = np.indices((n, n))
    gap = np.abs(i - j)
    cross &= (gap > 1) & (gap < n - 1)
    return not bool(cross.any())


def _volume_and_gradient(xy):
    x, y = xy[:, 0], xy[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    xp, yp = np.roll(x, 1), np.roll(y, 1)
    vol = 0.5 * np.sum(x * yn - xn * y)
    grad = np.empty(2 * len(x))
    grad[0::2] = 0.5 * (yn - yp)
    grad[1::2] = 0.5 * (xp - xn)
    return vol, grad


def cavity_volume(d, mesh: ChamberMesh, check: bool = True):
    """Enclosed area (times 1 mm depth) of the deformed ring and its gradient."""
    xy = mesh.reference_positions + np.asarray(d, dtype=float).reshape(-1, 2)
    vol, grad = _volume_and_gradient(xy)
    if check and (vol <= 0.0 or not polygon_is_simple(xy)):
        raise DegenerateGeometryError("chamber polygon is self-intersecting or inverted")
    return vol, grad


def volume_increment(d_old, d_new, mesh: ChamberMesh) -> float:
    """``V(d_new) - V(d_old)`` without cancellation against the full volume.

    The enclosed area is quadratic in the nodal positions, so the difference
    is exactly ``sum(m_i x delta_{i+1} + delta_i x m_{i+1}) / 2`` with the
    midpoint positions ``m`` and increments ``delta``.
    """
    d_old = np.asarray(d_old, dtype=float).reshape(-1, 2)
    d_new = np.asarray(d_new, dtype=float).reshape(-1, 2)
    m = mesh.reference_positions + 0.5 * (d_old + d_new)
    dl = d_new - d_old
    mn, dn = np.roll(m, -1, axis=0), np.roll(dl, -1, axis=0)
    cross = (m[:, 0] * dn[:, 1] - m[:, 1] * dn[:, 0]
             + dl[:, 0] * mn[:, 1] - dl[:, 1] * mn[:, 0])
    return 0.5 * float(np.sum(cross))


class ChamberModel:
    """Assembly engine for one mesh/material pair.

    Holds the fixed sparsity pattern of the structural Jacobian so that every
    Newton iteration only refreshes the value array.
    """

    def __init__(self, mesh: ChamberMesh, material: ChamberMaterial):
        self.mesh = mesh
        self.material = material
        self.X = mesh.reference_positions
        self.L = mesh.segment_lengths
        self.n = mesh.n_dof
        self.inertia = np.repeat(mesh.masses, 2) * material.rho_scale * G_TO_FORCE
        self.pinned = mesh.pinned_dofs
        self._build_pattern()

    def _build_pattern(self):
        N, n = self.mesh.node_count, self.n
        s = np.arange(N)
        t = (s + 1) % N
        rows, cols = [], []
        # segment blocks, G pattern reused with signs [[G,-G],[-G,G]]
        for ra, ca in ((s, s), (s, t), (t, s), (t, t)):
            for a in range(2):
                for b in range(2):
                    rows.append(2 * ra + a)
                    cols.append(2 * ca + b)
        seg_rows = np.stack(rows, axis=1)  # (N, 16)
        seg_cols = np.stack(cols, axis=1)
        diag = np.arange(n)
        # pressure Hessian of the enclosed area: x_i couples to y_{i+1}, y_{i-1}
        prev = (s - 1) % N
        h_rows = np.concatenate([2 * s, 2 * s, 2 * s + 1, 2 * s + 1])
        h_cols = np.concatenate([2 * t + 1, 2 * prev + 1, 2 * prev, 2 * t])
        self._h_vals = np.concatenate([np.full(N, 0.5), np.full(N, -0.5),
                                       np.full(N, 0.5), np.full(N, -0.5)])
        # curvature penalty: B^T B with B the periodic second difference
        b_rows = np.repeat(diag, 5)
        node, comp = np.divmod(b_rows, 2)
        shift = np.tile(np.arange(-2, 3), n)
        b_cols = 2 * ((node + shift) % N) + comp
        self._b_vals = np.tile(_BEND_STENCIL, n)
        self._rows = np.concatenate([seg_rows.ravel(), diag, h_rows, b_rows])
        self._cols = np.concatenate([seg_cols.ravel(), diag, h_cols, b_cols])
        self._seg_sign = np.tile(np.array([1, 1, 1, 1, -1, -1, -1, -1,
                                           -1, -1, -1, -1, 1, 1, 1, 1], float), N)
        keep = ~np.isin(self._rows, self.pinned)
        # pinned rows: R_k = d_k, derivative c_k (appended after the pattern)
        self._rows = np.concatenate([self._rows, self.pinned])
        self._cols = np.concatenate([self._cols, self.pinned])
        self._keep = np.concatenate([keep, np.ones(self.pinned.size, bool)])
        self._flat = self._rows * n + self._cols
        # fixed CSR layout: duplicates are summed with one bincount per call
        uniq, self._csr_map = np.unique(self._flat, return_inverse=True)
        self._csr_indices = (uniq % n).astype(np.int32)
        self._csr_indptr = np.searchsorted(uniq // n, np.arange(n + 1)).astype(np.int32)

    # -- residual and Jacobian -------------------------------------------------
    def evaluate(self, d, v, a, tau, p_v, coeffs=(0.0, 1.0, 0.0), jacobian=True):
        """Residual ``M a + F_int + F_support - p_v grad V`` at the given state.

        ``coeffs = (c_m, c_k, c_c)`` weight the mass, displacement and
        velocity derivatives in the returned Jacobian. Pinned rows are
        replaced by ``R_k = d_k``.

        Returns ``(R, vals, dR_dp)`` where ``vals`` is the value array of the
        fixed sparsity pattern (``None`` when ``jacobian`` is False).
        """
        mat = self.material
        c_m, c_k, c_c = coeffs
        N = self.mesh.node_count
        xy = self.X + d.reshape(N, 2)
        w = np.ascontiguousarray(v.reshape(N, 2))
        F = np.zeros((N, 2))
        G = np.empty((N, 2, 2))
        bad = kernels.segment_forces(np.ascontiguousarray(xy), w, self.L,
                                     np.ascontiguousarray(tau, dtype=float),
                                     mat.k_lin, mat.k_cub, mat.c_visc,
                                     c_k, c_c, F, G)
        if bad >= 0:
            raise DegenerateGeometryError(f"segment {bad} collapsed")
        _, gradV = _volume_and_gradient(xy)
        R = self.inertia * a + F.ravel() + mat.k_v * d + mat.c_v * v - p_v * gradV
        if mat.k_bend:
            u = d.reshape(N, 2)
            curv = np.roll(u, 1, axis=0) - 2.0 * u + np.roll(u, -1, axis=0)
            bend = np.roll(curv, 1, axis=0) - 2.0 * curv + np.roll(curv, -1, axis=0)
            R += mat.k_bend * bend.ravel()
        R[self.pinned] = d[self.pinned]
        dR_dp = -gradV
        dR_dp[self.pinned] = 0.0
        if not jacobian:
            return R, None, dR_dp
        seg = np.tile(G.reshape(N, 4), (1, 4)).ravel() * self._seg_sign
        diag = c_m * self.inertia + c_k * mat.k_v + c_c * mat.c_v
        hess = (-c_k * p_v) * self._h_vals
        bend = (c_k * mat.k_bend) * self._b_vals
        vals = np.concatenate([seg, diag, hess, bend, np.full(self.pinned.size, c_k)])
        vals[~self._keep] = 0.0
        return R, vals, dR_dp

    def dense(self, vals) -> np.ndarray:
        n = self.n
        return np.bincount(self._flat, weights=vals, minlength=n * n).reshape(n, n)

    def sparse(self, vals) -> sp.csr_matrix:
        n = self.n
        data = np.bincount(self._csr_map, weights=vals, minlength=self._csr_indices.size)
        return sp.csr_matrix((data, self._csr_indices, self._csr_indptr), shape=(n, n))


def structural_residual(s: StructState, p_v, t, mesh, mat, act=None, model=None):
    """Semi-discrete structural residual at ``s`` (``t`` and ``act`` only
    matter through ``s.tau``, which the caller advances)."""
    model = model or ChamberModel(mesh, mat)
    R, _, _ = model.evaluate(s.d, s.v, s.a, s.tau, p_v, jacobian=False)
    return R


def structural_jacobian(s: StructState, p_v, t, mesh, mat, act=None,
                        coeffs=(0.0, 1.0, 0.0), model=None):
    """Dense ``dR/dd`` (weighted by the integrator ``coeffs``) and ``dR/dp_v``."""
    model = model or ChamberModel(mesh, mat)
    _, vals, dR_dp = model.evaluate(s.d, s.v, s.a, s.tau, p_v, coeffs=coeffs)
    return model.dense(vals), dR_dp
