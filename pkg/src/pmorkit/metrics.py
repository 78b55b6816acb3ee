"""Spatial error norm and scalar cardiac outputs of a trajectory."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import IncompatibleTrajectoriesError, InvalidInputError

__all__ = [
    "eps_inf_inf",
    "ejection_fraction",
    "marked_displacement",
    "ScalarOutputs",
    "scalar_outputs",
]


def _disp(traj):
    return traj.displacements if hasattr(traj, "displacements") else np.asarray(traj, float)


def eps_inf_inf(traj_rom, traj_fom) -> float:
    """Largest nodal displacement error (Euclidean per node) over all steps, in mm."""
    a, b = _disp(traj_rom), _disp(traj_fom)
    if a.shape != b.shape:
        raise IncompatibleTrajectoriesError(
            f"trajectory shapes differ: {a.shape} vs {b.shape}")
    if hasattr(traj_rom, "times") and hasattr(traj_fom, "times"):
        if not np.allclose(traj_rom.times, traj_fom.times, rtol=0, atol=1e-12):
            raise IncompatibleTrajectoriesError("trajectories use different time grids")
    if a.shape[-1] % 2:
        raise IncompatibleTrajectoriesError("displacement length must be 2 * node count")
    diff = (a - b).reshape(a.shape[0], -1, 2)
    return float(np.sqrt(np.max(np.sum(diff * diff, axis=2))))


def ejection_fraction(volumes) -> float:
    v = np.asarray(volumes, dtype=float)
    if v.size == 0:
        raise InvalidInputError("empty volume curve")
    vmax = v.max()
    if not vmax > 0:
        raise InvalidInputError("maximum volume must be positive")
    return float((vmax - v.min()) / vmax)


def marked_displacement(traj, mesh) -> np.ndarray:
    """Mean inward-radial displacement of the marked nodes at every step (mm).

    The measurement direction of each node is its reference inward normal
    ``-X_i / |X_i|``.
    """
    nodes = np.asarray(mesh.marked_nodes)
    if nodes.size == 0:
        raise InvalidInputError("marked node set is empty")
    d = _disp(traj)
    d = d.reshape(d.shape[0], -1, 2)[:, nodes, :]
    X = mesh.reference_positions[nodes]
    inward = -X / np.linalg.norm(X, axis=1, keepdims=True)
    return np.einsum("tkj,kj->t", d, inward) / nodes.size


@dataclass(frozen=True)
class ScalarOutputs:
    EF: float
    p_v_max: float
    marked_disp_max: float
    V_min: float
    V_max: float

    def to_dict(self):
        return asdict(self)


def scalar_outputs(traj, mesh) -> ScalarOutputs:
    vols = np.asarray(traj.volumes)
    return ScalarOutputs(
        EF=ejection_fraction(vols),
        p_v_max=float(np.max(traj.pressures[:, 0])),
        marked_disp_max=float(np.max(marked_displacement(traj, mesh))),
        V_min=float(vols.min()),
        V_max=float(vols.max()),
    )
