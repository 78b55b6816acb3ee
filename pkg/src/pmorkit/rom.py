"""Galerkin-reduced coupled solve.

Only the structural block is projected: every Newton iteration assembles
the full residual and Jacobian at the lifted displacement ``V d_r``, then
solves the ``(q + 4)``-dimensional system

    [ V^T J_ss V   V^T J_sp ] [dd_r]     [V^T R_S]
    [ J_0s V       J_00     ] [dp  ] = - [R_0    ]

The windkessel unknowns are never reduced.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .pod import ProjectionBasis, SnapshotMatrix
from .solver import CoupledModel, Scenario, State

__all__ = ["ReducedState", "step_rom", "run_rom", "check_basis"]


@dataclass
class ReducedState:
    d_r: np.ndarray
    p: np.ndarray
    lifted: np.ndarray

    def __post_init__(self):
        self.d_r = np.asarray(self.d_r, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        self.lifted = np.asarray(self.lifted, dtype=float)
        if not (np.all(np.isfinite(self.d_r)) and np.all(np.isfinite(self.p))):
            raise InvalidInputError("reduced state must be finite")

    @classmethod
    def from_state(cls, state: State, V: np.ndarray) -> "ReducedState":
        return cls(V.T @ state.d, state.p.copy(), state.d.copy())


def check_basis(basis, n: int, tol: float = 1e-8) -> np.ndarray:
    """Return ``V`` after checking shape and orthonormality."""
    V = basis.V if isinstance(basis, ProjectionBasis) else np.asarray(basis, dtype=float)
    if V.ndim != 2 or V.shape[0] != n or not 1 <= V.shape[1] <= n:
        raise InvalidInputError(f"basis must be {n} x q with 1 <= q <= {n}, got {V.shape}")
    gram = V.T @ V
    if np.max(np.abs(gram - np.eye(V.shape[1]))) > tol:
        raise InvalidInputError("basis columns are not orthonormal")
    return V


def step_rom(prev: State, basis, t: float, scenario: Scenario | None = None,
             model: CoupledModel | None = None):
    """One reduced Newton-converged step; returns ``(State, ReducedState, iters)``.

    ``prev`` carries the lifted full-order kinematics (Newmark updates are
    applied to ``V d_r`` and therefore stay in the span of ``V``).
    """
    if model is None:
        if scenario is None:
            raise InvalidInputError("step_rom needs a scenario or a model")
        model = CoupledModel(scenario)
    V = check_basis(basis, model.n)
    state, it, _ = model.step(prev, t, V=V)
    return state, ReducedState.from_state(state, V), it


def run_rom(params, basis, scenario: Scenario):
    """Reduced run over the whole horizon; returns ``(Trajectory, SnapshotMatrix)``.

    ``params`` optionally overrides activation fields. The trajectory holds
    lifted displacements and a timing breakdown with keys ``element``,
    ``linear`` (projections and reduced solve) and ``other``.
    """
    if params:
        scenario = scenario.with_activation(**dict(params))
    model = CoupledModel(scenario)
    V = check_basis(basis, model.n)
    traj = model.run(V=V)
    snaps = SnapshotMatrix(traj.displacements[1:].T.copy(), scenario.activation.to_dict(),
                           scenario.integrator.dt)
    return traj, snaps
