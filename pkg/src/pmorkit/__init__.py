"""Parametric projection-based reduced order models for a coupled chamber model.

Units throughout: kPa, mm, s, g.
"""

from .activation import ActivationParams
from .chamber import ChamberMaterial, ChamberMesh
from .errors import PmorError
from .interp import SampleLibrary, interpolate
from .kernels import BACKEND
from .metrics import eps_inf_inf, scalar_outputs
from .pod import ProjectionBasis, SnapshotMatrix, pod_basis
from .rom import run_rom
from .solver import Scenario, SolverTolerances, TimeIntegrator, run_fom
from .windkessel import WindkesselParams

__version__ = "0.1.0"

__all__ = [
    "ActivationParams",
    "BACKEND",
    "ChamberMaterial",
    "ChamberMesh",
    "PmorError",
    "ProjectionBasis",
    "SampleLibrary",
    "Scenario",
    "SnapshotMatrix",
    "SolverTolerances",
    "TimeIntegrator",
    "WindkesselParams",
    "eps_inf_inf",
    "interpolate",
    "pod_basis",
    "run_fom",
    "run_rom",
    "scalar_outputs",
    "__version__",
]
