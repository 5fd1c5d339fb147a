"""Reduced-order shape optimization toolkit.

Free-form deformation of surface meshes, dynamic mode decomposition for
regime forecasting, POD with RBF interpolation for parametric prediction,
and surrogate-based minimization of integrated resistance.
"""

from .dmd import DmdModel, SnapshotSeries, fit_dmd, reconstruct, regime_state
from .ffd import FfdLattice, FfdParameterization, apply_params, deform_mesh, deform_point
from .fom import FlowConditions, integrate_resistance, run_fom
from .mesh import Field, TriMesh, load_stl, save_stl
from .rbf import RbfKernel, rbf_eval, rbf_fit
from .rom import ParametricSnapshotSet, RomModel, build_rom, predict

__version__ = "0.1.0"

__all__ = [
    "DmdModel",
    "SnapshotSeries",
    "fit_dmd",
    "reconstruct",
    "regime_state",
    "FfdLattice",
    "FfdParameterization",
    "apply_params",
    "deform_mesh",
    "deform_point",
    "FlowConditions",
    "integrate_resistance",
    "run_fom",
    "Field",
    "TriMesh",
    "load_stl",
    "save_stl",
    "RbfKernel",
    "rbf_eval",
    "rbf_fit",
    "ParametricSnapshotSet",
    "RomModel",
    "build_rom",
    "predict",
]
