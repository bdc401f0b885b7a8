"""HDG discretization of the heat equation with a POD reduced order model."""

from .analysis import ErrorReport, broken_seminorm, trajectory_errors, verify_identities
from .assembly import BlockDiagonalMatrix, HdgSystem, assemble_hdg, assemble_init, assemble_load
from .basis import DofLayout, ReferenceBasis, build_dof_layout, build_reference_basis
from .config import PRESETS, RunConfig, resolve_config
from .estimators import HdgPodRom, WeightedPOD
from .fom import CondensedStepper, SnapshotSet, condense, run, solve_initial, step
from .mesh import SimplicialMesh, build_structured_mesh, classify_faces
from .pod import PodBasis, compute_pod, project, projection_error_tail, seminorm_projection_error
from .rom import ReducedModel, RomTrajectory, build_reduced, lift, recover_flux_trace, reduced_initial, rom_run

__version__ = "0.1.0"

__all__ = [
    "BlockDiagonalMatrix", "CondensedStepper", "DofLayout", "ErrorReport",
    "HdgPodRom", "HdgSystem", "PodBasis", "PRESETS", "ReducedModel",
    "ReferenceBasis", "RomTrajectory", "RunConfig", "SimplicialMesh",
    "SnapshotSet", "WeightedPOD", "assemble_hdg", "assemble_init",
    "assemble_load", "broken_seminorm", "build_dof_layout",
    "build_reduced", "build_reference_basis", "build_structured_mesh",
    "classify_faces", "compute_pod", "condense", "lift", "project",
    "projection_error_tail", "recover_flux_trace", "reduced_initial",
    "resolve_config", "rom_run", "run", "seminorm_projection_error",
    "solve_initial", "step", "trajectory_errors", "verify_identities",
]
