import numpy as np
import pytest
import scipy.sparse as sp

from hdgpod.assembly import BlockDiagonalMatrix, assemble_hdg
from hdgpod.basis import build_dof_layout, build_reference_basis
from hdgpod.mesh import build_structured_mesh
from hdgpod.pipeline import build_problem, compute_all_pods, run_fom
from hdgpod.config import PRESETS


def u0_paper_2d(x):
    return (np.sin(np.pi * x[..., 0]) * np.sin(np.pi * x[..., 1])
            * np.exp(x[..., 0]) * np.cos(x[..., 1]))


def u0_paper_3d(x):
    return (np.sin(np.pi * x[..., 0]) * np.sin(np.pi * x[..., 1])
            * np.sin(np.pi * x[..., 2]) * np.exp(x[..., 0])
            * np.cos(x[..., 1]) * x[..., 2])


def make_system(dim, n, k, c=100.0, tau=1.0):
    mesh = build_structured_mesh(dim, n)
    basis = build_reference_basis(dim, k)
    layout = build_dof_layout(mesh, basis)
    return mesh, basis, layout, assemble_hdg(mesh, basis, layout, c=c, tau=tau)


def full_saddle_matrix(system, dt):
    """Uncondensed three-field one-step matrix (test oracle)."""
    mid = BlockDiagonalMatrix(system.M.blocks / dt + system.A4.blocks)
    return sp.bmat(
        [
            [system.A1.to_sparse(), -system.A2, system.A3],
            [system.A2.T, mid.to_sparse(), -system.A5],
            [system.A3.T, system.A5.T, -system.A6_sparse],
        ],
        format="csc",
    )


@pytest.fixture(scope="session")
def small2d():
    """The desk-scale 2D pipeline: setup, snapshots, and the three PODs."""
    setup = build_problem(PRESETS["2d-small"])
    snaps, seconds = run_fom(setup)
    bases = compute_all_pods(setup.system, snaps)
    return {"setup": setup, "system": setup.system, "snaps": snaps,
            "bases": bases, "fom_seconds": seconds}
