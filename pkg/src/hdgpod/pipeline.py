"""Glue between a RunConfig and the numerical pipeline."""

import time
from dataclasses import dataclass

import numpy as np

from . import analysis, fom, pod, rom
from .assembly import assemble_hdg
from .basis import build_dof_layout, build_reference_basis
from .expressions import space_time_field, spatial_field
from .mesh import build_structured_mesh


@dataclass
class ProblemSetup:
    config: object
    mesh: object
    basis: object
    layout: object
    system: object
    u0: object
    f: object


def build_problem(config):
    """Mesh, spaces, assembled system, and data functions for one config."""
    config.validate()
    mesh = build_structured_mesh(config.dim, config.n)
    basis = build_reference_basis(config.dim, config.k)
    layout = build_dof_layout(mesh, basis)
    system = assemble_hdg(mesh, basis, layout, c=config.c, tau=config.tau)
    u0 = spatial_field(config.u0, config.dim) if config.u0 else None
    f = space_time_field(config.f, config.dim) if config.f else None
    return ProblemSetup(config, mesh, basis, layout, system, u0, f)


def run_fom(setup, progress=None):
    """Full-order run; returns (snapshots, wall seconds)."""
    cfg = setup.config
    tic = time.perf_counter()
    snaps = fom.run(
        setup.system, cfg.dt, cfg.T, u0=setup.u0, f=setup.f,
        keep_every=cfg.keep_every, progress=progress,
    )
    return snaps, time.perf_counter() - tic


def compute_all_pods(system, snaps, r_max=None):
    """The three weighted PODs of one snapshot set."""
    w = snaps.time_weights()
    bq = pod.compute_pod(snaps.Yq, system.A7, w, r_max=r_max, tag="q")
    bu = pod.compute_pod(snaps.Yu, system.M, w, r_max=r_max, tag="u")
    bh = pod.compute_pod(snaps.Yhat, system.A8, w, r_max=r_max, tag="uhat")
    return bq, bu, bh


def reduced_source(setup, basis_u, r2):
    """Reduced load z(t), or None for a source-free problem."""
    if setup.f is None:
        return None
    from .assembly import assemble_load

    D2 = basis_u.modes[:, :r2]

    def z(t):
        b1 = assemble_load(
            setup.mesh, setup.basis, setup.layout, lambda x: setup.f(x, t)
        )
        return D2.T @ b1

    return z


def rom_sweep(setup, snaps, bases, r_list=None, collect_trajectories=False):
    """Build and run the reduced model for each requested order.

    Every r is used for all three variables (r1 = r2 = r3 = r).  Entries
    exceeding a POD rank are reported as skipped rather than failing the
    sweep.  Returns a list of dicts with keys r, report (or skip reason),
    and optionally the reduced trajectory.
    """
    cfg = setup.config
    basis_q, basis_u, basis_uhat = bases
    if r_list is None:
        r_list = cfg.r_list
    results = []
    for r in r_list:
        r = int(r)
        ranks = (basis_q.rank, basis_u.rank, basis_uhat.rank)
        if r < 1 or any(r > rk for rk in ranks):
            results.append({
                "r": r,
                "report": None,
                "skipped": (f"r={r} exceeds POD ranks q={ranks[0]}"
                            f" u={ranks[1]} uhat={ranks[2]}"),
            })
            continue
        tic = time.perf_counter()
        model = rom.build_reduced(
            setup.system, basis_q, basis_u, basis_uhat,
            r1=r, r2=r, r3=r, beta0=snaps.beta0,
        )
        z = reduced_source(setup, basis_u, r)
        traj = rom.rom_run(model, cfg.dt, cfg.T, z=z)
        rom_seconds = time.perf_counter() - tic
        if cfg.keep_every != 1:
            keep = np.isin(
                np.round(traj.times / cfg.dt).astype(int),
                np.round(snaps.times / cfg.dt).astype(int),
            )
            traj = rom.RomTrajectory(times=traj.times[keep], b=traj.b[:, keep])
        report = analysis.trajectory_errors(
            snaps, traj, model, rom_seconds=rom_seconds
        )
        entry = {"r": r, "report": report, "skipped": None}
        if collect_trajectories:
            entry["model"] = model
            entry["trajectory"] = traj
        results.append(entry)
    return results
