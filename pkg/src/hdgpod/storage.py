"""On-disk formats: snapshot dumps, POD bases, and the CSV tables.

Every CSV starts with one ``# manifest: {...}`` comment line carrying the
configuration needed to re-run it, then a header row; numbers are written
in scientific notation with nine significant digits and LF line endings.
Matrix data uses .npy files (column = snapshot) with a plain-text sidecar
header recording dimensions, time range, and the mesh hash.
"""

import json
import os

import numpy as np

from .fom import SnapshotSet
from .mesh import mesh_hash
from .pod import PodBasis

SNAPSHOT_FILES = {"q": "snapshots_q.npy", "u": "snapshots_u.npy",
                  "uhat": "snapshots_uhat.npy"}


def _fmt(x):
    if x is None or (isinstance(x, float) and not np.isfinite(x)):
        return ""
    return f"{x:.9e}"


def _manifest_line(manifest):
    return "# manifest: " + json.dumps(manifest, sort_keys=True) + "\n"


def write_manifest(outdir, config, mesh=None, layout=None, extra=None):
    manifest = {"config": config.as_dict()}
    if mesh is not None:
        manifest["mesh_hash"] = mesh_hash(mesh)
        manifest["n_elements"] = int(mesh.n_elements)
    if layout is not None:
        manifest["N1"], manifest["N2"], manifest["N3"] = (
            int(layout.N1), int(layout.N2), int(layout.N3),
        )
    if extra:
        manifest.update(extra)
    with open(os.path.join(outdir, "manifest.json"), "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def read_manifest(outdir):
    with open(os.path.join(outdir, "manifest.json")) as fh:
        return json.load(fh)


def save_snapshots(outdir, snaps, mesh):
    os.makedirs(outdir, exist_ok=True)
    np.save(os.path.join(outdir, SNAPSHOT_FILES["q"]), snaps.Yq)
    np.save(os.path.join(outdir, SNAPSHOT_FILES["u"]), snaps.Yu)
    np.save(os.path.join(outdir, SNAPSHOT_FILES["uhat"]), snaps.Yhat)
    np.save(os.path.join(outdir, "beta0.npy"), snaps.beta0)
    np.save(os.path.join(outdir, "times.npy"), snaps.times)
    with open(os.path.join(outdir, "snapshots_header.txt"), "w",
              newline="\n") as fh:
        fh.write(f"mesh_hash {mesh_hash(mesh)}\n")
        fh.write(f"dt {snaps.dt!r}\n")
        fh.write(f"n_snapshots {snaps.n_snapshots}\n")
        fh.write(f"t_first {snaps.times[0]!r}\n")
        fh.write(f"t_last {snaps.times[-1]!r}\n")
        for tag, fname in SNAPSHOT_FILES.items():
            arr = {"q": snaps.Yq, "u": snaps.Yu, "uhat": snaps.Yhat}[tag]
            fh.write(f"{fname} {arr.shape[0]} {arr.shape[1]}\n")


def load_snapshots(outdir):
    paths = {tag: os.path.join(outdir, name) for tag, name in SNAPSHOT_FILES.items()}
    for tag, path in paths.items():
        if not os.path.exists(path):
            raise FileNotFoundError(f"missing snapshot file {path}; run 'fom' first")
    Yq = np.load(paths["q"])
    Yu = np.load(paths["u"])
    Yhat = np.load(paths["uhat"])
    times = np.load(os.path.join(outdir, "times.npy"))
    beta0 = np.load(os.path.join(outdir, "beta0.npy"))
    if min(Yq.size, Yu.size, Yhat.size, times.size) == 0:
        raise ValueError(f"snapshot files in {outdir} are empty")
    if not (Yq.shape[1] == Yu.shape[1] == Yhat.shape[1] == len(times)):
        raise ValueError(f"snapshot files in {outdir} have mismatched columns")
    dt = float(times[0]) if len(times) == 1 else float(times[1] - times[0])
    return SnapshotSet(times=times, Yq=Yq, Yu=Yu, Yhat=Yhat, beta0=beta0, dt=dt)


def save_pod(outdir, basis):
    path = os.path.join(outdir, f"pod_{basis.tag}.npz")
    np.savez(
        path,
        tag=basis.tag,
        eigenvalues=basis.eigenvalues,
        singular_values=basis.singular_values,
        modes=basis.modes,
        temporal=basis.temporal,
        time_weights=basis.time_weights,
        rank=basis.rank,
    )
    return path


def load_pod(outdir, tag, weight=None, snapshots=None):
    path = os.path.join(outdir, f"pod_{tag}.npz")
    if not os.path.exists(path):
        raise FileNotFoundError(f"missing POD file {path}; run 'pod' first")
    data = np.load(path)
    return PodBasis(
        tag=str(data["tag"]),
        weight=weight,
        eigenvalues=data["eigenvalues"],
        singular_values=data["singular_values"],
        modes=data["modes"],
        temporal=data["temporal"],
        time_weights=data["time_weights"],
        snapshots=snapshots,
        rank=int(data["rank"]),
    )


def write_singular_values_csv(outdir, bases, manifest, floor=1e-14):
    """Ragged sigma columns, one per variable, down to floor * sigma_1."""
    columns = []
    for basis in bases:
        sig = basis.singular_values
        if sig.size and sig[0] > 0:
            columns.append(sig[sig > floor * sig[0]])
        else:
            columns.append(np.zeros(0))
    depth = max((len(c) for c in columns), default=0)
    path = os.path.join(outdir, "singular_values.csv")
    with open(path, "w", newline="\n") as fh:
        fh.write(_manifest_line(manifest))
        fh.write("index,sigma_q,sigma_u,sigma_uhat\n")
        for i in range(depth):
            cells = [_fmt(c[i]) if i < len(c) else "" for c in columns]
            fh.write(f"{i + 1}," + ",".join(cells) + "\n")
    return path


def write_error_table_csv(outdir, results, manifest):
    """One row per requested reduced order, Tables-style columns."""
    path = os.path.join(outdir, "rom_errors.csv")
    with open(path, "w", newline="\n") as fh:
        fh.write(_manifest_line(manifest))
        fh.write("r,q_error,u_error,lambda_tail_q,lambda_tail_u,"
                 "lambda_tail_uhat,status\n")
        for entry in results:
            r = entry["r"]
            if entry["skipped"]:
                fh.write(f"{r},,,,,,skipped: {entry['skipped']}\n")
                continue
            rep = entry["report"]
            fh.write(
                f"{r},{_fmt(rep.q_error)},{_fmt(rep.u_error)},"
                f"{_fmt(rep.tail_q)},{_fmt(rep.tail_u)},"
                f"{_fmt(rep.tail_uhat)},ok\n"
            )
    return path


def write_timings_csv(outdir, rows, manifest):
    """Wall-clock seconds; kept apart from the deterministic tables."""
    path = os.path.join(outdir, "timings.csv")
    with open(path, "w", newline="\n") as fh:
        fh.write(_manifest_line(manifest))
        fh.write("stage,seconds\n")
        for stage, seconds in rows:
            fh.write(f"{stage},{seconds:.3f}\n")
    return path


def save_rom_trajectory(outdir, entry, snaps, mesh):
    """Lifted reduced trajectory in the snapshot format, tagged with r."""
    from . import rom as rom_mod

    r = entry["r"]
    model, traj = entry["model"], entry["trajectory"]
    a, c = rom_mod.recover_flux_trace(model, traj.b)
    sub = os.path.join(outdir, f"rom_r{r}")
    os.makedirs(sub, exist_ok=True)
    np.save(os.path.join(sub, SNAPSHOT_FILES["q"]),
            rom_mod.lift(a, model.basis_q))
    np.save(os.path.join(sub, SNAPSHOT_FILES["u"]),
            rom_mod.lift(traj.b, model.basis_u))
    np.save(os.path.join(sub, SNAPSHOT_FILES["uhat"]),
            rom_mod.lift(c, model.basis_uhat))
    np.save(os.path.join(sub, "times.npy"), traj.times)
    with open(os.path.join(sub, "snapshots_header.txt"), "w",
              newline="\n") as fh:
        fh.write(f"mesh_hash {mesh_hash(mesh)}\n")
        fh.write(f"reduced_order r1=r2=r3={r}\n")
        fh.write(f"n_snapshots {len(traj.times)}\n")
    return sub
