"""Command line interface: fom, pod, rom, verify, report.

Heavy modules are imported inside the command handlers so that
``--threads`` can pin the BLAS thread pools before numpy starts.
"""

import argparse
import json
import os
import sys
import time


class CliError(Exception):
    pass


def _add_common(p, needs_out=True):
    p.add_argument("--out", required=needs_out, help="output directory")
    p.add_argument("--preset", help="configuration preset name")
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--seed", type=int, help="seed for randomized checks")
    p.add_argument("--threads", type=int,
                   help="cap BLAS threads (set before numpy loads)")
    for key in ("dim", "n", "k", "keep-every"):
        p.add_argument(f"--{key}", type=int, dest=key.replace("-", "_"))
    for key in ("c", "tau", "dt", "T"):
        p.add_argument(f"--{key}", type=float)
    p.add_argument("--u0", help="initial data expression")
    p.add_argument("--f", help="source expression (omit for zero)")
    p.add_argument("--r-list", dest="r_list",
                   help="comma separated reduced orders")


def _overrides(args):
    keys = ("dim", "n", "k", "c", "tau", "dt", "T", "u0", "f",
            "keep_every", "seed")
    out = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    if getattr(args, "r_list", None):
        out["r_list"] = [int(v) for v in args.r_list.replace(",", " ").split()]
    return out


def _resolve(args):
    from .config import resolve_config

    try:
        return resolve_config(args.preset, args.config, _overrides(args))
    except (ValueError, OSError) as exc:
        raise CliError(f"configuration error: {exc}") from None


def _config_from_manifest(outdir):
    from .config import RunConfig
    from .storage import read_manifest

    try:
        manifest = read_manifest(outdir)
    except OSError as exc:
        raise CliError(f"cannot read manifest in {outdir}: {exc}") from None
    return RunConfig(**manifest["config"]), manifest


def cmd_fom(args):
    from .pipeline import build_problem, run_fom
    from .storage import save_snapshots, write_manifest, write_timings_csv

    cfg = _resolve(args)
    os.makedirs(args.out, exist_ok=True)
    setup = build_problem(cfg)
    print(f"full-order run: dim={cfg.dim} n={cfg.n} k={cfg.k} "
          f"({setup.mesh.n_elements} elements, "
          f"N=({setup.layout.N1},{setup.layout.N2},{setup.layout.N3}))")
    snaps, seconds = run_fom(setup, progress=args.progress)
    save_snapshots(args.out, snaps, setup.mesh)
    manifest = write_manifest(args.out, cfg, setup.mesh, setup.layout)
    write_timings_csv(args.out, [("fom", seconds)], manifest)
    print(f"wrote {snaps.n_snapshots} snapshots to {args.out} "
          f"({seconds:.1f} s)")
    return 0


def cmd_pod(args):
    from .pipeline import build_problem, compute_all_pods
    from .storage import load_snapshots, save_pod, write_singular_values_csv

    cfg, manifest = _config_from_manifest(args.out)
    setup = build_problem(cfg)
    try:
        snaps = load_snapshots(args.out)
    except (OSError, ValueError) as exc:
        raise CliError(str(exc)) from None
    tic = time.perf_counter()
    bases = compute_all_pods(setup.system, snaps)
    seconds = time.perf_counter() - tic
    for basis in bases:
        save_pod(args.out, basis)
    write_singular_values_csv(args.out, bases, manifest)
    ranks = tuple(b.rank for b in bases)
    print(f"POD ranks (q,u,uhat) = {ranks}  ({seconds:.1f} s)")
    too_big = [r for r in cfg.r_list if any(r > rk for rk in ranks)]
    if too_big:
        print(f"note: r_list entries {too_big} exceed the computed ranks "
              f"and will be skipped by 'rom'", file=sys.stderr)
    return 0


def cmd_rom(args):
    from .pipeline import build_problem, rom_sweep
    from .storage import (load_pod, load_snapshots, save_rom_trajectory,
                          write_error_table_csv, write_timings_csv)

    cfg, manifest = _config_from_manifest(args.out)
    if args.r_list:
        cfg.r_list = [int(v) for v in args.r_list.replace(",", " ").split()]
    setup = build_problem(cfg)
    try:
        snaps = load_snapshots(args.out)
        bases = (
            load_pod(args.out, "q", setup.system.A7, snaps.Yq),
            load_pod(args.out, "u", setup.system.M, snaps.Yu),
            load_pod(args.out, "uhat", setup.system.A8, snaps.Yhat),
        )
    except (OSError, ValueError) as exc:
        raise CliError(str(exc)) from None
    results = rom_sweep(setup, snaps, bases, cfg.r_list,
                        collect_trajectories=args.save_trajectories)
    write_error_table_csv(args.out, results, manifest)
    timing_rows = [(f"rom_r{e['r']}", e["report"].rom_seconds)
                   for e in results if e["report"] is not None]
    write_timings_csv(args.out, timing_rows, manifest)
    print(_format_error_table(results))
    if args.save_trajectories:
        for entry in results:
            if entry["skipped"] is None:
                save_rom_trajectory(args.out, entry, snaps, setup.mesh)
    return 0


def _format_error_table(results):
    header = ["r"] + [str(e["r"]) for e in results]
    qrow = ["q error"]
    urow = ["u error"]
    for e in results:
        if e["skipped"]:
            qrow.append("skipped")
            urow.append("skipped")
        else:
            qrow.append(f"{e['report'].q_error:.3e}")
            urow.append(f"{e['report'].u_error:.3e}")
    widths = [max(len(row[i]) for row in (header, qrow, urow))
              for i in range(len(header))]
    lines = []
    for row in (header, qrow, urow):
        lines.append("  ".join(cell.rjust(w) for cell, w in zip(row, widths)))
    return "\n".join(lines)


def cmd_verify(args):
    from .analysis import verify_identities
    from .pipeline import build_problem, compute_all_pods, run_fom
    from .storage import write_manifest

    if args.preset is None and args.config is None:
        args.preset = "2d-small"
    cfg = _resolve(args)
    setup = build_problem(cfg)
    snaps, _ = run_fom(setup)
    bases = compute_all_pods(setup.system, snaps)
    if args.corrupt_fixture:
        # negative control: a deliberately broken mode matrix must be caught
        bases[1].modes[:, 0] *= 1.5
    report = verify_identities(
        setup.system, snaps, *bases,
        seed=cfg.seed if args.seed is None else args.seed,
        source_free=cfg.f is None,
    )
    print(report.summary(), end="")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        manifest = write_manifest(args.out, cfg, setup.mesh, setup.layout)
        with open(os.path.join(args.out, "verification.csv"), "w",
                  newline="\n") as fh:
            fh.write("# manifest: " + json.dumps(manifest, sort_keys=True) + "\n")
            report.to_csv(fh)
        with open(os.path.join(args.out, "verification.txt"), "w",
                  newline="\n") as fh:
            fh.write(report.summary())
    if not report.passed:
        names = ", ".join(c.name for c in report.failures())
        print(f"failed checks: {names}", file=sys.stderr)
        return 1
    return 0


def cmd_report(args):
    path = os.path.join(args.out, "rom_errors.csv")
    if not os.path.exists(path):
        raise CliError(f"no rom_errors.csv in {args.out}; run 'rom' first")
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    svpath = os.path.join(args.out, "singular_values.csv")
    out = ["error table (" + path + "):"]
    out += ["  " + ln for ln in lines]
    if os.path.exists(svpath):
        with open(svpath) as fh:
            n_sigma = sum(1 for ln in fh if not ln.startswith(("#", "index")))
        out.append(f"singular values: {n_sigma} rows in {svpath}")
    text = "\n".join(out) + "\n"
    print(text, end="")
    with open(os.path.join(args.out, "report.txt"), "w", newline="\n") as fh:
        fh.write(text)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hdgpod",
        description="HDG heat-equation solver with a POD reduced order model",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fom", help="run the full-order model, store snapshots")
    _add_common(p)
    p.add_argument("--progress", type=int, default=None,
                   help="print progress every N steps")
    p.set_defaults(func=cmd_fom)

    p = sub.add_parser("pod", help="compute the three PODs of stored snapshots")
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_pod)

    p = sub.add_parser("rom", help="run the reduced model over the r list")
    p.add_argument("--out", required=True)
    p.add_argument("--r-list", dest="r_list")
    p.add_argument("--threads", type=int)
    p.add_argument("--save-trajectories", action="store_true")
    p.set_defaults(func=cmd_rom)

    p = sub.add_parser("verify", help="run the verification battery")
    _add_common(p, needs_out=False)
    p.add_argument("--corrupt-fixture", action="store_true",
                   help="negative control: corrupt a mode matrix on purpose")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="summarize tables in an output directory")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", None):
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
