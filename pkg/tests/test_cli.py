import json
import os

import numpy as np
import pytest

from hdgpod import storage
from hdgpod.cli import main
from hdgpod.fom import SnapshotSet


@pytest.fixture(scope="module")
def finished_run(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("run"))
    assert main(["fom", "--preset", "2d-small", "--out", out]) == 0
    assert main(["pod", "--out", out]) == 0
    assert main(["rom", "--out", out, "--r-list", "1,3,5,99"]) == 0
    return out


def test_outputs_exist(finished_run):
    for name in ("snapshots_q.npy", "snapshots_u.npy", "snapshots_uhat.npy",
                 "beta0.npy", "times.npy", "manifest.json",
                 "snapshots_header.txt", "pod_q.npz", "pod_u.npz",
                 "pod_uhat.npz", "singular_values.csv", "rom_errors.csv",
                 "timings.csv"):
        assert os.path.exists(os.path.join(finished_run, name)), name


def test_manifest_contents(finished_run):
    manifest = storage.read_manifest(finished_run)
    assert manifest["config"]["n"] == 4
    assert manifest["N2"] == 192
    assert len(manifest["mesh_hash"]) == 64


def test_snapshot_roundtrip(finished_run):
    snaps = storage.load_snapshots(finished_run)
    assert isinstance(snaps, SnapshotSet)
    assert snaps.n_snapshots == 50
    assert snaps.Yu.shape == (192, 50)
    assert snaps.dt == pytest.approx(0.02)


def test_error_table_format(finished_run):
    lines = open(os.path.join(finished_run, "rom_errors.csv")).read().splitlines()
    assert lines[0].startswith("# manifest: {")
    json.loads(lines[0].split(": ", 1)[1])  # parseable manifest
    assert lines[1] == ("r,q_error,u_error,lambda_tail_q,lambda_tail_u,"
                        "lambda_tail_uhat,status")
    rows = [ln.split(",") for ln in lines[2:]]
    assert [r[0] for r in rows] == ["1", "3", "5", "99"]
    assert rows[0][-1] == "ok"
    # scientific notation with >= 6 significant digits
    assert "e-" in rows[0][1] and len(rows[0][1].split("e")[0]) >= 8
    assert rows[3][-1].startswith("skipped: r=99 exceeds POD ranks")
    assert rows[3][1] == ""


def test_singular_values_format(finished_run):
    lines = open(os.path.join(finished_run,
                              "singular_values.csv")).read().splitlines()
    assert lines[1] == "index,sigma_q,sigma_u,sigma_uhat"
    first = lines[2].split(",")
    assert first[0] == "1"
    assert all(float(v) > 0 for v in first[1:])
    # ragged columns padded empty at the bottom
    last = lines[-1].split(",")
    assert len(last) == 4


def test_determinism_rerun(finished_run, tmp_path):
    out2 = str(tmp_path / "rerun")
    assert main(["fom", "--preset", "2d-small", "--out", out2]) == 0
    assert main(["pod", "--out", out2]) == 0
    assert main(["rom", "--out", out2, "--r-list", "1,3,5,99"]) == 0
    for name in ("singular_values.csv", "rom_errors.csv"):
        a = open(os.path.join(finished_run, name), "rb").read()
        b = open(os.path.join(out2, name), "rb").read()
        assert a == b, f"{name} differs between identical reruns"
    for name in ("snapshots_u.npy", "beta0.npy"):
        a = np.load(os.path.join(finished_run, name))
        b = np.load(os.path.join(out2, name))
        assert np.array_equal(a, b)


def test_report_command(finished_run, capsys):
    assert main(["report", "--out", finished_run]) == 0
    text = capsys.readouterr().out
    assert "error table" in text
    assert os.path.exists(os.path.join(finished_run, "report.txt"))


def test_save_trajectories(finished_run):
    assert main(["rom", "--out", finished_run, "--r-list", "2",
                 "--save-trajectories"]) == 0
    sub = os.path.join(finished_run, "rom_r2")
    assert os.path.exists(os.path.join(sub, "snapshots_u.npy"))
    header = open(os.path.join(sub, "snapshots_header.txt")).read()
    assert "r1=r2=r3=2" in header


def test_verify_command_passes(tmp_path, capsys):
    out = str(tmp_path / "verify")
    assert main(["verify", "--out", out, "--seed", "5"]) == 0
    text = capsys.readouterr().out
    assert "checks passed" in text
    assert os.path.exists(os.path.join(out, "verification.csv"))
    assert os.path.exists(os.path.join(out, "verification.txt"))


def test_verify_deterministic_with_seed(tmp_path):
    out1 = str(tmp_path / "v1")
    out2 = str(tmp_path / "v2")
    assert main(["verify", "--out", out1, "--seed", "11"]) == 0
    assert main(["verify", "--out", out2, "--seed", "11"]) == 0
    a = open(os.path.join(out1, "verification.txt")).read()
    b = open(os.path.join(out2, "verification.txt")).read()
    assert a == b


def test_verify_corrupt_fixture_fails(capsys):
    assert main(["verify", "--corrupt-fixture"]) == 1
    err = capsys.readouterr().err
    assert "orthonormality" in err


def test_snapshot_retention_flag(tmp_path):
    out = str(tmp_path / "kept")
    assert main(["fom", "--preset", "2d-small", "--keep-every", "5",
                 "--out", out]) == 0
    times = np.load(os.path.join(out, "times.npy"))
    assert len(times) == 10
    assert times[0] == pytest.approx(0.1)


def test_config_error_exits_nonzero(tmp_path, capsys):
    code = main(["fom", "--preset", "2d-small", "--dt", "-1",
                 "--out", str(tmp_path / "x")])
    assert code == 2
    assert "dt must be positive" in capsys.readouterr().err


def test_missing_snapshots_clean_error(tmp_path, capsys):
    out = str(tmp_path / "empty")
    os.makedirs(out)
    storage.write_manifest(out, __import__("hdgpod.config",
                                           fromlist=["PRESETS"]).PRESETS["2d-small"])
    code = main(["pod", "--out", out])
    assert code == 2
    assert "run 'fom' first" in capsys.readouterr().err


def test_empty_snapshot_file_clean_error(tmp_path, capsys):
    from hdgpod.config import PRESETS

    out = str(tmp_path / "truncated")
    os.makedirs(out)
    storage.write_manifest(out, PRESETS["2d-small"])
    for name in ("snapshots_q.npy", "snapshots_u.npy", "snapshots_uhat.npy"):
        np.save(os.path.join(out, name), np.zeros((4, 0)))
    np.save(os.path.join(out, "times.npy"), np.zeros(0))
    np.save(os.path.join(out, "beta0.npy"), np.zeros(4))
    code = main(["pod", "--out", out])
    assert code == 2
    assert "empty" in capsys.readouterr().err
