import numpy as np
import pytest

from hdgpod import analysis, pod, rom
from hdgpod.basis import simplex_quadrature

from conftest import make_system


@pytest.fixture(scope="module")
def run2d(small2d):
    system, snaps = small2d["system"], small2d["snaps"]
    bq, bu, bh = small2d["bases"]
    model = rom.build_reduced(system, bq, bu, bh, beta0=snaps.beta0)
    traj = rom.rom_run(model, snaps.dt, float(snaps.times[-1]))
    return {**small2d, "model": model, "traj": traj}


def test_full_rank_errors_vanish(run2d):
    report = analysis.trajectory_errors(run2d["snaps"], run2d["traj"],
                                        run2d["model"])
    assert report.u_error <= 1e-8 and report.q_error <= 1e-8
    for value in (report.tail_q, report.tail_u, report.tail_uhat,
                  report.lambda_u_weighted, report.lambda_q_weighted):
        assert np.isfinite(value) and value >= 0


def test_mismatched_grids_rejected(run2d):
    traj = run2d["traj"]
    bad = rom.RomTrajectory(times=traj.times[:-1], b=traj.b[:, :-1])
    with pytest.raises(ValueError):
        analysis.trajectory_errors(run2d["snaps"], bad, run2d["model"])


def test_broken_seminorm_constant_and_linear():
    mesh, basis, layout, system = make_system(2, 2, 1)
    from hdgpod.assembly import assemble_init

    const = system.M.solve(assemble_init(mesh, basis, layout,
                                         lambda x: np.ones(x.shape[:-1])))
    assert analysis.broken_seminorm(const, "grad", system) <= 1e-12
    linear = system.M.solve(assemble_init(mesh, basis, layout,
                                          lambda x: x[..., 0]))
    # grad(x) = (1, 0): squared broken seminorm equals the domain area
    assert analysis.broken_seminorm(linear, "grad", system) ** 2 == pytest.approx(
        1.0, rel=1e-12
    )
    with pytest.raises(ValueError):
        analysis.broken_seminorm(linear, "volume", system)


def test_divergence_seminorm_against_refined_quadrature():
    mesh, basis, layout, system = make_system(2, 2, 2)
    rng = np.random.default_rng(9)
    alpha = rng.standard_normal(layout.N1)
    value = analysis.broken_seminorm(alpha, "div", system) ** 2

    qp, qw = simplex_quadrature(2, 2 * basis.degree + 6)
    grads = basis.eval_scalar_grad(qp)
    p = mesh.vertices[mesh.elements]
    total = 0.0
    for e in range(mesh.n_elements):
        jac = (p[e, 1:] - p[e, 0]).T
        det = abs(np.linalg.det(jac))
        gphys = np.einsum("ad,qid->qia", np.linalg.inv(jac).T, grads)
        acoef = alpha[layout.flux_elem_dofs[e]].reshape(2, basis.dim_scalar)
        div = np.einsum("ci,qic->q", acoef, gphys)
        total += det * float(np.dot(qw, div**2))
    assert value == pytest.approx(total, rel=1e-10)


def test_verify_identities_passes(run2d):
    report = analysis.verify_identities(
        run2d["system"], run2d["snaps"], *run2d["bases"], seed=123
    )
    assert report.passed, report.summary()
    # every check records both sides and a verdict
    assert all(hasattr(c, "lhs") and hasattr(c, "rhs") for c in report.checks)
    text = report.summary()
    assert "checks passed" in text


def test_verify_identities_catches_corruption(small2d):
    import copy

    system, snaps = small2d["system"], small2d["snaps"]
    bq, bu, bh = small2d["bases"]
    bad = copy.copy(bu)
    bad.modes = bu.modes.copy()
    bad.modes[:, 0] *= 1.5
    report = analysis.verify_identities(system, snaps, bq, bad, bh, seed=1)
    assert not report.passed
    names = [c.name for c in report.failures()]
    assert any("orthonormality[u" in n for n in names)


def test_verify_report_csv_format(run2d, tmp_path):
    report = analysis.verify_identities(
        run2d["system"], run2d["snaps"], *run2d["bases"], seed=7
    )
    path = tmp_path / "verification.csv"
    with open(path, "w", newline="\n") as fh:
        report.to_csv(fh)
    lines = path.read_text().splitlines()
    assert lines[0] == "name,lhs,rhs,discrepancy,tolerance,verdict"
    assert len(lines) == len(report.checks) + 1
    assert all(line.endswith(("pass", "fail")) for line in lines[1:])


def test_error_bound_constant_does_not_grow(small2d):
    # fitted constant of err_u^2 <= C/h * Lambda_r across the r ladder
    system, snaps = small2d["system"], small2d["snaps"]
    bq, bu, bh = small2d["bases"]
    h = system.mesh.h
    ladder = [r for r in (1, 2, 3, 4, 5) if r <= min(bq.rank, bu.rank, bh.rank)]
    fitted = []
    for r in ladder:
        model = rom.build_reduced(system, bq, bu, bh, r1=r, r2=r, r3=r,
                                  beta0=snaps.beta0)
        traj = rom.rom_run(model, snaps.dt, float(snaps.times[-1]))
        report = analysis.trajectory_errors(snaps, traj, model)
        if report.lambda_u_weighted <= 0:
            break
        fitted.append(report.u_error**2 * h / report.lambda_u_weighted)
    assert len(fitted) >= 3
    running_max = fitted[0]
    for value in fitted[1:]:
        assert value <= 2.0 * running_max
        running_max = max(running_max, value)
