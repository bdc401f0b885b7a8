import numpy as np
import pytest

from hdgpod import pod




class DenseWeight:
    def __init__(self, mat):
        self.mat = mat

    def matvec(self, x):
        return self.mat @ x


def _random_spd(rng, n):
    a = rng.standard_normal((n, n))
    return DenseWeight(a @ a.T + n * np.eye(n))


def test_single_column():
    rng = np.random.default_rng(0)
    W = _random_spd(rng, 12)
    y = rng.standard_normal(12)
    dt = 0.25
    basis = pod.compute_pod(y[:, None], W, [dt])
    assert basis.rank == 1
    norm_w = np.sqrt(y @ W.matvec(y))
    assert basis.eigenvalues[0] == pytest.approx(dt * norm_w**2, rel=1e-12)
    assert np.allclose(np.abs(basis.modes[:, 0]), np.abs(y) / norm_w, atol=1e-12)


def test_two_orthogonal_equal_norm_columns():
    rng = np.random.default_rng(1)
    W = _random_spd(rng, 10)
    y1 = rng.standard_normal(10)
    y1 /= np.sqrt(y1 @ W.matvec(y1))
    y2 = rng.standard_normal(10)
    y2 -= y1 * (y1 @ W.matvec(y2))
    y2 /= np.sqrt(y2 @ W.matvec(y2))
    basis = pod.compute_pod(np.column_stack([y1, y2]), W, [0.5, 0.5])
    assert basis.rank == 2
    assert basis.eigenvalues[0] == pytest.approx(basis.eigenvalues[1], rel=1e-10)
    _, proj = pod.project(np.column_stack([y1, y2]), basis)
    assert np.abs(proj - np.column_stack([y1, y2])).max() < 1e-10


def test_gram_eigenvalues_match_dense_svd_oracle():
    rng = np.random.default_rng(42)
    for _ in range(20):
        n = int(rng.integers(30, 80))
        m = int(rng.integers(5, 20))
        Y = rng.standard_normal((n, m))
        W = _random_spd(rng, n)
        w = rng.uniform(0.5, 2.0, m)
        basis = pod.compute_pod(Y, W, w)
        L = np.linalg.cholesky(W.mat)
        sv = np.linalg.svd(L.T @ Y * np.sqrt(w), compute_uv=False)
        k = min(basis.rank, len(sv))
        assert np.abs(basis.singular_values[:k] - sv[:k]).max() <= 1e-10 * sv[0]


def test_modes_w_orthonormal_and_reconstruction():
    rng = np.random.default_rng(7)
    Y = rng.standard_normal((40, 12))
    W = _random_spd(rng, 40)
    w = np.full(12, 0.125)
    basis = pod.compute_pod(Y, W, w)
    gram = basis.modes.T @ W.matvec(basis.modes)
    assert np.abs(gram - np.eye(basis.rank)).max() <= 1e-10
    recon = basis.modes @ np.diag(basis.singular_values[:basis.rank]) @ basis.temporal.T
    target = Y * np.sqrt(w)
    assert np.abs(recon - target).max() <= 1e-9 * np.abs(target).max()


def test_projection_properties():
    rng = np.random.default_rng(3)
    Y = rng.standard_normal((30, 10))
    W = _random_spd(rng, 30)
    basis = pod.compute_pod(Y, W, np.ones(10))
    # projecting a mode returns it
    red, proj = pod.project(basis.modes[:, 2], basis, r=5)
    assert np.allclose(proj, basis.modes[:, 2], atol=1e-12)
    assert np.allclose(red, np.eye(5)[:, 2], atol=1e-12)
    # r = 0 projects to zero
    red0, proj0 = pod.project(Y[:, 0], basis, r=0)
    assert red0.size == 0 and np.all(proj0 == 0)
    # residual is W-orthogonal to the retained modes
    red, proj = pod.project(Y, basis, r=4)
    resid = Y - proj
    cross = basis.modes[:, :4].T @ W.matvec(resid)
    assert np.abs(cross).max() < 1e-10
    with pytest.raises(ValueError):
        pod.project(Y, basis, r=basis.rank + 1)


def test_projection_error_tail_matches_direct_residual():
    rng = np.random.default_rng(11)
    Y = rng.standard_normal((25, 20))
    W = _random_spd(rng, 25)
    w = rng.uniform(0.1, 1.0, 20)
    basis = pod.compute_pod(Y, W, w)
    assert pod.projection_error_tail(basis, basis.rank) <= 1e-20
    total = sum(w[n] * Y[:, n] @ W.matvec(Y[:, n]) for n in range(20))
    assert pod.projection_error_tail(basis, 0) == pytest.approx(total, rel=1e-10)
    for r in (5, 11):
        assert pod.projection_error_tail(basis, r) == pytest.approx(
            pod.projection_residual_direct(basis, r), rel=1e-9
        )


def test_zero_snapshots_give_empty_basis():
    basis = pod.compute_pod(np.zeros((15, 4)), None, np.ones(4))
    assert basis.rank == 0
    assert basis.modes.shape == (15, 0)
    assert pod.projection_error_tail(basis, 0) == 0.0


def test_rank_cap():
    rng = np.random.default_rng(5)
    Y = rng.standard_normal((30, 10))
    basis = pod.compute_pod(Y, None, np.ones(10), r_max=3)
    assert basis.rank == 3


def test_seminorm_identities_on_trajectory(small2d):
    system = small2d["system"]
    bq, bu, bh = small2d["bases"]
    for basis, which in ((bu, "grad"), (bu, "trace"),
                         (bq, "div"), (bq, "normal-trace")):
        lam1 = basis.eigenvalues[0]
        for r in sorted({0, 1, 3, basis.rank // 2, basis.rank}):
            lhs, rhs = pod.seminorm_projection_error(basis, r, which, system)
            assert abs(lhs - rhs) <= 1e-8 * max(lhs, lam1)
    with pytest.raises(ValueError):
        pod.seminorm_projection_error(bu, 1, "div", system)
    with pytest.raises(ValueError):
        pod.seminorm_projection_error(bq, 1, "grad", system)


def test_trajectory_modes_orthonormal(small2d):
    system = small2d["system"]
    for basis, weight in zip(small2d["bases"],
                             (system.A7, system.M, system.A8)):
        gram = basis.modes.T @ weight.matvec(basis.modes)
        assert np.abs(gram - np.eye(basis.rank)).max() <= 1e-10


def test_trajectory_full_rank_projection(small2d):
    snaps = small2d["snaps"]
    bu = small2d["bases"][1]
    col = snaps.Yu[:, 10]
    _, proj = pod.project(col, bu)
    scale = max(1.0, float(np.abs(col).max()))
    assert np.abs(proj - col).max() <= 1e-9 * scale
