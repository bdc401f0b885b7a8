import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from hdgpod.estimators import HdgPodRom, WeightedPOD


def test_weighted_pod_roundtrip():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((12, 40))  # rows are snapshots
    est = WeightedPOD().fit(X)
    assert est.n_modes_ == 12
    assert est.components_.shape == (12, 40)
    Z = est.transform(X)
    assert Z.shape == (12, 12)
    Xr = est.inverse_transform(Z)
    assert np.abs(Xr - X).max() < 1e-9


def test_weighted_pod_truncation_and_tail():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((10, 30))
    est = WeightedPOD(n_modes=4).fit(X)
    assert est.n_modes_ == 4
    assert est.singular_values_.shape == (4,)
    tail = est.projection_error_tail(4)
    resid = X - est.inverse_transform(est.transform(X))
    assert tail == pytest.approx(float((resid**2).sum()), rel=1e-9)


def test_weighted_pod_validation_and_params():
    est = WeightedPOD(n_modes=2)
    with pytest.raises(NotFittedError):
        est.transform(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        est.fit(np.zeros((2, 3, 4)))
    with pytest.raises(ValueError):
        est.fit(np.array([[1.0, np.nan], [0.0, 1.0]]))
    est.fit(np.random.default_rng(2).standard_normal((6, 9)))
    with pytest.raises(ValueError):
        est.transform(np.zeros((3, 8)))  # wrong feature count
    assert clone(est).get_params()["n_modes"] == 2
    est.set_params(n_modes=3)
    assert est.n_modes == 3


def test_weighted_pod_respects_weight(small2d):
    system, snaps = small2d["system"], small2d["snaps"]
    est = WeightedPOD(weight=system.M,
                      time_weights=snaps.time_weights()).fit(snaps.Yu.T)
    ref = small2d["bases"][1]
    assert est.n_modes_ == ref.rank
    assert np.allclose(est.singular_values_,
                       ref.singular_values[:ref.rank], rtol=1e-12)


def test_rom_estimator_full_rank_matches_fom(small2d):
    setup, snaps = small2d["setup"], small2d["snaps"]
    est = HdgPodRom(setup.system).fit(snaps)
    U = est.predict(T=float(snaps.times[-1]))
    assert U.shape == (snaps.n_snapshots, setup.layout.N2)
    diff = setup.system.scalar_norm(U.T - snaps.Yu)
    assert diff.max() <= 1e-8


def test_rom_estimator_reduced_output_and_flux(small2d):
    setup, snaps = small2d["setup"], small2d["snaps"]
    est = HdgPodRom(setup.system, r=3).fit(snaps)
    B = est.predict(T=0.2, reduced=True)
    assert B.shape == (10, 3)
    A = est.recover_flux(B)
    assert A.shape == (10, 3)
    with pytest.raises(NotFittedError):
        HdgPodRom(setup.system).predict(T=1.0)
    params = est.get_params()
    assert params["r"] == 3 and params["system"] is setup.system
