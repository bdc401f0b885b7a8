"""Scikit-learn style wrappers around the POD and the reduced model.

These follow the estimator protocol (constructor parameters stored as-is,
``fit`` returning self, fitted attributes with trailing underscores,
``get_params``/``set_params`` inherited) so the decomposition composes
with pipelines and model-selection tooling.  Rows are samples: a snapshot
matrix enters as (n_snapshots, n_dofs), the transpose of the column
convention used by the numerical core.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import pod as pod_mod
from . import rom as rom_mod
from .fom import SnapshotSet
from .pipeline import compute_all_pods


def _check_matrix(X, name="X", n_features=None):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite entries")
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(
            f"{name} has {X.shape[1]} features, expected {n_features}"
        )
    return X


class WeightedPOD(TransformerMixin, BaseEstimator):
    """Proper orthogonal decomposition under a weighted inner product.

    Parameters
    ----------
    weight : object with ``matvec``, optional
        SPD inner-product matrix on the feature space (None = identity).
    time_weights : float or array, optional
        Quadrature weight per sample (None = 1 for every sample).
    n_modes : int, optional
        Cap on the retained modes; by default all numerically nonzero
        modes are kept.

    Attributes
    ----------
    components_ : ndarray (n_modes_, n_features)
    singular_values_, eigenvalues_ : ndarray
    n_modes_ : int
    """

    def __init__(self, weight=None, time_weights=None, n_modes=None):
        self.weight = weight
        self.time_weights = time_weights
        self.n_modes = n_modes

    def fit(self, X, y=None):
        X = _check_matrix(X)
        tw = self.time_weights
        if tw is None:
            tw = np.ones(X.shape[0])
        tw = np.broadcast_to(np.asarray(tw, dtype=float), (X.shape[0],))
        self.basis_ = pod_mod.compute_pod(
            X.T, self.weight, tw, r_max=self.n_modes
        )
        self.n_features_in_ = X.shape[1]
        self.n_modes_ = self.basis_.rank
        self.components_ = self.basis_.modes.T
        self.singular_values_ = self.basis_.singular_values[: self.basis_.rank]
        self.eigenvalues_ = self.basis_.eigenvalues
        return self

    def _require_fitted(self):
        if not hasattr(self, "basis_"):
            raise NotFittedError("this WeightedPOD instance is not fitted yet")

    def transform(self, X):
        """Reduced coordinates of each row; shape (n_samples, n_modes_)."""
        self._require_fitted()
        X = _check_matrix(X, n_features=self.n_features_in_)
        return pod_mod.reduced_coordinates(self.basis_, X.T).T

    def inverse_transform(self, Xr):
        """Lift reduced coordinates back to the feature space."""
        self._require_fitted()
        Xr = _check_matrix(Xr, name="Xr", n_features=None)
        if Xr.shape[1] > self.n_modes_:
            raise ValueError(
                f"Xr has {Xr.shape[1]} columns, more than n_modes_={self.n_modes_}"
            )
        return rom_mod.lift(Xr.T, self.basis_).T

    def projection_error_tail(self, r):
        """Exact squared data-approximation error of rank r."""
        self._require_fitted()
        return pod_mod.projection_error_tail(self.basis_, r)


class HdgPodRom(BaseEstimator):
    """Reduced order model fitted to one full-order trajectory.

    ``fit`` computes the three weighted PODs of the snapshot set and
    builds the scalar-only reduced model; ``predict`` integrates it and
    returns the lifted scalar trajectory (rows are time levels).

    Parameters
    ----------
    system : HdgSystem
    r : int, optional
        Common reduced order for all three variables (default: full rank).
    r1, r2, r3 : int, optional
        Per-variable overrides of ``r``.
    """

    def __init__(self, system, r=None, r1=None, r2=None, r3=None):
        self.system = system
        self.r = r
        self.r1 = r1
        self.r2 = r2
        self.r3 = r3

    def fit(self, snapshots, y=None):
        if not isinstance(snapshots, SnapshotSet):
            raise TypeError("fit expects a SnapshotSet")
        bq, bu, bh = compute_all_pods(self.system, snapshots)
        r1 = self.r1 if self.r1 is not None else self.r
        r2 = self.r2 if self.r2 is not None else self.r
        r3 = self.r3 if self.r3 is not None else self.r
        self.bases_ = (bq, bu, bh)
        self.model_ = rom_mod.build_reduced(
            self.system, bq, bu, bh,
            r1=min(r1, bq.rank) if r1 is not None else None,
            r2=min(r2, bu.rank) if r2 is not None else None,
            r3=min(r3, bh.rank) if r3 is not None else None,
            beta0=snapshots.beta0,
        )
        self.dt_ = snapshots.dt
        return self

    def _require_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("this HdgPodRom instance is not fitted yet")

    def predict(self, T, dt=None, reduced=False):
        """Integrate the reduced model on (0, T].

        Returns the scalar trajectory with one row per time level, lifted
        to full-space coefficients unless ``reduced`` is true.
        """
        self._require_fitted()
        dt = self.dt_ if dt is None else dt
        traj = rom_mod.rom_run(self.model_, dt, T)
        if reduced:
            return traj.b.T
        return rom_mod.lift(traj.b, self.model_.basis_u).T

    def recover_flux(self, b_rows):
        """Reduced flux coefficients for given reduced scalar states."""
        self._require_fitted()
        a, _ = rom_mod.recover_flux_trace(self.model_, np.asarray(b_rows).T)
        return a.T
