"""The reduced order model in the scalar variable only.

Projecting the three-field system onto the POD spaces gives reduced
matrices B1..B6; eliminating the reduced flux and trace (both elimination
matrices are positive definite) leaves a small symmetric positive
semidefinite operator acting on the reduced scalar coefficients, which is
stepped with backward Euler.  Flux and trace are recovered afterwards by
two precomputed reduced-size matrices at cost independent of the full
space dimensions.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla


@dataclass
class ReducedModel:
    """Reduced matrices, recovery operators, and the scalar-only operator.

    ``operator`` is B2^T G + B4 - B5 H; with the POD bases orthonormal in
    their weighting matrices it is symmetric positive semidefinite, so
    every backward Euler step solves an SPD system.
    """

    r1: int
    r2: int
    r3: int
    B1: np.ndarray = field(repr=False, default=None)
    B2: np.ndarray = field(repr=False, default=None)
    B3: np.ndarray = field(repr=False, default=None)
    B4: np.ndarray = field(repr=False, default=None)
    B5: np.ndarray = field(repr=False, default=None)
    B6: np.ndarray = field(repr=False, default=None)
    G: np.ndarray = field(repr=False, default=None)
    H: np.ndarray = field(repr=False, default=None)
    operator: np.ndarray = field(repr=False, default=None)
    b0: np.ndarray = field(repr=False, default=None)
    basis_q: object = field(repr=False, default=None)
    basis_u: object = field(repr=False, default=None)
    basis_uhat: object = field(repr=False, default=None)
    system: object = field(repr=False, default=None)


@dataclass
class RomTrajectory:
    """Reduced scalar trajectory; column n of ``b`` belongs to times[n]."""

    times: np.ndarray
    b: np.ndarray = field(repr=False, default=None)


def build_reduced(system, basis_q, basis_u, basis_uhat, r1=None, r2=None, r3=None,
                  beta0=None):
    """Project the HDG matrices onto the POD spaces and eliminate.

    ``r1, r2, r3`` default to the full POD ranks; each must be at least 1.
    When ``beta0`` is given the reduced initial state (the reduced
    coordinates of its projection) is stored on the model.
    """
    r1 = basis_q.rank if r1 is None else int(r1)
    r2 = basis_u.rank if r2 is None else int(r2)
    r3 = basis_uhat.rank if r3 is None else int(r3)
    for r, b, name in ((r1, basis_q, "r1"), (r2, basis_u, "r2"), (r3, basis_uhat, "r3")):
        if r < 1 or r > b.rank:
            raise ValueError(f"{name}={r} outside [1, rank={b.rank}]")

    D1 = basis_q.modes[:, :r1]
    D2 = basis_u.modes[:, :r2]
    D3 = basis_uhat.modes[:, :r3]

    B1 = D1.T @ system.A1.matvec(D1)
    B2 = D1.T @ (system.A2 @ D2)
    B3 = D1.T @ (system.A3 @ D3)
    B4 = D2.T @ system.A4.matvec(D2)
    B5 = D2.T @ (system.A5 @ D3)
    B6 = D3.T @ system.A6.matvec(D3)

    B1invB2 = sla.solve(B1, B2, assume_a="pos")
    B1invB3 = sla.solve(B1, B3, assume_a="pos")
    inner = B6 + B3.T @ B1invB3
    cond = np.linalg.cond(inner)
    if not np.isfinite(cond) or 1.0 / cond < 1e-14:
        raise np.linalg.LinAlgError(
            f"trace elimination matrix is numerically singular (cond={cond:.3e})"
        )
    Z = B5.T + B3.T @ B1invB2
    H = sla.solve(inner, Z, assume_a="pos")
    G = B1invB2 - B1invB3 @ H
    operator = B2.T @ G + B4 - B5 @ H

    model = ReducedModel(
        r1=r1, r2=r2, r3=r3,
        B1=B1, B2=B2, B3=B3, B4=B4, B5=B5, B6=B6,
        G=G, H=H, operator=operator,
        basis_q=basis_q, basis_u=basis_u, basis_uhat=basis_uhat,
        system=system,
    )
    if beta0 is not None:
        model.b0 = reduced_initial(basis_u, beta0, r2)
    return model


def reduced_initial(basis_u, beta0, r=None):
    """Reduced coordinates of the projected discrete initial state."""
    from .pod import reduced_coordinates

    return reduced_coordinates(basis_u, beta0, r)


def rom_run(model, dt, T, z=None, b0=None):
    """Backward Euler on the reduced scalar equation.

    Parameters
    ----------
    z : callable or None
        Reduced load ``z(t)`` returning a length-r2 vector; None means a
        zero source.
    b0 : ndarray, optional
        Initial reduced state; defaults to the state stored on the model.

    Returns
    -------
    RomTrajectory
    """
    n_steps = int(round(T / dt))
    if n_steps < 1 or abs(n_steps * dt - T) > 1e-9 * max(1.0, abs(T)):
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    if b0 is None:
        b0 = model.b0
    if b0 is None:
        raise ValueError("no initial reduced state: pass b0 or build with beta0")
    stepmat = np.eye(model.r2) + dt * model.operator
    factor = sla.cho_factor(stepmat)
    b = np.empty((model.r2, n_steps))
    prev = np.asarray(b0, dtype=float)
    for n in range(1, n_steps + 1):
        rhs = prev.copy()
        if z is not None:
            rhs += dt * np.asarray(z(n * dt), dtype=float)
        prev = sla.cho_solve(factor, rhs)
        b[:, n - 1] = prev
    times = dt * np.arange(1, n_steps + 1)
    return RomTrajectory(times=times, b=b)


def recover_flux_trace(model, b):
    """Reduced flux and trace coefficients from the scalar coefficients.

    Two reduced-size matrix-vector products per state; works on a single
    vector or on a matrix of column states.
    """
    b = np.asarray(b, dtype=float)
    return model.G @ b, model.H @ b


def lift(coeffs, basis):
    """Full-space coefficients of a reduced state (or column states)."""
    coeffs = np.asarray(coeffs, dtype=float)
    r = coeffs.shape[0]
    basis.require_rank(r)
    return basis.modes[:, :r] @ coeffs


def stationary_residuals(model, a, b, c):
    """Residual norms of the two reduced stationary relations."""
    r1 = model.B1 @ a - model.B2 @ b + model.B3 @ c
    r3 = model.B3.T @ a + model.B5.T @ b - model.B6 @ c
    return float(np.linalg.norm(r1)), float(np.linalg.norm(r3))
