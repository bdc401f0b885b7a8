"""Full-order backward Euler time stepping with the HDG local solver.

Each step eliminates the flux and scalar unknowns element by element
(every matrix inverted on the way is block diagonal with small blocks) and
solves one global sparse system for the numerical trace; the trace matrix
is time independent, so its sparse factorization is computed once.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import BlockDiagonalMatrix, assemble_init, assemble_load


@dataclass
class CondensedStepper:
    """Factorized operators for one time-step size.

    ``Qinv`` is the blockwise inverse of A2^T A1^{-1} A2 + M/dt + A4;
    ``trace_matrix`` is the condensed system for the trace unknown and
    ``trace_solve`` its reusable sparse LU solve.  ``X`` collects the
    trace-to-scalar coupling A5 + A2^T A1^{-1} A3.
    """

    system: object
    dt: float
    Qinv: BlockDiagonalMatrix = field(repr=False, default=None)
    A1inv: BlockDiagonalMatrix = field(repr=False, default=None)
    X: sp.csr_matrix = field(repr=False, default=None)
    A1invA3: sp.csr_matrix = field(repr=False, default=None)
    trace_matrix: sp.csr_matrix = field(repr=False, default=None)
    trace_solve: object = field(repr=False, default=None)

    def apply_At2(self, gamma):
        """Action of the gamma-to-beta elimination operator."""
        return self.Qinv.matvec(self.X @ gamma)

    def apply_At1(self, gamma):
        """Action of the gamma-to-alpha elimination operator."""
        beta_part = self.apply_At2(gamma)
        return self.A1inv.matvec(self.system.A2 @ beta_part) - (self.A1invA3 @ gamma)


@dataclass
class SnapshotSet:
    """Coefficient snapshots of one full-order trajectory.

    Columns of ``Yq`` / ``Yu`` / ``Yhat`` hold the flux, scalar, and trace
    coefficients at the strictly increasing times in ``times``; ``beta0``
    is the discrete initial scalar state (not included as a column).
    """

    times: np.ndarray
    Yq: np.ndarray = field(repr=False, default=None)
    Yu: np.ndarray = field(repr=False, default=None)
    Yhat: np.ndarray = field(repr=False, default=None)
    beta0: np.ndarray = field(repr=False, default=None)
    dt: float = None

    @property
    def n_snapshots(self):
        return len(self.times)

    def time_weights(self):
        """Quadrature weight of each snapshot for time integrals (the
        piecewise-constant-in-time extension of the discrete trajectory)."""
        t = np.concatenate([[0.0], self.times])
        return np.diff(t)


def solve_initial(system, b2):
    """Scalar coefficients of the L2 projection of the initial data."""
    return system.M.solve(b2)


def condense(system, dt):
    """Build the factorized one-step operators for time step ``dt``."""
    if dt <= 0:
        raise ValueError(f"time step must be positive, got {dt}")
    layout = system.layout
    A1inv_elem = np.linalg.inv(system.A1_elem)
    Q_blocks = (
        np.einsum("ecia,eil,eclb->eab", system.A2_blocks, A1inv_elem, system.A2_blocks)
        + system.M.blocks / dt
        + system.A4.blocks
    )
    Q = BlockDiagonalMatrix(Q_blocks)
    Q.cholesky_check("condensed scalar operator Q")
    Qinv = Q.inv()
    A1inv = BlockDiagonalMatrix(np.tile(A1inv_elem, (layout.dim, 1, 1)))

    A1inv_sp = A1inv.to_sparse()
    Qinv_sp = Qinv.to_sparse()
    A1invA3 = (A1inv_sp @ system.A3).tocsr()
    X = (system.A5 + system.A2.T @ A1invA3).tocsr()
    S = (X.T @ (Qinv_sp @ X) - system.A3.T @ A1invA3 - system.A6_sparse).tocsc()
    try:
        lu = spla.splu(S)
    except RuntimeError as exc:
        raise RuntimeError(f"condensed trace matrix factorization failed: {exc}")
    return CondensedStepper(
        system=system,
        dt=dt,
        Qinv=Qinv,
        A1inv=A1inv,
        X=X,
        A1invA3=A1invA3,
        trace_matrix=S.tocsr(),
        trace_solve=lu.solve,
    )


def step(stepper, beta_prev, b1=None):
    """Advance one backward Euler step; returns (alpha, beta, gamma)."""
    system = stepper.system
    g = system.M.matvec(beta_prev) / stepper.dt
    if b1 is not None:
        g = g + b1
    bt2 = stepper.Qinv.matvec(g)
    bt1 = stepper.A1inv.matvec(system.A2 @ bt2)
    gamma = stepper.trace_solve(-(system.A3.T @ bt1) - (system.A5.T @ bt2))
    beta = stepper.Qinv.matvec(stepper.X @ gamma) + bt2
    alpha = stepper.A1inv.matvec(system.A2 @ beta) - (stepper.A1invA3 @ gamma)
    return alpha, beta, gamma


def run(system, dt, T, u0=None, f=None, b2=None, keep_every=1, quad_degree=None,
        progress=None):
    """Run the full-order model on (0, T] and collect snapshots.

    Parameters
    ----------
    u0 : callable or None
        Initial data as a function of points (..., dim); ignored when a
        precomputed moment vector ``b2`` is given.
    f : callable or None
        Source ``f(x, t)``; ``None`` means zero (the load assembly is
        skipped entirely).
    keep_every : int
        Retain every ``keep_every``-th snapshot.
    """
    n_steps = int(round(T / dt))
    if n_steps < 1 or abs(n_steps * dt - T) > 1e-9 * max(1.0, abs(T)):
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    mesh, basis, layout = system.mesh, system.basis, system.layout
    if b2 is None:
        b2 = assemble_init(mesh, basis, layout, u0, quad_degree)
    beta0 = solve_initial(system, b2)
    stepper = condense(system, dt)

    kept = np.arange(keep_every, n_steps + 1, keep_every)
    if len(kept) == 0 or kept[-1] != n_steps:
        kept = np.append(kept, n_steps)
    n_kept = len(kept)
    Yq = np.empty((layout.N1, n_kept))
    Yu = np.empty((layout.N2, n_kept))
    Yhat = np.empty((layout.N3, n_kept))
    times = kept * dt

    beta_prev = beta0
    col = 0
    next_keep = kept[0]
    for n in range(1, n_steps + 1):
        t = n * dt
        b1 = None
        if f is not None:
            b1 = assemble_load(mesh, basis, layout, lambda x: f(x, t), quad_degree)
        alpha, beta, gamma = step(stepper, beta_prev, b1)
        if n == next_keep:
            Yq[:, col] = alpha
            Yu[:, col] = beta
            Yhat[:, col] = gamma
            col += 1
            next_keep = kept[col] if col < n_kept else -1
        beta_prev = beta
        if progress is not None and n % progress == 0:
            print(f"  step {n}/{n_steps} (t={t:.4f})", flush=True)
    return SnapshotSet(times=times, Yq=Yq, Yu=Yu, Yhat=Yhat, beta0=beta0, dt=dt)


def step_residual(system, dt, alpha, beta, gamma, beta_prev, b1=None):
    """Relative residual of one backward Euler step in the three-field form."""
    rhs2 = system.M.matvec(beta_prev) / dt
    if b1 is not None:
        rhs2 = rhs2 + b1
    r1 = system.A1.matvec(alpha) - system.A2 @ beta + system.A3 @ gamma
    r2 = (
        system.A2.T @ alpha
        + system.M.matvec(beta) / dt
        + system.A4.matvec(beta)
        - system.A5 @ gamma
        - rhs2
    )
    r3 = system.A3.T @ alpha + system.A5.T @ beta - system.A6.matvec(gamma)
    num = np.sqrt(np.dot(r1, r1) + np.dot(r2, r2) + np.dot(r3, r3))
    den = max(np.linalg.norm(rhs2), 1e-300)
    return float(num / den)
