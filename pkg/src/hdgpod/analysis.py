"""Error norms, broken seminorms, and the verification battery.

Trajectory errors follow the discrete root-mean-square-in-time form used
for the reported tables: the flux error in the A7-weighted norm, the
scalar error in the mass-weighted norm.  ``verify_identities`` re-derives
both sides of every testable identity independently and reports each
check with its left side, right side, tolerance, and verdict.
"""

import io
from dataclasses import dataclass, field

import numpy as np

from . import pod as pod_mod
from . import rom as rom_mod
from .assembly import seminorm_quadform
from .basis import single_element_masses, trace_constant


@dataclass
class ErrorReport:
    """Errors and tail energies of one reduced run against the full order."""

    r1: int
    r2: int
    r3: int
    q_error: float
    u_error: float
    tail_q: float
    tail_u: float
    tail_uhat: float
    lambda_u_weighted: float
    lambda_q_weighted: float
    fom_seconds: float = None
    rom_seconds: float = None


def broken_seminorm(coeffs, which, system):
    """Broken seminorm of a coefficient vector.

    ``which`` is 'grad' or 'trace' for scalar coefficients, 'div' or
    'normal-trace' for flux coefficients.
    """
    return float(np.sqrt(seminorm_quadform(system, coeffs, which)))


def _weighted_tail(basis, r, extra=None, system=None):
    """Sum of lambda_i (i > r), each optionally weighted by
    1 + sum of squared seminorms of mode i.

    Modes past the numerical rank contribute their bare eigenvalues (the
    seminorm factors are unavailable there, and those eigenvalues are at
    the noise floor).
    """
    lam = basis.eigenvalues
    total = float(lam[basis.rank:].sum())
    if basis.rank > r:
        tail_lam = lam[r: basis.rank]
        weightv = np.ones(basis.rank - r)
        if extra:
            modes = basis.modes[:, r: basis.rank]
            for which in extra:
                weightv = weightv + seminorm_quadform(system, modes, which)
        total += float(np.dot(tail_lam, weightv))
    return total


def lambda_bound_terms(basis_q, basis_u, basis_uhat, r1, r2, r3, system):
    """The two tail quantities entering the error bounds.

    Returns (for the scalar bound, for the flux bound); both sum the flux
    tail weighted by its normal-trace and divergence seminorms and the
    plain trace tail; they differ in whether the scalar tail carries the
    extra unweighted term.
    """
    q_part = _weighted_tail(basis_q, r1, ("normal-trace", "div"), system)
    uhat_part = float(basis_uhat.eigenvalues[r3:].sum())
    u_semi = _weighted_tail(basis_u, r2, ("trace", "grad"), system)
    u_plain = float(basis_u.eigenvalues[r2:].sum())
    lam_u = q_part + u_semi + uhat_part
    lam_q = q_part + (u_semi - u_plain) + uhat_part
    return lam_u, lam_q


def trajectory_errors(snapshots, trajectory, model, fom_seconds=None,
                      rom_seconds=None):
    """RMS-in-time errors of a reduced trajectory against the snapshots."""
    system = model.system
    if snapshots.n_snapshots != len(trajectory.times) or not np.allclose(
        snapshots.times, trajectory.times, rtol=0.0, atol=1e-10
    ):
        raise ValueError("snapshot and reduced-trajectory time grids differ")
    U = rom_mod.lift(trajectory.b, model.basis_u)
    u_err = float(np.sqrt(np.mean(system.scalar_norm(U - snapshots.Yu) ** 2)))
    a, _ = rom_mod.recover_flux_trace(model, trajectory.b)
    Q = rom_mod.lift(a, model.basis_q)
    q_err = float(np.sqrt(np.mean(system.flux_norm(Q - snapshots.Yq) ** 2)))
    lam_u, lam_q = lambda_bound_terms(
        model.basis_q, model.basis_u, model.basis_uhat,
        model.r1, model.r2, model.r3, system,
    )
    return ErrorReport(
        r1=model.r1, r2=model.r2, r3=model.r3,
        q_error=q_err, u_error=u_err,
        tail_q=float(model.basis_q.eigenvalues[model.r1:].sum()),
        tail_u=float(model.basis_u.eigenvalues[model.r2:].sum()),
        tail_uhat=float(model.basis_uhat.eigenvalues[model.r3:].sum()),
        lambda_u_weighted=lam_u,
        lambda_q_weighted=lam_q,
        fom_seconds=fom_seconds,
        rom_seconds=rom_seconds,
    )


@dataclass
class Check:
    name: str
    lhs: float
    rhs: float
    tolerance: float
    discrepancy: float
    passed: bool

    def line(self):
        status = "pass" if self.passed else "FAIL"
        return (
            f"[{status}] {self.name}: lhs={self.lhs:.6e} rhs={self.rhs:.6e} "
            f"discrepancy={self.discrepancy:.3e} tol={self.tolerance:.1e}"
        )


@dataclass
class VerificationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def add(self, name, lhs, rhs, tolerance, discrepancy):
        self.checks.append(
            Check(name, float(lhs), float(rhs), tolerance, float(discrepancy),
                  bool(discrepancy <= tolerance))
        )

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def summary(self):
        out = io.StringIO()
        for c in self.checks:
            out.write(c.line() + "\n")
        n_fail = len(self.failures())
        out.write(f"{len(self.checks) - n_fail}/{len(self.checks)} checks passed\n")
        return out.getvalue()

    def to_csv(self, stream):
        stream.write("name,lhs,rhs,discrepancy,tolerance,verdict\n")
        for c in self.checks:
            verdict = "pass" if c.passed else "fail"
            stream.write(
                f"{c.name},{c.lhs:.9e},{c.rhs:.9e},{c.discrepancy:.9e},"
                f"{c.tolerance:.9e},{verdict}\n"
            )


def _r_ladder(rank, r_values=None):
    if r_values is None:
        r_values = {0, 1, 3, rank // 2, rank}
    return sorted({min(max(int(r), 0), rank) for r in r_values})


def trace_inequality_violation(mesh, basis, rng, n_elements=32, n_polys=100):
    """Worst relative violation of the elementwise trace inequality.

    The bound uses the exact degree-dependent constant with the element
    length taken as volume / boundary measure, the normalization under
    which the constant is sharp (equality for constants).
    """
    C2 = trace_constant(mesh.dim, basis.degree) ** 2
    elems = rng.choice(mesh.n_elements, size=min(n_elements, mesh.n_elements),
                       replace=False)
    worst = -np.inf
    for e in elems:
        mass, bmass, vol, bnd = single_element_masses(
            mesh.vertices[mesh.elements[e]], basis
        )
        bound = C2 * bnd / vol
        coeffs = rng.standard_normal((basis.dim_scalar, n_polys))
        num = np.einsum("iq,ij,jq->q", coeffs, bmass, coeffs)
        den = np.einsum("iq,ij,jq->q", coeffs, mass, coeffs)
        worst = max(worst, float((num / den).max() / bound - 1.0))
    return worst


def verify_identities(system, snapshots, basis_q, basis_u, basis_uhat,
                      r_values=None, seed=0, source_free=True):
    """Run every testable identity and bound; returns a VerificationReport."""
    report = VerificationReport()
    rng = np.random.default_rng(seed)

    for basis, wname in ((basis_q, "A7"), (basis_u, "M"), (basis_uhat, "A8")):
        if basis.rank == 0:
            continue
        gram = basis.modes.T @ basis.weight.matvec(basis.modes)
        dev = np.abs(gram - np.eye(basis.rank)).max()
        report.add(f"orthonormality[{basis.tag},{wname}]", dev, 0.0, 1e-10, dev)

    for basis in (basis_q, basis_u, basis_uhat):
        lam1 = basis.eigenvalues[0] if len(basis.eigenvalues) else 0.0
        for r in _r_ladder(basis.rank, r_values):
            tail = pod_mod.projection_error_tail(basis, r)
            direct = pod_mod.projection_residual_direct(basis, r)
            rel = abs(tail - direct) / max(tail, direct, lam1, 1e-300)
            report.add(f"l2-tail[{basis.tag},r={r}]", direct, tail, 1e-8, rel)

    for basis, which in ((basis_u, "grad"), (basis_u, "trace"),
                         (basis_q, "div"), (basis_q, "normal-trace")):
        lam1 = basis.eigenvalues[0] if len(basis.eigenvalues) else 0.0
        for r in _r_ladder(basis.rank, r_values):
            lhs, rhs = pod_mod.seminorm_projection_error(basis, r, which, system)
            rel = abs(lhs - rhs) / max(lhs, lam1, 1e-300)
            report.add(f"seminorm-tail[{basis.tag},{which},r={r}]",
                       lhs, rhs, 1e-8, rel)

    worst = trace_inequality_violation(system.mesh, system.basis, rng)
    report.add("trace-inequality-constant", worst, 0.0, 1e-10, max(worst, 0.0))

    if min(basis_q.rank, basis_u.rank, basis_uhat.rank) >= 1:
        model = rom_mod.build_reduced(system, basis_q, basis_u, basis_uhat,
                                      beta0=snapshots.beta0)
        eig_b1 = float(np.linalg.eigvalsh(model.B1).min())
        report.add("B1-lower-bound", eig_b1, system.c0, 1e-10,
                   max(system.c0 - eig_b1, 0.0))
        eig_b6 = float(np.linalg.eigvalsh(model.B6).min())
        tau_min = float(system.tau.min())
        report.add("B6-lower-bound", eig_b6, tau_min, 1e-10,
                   max(tau_min - eig_b6, 0.0))

        scale = max(1.0, float(np.abs(model.operator).max()))
        asym = float(np.abs(model.operator - model.operator.T).max()) / scale
        report.add("reduced-operator-symmetry", asym, 0.0, 1e-9, asym)
        eig_min = float(np.linalg.eigvalsh(
            0.5 * (model.operator + model.operator.T)).min())
        report.add("reduced-operator-psd", eig_min, 0.0, 1e-9,
                   max(-eig_min, 0.0) / scale)

        if source_free:
            traj = rom_mod.rom_run(model, snapshots.dt,
                                   float(snapshots.times[-1]))
            nb = np.linalg.norm(traj.b, axis=0)
            nb = np.concatenate([[np.linalg.norm(model.b0)], nb])
            up = float((np.diff(nb) - 1e-12 * nb[:-1]).max())
            report.add("rom-energy-decay", up, 0.0, 0.0, max(up, 0.0))

    if source_free:
        en = system.scalar_norm(snapshots.Yu) ** 2
        en = np.concatenate([[system.scalar_norm(snapshots.beta0) ** 2], en])
        up = float((np.diff(en) - 1e-12 * en[:-1]).max())
        report.add("fom-energy-decay", up, 0.0, 0.0, max(up, 0.0))

    return report
