"""Assembly of the HDG matrices for the heat equation.

Element-local matrices are kept as stacked dense blocks
(:class:`BlockDiagonalMatrix`), matching the structure the local solver
inverts blockwise; couplings between the three spaces are scipy CSR.
Flux unknowns are numbered component-major (see
:class:`hdgpod.basis.DofLayout`), so the divergence coupling splits into
one element-block-diagonal piece per spatial component.

Face terms are integrated with one set of physical quadrature points per
face, generated from the face's canonical vertex order; both adjacent
elements evaluate their bases at those same points, which makes the two
sides of an interior face exactly consistent.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class BlockDiagonalMatrix:
    """Square block-diagonal matrix with uniform dense blocks.

    Parameters
    ----------
    blocks : ndarray, shape (n_blocks, bs, bs)
        Dense diagonal blocks; block b covers global rows/cols
        ``[b*bs, (b+1)*bs)``.
    """

    def __init__(self, blocks):
        blocks = np.ascontiguousarray(blocks, dtype=float)
        if blocks.ndim != 3 or blocks.shape[1] != blocks.shape[2]:
            raise ValueError("blocks must have shape (n_blocks, bs, bs)")
        self.blocks = blocks
        self.n_blocks, self.block_size = blocks.shape[0], blocks.shape[1]

    @property
    def shape(self):
        n = self.n_blocks * self.block_size
        return (n, n)

    def matvec(self, x):
        """Apply to a vector (n,) or to columns of a matrix (n, m)."""
        x = np.asarray(x)
        nb, bs = self.n_blocks, self.block_size
        if x.ndim == 1:
            return np.einsum("bij,bj->bi", self.blocks, x.reshape(nb, bs)).ravel()
        m = x.shape[1]
        y = np.einsum("bij,bjm->bim", self.blocks, x.reshape(nb, bs, m))
        return y.reshape(nb * bs, m)

    __matmul__ = matvec

    def solve(self, rhs):
        """Blockwise direct solve; accepts vector or matrix right-hand sides."""
        rhs = np.asarray(rhs)
        nb, bs = self.n_blocks, self.block_size
        if rhs.ndim == 1:
            return np.linalg.solve(self.blocks, rhs.reshape(nb, bs, 1)).ravel()
        m = rhs.shape[1]
        out = np.linalg.solve(self.blocks, rhs.reshape(nb, bs, m))
        return out.reshape(nb * bs, m)

    def inv(self):
        """Blockwise inverse; raises with the offending block on failure."""
        try:
            return BlockDiagonalMatrix(np.linalg.inv(self.blocks))
        except np.linalg.LinAlgError:
            for b in range(self.n_blocks):
                if abs(np.linalg.det(self.blocks[b])) == 0.0:
                    raise np.linalg.LinAlgError(f"block {b} is singular") from None
            raise

    def cholesky_check(self, name="matrix"):
        """Assert every block is SPD, reporting the offending block id."""
        try:
            np.linalg.cholesky(self.blocks)
        except np.linalg.LinAlgError:
            for b in range(self.n_blocks):
                try:
                    np.linalg.cholesky(self.blocks[b])
                except np.linalg.LinAlgError:
                    raise np.linalg.LinAlgError(
                        f"{name}: block {b} is not positive definite"
                    ) from None
            raise

    def to_sparse(self):
        nb, bs = self.n_blocks, self.block_size
        mat = sp.bsr_matrix(
            (self.blocks, np.arange(nb), np.arange(nb + 1)),
            shape=(nb * bs, nb * bs),
        )
        return mat.tocsr()

    def diagonal_scaled_identity(self, factor):
        """New block-diagonal matrix ``factor * self`` (cheap copy)."""
        return BlockDiagonalMatrix(self.blocks * factor)


@dataclass
class HdgSystem:
    """All matrices of the spatially discretized problem on one mesh.

    ``A1, A4, M, A7`` are element-block-diagonal; ``A6, A8`` are
    block-diagonal over interior faces; ``A2, A3, A5`` are CSR couplings.
    The extra operators ``grad_blocks``/``div_blocks``/``trace_u_blocks``/
    ``trace_qn_blocks`` are the elementwise Gram matrices of the broken
    gradient, divergence, element-boundary trace, and normal-trace
    seminorms used by the error analysis.
    """

    mesh: object
    basis: object
    layout: object
    tau: np.ndarray
    c0: float
    c1: float
    A1: BlockDiagonalMatrix = field(repr=False, default=None)
    A4: BlockDiagonalMatrix = field(repr=False, default=None)
    M: BlockDiagonalMatrix = field(repr=False, default=None)
    A7: BlockDiagonalMatrix = field(repr=False, default=None)
    A6: BlockDiagonalMatrix = field(repr=False, default=None)
    A8: BlockDiagonalMatrix = field(repr=False, default=None)
    A2: sp.csr_matrix = field(repr=False, default=None)
    A3: sp.csr_matrix = field(repr=False, default=None)
    A5: sp.csr_matrix = field(repr=False, default=None)
    A1_elem: np.ndarray = field(repr=False, default=None)   # (E, ds, ds)
    A2_blocks: np.ndarray = field(repr=False, default=None)  # (E, d, ds, ds)
    grad_blocks: np.ndarray = field(repr=False, default=None)
    div_blocks: np.ndarray = field(repr=False, default=None)
    trace_u_blocks: np.ndarray = field(repr=False, default=None)
    trace_qn_blocks: np.ndarray = field(repr=False, default=None)

    @property
    def A6_sparse(self):
        return self.A6.to_sparse()

    @property
    def A8_sparse(self):
        return self.A8.to_sparse()

    def flux_norm(self, alpha):
        """A7-weighted L2 norm of a flux coefficient vector (or columns)."""
        return _weighted_norm(self.A7, alpha)

    def scalar_norm(self, beta):
        """M-weighted L2 norm of a scalar coefficient vector (or columns)."""
        return _weighted_norm(self.M, beta)

    def trace_norm(self, gamma):
        """A8-weighted norm of a trace coefficient vector (or columns)."""
        return _weighted_norm(self.A8, gamma)


def _weighted_norm(bdm, x):
    y = bdm.matvec(x)
    if np.asarray(x).ndim == 1:
        return float(np.sqrt(np.abs(np.dot(x, y))))
    return np.sqrt(np.abs(np.einsum("nm,nm->m", np.asarray(x), y)))


def _element_geometry(mesh):
    p = mesh.vertices[mesh.elements]          # (E, d+1, d)
    jac = np.swapaxes(p[:, 1:, :] - p[:, :1, :], 1, 2)  # columns are edges
    det = np.abs(np.linalg.det(jac))
    inv = np.linalg.inv(jac)
    return p, jac, det, inv


def _as_coefficient(c, points):
    """Evaluate coefficient at points (..., d); scalar or callable."""
    if callable(c):
        vals = np.asarray(c(points), dtype=float)
        if vals.shape != points.shape[:-1]:
            vals = np.broadcast_to(vals, points.shape[:-1]).copy()
        return vals
    return np.full(points.shape[:-1], float(c))


def assemble_hdg(mesh, basis, layout, c, tau):
    """Assemble the nine HDG matrices plus the seminorm operators.

    Parameters
    ----------
    c : float or callable
        Reciprocal diffusivity; must be strictly positive.
    tau : float or array over faces
        Stabilization, constant on each face; must be strictly positive.
    """
    d, ds, df = layout.dim, layout.dim_scalar, layout.dim_face
    E = mesh.n_elements
    tau_faces = np.asarray(
        np.broadcast_to(np.asarray(tau, dtype=float), (mesh.n_faces,))
    ).copy()
    if np.any(tau_faces <= 0):
        raise ValueError("stabilization tau must be positive on every face")

    p, jac, det, inv = _element_geometry(mesh)
    qp, qw = basis.elem_quad_points, basis.elem_quad_weights
    phi = basis.elem_vals                     # (nq, ds)
    gref = basis.elem_grads                   # (nq, ds, d)

    xq = p[:, 0, None, :] + np.einsum("eab,qb->eqa", jac, qp)
    cvals = _as_coefficient(c, xq)            # (E, nq)
    c0, c1 = float(cvals.min()), float(cvals.max())
    if c0 <= 0:
        raise ValueError("coefficient c must be strictly positive")

    base_mass = np.einsum("q,qi,qj->ij", qw, phi, phi)
    M_blocks = det[:, None, None] * base_mass
    A1_elem = np.einsum("eq,q,qi,qj->eij", cvals, qw, phi, phi) * det[:, None, None]

    # physical gradients and the gradient/divergence Gram blocks
    invT = np.swapaxes(inv, 1, 2)
    gphys = np.einsum("ead,qid->eqia", invT, gref)        # (E, nq, ds, d)
    grad_blocks = det[:, None, None] * np.einsum("q,eqia,eqja->eij", qw, gphys, gphys)
    A2_blocks = det[:, None, None, None] * np.einsum("q,qj,eqic->ecij", qw, phi, gphys)
    div_blocks = det[:, None, None] * np.einsum(
        "q,eqic,eqjf->ecifj", qw, gphys, gphys
    ).reshape(E, d * ds, d * ds)

    # face contributions
    A4_blocks = np.zeros((E, ds, ds))
    trace_u_blocks = np.zeros((E, ds, ds))
    trace_qn_blocks = np.zeros((E, d * ds, d * ds))
    fqp, fqw = basis.face_quad_points, basis.face_quad_weights
    psi = basis.face_vals                                  # (nqf, df)
    ref_face_measure = 1.0 if d == 2 else 0.5
    scale_faces = mesh.face_measures / ref_face_measure

    fx = mesh.vertices[mesh.face_vertices]                 # (F, d, d)
    phys = fx[:, 0, None, :] + np.einsum(
        "qa,fad->fqd", fqp, fx[:, 1:, :] - fx[:, :1, :]
    )                                                      # (F, nqf, d)

    interior = mesh.interior_faces
    fi_index = layout.interior_face_index

    a3_rows, a3_cols, a3_vals = [], [], []
    a5_rows, a5_cols, a5_vals = [], [], []

    sides = [(np.arange(mesh.n_faces), mesh.face_left, 1.0)]
    sides.append((interior, mesh.face_right[interior], -1.0))
    for faces, elems, orient in sides:
        for lo in range(0, len(faces), 16384):
            fsl = faces[lo : lo + 16384]
            esl = elems[lo : lo + 16384]
            ref = np.einsum(
                "fab,fqb->fqa", inv[esl], phys[fsl] - p[esl, 0][:, None, :]
            )
            pv = basis.eval_scalar(ref)                    # (fs, nqf, ds)
            w = (scale_faces[fsl])[:, None, None]
            phiphi = w * np.einsum("q,fqi,fqj->fij", fqw, pv, pv)
            nrm = orient * mesh.face_normals[fsl]          # (fs, d)

            tw = tau_faces[fsl][:, None, None]
            np.add.at(A4_blocks, esl, tw * phiphi)
            np.add.at(trace_u_blocks, esl, phiphi)
            nn = np.einsum("fc,fg->fcg", nrm, nrm)
            np.add.at(
                trace_qn_blocks,
                esl,
                np.einsum("fcg,fij->fcigj", nn, phiphi).reshape(
                    len(fsl), d * ds, d * ds
                ),
            )

            is_int = fi_index[fsl] >= 0
            if not np.any(is_int):
                continue
            fs2, es2 = fsl[is_int], esl[is_int]
            bpsi = (scale_faces[fs2])[:, None, None] * np.einsum(
                "q,fqi,qj->fij", fqw, pv[is_int], psi
            )                                              # (fs2, ds, df)
            tdofs = layout.trace_face_dofs[fi_index[fs2]]  # (fs2, df)
            n2 = orient * mesh.face_normals[fs2]

            fluxd = layout.flux_elem_dofs[es2].reshape(-1, d, ds)
            rows = np.broadcast_to(fluxd[:, :, :, None], (len(fs2), d, ds, df))
            cols = np.broadcast_to(tdofs[:, None, None, :], rows.shape)
            vals = n2[:, :, None, None] * bpsi[:, None, :, :]
            a3_rows.append(rows.ravel())
            a3_cols.append(cols.ravel())
            a3_vals.append(vals.ravel())

            srows = np.broadcast_to(
                layout.scalar_elem_dofs[es2][:, :, None], (len(fs2), ds, df)
            )
            scols = np.broadcast_to(tdofs[:, None, :], srows.shape)
            a5_rows.append(srows.ravel())
            a5_cols.append(scols.ravel())
            a5_vals.append((tau_faces[fs2][:, None, None] * bpsi).ravel())

    A3 = sp.coo_matrix(
        (np.concatenate(a3_vals), (np.concatenate(a3_rows), np.concatenate(a3_cols))),
        shape=(layout.N1, layout.N3),
    ).tocsr()
    A5 = sp.coo_matrix(
        (np.concatenate(a5_vals), (np.concatenate(a5_rows), np.concatenate(a5_cols))),
        shape=(layout.N2, layout.N3),
    ).tocsr()

    # A2: element-block-diagonal per component, in global numbering
    rows = np.broadcast_to(
        layout.flux_elem_dofs.reshape(E, d, ds)[:, :, :, None], A2_blocks.shape
    )
    cols = np.broadcast_to(
        layout.scalar_elem_dofs[:, None, None, :], A2_blocks.shape
    )
    A2 = sp.coo_matrix(
        (A2_blocks.ravel(), (rows.ravel(), cols.ravel())),
        shape=(layout.N1, layout.N2),
    ).tocsr()

    base_psi = np.einsum("q,qi,qj->ij", fqw, psi, psi)
    sc_int = scale_faces[interior][:, None, None]
    A8_blocks = 2.0 * sc_int * base_psi
    A6_blocks = tau_faces[interior][:, None, None] * A8_blocks

    A1_flux = np.tile(A1_elem, (d, 1, 1))
    A7_flux = np.tile(M_blocks, (d, 1, 1))

    return HdgSystem(
        mesh=mesh,
        basis=basis,
        layout=layout,
        tau=tau_faces,
        c0=c0,
        c1=c1,
        A1=BlockDiagonalMatrix(A1_flux),
        A4=BlockDiagonalMatrix(A4_blocks),
        M=BlockDiagonalMatrix(M_blocks),
        A7=BlockDiagonalMatrix(A7_flux),
        A6=BlockDiagonalMatrix(A6_blocks),
        A8=BlockDiagonalMatrix(A8_blocks),
        A2=A2,
        A3=A3,
        A5=A5,
        A1_elem=A1_elem,
        A2_blocks=A2_blocks,
        grad_blocks=grad_blocks,
        div_blocks=div_blocks,
        trace_u_blocks=trace_u_blocks,
        trace_qn_blocks=trace_qn_blocks,
    )


_SEMINORM_OPS = {
    "grad": ("grad_blocks", "scalar"),
    "trace": ("trace_u_blocks", "scalar"),
    "div": ("div_blocks", "flux"),
    "normal-trace": ("trace_qn_blocks", "flux"),
}


def seminorm_quadform(system, coeffs, which):
    """Squared broken seminorm of coefficient vectors.

    ``which`` is one of 'grad', 'trace' (scalar variable) or 'div',
    'normal-trace' (flux variable).  ``coeffs`` may be a single vector or a
    matrix of column vectors; returns a float or a per-column array.
    """
    if which not in _SEMINORM_OPS:
        raise ValueError(f"unknown seminorm {which!r}")
    attr, space = _SEMINORM_OPS[which]
    blocks = getattr(system, attr)
    dofs = (
        system.layout.scalar_elem_dofs
        if space == "scalar"
        else system.layout.flux_elem_dofs
    )
    x = np.asarray(coeffs, dtype=float)
    if x.ndim == 1:
        xl = x[dofs]
        return float(np.einsum("eij,ei,ej->", blocks, xl, xl))
    xl = x[dofs]  # (E, bs, m)
    return np.einsum("eij,eim,ejm->m", blocks, xl, xl)


def _project_scalar_data(mesh, basis, layout, func, quad_degree):
    from .basis import simplex_quadrature

    if quad_degree is None:
        quad_degree = 2 * basis.degree + 7
    qp, qw = simplex_quadrature(mesh.dim, quad_degree)
    vals = basis.eval_scalar(qp)                           # (nq, ds)
    p, jac, det, _ = _element_geometry(mesh)
    out = np.empty(layout.N2)
    step = max(1, 2_000_000 // max(1, len(qw)))
    for lo in range(0, mesh.n_elements, step):
        sl = slice(lo, lo + step)
        xq = p[sl, 0, None, :] + np.einsum("eab,qb->eqa", jac[sl], qp)
        fv = np.asarray(func(xq), dtype=float)
        if fv.shape != xq.shape[:-1]:
            fv = np.broadcast_to(fv, xq.shape[:-1])
        be = det[sl, None] * np.einsum("eq,q,qi->ei", fv, qw, vals)
        out[layout.scalar_elem_dofs[sl].ravel()] = be.ravel()
    return out


def assemble_load(mesh, basis, layout, f, quad_degree=None):
    """Load vector [(f, phi_i)] for a source already bound to one time.

    ``f`` maps points of shape (..., dim) to values; pass ``None`` or 0 for
    a zero source.  Quadrature defaults to degree 2k+7 so smooth data is
    integrated well beyond the accuracy of the spatial discretization.
    """
    if f is None or (np.isscalar(f) and f == 0):
        return np.zeros(layout.N2)
    return _project_scalar_data(mesh, basis, layout, f, quad_degree)


def assemble_init(mesh, basis, layout, u0, quad_degree=None):
    """Moment vector [(u0, phi_i)] defining the discrete initial state."""
    if u0 is None or (np.isscalar(u0) and u0 == 0):
        return np.zeros(layout.N2)
    return _project_scalar_data(mesh, basis, layout, u0, quad_degree)
