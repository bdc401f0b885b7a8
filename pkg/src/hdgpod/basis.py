"""Reference-simplex polynomial bases, quadrature rules, and dof layout.

The scalar basis on the reference simplex (and the basis on the reference
face) is modal and orthonormal in L2 of the reference domain: coefficients
come from a Cholesky factorization of the exact monomial Gram matrix,
computed in extended precision so orthonormality holds to machine accuracy
for all supported degrees.  Quadrature uses collapsed (Duffy-type) tensor
Gauss rules, which integrate any polynomial up to the requested degree
exactly and have positive weights.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath
import numpy as np

MAX_DEGREE = 6


def monomial_powers(dim, k):
    """Exponent tuples of all monomials of total degree <= k, graded order."""
    if dim == 1:
        return np.array([[a] for a in range(k + 1)], dtype=np.int64)
    powers = []
    for total in range(k + 1):
        if dim == 2:
            powers.extend((total - b, b) for b in range(total + 1))
        else:
            for a in range(total, -1, -1):
                powers.extend((a, b, total - a - b) for b in range(total - a + 1))
    return np.array(powers, dtype=np.int64)


@lru_cache(maxsize=None)
def _orthonormal_coeffs(dim, k):
    """Coefficient matrix A with basis(x) = A @ monomials(x), orthonormal
    in L2 of the unit simplex.  Computed once per (dim, k) at 60 digits."""
    powers = monomial_powers(dim, k)
    n = len(powers)
    with mpmath.workdps(60):
        gram = mpmath.zeros(n, n)
        for i in range(n):
            for j in range(i + 1):
                a = powers[i] + powers[j]
                num = 1
                for p in a:
                    num *= math.factorial(int(p))
                val = mpmath.mpf(num) / math.factorial(int(a.sum()) + dim)
                gram[i, j] = gram[j, i] = val
        lower = mpmath.cholesky(gram)
        coeffs = mpmath.inverse(lower)
    out = np.array([[float(coeffs[i, j]) for j in range(n)] for i in range(n)])
    return powers, out


def _eval_monomials(powers, points):
    pts = np.asarray(points, dtype=float)
    vals = np.ones(pts.shape[:-1] + (len(powers),))
    for ax in range(powers.shape[1]):
        vals *= pts[..., ax, None] ** powers[:, ax]
    return vals


def _eval_monomial_grads(powers, points):
    pts = np.asarray(points, dtype=float)
    dim = powers.shape[1]
    grads = np.empty(pts.shape[:-1] + (len(powers), dim))
    for ax in range(dim):
        g = np.ones(pts.shape[:-1] + (len(powers),))
        for bx in range(dim):
            p = powers[:, bx] - (1 if bx == ax else 0)
            safe = np.maximum(p, 0)
            g *= pts[..., bx, None] ** safe
        grads[..., ax] = g * powers[:, ax]
    return grads


@lru_cache(maxsize=None)
def simplex_quadrature(dim, degree):
    """Quadrature on the unit simplex exact for polynomials up to ``degree``.

    Returns (points, weights) with points of shape (nq, dim); weights are
    positive and sum to the simplex measure 1/dim!.
    """
    degree = max(degree, 1)
    if dim == 1:
        m = (degree + 2) // 2
        x, w = np.polynomial.legendre.leggauss(m)
        return ((x[:, None] + 1.0) / 2.0, w / 2.0)
    if dim == 2:
        m = (degree + 3) // 2
        x, w = np.polynomial.legendre.leggauss(m)
        u = (x + 1.0) / 2.0
        wu = w / 2.0
        U, V = np.meshgrid(u, u, indexing="ij")
        WU, WV = np.meshgrid(wu, wu, indexing="ij")
        pts = np.column_stack([U.ravel(), (V * (1.0 - U)).ravel()])
        wts = (WU * WV * (1.0 - U)).ravel()
        return pts, wts
    if dim == 3:
        m = (degree + 4) // 2
        x, w = np.polynomial.legendre.leggauss(m)
        u = (x + 1.0) / 2.0
        wu = w / 2.0
        U1, U2, U3 = np.meshgrid(u, u, u, indexing="ij")
        W1, W2, W3 = np.meshgrid(wu, wu, wu, indexing="ij")
        xx = U1
        yy = U2 * (1.0 - U1)
        zz = U3 * (1.0 - U1) * (1.0 - U2)
        wts = (W1 * W2 * W3 * (1.0 - U1) ** 2 * (1.0 - U2)).ravel()
        pts = np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])
        return pts, wts
    raise ValueError(f"unsupported dimension {dim}")


@dataclass
class ReferenceBasis:
    """Degree-k modal bases and quadrature for one element shape.

    ``dim_scalar`` basis functions span P^k on the reference simplex and
    ``dim_face`` span P^k on the reference face; both sets are orthonormal
    on their reference domain.  Quadrature tables are exact for polynomial
    integrands up to degree 2k+1.
    """

    dim: int
    degree: int
    dim_scalar: int
    dim_face: int
    elem_quad_points: np.ndarray = field(repr=False, default=None)
    elem_quad_weights: np.ndarray = field(repr=False, default=None)
    face_quad_points: np.ndarray = field(repr=False, default=None)
    face_quad_weights: np.ndarray = field(repr=False, default=None)
    elem_vals: np.ndarray = field(repr=False, default=None)       # (nq, ds)
    elem_grads: np.ndarray = field(repr=False, default=None)      # (nq, ds, dim)
    face_vals: np.ndarray = field(repr=False, default=None)       # (nqf, df)
    _scalar_powers: np.ndarray = field(repr=False, default=None)
    _scalar_coeffs: np.ndarray = field(repr=False, default=None)
    _face_powers: np.ndarray = field(repr=False, default=None)
    _face_coeffs: np.ndarray = field(repr=False, default=None)

    def eval_scalar(self, points):
        """Scalar basis values at reference points; shape (..., dim_scalar)."""
        return _eval_monomials(self._scalar_powers, points) @ self._scalar_coeffs.T

    def eval_scalar_grad(self, points):
        """Reference gradients; shape (..., dim_scalar, dim)."""
        g = _eval_monomial_grads(self._scalar_powers, points)
        return np.einsum("im,...md->...id", self._scalar_coeffs, g)

    def eval_face(self, points):
        """Face basis values at reference-face points; shape (..., dim_face)."""
        return _eval_monomials(self._face_powers, points) @ self._face_coeffs.T


def build_reference_basis(dim, k):
    """Build the degree-k reference bases and 2k+1-exact quadrature."""
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    if k < 0:
        raise ValueError(f"polynomial degree must be >= 0, got {k}")
    if k > MAX_DEGREE:
        raise ValueError(
            f"polynomial degree {k} exceeds the supported maximum {MAX_DEGREE}"
        )
    sp, sc = _orthonormal_coeffs(dim, k)
    fp, fc = _orthonormal_coeffs(dim - 1, k)
    basis = ReferenceBasis(
        dim=dim,
        degree=k,
        dim_scalar=math.comb(k + dim, dim),
        dim_face=math.comb(k + dim - 1, dim - 1),
        _scalar_powers=sp,
        _scalar_coeffs=sc,
        _face_powers=fp,
        _face_coeffs=fc,
    )
    qp, qw = simplex_quadrature(dim, 2 * k + 1)
    fqp, fqw = simplex_quadrature(dim - 1, 2 * k + 1)
    basis.elem_quad_points, basis.elem_quad_weights = qp, qw
    basis.face_quad_points, basis.face_quad_weights = fqp, fqw
    basis.elem_vals = basis.eval_scalar(qp)
    basis.elem_grads = basis.eval_scalar_grad(qp)
    basis.face_vals = basis.eval_face(fqp)
    return basis


def trace_constant(dim, k):
    """Exact constant of the elementwise trace inequality for P^k."""
    if dim == 2:
        return math.sqrt((k + 1) * (k + 2) / 2.0)
    return math.sqrt((k + 1) * (k + 3) / 3.0)


def single_element_masses(vertices, basis):
    """Mass and full-boundary mass of one simplex in the reference basis.

    Parameters
    ----------
    vertices : ndarray, shape (dim+1, dim)
    basis : ReferenceBasis

    Returns
    -------
    mass : ndarray (ds, ds)
    boundary_mass : ndarray (ds, ds)
    volume : float
    boundary_measure : float
    """
    v = np.asarray(vertices, dtype=float)
    d = basis.dim
    jac = (v[1:] - v[0]).T
    det = abs(np.linalg.det(jac))
    volume = det / math.factorial(d)
    w = basis.elem_quad_weights
    mass = det * np.einsum("q,qi,qj->ij", w, basis.elem_vals, basis.elem_vals)

    inv = np.linalg.inv(jac)
    ref_face_measure = 1.0 if d == 2 else 0.5
    ds = basis.dim_scalar
    bmass = np.zeros((ds, ds))
    bmeasure = 0.0
    for i in range(d + 1):
        fv = v[[j for j in range(d + 1) if j != i]]
        if d == 2:
            measure = np.linalg.norm(fv[1] - fv[0])
            phys = fv[0] + basis.face_quad_points * (fv[1] - fv[0])
        else:
            measure = 0.5 * np.linalg.norm(np.cross(fv[1] - fv[0], fv[2] - fv[0]))
            phys = (
                fv[0]
                + np.outer(basis.face_quad_points[:, 0], fv[1] - fv[0])
                + np.outer(basis.face_quad_points[:, 1], fv[2] - fv[0])
            )
        ref_pts = (phys - v[0]) @ inv.T
        vals = basis.eval_scalar(ref_pts)
        scale = measure / ref_face_measure
        bmass += scale * np.einsum("q,qi,qj->ij", basis.face_quad_weights, vals, vals)
        bmeasure += measure
    return mass, bmass, volume, bmeasure


@dataclass
class DofLayout:
    """Global numbering of the flux, scalar, and trace unknowns.

    Flux dofs are component-major: component c of element e, local mode i
    sits at ``c*(n_elements*ds) + e*ds + i``.  Scalar dofs are contiguous
    per element; trace dofs are contiguous per interior face (boundary
    faces carry no unknowns: the trace space is zero there).
    """

    N1: int
    N2: int
    N3: int
    dim: int
    dim_scalar: int
    dim_face: int
    n_elements: int
    n_interior_faces: int
    scalar_elem_dofs: np.ndarray = field(repr=False, default=None)   # (E, ds)
    flux_elem_dofs: np.ndarray = field(repr=False, default=None)     # (E, d*ds)
    trace_face_dofs: np.ndarray = field(repr=False, default=None)    # (Fi, df)
    interior_face_index: np.ndarray = field(repr=False, default=None)  # (F,)


def build_dof_layout(mesh, basis):
    """Number the unknowns of the three discontinuous spaces on a mesh."""
    if mesh.dim != basis.dim:
        raise ValueError("mesh and basis dimensions differ")
    d, ds, df = basis.dim, basis.dim_scalar, basis.dim_face
    n_elem = mesh.n_elements
    interior = mesh.interior_faces
    n_int = len(interior)

    scalar = np.arange(n_elem * ds, dtype=np.int64).reshape(n_elem, ds)
    flux = np.empty((n_elem, d * ds), dtype=np.int64)
    for c in range(d):
        flux[:, c * ds : (c + 1) * ds] = scalar + c * n_elem * ds
    trace = np.arange(n_int * df, dtype=np.int64).reshape(n_int, df)
    interior_index = np.full(mesh.n_faces, -1, dtype=np.int64)
    interior_index[interior] = np.arange(n_int)

    return DofLayout(
        N1=d * ds * n_elem,
        N2=ds * n_elem,
        N3=df * n_int,
        dim=d,
        dim_scalar=ds,
        dim_face=df,
        n_elements=n_elem,
        n_interior_faces=n_int,
        scalar_elem_dofs=scalar,
        flux_elem_dofs=flux,
        trace_face_dofs=trace,
        interior_face_index=interior_index,
    )
