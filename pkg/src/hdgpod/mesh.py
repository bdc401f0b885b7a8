"""Structured simplicial meshes of the unit square and unit cube.

The 2D builder splits every cell of an n-by-n grid into four triangles
meeting at the cell center (4*n**2 triangles).  The 3D builder splits every
cell of an n-by-n-by-n grid into six tetrahedra around the cell's main
diagonal (6*n**3 tets); splitting every cell identically makes the
triangulation conforming.  Faces are stored once, with a canonical vertex
order and a unit normal oriented outward from the "left" element, so the
two sides of an interior face always see the same geometric chart.
"""

import hashlib
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np


@dataclass
class SimplicialMesh:
    """Conforming simplicial mesh of the unit box.

    Attributes
    ----------
    dim : int
        Spatial dimension, 2 or 3.
    vertices : ndarray, shape (n_vertices, dim)
    elements : ndarray, shape (n_elements, dim+1)
        Vertex indices, consistently oriented (positive signed volume).
    face_vertices : ndarray, shape (n_faces, dim)
        Vertex indices of each face in canonical (sorted) order.
    face_left, face_right : ndarray, shape (n_faces,)
        Adjacent element ids; ``face_right`` is -1 on boundary faces.
    face_normals : ndarray, shape (n_faces, dim)
        Unit normal of each face as seen from the left element (outward).
    face_measures : ndarray, shape (n_faces,)
        Length (2D) or area (3D) of each face.
    element_faces : ndarray, shape (n_elements, dim+1)
        Face ids of each element; local face i is opposite local vertex i.
    element_face_sign : ndarray, shape (n_elements, dim+1)
        +1 where the element is the face's left element, else -1; the
        element's outward normal on that face is sign * face_normals[f].
    volumes : ndarray, shape (n_elements,)
    h_per_element : ndarray, shape (n_elements,)
        Element diameters (max pairwise vertex distance).
    h : float
        Max element diameter.
    """

    dim: int
    vertices: np.ndarray
    elements: np.ndarray
    face_vertices: np.ndarray = field(repr=False, default=None)
    face_left: np.ndarray = field(repr=False, default=None)
    face_right: np.ndarray = field(repr=False, default=None)
    face_normals: np.ndarray = field(repr=False, default=None)
    face_measures: np.ndarray = field(repr=False, default=None)
    element_faces: np.ndarray = field(repr=False, default=None)
    element_face_sign: np.ndarray = field(repr=False, default=None)
    volumes: np.ndarray = field(repr=False, default=None)
    h_per_element: np.ndarray = field(repr=False, default=None)
    h: float = None

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_elements(self):
        return self.elements.shape[0]

    @property
    def n_faces(self):
        return self.face_vertices.shape[0]

    @property
    def interior_faces(self):
        return np.flatnonzero(self.face_right >= 0)

    @property
    def boundary_faces(self):
        return np.flatnonzero(self.face_right < 0)


def build_structured_mesh(dim, n):
    """Build a structured simplicial mesh of the unit box.

    Parameters
    ----------
    dim : int
        2 (triangles) or 3 (tetrahedra).
    n : int
        Subdivisions per axis; n >= 1.

    Returns
    -------
    SimplicialMesh
    """
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if dim == 2:
        vertices, elements = _unit_square_cells(n)
    else:
        vertices, elements = _unit_cube_cells(n)
    mesh = SimplicialMesh(dim=dim, vertices=vertices, elements=elements)
    _finalize(mesh)
    return mesh


def _unit_square_cells(n):
    # grid corners followed by one center vertex per cell
    g = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(g, g, indexing="ij")
    corners = np.column_stack([X.ravel(), Y.ravel()])
    centers_1d = (g[:-1] + g[1:]) / 2.0
    CX, CY = np.meshgrid(centers_1d, centers_1d, indexing="ij")
    centers = np.column_stack([CX.ravel(), CY.ravel()])
    vertices = np.vstack([corners, centers])

    def cid(i, j):
        return i * (n + 1) + j

    n_corner = (n + 1) ** 2
    elements = []
    for i in range(n):
        for j in range(n):
            a = cid(i, j)
            b = cid(i + 1, j)
            c = cid(i + 1, j + 1)
            d = cid(i, j + 1)
            m = n_corner + i * n + j
            # counterclockwise around the center point
            elements.extend([(a, b, m), (b, c, m), (c, d, m), (d, a, m)])
    return vertices, np.asarray(elements, dtype=np.int64)


def _unit_cube_cells(n):
    g = np.linspace(0.0, 1.0, n + 1)
    X, Y, Z = np.meshgrid(g, g, g, indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def gid(i, j, k):
        return (i * (n + 1) + j) * (n + 1) + k

    unit = np.eye(3, dtype=np.int64)
    elements = []
    for i in range(n):
        for j in range(n):
            for k in range(n):
                base = np.array([i, j, k], dtype=np.int64)
                for perm in permutations(range(3)):
                    p = [base.copy()]
                    for axis in perm:
                        p.append(p[-1] + unit[axis])
                    tet = [gid(*q) for q in p]
                    if _perm_sign(perm) < 0:
                        tet[1], tet[2] = tet[2], tet[1]
                    elements.append(tet)
    return vertices, np.asarray(elements, dtype=np.int64)


def _perm_sign(perm):
    sign = 1
    perm = list(perm)
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


def _finalize(mesh):
    """Populate face topology, normals, measures and size data."""
    d = mesh.dim
    verts = mesh.vertices
    elems = mesh.elements
    n_elem = elems.shape[0]

    vol = _signed_volumes(verts, elems, d)
    if np.any(vol <= 0):
        raise ValueError("mesh has non-positively oriented elements")
    mesh.volumes = vol

    # local face i of a simplex is opposite local vertex i
    local = [[j for j in range(d + 1) if j != i] for i in range(d + 1)]
    face_map = {}
    face_vertices = []
    face_left = []
    face_right = []
    element_faces = np.empty((n_elem, d + 1), dtype=np.int64)
    element_face_sign = np.empty((n_elem, d + 1), dtype=np.int64)
    for e in range(n_elem):
        for i in range(d + 1):
            key = tuple(sorted(elems[e, j] for j in local[i]))
            f = face_map.get(key)
            if f is None:
                f = len(face_vertices)
                face_map[key] = f
                face_vertices.append(key)
                face_left.append(e)
                face_right.append(-1)
                element_face_sign[e, i] = 1
            else:
                if face_right[f] != -1:
                    raise ValueError(f"face {key} shared by more than two elements")
                face_right[f] = e
                element_face_sign[e, i] = -1
            element_faces[e, i] = f

    mesh.face_vertices = np.asarray(face_vertices, dtype=np.int64)
    mesh.face_left = np.asarray(face_left, dtype=np.int64)
    mesh.face_right = np.asarray(face_right, dtype=np.int64)
    mesh.element_faces = element_faces
    mesh.element_face_sign = element_face_sign

    x0 = verts[mesh.face_vertices[:, 0]]
    x1 = verts[mesh.face_vertices[:, 1]]
    if d == 2:
        t = x1 - x0
        normals = np.column_stack([t[:, 1], -t[:, 0]])
        measures = np.linalg.norm(t, axis=1)
    else:
        x2 = verts[mesh.face_vertices[:, 2]]
        normals = np.cross(x1 - x0, x2 - x0)
        measures = 0.5 * np.linalg.norm(normals, axis=1)
    normals /= np.linalg.norm(normals, axis=1)[:, None]

    # orient outward from the left element
    centroids = verts[elems].mean(axis=1)
    face_mid = verts[mesh.face_vertices].mean(axis=1)
    outward = face_mid - centroids[mesh.face_left]
    flip = np.einsum("fd,fd->f", normals, outward) < 0
    normals[flip] *= -1.0
    mesh.face_normals = normals
    mesh.face_measures = measures

    corners = verts[elems]  # (E, d+1, d)
    diff = corners[:, :, None, :] - corners[:, None, :, :]
    mesh.h_per_element = np.sqrt((diff**2).sum(-1)).max(axis=(1, 2))
    mesh.h = float(mesh.h_per_element.max())


def _signed_volumes(verts, elems, d):
    p = verts[elems]
    edges = p[:, 1:, :] - p[:, :1, :]
    det = np.linalg.det(edges)
    return det / (2.0 if d == 2 else 6.0)


def classify_faces(mesh):
    """Partition face ids into (interior, boundary).

    A face is a boundary face iff it has no right element, which for these
    meshes coincides with lying on the boundary of the unit box.
    """
    return mesh.interior_faces, mesh.boundary_faces


def mesh_hash(mesh):
    """Stable hex digest of the mesh geometry and topology."""
    hasher = hashlib.sha256()
    hasher.update(np.int64(mesh.dim).tobytes())
    hasher.update(np.ascontiguousarray(mesh.vertices).tobytes())
    hasher.update(np.ascontiguousarray(mesh.elements).tobytes())
    return hasher.hexdigest()


def dump_mesh(mesh, stream):
    """Write the plain-text mesh dump.

    Format: one header line ``dim n_vertices n_elements n_faces``, then one
    line per vertex (coordinates), one line per element (0-based vertex
    indices), and one line per face
    (``vertex-indices left right normal-components``, right = -1 on the
    boundary).
    """
    stream.write(f"{mesh.dim} {mesh.n_vertices} {mesh.n_elements} {mesh.n_faces}\n")
    for v in mesh.vertices:
        stream.write(" ".join(f"{x:.17g}" for x in v) + "\n")
    for e in mesh.elements:
        stream.write(" ".join(str(i) for i in e) + "\n")
    for f in range(mesh.n_faces):
        parts = [str(i) for i in mesh.face_vertices[f]]
        parts += [str(mesh.face_left[f]), str(mesh.face_right[f])]
        parts += [f"{x:.17g}" for x in mesh.face_normals[f]]
        stream.write(" ".join(parts) + "\n")
