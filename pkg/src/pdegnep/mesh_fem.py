"""Crossed triangulations of the unit square and P1 finite-element operators.

Vertex numbering is fixed: the ``(n+1)**2`` grid nodes come first in
row-major order (``j * (n+1) + i`` is the node at ``(i/n, j/n)``), followed by
the ``n**2`` cell centres (``(n+1)**2 + j * n + i``). Every cell is split by
both diagonals into four counter-clockwise triangles.

Subdomains are the quadrants

    1: (0, 1/2) x (0, 1/2)    2: (1/2, 1) x (0, 1/2)
    3: (0, 1/2) x (1/2, 1)    4: (1/2, 1) x (1/2, 1)

and the boundary segment ``Gamma_i`` is the part of the boundary of the unit
square that touches quadrant ``i``.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import LinearSolveError, SingularSystemError

SUBDOMAINS = (1, 2, 3, 4)
FULL = "full"
ZERO_TRACE = "zero_trace"


def _quadrant(x, y):
    return 1 + (np.asarray(x) > 0.5).astype(int) + 2 * (np.asarray(y) > 0.5).astype(int)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Crossed triangulation of the unit square.

    Attributes
    ----------
    n_segments : int
        Number of cells along each side.
    vertices : ndarray, shape (nv, 2)
    triangles : ndarray, shape (nt, 3)
        Counter-clockwise vertex triples.
    boundary_vertices : ndarray
        Sorted indices of vertices on the boundary.
    boundary_edges : ndarray, shape (4n, 2)
        Vertex pairs of the boundary cell edges.
    triangle_subdomain : ndarray
        Quadrant id of every triangle (by centroid).
    edge_segment : ndarray
        Boundary segment id of every boundary edge (by midpoint).
    vertex_subdomain : ndarray
        Lowest quadrant id among the triangles touching each vertex.
    boundary_segment : dict
        Boundary vertex -> lowest segment id among its boundary edges.
    """

    n_segments: int
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_vertices: np.ndarray
    boundary_edges: np.ndarray
    triangle_subdomain: np.ndarray
    edge_segment: np.ndarray
    vertex_subdomain: np.ndarray
    boundary_segment: dict = field(repr=False)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    @property
    def h(self):
        return 1.0 / self.n_segments

    def signed_areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def interior_vertices(self):
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary_vertices] = False
        return np.flatnonzero(mask)

    def edge_lengths(self):
        p = self.vertices[self.boundary_edges]
        return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)


def build_crossed_mesh(n):
    """Build the crossed mesh with ``n`` segments per side."""
    if int(n) != n or n < 1:
        raise ValueError(f"number of segments must be a positive integer, got {n!r}")
    n = int(n)
    ng = n + 1
    h = 1.0 / n

    jj, ii = np.meshgrid(np.arange(ng), np.arange(ng), indexing="ij")
    grid = np.column_stack([ii.ravel() * h, jj.ravel() * h])
    cj, ci = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    centres = np.column_stack([(ci.ravel() + 0.5) * h, (cj.ravel() + 0.5) * h])
    vertices = np.vstack([grid, centres])

    ci = ci.ravel()
    cj = cj.ravel()
    p00 = cj * ng + ci
    p10 = p00 + 1
    p01 = p00 + ng
    p11 = p01 + 1
    c = ng * ng + cj * n + ci
    triangles = np.stack(
        [
            np.column_stack([p00, p10, c]),
            np.column_stack([p10, p11, c]),
            np.column_stack([p11, p01, c]),
            np.column_stack([p01, p00, c]),
        ],
        axis=1,
    ).reshape(-1, 3)

    centroids = vertices[triangles].mean(axis=1)
    triangle_subdomain = _quadrant(centroids[:, 0], centroids[:, 1])

    vertex_subdomain = np.full(vertices.shape[0], 5, dtype=int)
    np.minimum.at(vertex_subdomain, triangles.ravel(), np.repeat(triangle_subdomain, 3))

    k = np.arange(n)
    bottom = np.column_stack([k, k + 1])
    top = np.column_stack([n * ng + k + 1, n * ng + k])
    left = np.column_stack([(k + 1) * ng, k * ng])
    right = np.column_stack([k * ng + n, (k + 1) * ng + n])
    boundary_edges = np.vstack([bottom, right, top, left])
    mid = vertices[boundary_edges].mean(axis=1)
    edge_segment = _quadrant(mid[:, 0], mid[:, 1])

    boundary_vertices = np.unique(boundary_edges)
    seg = np.full(vertices.shape[0], 5, dtype=int)
    np.minimum.at(seg, boundary_edges.ravel(), np.repeat(edge_segment, 2))
    boundary_segment = {int(v): int(seg[v]) for v in boundary_vertices}

    for a in (vertices, triangles, boundary_vertices, boundary_edges,
              triangle_subdomain, edge_segment, vertex_subdomain):
        a.setflags(write=False)
    return Mesh(
        n_segments=n,
        vertices=vertices,
        triangles=triangles,
        boundary_vertices=boundary_vertices,
        boundary_edges=boundary_edges,
        triangle_subdomain=triangle_subdomain,
        edge_segment=edge_segment,
        vertex_subdomain=vertex_subdomain,
        boundary_segment=boundary_segment,
    )


@dataclass(frozen=True, eq=False)
class FeFunction:
    """Nodal P1 coefficients on a mesh.

    ``space`` is ``"full"`` or ``"zero_trace"``; zero-trace functions vanish at
    every boundary vertex.
    """

    mesh: Mesh
    values: np.ndarray
    space: str = FULL

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.mesh.n_vertices,):
            raise ValueError(
                f"expected {self.mesh.n_vertices} coefficients, got shape {values.shape}"
            )
        if self.space not in (FULL, ZERO_TRACE):
            raise ValueError(f"unknown space tag {self.space!r}")
        if self.space == ZERO_TRACE and np.any(values[self.mesh.boundary_vertices] != 0.0):
            raise ValueError("zero_trace function has nonzero boundary coefficients")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, mesh, c, space=FULL):
        values = np.full(mesh.n_vertices, float(c))
        if space == ZERO_TRACE:
            values[mesh.boundary_vertices] = 0.0
        return cls(mesh, values, space)

    @classmethod
    def interpolate(cls, mesh, func, space=FULL):
        values = np.asarray(func(mesh.vertices[:, 0], mesh.vertices[:, 1]), dtype=float)
        values = np.broadcast_to(values, (mesh.n_vertices,)).copy()
        if space == ZERO_TRACE:
            values[mesh.boundary_vertices] = 0.0
        return cls(mesh, values, space)


def _triangle_gradients(mesh):
    """Barycentric gradients, shape (nt, 3, 2), and areas."""
    p = mesh.vertices[mesh.triangles]
    area = mesh.signed_areas()
    # grad lambda_a = rot90(p_c - p_b) / (2 area)
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    grads = np.stack([-e[..., 1], e[..., 0]], axis=-1) / (2.0 * area[:, None, None])
    return grads, area


def _assemble(n, rows, cols, vals):
    A = sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def assemble_stiffness(mesh):
    """P1 stiffness matrix of ``(grad y, grad z)``."""
    grads, area = _triangle_gradients(mesh)
    local = area[:, None, None] * np.einsum("tak,tbk->tab", grads, grads)
    tri = mesh.triangles
    rows = np.repeat(tri[:, :, None], 3, axis=2)
    cols = np.repeat(tri[:, None, :], 3, axis=1)
    return _assemble(mesh.n_vertices, rows, cols, local)


_LOCAL_MASS = (np.ones((3, 3)) + np.eye(3)) / 12.0


def _triangle_mask(mesh, subdomain):
    if subdomain is None:
        return np.ones(mesh.n_triangles, dtype=bool)
    if subdomain not in SUBDOMAINS:
        raise ValueError(f"unknown subdomain id {subdomain!r}")
    return mesh.triangle_subdomain == subdomain


def _edge_mask(mesh, segment):
    if segment is None:
        return np.ones(len(mesh.boundary_edges), dtype=bool)
    if segment not in SUBDOMAINS:
        raise ValueError(f"unknown boundary segment id {segment!r}")
    return mesh.edge_segment == segment


def assemble_mass(mesh, subdomain=None):
    """Consistent P1 mass matrix over the whole square or one quadrant."""
    mask = _triangle_mask(mesh, subdomain)
    tri = mesh.triangles[mask]
    area = mesh.signed_areas()[mask]
    local = area[:, None, None] * _LOCAL_MASS[None]
    rows = np.repeat(tri[:, :, None], 3, axis=2)
    cols = np.repeat(tri[:, None, :], 3, axis=1)
    return _assemble(mesh.n_vertices, rows, cols, local)


def lumped_mass(mesh, subdomain=None):
    """Vertex-quadrature weights ``m_v = sum |T| / 3`` over the selected triangles."""
    mask = _triangle_mask(mesh, subdomain)
    w = np.zeros(mesh.n_vertices)
    area = mesh.signed_areas()[mask]
    np.add.at(w, mesh.triangles[mask].ravel(), np.repeat(area / 3.0, 3))
    return w


def assemble_boundary_mass(mesh, segment=None):
    """Consistent P1 trace mass matrix over the whole boundary or one Gamma_i."""
    mask = _edge_mask(mesh, segment)
    edges = mesh.boundary_edges[mask]
    length = mesh.edge_lengths()[mask]
    local = length[:, None, None] * ((np.ones((2, 2)) + np.eye(2)) / 6.0)[None]
    rows = np.repeat(edges[:, :, None], 2, axis=2)
    cols = np.repeat(edges[:, None, :], 2, axis=1)
    return _assemble(mesh.n_vertices, rows, cols, local)


def lumped_boundary_mass(mesh, segment=None):
    """Trapezoidal edge weights on boundary vertices (zero elsewhere)."""
    mask = _edge_mask(mesh, segment)
    w = np.zeros(mesh.n_vertices)
    length = mesh.edge_lengths()[mask]
    np.add.at(w, mesh.boundary_edges[mask].ravel(), np.repeat(length / 2.0, 2))
    return w


def is_symmetric(A):
    """Exact (bitwise) symmetry test."""
    return (A != A.T).nnz == 0


def solve_sparse(A, b, constrained=(), rtol=1e-12):
    """Solve ``A x = b`` with homogeneous Dirichlet values on ``constrained``.

    Rows and columns of constrained indices are eliminated; those entries of
    the result are exactly zero. The residual over the free indices is checked
    against ``rtol * max(1, ||b||)``.
    """
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,):
        raise ValueError(f"shape mismatch: A {A.shape}, b {b.shape}")
    free = np.ones(n, dtype=bool)
    free[np.asarray(constrained, dtype=int)] = False
    idx = np.flatnonzero(free)
    x = np.zeros(n)
    if idx.size == 0:
        return x
    Aff = A[idx][:, idx].tocsc()
    bf = b[idx]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", spla.MatrixRankWarning)
            xf = spla.spsolve(Aff, bf)
    except RuntimeError as exc:
        raise SingularSystemError(f"factorization failed: {exc}", size=idx.size) from exc
    if not np.all(np.isfinite(xf)):
        raise SingularSystemError("singular system: non-finite solution", size=idx.size)
    res = np.linalg.norm(Aff @ xf - bf)
    bound = rtol * max(1.0, np.linalg.norm(bf))
    if res > np.sqrt(np.finfo(float).eps) * max(1.0, np.linalg.norm(bf)):
        # a direct solve this far off means a (numerically) singular matrix
        raise SingularSystemError(
            f"numerically singular system: residual {res:.3e}", size=idx.size, residual=res
        )
    if res > bound:
        raise LinearSolveError(
            f"linear residual {res:.3e} exceeds {bound:.3e}", residual=res, bound=bound
        )
    x[idx] = xf
    return x


def nested_dissection(mesh, indices=None, leaf=8):
    """Geometric nested-dissection ordering of ``indices`` (default: all vertices).

    Grid lines of the crossed mesh separate the cells on either side, so the
    vertex set is split recursively along the grid line closest to the
    median of its longer extent; separators are numbered last.
    """
    indices = np.arange(mesh.n_vertices) if indices is None else np.asarray(indices)
    coords = mesh.vertices[indices] * mesh.n_segments
    on_line = np.abs(coords - np.round(coords)) < 1e-9
    order = []
    stack = [(np.arange(indices.size), False)]
    while stack:
        idx, emit = stack.pop()
        if emit or idx.size <= leaf:
            order.append(idx)
            continue
        c = coords[idx]
        ext = c.max(axis=0) - c.min(axis=0)
        ax = int(np.argmax(ext))
        vals = c[:, ax]
        cands = np.unique(np.round(vals[on_line[idx, ax]]))
        cands = cands[(cands > vals.min()) & (cands < vals.max())]
        if cands.size == 0:
            order.append(idx)
            continue
        cut = cands[np.argmin(np.abs(cands - np.median(vals)))]
        sep = np.abs(vals - cut) < 1e-9
        # LIFO: push separator first so it is emitted after both halves
        stack.append((idx[sep], True))
        stack.append((idx[vals > cut + 1e-9], False))
        stack.append((idx[vals < cut - 1e-9], False))
    return indices[np.concatenate(order)]
