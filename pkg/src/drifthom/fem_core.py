"""Element geometry, quadrature, Lagrange bases, constraint maps and point evaluation."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .errors import CallbackDomainError
from .mesh import Mesh

# barycentric points and weights (weights sum to 1)
_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456
RULES = {
    2: (
        np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
        np.full(3, 1 / 3),
    ),
    5: (
        np.array(
            [
                [1 / 3, 1 / 3, 1 / 3],
                [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
                [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2],
            ]
        ),
        np.array([0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3),
    ),
}


@dataclass(frozen=True)
class QuadPoints:
    """Quadrature points handed to coefficient callbacks (flattened over triangles)."""

    x: np.ndarray  # physical coordinates (n, 2)
    local: np.ndarray  # template-cell coordinates (n, 2); equal to x without a lattice
    tag: np.ndarray  # subdomain tag of the owning triangle
    triangle: np.ndarray  # owning triangle index

    def __len__(self):
        return len(self.x)


class Geometry:
    """Affine maps of every triangle."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        p = mesh.vertices[mesh.triangles]
        self.corners = p
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        self.area = 0.5 * det
        g1 = np.column_stack([d2[:, 1], -d2[:, 0]]) / det[:, None]
        g2 = np.column_stack([-d1[:, 1], d1[:, 0]]) / det[:, None]
        # gradients of the barycentric coordinates, shape (nt, 3, 2)
        self.grad_bary = np.stack([-g1 - g2, g1, g2], axis=1)

    def points(self, bary: np.ndarray, triangles: np.ndarray | None = None) -> np.ndarray:
        """Physical points, shape (len(triangles), nq, 2)."""
        c = self.corners if triangles is None else self.corners[triangles]
        return np.einsum("qi,tid->tqd", bary, c)

    def quad_points(self, bary: np.ndarray, triangles: np.ndarray) -> QuadPoints:
        x = self.points(bary, triangles)
        nq = bary.shape[0]
        tri = np.repeat(triangles, nq)
        flat = x.reshape(-1, 2)
        return QuadPoints(flat, self.mesh.to_local(flat, tri), self.mesh.subdomain[tri], tri)


def evaluate_callback(fn, pts: QuadPoints, shape=()) -> np.ndarray:
    """Evaluate a coefficient given as a callback or a constant; validate shape and finiteness."""
    n = len(pts)
    if fn is None:
        return np.zeros((n,) + shape)
    if callable(fn):
        val = np.asarray(fn(pts), dtype=float)
    else:
        val = np.asarray(fn, dtype=float)
    if val.shape == shape:
        val = np.broadcast_to(val, (n,) + shape)
    if val.shape != (n,) + shape:
        raise CallbackDomainError(f"callback returned shape {val.shape}, expected {(n,) + shape}")
    if not np.all(np.isfinite(val)):
        raise CallbackDomainError("callback returned non-finite values")
    return val


# ---------------------------------------------------------------- bases


def p1_values(bary):
    return bary  # (nq, 3)


def p2_values(bary):
    l0, l1, l2 = bary.T
    return np.column_stack([l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), 4 * l1 * l2, 4 * l2 * l0, 4 * l0 * l1])


def p2_gradients(bary, grad_bary):
    """Physical gradients of the six P2 basis functions, shape (nt, nq, 6, 2)."""
    l = bary  # (nq, 3)
    g = grad_bary  # (nt, 3, 2)
    out = np.empty((g.shape[0], l.shape[0], 6, 2))
    for i in range(3):
        out[:, :, i] = (4 * l[:, i] - 1)[None, :, None] * g[:, None, i]
    for k, (i, j) in enumerate(((1, 2), (2, 0), (0, 1))):
        out[:, :, 3 + k] = 4 * (l[:, i, None][None] * g[:, None, j] + l[:, j, None][None] * g[:, None, i])
    return out


class P2Space:
    """Quadratic Lagrange nodes: mesh vertices first, then edge midpoints.

    Local node order per triangle: vertices 0, 1, 2, then the midpoints of
    edges (1,2), (2,0), (0,1).
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        nv = mesh.n_vertices
        self.n = nv + len(mesh.edges)
        self.cell_dofs = np.hstack([mesh.triangles, nv + mesh.triangle_edges])

    @cached_property
    def nodes(self) -> np.ndarray:
        m = self.mesh
        mid = 0.5 * (m.vertices[m.edges[:, 0]] + m.vertices[m.edges[:, 1]])
        return np.vstack([m.vertices, mid])

    def edge_node(self, edge_index):
        return self.mesh.n_vertices + np.asarray(edge_index)

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        m = self.mesh
        bedges = np.flatnonzero(m.edge_triangle_count == 1)
        return np.concatenate([m.boundary_vertices, m.n_vertices + bedges])


# ---------------------------------------------------------------- assembly helpers


def assemble_matrix(cell_dofs: np.ndarray, local: np.ndarray, n: int, n_cols: int | None = None, col_dofs=None) -> sp.csr_matrix:
    col_dofs = cell_dofs if col_dofs is None else col_dofs
    k, l = cell_dofs.shape[1], col_dofs.shape[1]
    rows = np.repeat(cell_dofs, l, axis=1).ravel()
    cols = np.tile(col_dofs, (1, k)).ravel()
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n_cols or n))


def assemble_vector(cell_dofs: np.ndarray, local: np.ndarray, n: int) -> np.ndarray:
    return np.bincount(cell_dofs.ravel(), weights=local.ravel(), minlength=n)


# ---------------------------------------------------------------- constraints


class Constraint:
    """Affine map from reduced unknowns: ``x_full = P @ x_red + g``."""

    def __init__(self, P: sp.csr_matrix, g: np.ndarray | None = None):
        self.P = sp.csr_matrix(P)
        self.g = np.zeros(self.P.shape[0]) if g is None else np.asarray(g, dtype=float)

    @property
    def n_full(self):
        return self.P.shape[0]

    @property
    def n_reduced(self):
        return self.P.shape[1]

    @classmethod
    def none(cls, n):
        return cls(sp.identity(n, format="csr"))

    @classmethod
    def dirichlet(cls, n, fixed, values=None):
        fixed = np.unique(np.asarray(fixed, dtype=np.int64))
        free = np.setdiff1d(np.arange(n), fixed)
        P = sp.csr_matrix((np.ones(len(free)), (free, np.arange(len(free)))), shape=(n, len(free)))
        g = np.zeros(n)
        if values is not None:
            g[fixed] = np.broadcast_to(np.asarray(values, dtype=float), fixed.shape)
        c = cls(P, g)
        c.fixed = fixed
        return c

    @classmethod
    def periodic(cls, n, pairs):
        """``pairs`` rows are (slave, master); masters must not be slaves."""
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        target = np.arange(n)
        target[pairs[:, 0]] = pairs[:, 1]
        keep = np.setdiff1d(np.arange(n), pairs[:, 0])
        col = np.full(n, -1)
        col[keep] = np.arange(len(keep))
        P = sp.csr_matrix((np.ones(n), (np.arange(n), col[target])), shape=(n, len(keep)))
        return cls(P)

    def blocks(self, k: int) -> "Constraint":
        """The same constraint applied to k stacked copies of the unknowns."""
        return Constraint(sp.block_diag([self.P] * k, format="csr"), np.tile(self.g, k))

    def reduce_matrix(self, A):
        return (self.P.T @ A @ self.P).tocsr()

    def reduce_skew(self, T):
        """Reduced T - T^T, skew to the last bit."""
        Tr = self.reduce_matrix(T)
        return (Tr - Tr.T).tocsr()

    def reduce_rhs(self, A, F):
        return self.P.T @ (F - A @ self.g)

    def expand(self, x):
        return self.P @ x + self.g


# ---------------------------------------------------------------- point location


class PointLocator:
    """Find the triangle containing each query point and its barycentric coordinates."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.geo = Geometry(mesh)
        if mesh.structured is None:
            self.tree = cKDTree(self.geo.corners.mean(axis=1))

    def bary(self, tri, pts):
        g = self.geo.grad_bary[tri]
        x0 = self.geo.corners[tri, 0]
        l12 = np.einsum("nid,nd->ni", g[:, 1:], pts - x0)
        return np.column_stack([1 - l12.sum(axis=1), l12])

    def locate(self, pts: np.ndarray, tol: float = 1e-10):
        pts = np.asarray(pts, dtype=float)
        if self.mesh.structured is not None:
            n, lo, hi = self.mesh.structured
            lo, hi = np.asarray(lo), np.asarray(hi)
            h = (hi - lo) / n
            s = (pts - lo) / h
            i = np.clip(np.floor(s[:, 0]).astype(int), 0, n - 1)
            j = np.clip(np.floor(s[:, 1]).astype(int), 0, n - 1)
            upper = (s[:, 1] - j) > (s[:, 0] - i)
            tri = 2 * (j * n + i) + upper
            return tri, self.bary(tri, pts)
        tri = np.full(len(pts), -1)
        bary = np.zeros((len(pts), 3))
        todo = np.arange(len(pts))
        for k in (8, 32, 128, 512):
            k = min(k, self.mesh.n_triangles)
            _, cand = self.tree.query(pts[todo], k=k)
            cand = cand.reshape(len(todo), -1)
            for c in range(cand.shape[1]):
                b = self.bary(cand[:, c], pts[todo])
                inside = np.all(b >= -tol, axis=1) & (tri[todo] < 0)
                tri[todo[inside]] = cand[inside, c]
                bary[todo[inside]] = b[inside]
            todo = todo[tri[todo] < 0]
            if len(todo) == 0 or k == self.mesh.n_triangles:
                break
        if len(todo):
            raise CallbackDomainError(f"{len(todo)} points lie outside the mesh")
        return tri, bary
