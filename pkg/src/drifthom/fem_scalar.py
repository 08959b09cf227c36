"""P1 finite elements for the scalar drift problems, the potential form and the radial cell problem.

Drift terms are assembled in the skew form

    (b . grad u, v) - (b . grad v, u)

from a single matrix T with T[i, j] = (b . grad phi_j, phi_i), so that the
drift matrix T - T^T is antisymmetric to the last bit and the discrete
energy identity (grad u, grad u) = (f, u) holds up to the solver tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .closed_form import AnnulusSpec, w_profile
from .fem_core import RULES, Constraint, Geometry, PointLocator, QuadPoints, assemble_matrix, assemble_vector, evaluate_callback
from .mesh import Boundary, Mesh, Subdomain
from .sparse_la import SolveReport, solve_general, solve_spd

# quadrature degree per triangle class
DEFAULT_DEGREE = 2
ANNULUS_DEGREE = 5


@dataclass
class ScalarField:
    mesh: Mesh
    values: np.ndarray
    space: str = "P1"
    report: SolveReport | None = None
    forms: "ScalarForms | None" = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.values) != self.mesh.n_vertices:
            raise ValueError("one value per vertex expected")

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("vertex,x,y,value\n")
            for i, ((x, y), v) in enumerate(zip(self.mesh.vertices.tolist(), self.values.tolist())):
                fh.write(f"{i},{x!r},{y!r},{v!r}\n")


@dataclass
class ScalarForms:
    """Unconstrained matrices plus the constraint used to reduce them."""

    K: sp.csr_matrix
    M: sp.csr_matrix
    T: sp.csr_matrix
    F: np.ndarray
    constraint: Constraint

    @property
    def B(self) -> sp.csr_matrix:
        return (self.T - self.T.T).tocsr()

    def reduced(self):
        """(K, M, B, F) acting on the free unknowns, with Dirichlet lifting folded into F."""
        c = self.constraint
        K = c.reduce_matrix(self.K)
        M = c.reduce_matrix(self.M)
        B = c.reduce_skew(self.T)
        A_full = self.K + self.M + self.B
        return K, M, B, c.reduce_rhs(A_full, self.F)


def _rule_groups(mesh: Mesh):
    annulus = mesh.subdomain == Subdomain.ANNULUS
    groups = []
    for deg, sel in ((DEFAULT_DEGREE, ~annulus), (ANNULUS_DEGREE, annulus)):
        idx = np.flatnonzero(sel)
        if len(idx):
            groups.append((deg, idx))
    return groups


def _boundary_constraint(mesh: Mesh, bc, values=None) -> Constraint:
    n = mesh.n_vertices
    if isinstance(bc, Constraint):
        return bc
    if bc == "dirichlet":
        return Constraint.dirichlet(n, mesh.boundary_vertices, values)
    if bc == "periodic":
        return Constraint.periodic(n, mesh.periodic_pairs)
    if bc == "neumann":
        return Constraint.none(n)
    raise ValueError(f"unknown boundary condition {bc!r}")


def assemble_scalar_forms(mesh: Mesh, c=None, b=None, f=None, bc="dirichlet", lumped: bool = False, dirichlet_values=None) -> ScalarForms:
    """Stiffness, c-weighted mass, drift half-matrix and load on P1.

    Callbacks receive :class:`QuadPoints`; ``c`` and ``f`` return shape (n,),
    ``b`` returns (n, 2). Constants are accepted in place of callbacks.
    """
    geo = Geometry(mesh)
    n = mesh.n_vertices
    tris = mesh.triangles
    G = geo.grad_bary
    area = geo.area
    K_loc = area[:, None, None] * np.einsum("tid,tjd->tij", G, G)
    M_loc = np.zeros((mesh.n_triangles, 3, 3))
    T_loc = np.zeros((mesh.n_triangles, 3, 3))
    F_loc = np.zeros((mesh.n_triangles, 3))
    for deg, idx in _rule_groups(mesh):
        bary, w = RULES[deg]
        nq = len(w)
        pts = geo.quad_points(bary, idx)
        wa = (area[idx, None] * w[None, :])  # (t, q)
        if c is not None:
            cq = evaluate_callback(c, pts).reshape(len(idx), nq)
            M_loc[idx] = np.einsum("tq,qi,qj->tij", wa * cq, bary, bary)
        if b is not None:
            bq = evaluate_callback(b, pts, (2,)).reshape(len(idx), nq, 2)
            bg = np.einsum("tqd,tjd->tqj", bq, G[idx])  # b . grad phi_j at q
            T_loc[idx] = np.einsum("tq,qi,tqj->tij", wa, bary, bg)
        if f is not None:
            fq = evaluate_callback(f, pts).reshape(len(idx), nq)
            F_loc[idx] = np.einsum("tq,qi->ti", wa * fq, bary)
    if lumped:
        M_loc = np.einsum("tij->ti", M_loc)[:, :, None] * np.eye(3)[None]
    K = assemble_matrix(tris, K_loc, n)
    M = assemble_matrix(tris, M_loc, n)
    T = assemble_matrix(tris, T_loc, n)
    F = assemble_vector(tris, F_loc, n)
    return ScalarForms(K, M, T, F, _boundary_constraint(mesh, bc, dirichlet_values))


def _solve(forms: ScalarForms, mesh: Mesh, tol: float, symmetric: bool, drift: bool, direct: bool = False) -> ScalarField:
    K, M, B, F = forms.reduced()
    A = (K + M + B) if drift else (K + M)
    if direct:
        x, report = solve_general(A, F, tol=tol, method="direct")
    elif symmetric:
        x, report = solve_spd(A, F, tol=tol)
    else:
        x, report = solve_general(A, F, tol=tol)
    return ScalarField(mesh, forms.constraint.expand(x), report=report, forms=forms)


def solve_drift(mesh: Mesh, b_eps, f, tol: float = 1e-10, zero_order=None) -> ScalarField:
    """-div grad u + b . grad u + div(b u) [+ zero_order u] = f, u = 0 on the boundary."""
    forms = assemble_scalar_forms(mesh, c=zero_order, b=b_eps, f=f, bc="dirichlet")
    return _solve(forms, mesh, tol, symmetric=False, drift=True)


def solve_potential(mesh: Mesh, V, g, tol: float = 1e-10, lumped: bool = False, bc="dirichlet") -> ScalarField:
    """-div grad v + V v = g with V >= 0 (conjugate gradients)."""
    forms = assemble_scalar_forms(mesh, c=V, f=g, bc=bc, lumped=lumped)
    return _solve(forms, mesh, tol, symmetric=True, drift=False)


def solve_homogenized_scalar(mesh: Mesh, zero_order, b_limit, f, tol: float = 1e-10) -> ScalarField:
    forms = assemble_scalar_forms(mesh, c=zero_order, b=b_limit, f=f, bc="dirichlet")
    if b_limit is None:
        return _solve(forms, mesh, tol, symmetric=True, drift=False)
    return _solve(forms, mesh, tol, symmetric=False, drift=True)


def solve_z_cell(mesh: Mesh, eps: float, annulus: AnnulusSpec, tol: float = 1e-10) -> ScalarField:
    """Radial cell problem on a disk mesh, Neumann on the outer circle.

    Solves -Z'' ... in weak form: (grad Z, grad v) + (alpha^2/r^2 1_annulus Z, v)
    = eps^2 / (pi R^2) (1, v). The potential is evaluated at quadrature points
    of ANNULUS triangles only. Rings graded over many decades of radius
    leave Jacobi-CG at a roundoff floor, so the ring-ordered (narrow band)
    system is factorised directly.
    """
    src = eps * eps / (math.pi * annulus.R**2)
    forms = assemble_scalar_forms(mesh, c=annulus_potential(annulus), f=src, bc="neumann")
    return _solve(forms, mesh, tol, symmetric=True, drift=False, direct=True)


# ---------------------------------------------------------------- oscillating coefficients


def annulus_potential(annulus: AnnulusSpec, eps: float = 1.0):
    """|grad w_eps|^2 = alpha^2 / (eps^2 |y|^2) on ANNULUS triangles, 0 elsewhere (y = template coordinates)."""
    a2 = annulus.alpha**2 / eps**2

    def V(p: QuadPoints):
        r2 = np.einsum("nd,nd->n", p.local, p.local)
        return np.where(p.tag == Subdomain.ANNULUS, a2 / np.where(r2 > 0, r2, 1.0), 0.0)

    return V


def annulus_drift(annulus: AnnulusSpec, eps: float):
    """grad w_eps = alpha y / (eps |y|^2) on ANNULUS triangles, 0 elsewhere."""
    al = annulus.alpha / eps

    def b(p: QuadPoints):
        r2 = np.einsum("nd,nd->n", p.local, p.local)
        on = (p.tag == Subdomain.ANNULUS)[:, None]
        return np.where(on, al * p.local / np.where(r2 > 0, r2, 1.0)[:, None], 0.0)

    return b


def lattice_w_nodal(mesh: Mesh, annulus: AnnulusSpec) -> np.ndarray:
    """w_eps at the vertices of a perforated lattice mesh."""
    lat = mesh.lattice
    vert_tri = np.empty(mesh.n_vertices, dtype=np.int64)
    vert_tri[mesh.triangles.ravel()] = np.repeat(np.arange(mesh.n_triangles), 3)
    local = mesh.to_local(mesh.vertices, vert_tri)
    r = np.hypot(local[:, 0], local[:, 1])
    # snap vertices that sit on the circles to the exact radius
    r = np.where(np.abs(r - annulus.r_eps) < 1e-9 * annulus.r_eps, annulus.r_eps, r)
    r = np.where(np.abs(r - annulus.R) < 1e-9 * annulus.R, annulus.R, r)
    return w_profile(r, annulus)[0]


def cosine_drift(eps: float, amplitude: float = 1.0, axis: int = 0):
    """amplitude cos(2 pi x_axis / eps) e_axis."""
    k = 2 * math.pi / eps

    def b(p: QuadPoints):
        out = np.zeros_like(p.x)
        out[:, axis] = amplitude * np.cos(k * p.x[:, axis])
        return out

    return b


# ---------------------------------------------------------------- norms and evaluation


def l2_error(field: ScalarField, exact, degree: int = 5, region=None) -> float:
    """||u_h - exact||_{L2}, optionally over triangles whose centroid satisfies ``region``."""
    mesh = field.mesh
    geo = Geometry(mesh)
    idx = np.arange(mesh.n_triangles)
    if region is not None:
        idx = idx[region(geo.corners.mean(axis=1))]
    bary, w = RULES[degree]
    x = geo.points(bary, idx)
    uh = np.einsum("qi,ti->tq", bary, field.values[mesh.triangles[idx]])
    ue = exact(x[..., 0], x[..., 1])
    return float(np.sqrt(np.sum(geo.area[idx, None] * w[None] * (uh - ue) ** 2)))


def energy_norm2(field: ScalarField) -> float:
    K = assemble_scalar_forms(field.mesh, bc="neumann").K
    return float(field.values @ (K @ field.values))


def evaluate(field: ScalarField, points: np.ndarray, locator: PointLocator | None = None) -> np.ndarray:
    locator = locator or PointLocator(field.mesh)
    tri, bary = locator.locate(points)
    return np.einsum("ni,ni->n", bary, field.values[field.mesh.triangles[tri]])
