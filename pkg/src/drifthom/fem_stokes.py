"""Taylor-Hood (P2 velocity, P1 pressure) discretisation of the perturbed Stokes systems.

Unknown layout: velocity stacked component-major ``[u_x (n), u_y (n)]`` over
the P2 nodes, pressure on the mesh vertices. Every system is solved as one
bordered saddle-point matrix

    [ A    D^T  0   C ] [u]   [F]
    [ D    0    m   0 ] [p] = [G]
    [ 0    m^T  0   0 ] [l]   [0]
    [ C^T  0    0   0 ] [k]   [0]

where ``m`` pins the pressure mean and ``C`` (periodic cells only) pins the
velocity mean. Drift terms enter ``A`` as ``T - T^T`` so the discrete
energy identity is exact up to the linear solver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .closed_form import J as J_MATRIX
from .errors import FluxError
from .fem_core import RULES, Constraint, Geometry, P2Space, PointLocator, assemble_matrix, assemble_vector, evaluate_callback, p2_gradients, p2_values
from .mesh import Mesh, Subdomain, submesh
from .sparse_la import SolveReport, solve_general, solve_saddle

DEGREE = 5
# bordered systems with more unknowns than this go to preconditioned GMRES
DIRECT_LIMIT = 5000


class DriftKind(str, Enum):
    SMOOTH = "SMOOTH"
    CONCENTRATED = "CONCENTRATED"


@dataclass(frozen=True)
class DriftSpec:
    """The term curl(v) J u of the perturbed equation.

    SMOOTH: ``v`` is a callback on :class:`QuadPoints` returning (n, 2); the
    term is assembled without derivatives of v as (Du)^T v . phi - (v x u) : D phi.
    CONCENTRATED: curl(v) is the indicator of the disk cores divided by the
    core area in template units, so each disk carries mass scale^2.
    """

    kind: DriftKind
    v: object = None
    J = J_MATRIX

    @classmethod
    def smooth(cls, v) -> "DriftSpec":
        return cls(DriftKind.SMOOTH, v)

    @classmethod
    def concentrated(cls) -> "DriftSpec":
        return cls(DriftKind.CONCENTRATED)


def concentrated_weight(mesh: Mesh) -> np.ndarray:
    """Per-triangle value of 1_{cores} / |core| (core area measured on the template)."""
    lat = mesh.lattice
    template = lat.template if lat is not None else mesh
    core = template.area_of(Subdomain.DISK_CORE)
    if core <= 0:
        raise ValueError("mesh has no DISK_CORE triangles")
    return np.where(mesh.subdomain == Subdomain.DISK_CORE, 1.0 / core, 0.0)


# ---------------------------------------------------------------- element matrices


class TaylorHood:
    """P2/P1 element matrices on one mesh (7-point quadrature everywhere)."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.space = P2Space(mesh)
        self.geo = Geometry(mesh)
        self.bary, w = RULES[DEGREE]
        self.N = p2_values(self.bary)  # (nq, 6)
        self.G = p2_gradients(self.bary, self.geo.grad_bary)  # (nt, nq, 6, 2)
        self.wa = self.geo.area[:, None] * w[None, :]  # (nt, nq)
        self.n = self.space.n
        self.nv = mesh.n_vertices

    @cached_property
    def quad_points(self):
        return self.geo.quad_points(self.bary, np.arange(self.mesh.n_triangles))

    def _at_quad(self, fn, shape=()):
        nt, nq = self.wa.shape
        return evaluate_callback(fn, self.quad_points, shape).reshape((nt, nq) + shape)

    def _scalar(self, local):
        return assemble_matrix(self.space.cell_dofs, local, self.n)

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        """Scalar P2 Laplacian; the vector one is its 2x2 block diagonal."""
        return self._scalar(np.einsum("tq,tqad,tqbd->tab", self.wa, self.G, self.G))

    def mass(self, weight=None, per_triangle=None) -> sp.csr_matrix:
        c = np.ones(self.wa.shape) if weight is None else self._at_quad(weight)
        if per_triangle is not None:
            c = c * np.asarray(per_triangle)[:, None]
        return self._scalar(np.einsum("tq,qa,qb->tab", self.wa * c, self.N, self.N))

    @cached_property
    def divergence(self) -> sp.csr_matrix:
        """D[k, (c, a)] = -int psi_k d_c phi_a, shape (nv, 2n)."""
        blocks = []
        for c in range(2):
            loc = -np.einsum("tq,qk,tqa->tka", self.wa, self.bary, self.G[..., c])
            blocks.append(assemble_matrix(self.mesh.triangles, loc, self.nv, self.n, col_dofs=self.space.cell_dofs))
        return sp.hstack(blocks, format="csr")

    def drift_half(self, v) -> sp.csr_matrix:
        """T[(m, a), (k, b)] = int v_k d_m phi_b phi_a; the drift operator is T - T^T."""
        vq = self._at_quad(v, (2,))
        rows = []
        for m in range(2):
            row = []
            for k in range(2):
                loc = np.einsum("tq,tqb,qa->tab", self.wa * vq[..., k], self.G[..., m], self.N)
                row.append(self._scalar(loc))
            rows.append(row)
        return sp.bmat(rows, format="csr")

    def load(self, f) -> np.ndarray:
        fq = self._at_quad(f, (2,))
        parts = [
            assemble_vector(self.space.cell_dofs, np.einsum("tq,qa->ta", self.wa * fq[..., c], self.N), self.n)
            for c in range(2)
        ]
        return np.concatenate(parts)

    def load_from_functional(self, g) -> np.ndarray:
        """int (g : D phi) for a matrix field g (n, 2, 2), i.e. the weak form of -Div(g)."""
        gq = self._at_quad(g, (2, 2))
        parts = [
            assemble_vector(self.space.cell_dofs, np.einsum("tqj,tqaj->ta", self.wa[..., None] * gq[:, :, i, :], self.G), self.n)
            for i in range(2)
        ]
        return np.concatenate(parts)

    @cached_property
    def velocity_integrals(self) -> np.ndarray:
        return assemble_vector(self.space.cell_dofs, np.einsum("tq,qa->ta", self.wa, self.N), self.n)

    @cached_property
    def pressure_integrals(self) -> np.ndarray:
        loc = np.repeat(self.geo.area[:, None] / 3.0, 3, axis=1)
        return assemble_vector(self.mesh.triangles, loc, self.nv)

    def values_at_quad(self, velocity: np.ndarray):
        """(u, Du) at every quadrature point: shapes (nt, nq, 2) and (nt, nq, 2, 2) with Du[i, j] = d_j u_i."""
        loc = velocity[self.space.cell_dofs]  # (nt, 6, 2)
        u = np.einsum("qa,tai->tqi", self.N, loc)
        Du = np.einsum("tqaj,tai->tqij", self.G, loc)
        return u, Du


def p2_periodic_pairs(mesh: Mesh, space: P2Space) -> np.ndarray:
    """(slave, master) pairs of P2 nodes: the vertex pairs plus the matching edge midpoints."""
    pairs = [np.asarray(mesh.periodic_pairs, dtype=np.int64).reshape(-1, 2)]
    if mesh.period is None:
        return pairs[0]
    lo, hi = (np.asarray(b, dtype=float) for b in mesh.period)
    bedges = np.flatnonzero(mesh.edge_triangle_count == 1)
    nodes = space.nodes
    ids = mesh.n_vertices + bedges
    lookup = {tuple(nodes[i]): i for i in ids}
    extra = []
    for i in ids:
        x, y = nodes[i]
        if x == hi[0]:
            partner = (lo[0], y)
        elif y == hi[1]:
            partner = (x, lo[1])
        else:
            continue
        m = lookup.get(partner)
        if m is None:
            raise ValueError(f"no periodic partner for edge midpoint ({x}, {y})")
        extra.append((i, m))
    pairs.append(np.array(extra, dtype=np.int64).reshape(-1, 2))
    return np.vstack(pairs)


# ---------------------------------------------------------------- fields and systems


@dataclass
class StokesField:
    mesh: Mesh
    space: P2Space
    velocity: np.ndarray  # (n_nodes, 2)
    pressure: np.ndarray  # (n_vertices,)
    report: SolveReport | None = None
    div_residual: float = 0.0
    pressure_mean: float = 0.0
    system: "StokesSystem | None" = field(default=None, repr=False)
    parent_triangles: np.ndarray | None = field(default=None, repr=False)

    @property
    def stacked(self) -> np.ndarray:
        return self.velocity.T.ravel()

    def to_csv(self, path) -> None:
        nodes = self.space.nodes
        with open(path, "w") as fh:
            fh.write("node,x,y,u1,u2,p\n")
            for i, ((x, y), (u1, u2)) in enumerate(zip(nodes.tolist(), self.velocity.tolist())):
                p = repr(float(self.pressure[i])) if i < len(self.pressure) else ""
                fh.write(f"{i},{x!r},{y!r},{u1!r},{u2!r},{p}\n")


@dataclass
class StokesSystem:
    """Unreduced operators plus the constraints that reduce them."""

    th: TaylorHood
    A_sym: sp.csr_matrix  # viscous block plus symmetric zero-order part, (2n, 2n)
    T: sp.csr_matrix  # drift half-matrix, the operator is T - T^T
    F: np.ndarray
    velocity_constraint: Constraint
    pressure_constraint: Constraint
    mean_velocity: bool = False

    @property
    def A(self) -> sp.csr_matrix:
        return (self.A_sym + self.T - self.T.T).tocsr()

    def monolithic(self):
        """(matrix, right-hand side, sizes) of the bordered reduced system."""
        vc, pc = self.velocity_constraint, self.pressure_constraint
        A_r = (vc.reduce_matrix(self.A_sym) + vc.reduce_skew(self.T)).tocsr()
        D = self.th.divergence
        D_r = (pc.P.T @ D @ vc.P).tocsr()
        F_r = vc.reduce_rhs(self.A, self.F)
        G_r = -(pc.P.T @ (D @ vc.g))
        m = sp.csr_matrix(pc.P.T @ self.th.pressure_integrals).T  # column (np, 1)
        nu, npr = A_r.shape[0], D_r.shape[0]
        blocks = [
            [A_r, D_r.T, None],
            [D_r, None, m],
            [None, m.T, None],
        ]
        rhs = [F_r, G_r, np.zeros(1)]
        if self.mean_velocity:
            ints = self.th.velocity_integrals
            n = self.th.n
            C_full = sp.csr_matrix(
                (np.concatenate([ints, ints]), (np.arange(2 * n), np.repeat([0, 1], n))), shape=(2 * n, 2)
            )
            C = (vc.P.T @ C_full).tocsr()
            for row in blocks:
                row.append(None)
            blocks[0][3] = C
            blocks.append([C.T, None, None, None])
            rhs.append(np.zeros(2))
        # explicit empty blocks keep bmat from guessing shapes
        blocks[1][1] = sp.csr_matrix((npr, npr))
        return sp.bmat(blocks, format="csr"), np.concatenate(rhs), (nu, npr)

    def solve(self, tol: float = 1e-10) -> StokesField:
        K, rhs, (nu, npr) = self.monolithic()
        if K.shape[0] <= DIRECT_LIMIT:
            x, report = solve_general(K, rhs, tol=tol, method="direct")
        else:
            weights = self.pressure_constraint.P.T @ self.th.pressure_integrals
            x, report = solve_saddle(K, rhs, nu, npr, weights, 2 if self.mean_velocity else 0, tol=tol)
        vc, pc = self.velocity_constraint, self.pressure_constraint
        u = vc.expand(x[:nu])
        p = pc.expand(x[nu : nu + npr])
        n = self.th.n
        velocity = np.column_stack([u[:n], u[n:]])
        div = pc.P.T @ (self.th.divergence @ u)
        lumped = pc.P.T @ self.th.pressure_integrals
        div_res = float(np.sqrt(np.sum(div**2 / lumped)))
        pmean = float(self.th.pressure_integrals @ p)
        return StokesField(self.th.mesh, self.th.space, velocity, p, report, div_res, pmean, self)

    def energy_residual(self, field: StokesField) -> float:
        """|a_sym(u, u) - <f, u>| / |<f, u>|; drift and antisymmetric terms drop out."""
        u = field.stacked
        fu = float(self.F @ u)
        gap = float(u @ (self.A_sym @ u)) - fu
        return abs(gap) / abs(fu) if fu else abs(gap)


def _split_matrix(G):
    G = np.asarray(G, dtype=float).reshape(2, 2)
    S = 0.5 * (G + G.T)
    a = 0.5 * (G[1, 0] - G[0, 1])
    return S, a


def assemble_stokes(
    mesh: Mesh,
    drift: DriftSpec | None = None,
    zero_order=None,
    bc: str = "dirichlet",
    f=None,
    curl_const: float = 0.0,
    dirichlet_values=None,
    th: TaylorHood | None = None,
) -> StokesSystem:
    """Assemble -Lap u + curl(v) J u + curl_const J u + G u + grad p = f, div u = 0.

    ``zero_order`` is a constant 2x2 matrix G: its symmetric part is
    assembled as a mass matrix, its antisymmetric part a J as a J-mass.
    ``bc`` is "dirichlet" (zero, or ``dirichlet_values`` of shape (n, 2) on
    the boundary nodes) or "periodic" (with zero-mean velocity).
    """
    th = th or TaylorHood(mesh)
    n = th.n
    K = th.stiffness
    blocks = [[K, None], [None, K]]
    T = sp.csr_matrix((2 * n, 2 * n))
    jw = curl_const
    if zero_order is not None:
        S, a = _split_matrix(zero_order)
        jw += a
        if np.any(S):
            M = th.mass()
            blocks = [[K + S[0, 0] * M, S[0, 1] * M], [S[1, 0] * M, K + S[1, 1] * M]]
    A_sym = sp.bmat(blocks, format="csr")
    per_tri = np.full(mesh.n_triangles, float(jw))
    if drift is not None:
        if drift.kind == DriftKind.SMOOTH:
            T = T + th.drift_half(drift.v)
        else:
            per_tri = per_tri + concentrated_weight(mesh)
    if np.any(per_tri):
        # J u . phi = -u_y phi_x + u_x phi_y: keep only the upper block, the transpose supplies the rest
        Mw = th.mass(per_triangle=per_tri)
        T = T + sp.bmat([[None, -Mw], [sp.csr_matrix((n, n)), None]], format="csr")
    F = th.load(f) if f is not None else np.zeros(2 * n)
    pc = Constraint.none(th.nv)
    if bc == "dirichlet":
        nodes = th.space.boundary_nodes
        g = None
        if dirichlet_values is not None:
            g = np.asarray(dirichlet_values, dtype=float)[nodes].T.ravel()
        vc = Constraint.dirichlet(2 * n, np.concatenate([nodes, n + nodes]), g)
        mean_velocity = False
    elif bc == "periodic":
        vc = Constraint.periodic(n, p2_periodic_pairs(mesh, th.space)).blocks(2)
        pc = Constraint.periodic(th.nv, mesh.periodic_pairs)
        mean_velocity = True
    else:
        raise ValueError(f"unknown boundary condition {bc!r}")
    return StokesSystem(th, A_sym, T.tocsr(), F, vc, pc, mean_velocity)


# ---------------------------------------------------------------- solvers


def solve_perturbed(mesh: Mesh, drift: DriftSpec | None, f, tol: float = 1e-10) -> StokesField:
    """-Lap u + curl(v) J u + grad p = f, div u = 0, u = 0 on the boundary."""
    return assemble_stokes(mesh, drift=drift, f=f).solve(tol)


def solve_brinkman(mesh: Mesh, curl_const: float, G, f, tol: float = 1e-10, th: TaylorHood | None = None) -> StokesField:
    """-Lap u + curl_const J u + G u + grad p = f with zero Dirichlet data."""
    S, _ = _split_matrix(G)
    if np.linalg.eigvalsh(S).min() < -1e-14 * max(1.0, np.abs(S).max()):
        raise ValueError("symmetric part of G must be positive semidefinite")
    return assemble_stokes(mesh, zero_order=G, curl_const=curl_const, f=f, th=th).solve(tol)


@dataclass
class CellVResult:
    field: StokesField
    gamma_cell: float
    l2_squared: float  # ||V||^2 over the whole cell, core included
    template_values: np.ndarray | None  # (nt_parent, 6, 2) local P2 values on the parent mesh


def solve_cell_V(mesh: Mesh, r_eps: float, i: int, tol: float = 1e-10) -> tuple[StokesField, float]:
    """Stokes flow in r_eps < |y| < 1 with V = e_i on the inner circle and 0 on the unit circle.

    ``mesh`` is any cell mesh carrying DISK_CORE and ANNULUS triangles (a
    periodic cell or a disk with an inner circle); only ANNULUS triangles
    are solved on. Returns (field, gamma_cell) with gamma_cell = int |DV|^2.
    """
    res = cell_V(mesh, r_eps, i, tol)
    return res.field, res.gamma_cell


def cell_V(mesh: Mesh, r_eps: float, i: int, tol: float = 1e-10) -> CellVResult:
    if i not in (1, 2):
        raise ValueError("i must be 1 or 2")
    sub, _, tri_map = submesh(mesh, mesh.subdomain == Subdomain.ANNULUS)
    th = TaylorHood(sub)
    nodes = th.space.boundary_nodes
    radius = np.hypot(*th.space.nodes[nodes].T)
    inner = nodes[radius < 0.5 * (r_eps + 1.0)]
    g = np.zeros((th.n, 2))
    g[inner, i - 1] = 1.0
    flux = _boundary_flux(sub, th.space, g)
    if abs(flux) > 1e-10 * 2 * math.pi * r_eps:
        raise FluxError(f"boundary data carries net flux {flux:.3e}")
    system = assemble_stokes(sub, dirichlet_values=g, th=th)
    field = system.solve(tol)
    field.parent_triangles = tri_map
    u = field.stacked
    gamma = float(u @ (system.A_sym @ u))
    uq, _ = th.values_at_quad(field.velocity)
    core = mesh.area_of(Subdomain.DISK_CORE)
    l2 = core + float(np.sum(th.wa * np.sum(uq**2, axis=-1)))
    local = np.zeros((mesh.n_triangles, 6, 2))
    local[mesh.subdomain == Subdomain.DISK_CORE, :, i - 1] = 1.0
    local[tri_map] = field.velocity[th.space.cell_dofs]
    return CellVResult(field, gamma, l2, local)


def _boundary_flux(mesh: Mesh, space: P2Space, g: np.ndarray) -> float:
    """Net outward flux of the P2 boundary data (Simpson on each boundary edge)."""
    total = 0.0
    for t in range(3):
        e = mesh.triangle_edges[:, t]
        on = mesh.edge_triangle_count[e] == 1
        tris = np.flatnonzero(on)
        a = mesh.triangles[tris, (t + 1) % 3]
        b = mesh.triangles[tris, (t + 2) % 3]
        mid = mesh.n_vertices + e[tris]
        d = mesh.vertices[b] - mesh.vertices[a]
        opp = mesh.vertices[mesh.triangles[tris, t]]
        normal = np.column_stack([d[:, 1], -d[:, 0]])  # length-weighted
        flip = np.einsum("nd,nd->n", normal, opp - mesh.vertices[a]) > 0
        normal[flip] *= -1
        gs = (g[a] + 4 * g[mid] + g[b]) / 6.0
        total += float(np.einsum("nd,nd->", gs, normal))
    return total


def tile_cell_velocity(lattice_mesh: Mesh, local_values: np.ndarray) -> np.ndarray:
    """Nodal P2 values on a lattice mesh from per-template-triangle local values (nt_template, 6, 2)."""
    lat = lattice_mesh.lattice
    if lat is None:
        raise ValueError("lattice mesh expected")
    space = P2Space(lattice_mesh)
    out = np.zeros((space.n, 2))
    out[space.cell_dofs] = local_values[lat.template_triangle]
    return out


@dataclass
class WsharpResult:
    field: StokesField
    Wbar: np.ndarray
    M_quadratic: float
    energy: float  # int |DW|^2
    forcing_pairing: float  # -eps avg_{core} (J lambda . W)


def solve_cell_Wsharp(mesh: Mesh, eps: float, r_eps: float, lam, tol: float = 1e-10) -> tuple[StokesField, np.ndarray, float]:
    """Periodic cell problem with forcing eps (1_core/|core| - 1/|Y|) J lambda and zero-mean W."""
    res = cell_Wsharp(mesh, eps, r_eps, lam, tol)
    return res.field, res.Wbar, res.M_quadratic


def cell_Wsharp(mesh: Mesh, eps: float, r_eps: float, lam, tol: float = 1e-10) -> WsharpResult:
    lam = np.asarray(lam, dtype=float)
    jl = J_MATRIX @ lam
    core = mesh.area_of(Subdomain.DISK_CORE)
    cell = float(mesh.areas.sum())
    is_core = mesh.subdomain == Subdomain.DISK_CORE

    def f(p):
        w = np.where(is_core[p.triangle], 1.0 / core, 0.0) - 1.0 / cell
        return -eps * w[:, None] * jl[None, :]

    system = assemble_stokes(mesh, f=f, bc="periodic")
    field = system.solve(tol)
    th = system.th
    uq, _ = th.values_at_quad(field.velocity)
    avg_core = np.einsum("tq,tqi->i", th.wa[is_core], uq[is_core]) / core
    Wbar = eps * avg_core
    M_quadratic = 0.25 * float((J_MATRIX @ Wbar) @ lam)
    u = field.stacked
    energy = float(u @ (system.A_sym @ u))
    pairing = -eps * float(jl @ avg_core)
    return WsharpResult(field, Wbar, M_quadratic, energy, pairing)


def solve_cell_w_smooth(mesh: Mesh, v_field, lam, tol: float = 1e-10) -> tuple[StokesField, np.ndarray]:
    """Periodic analogue of -Lap w + Div(v (x) lambda) + grad q = 0 with zero-mean w.

    ``v_field`` must have zero cell mean. Returns (w, cell average of (Dw)^T v).
    """
    lam = np.asarray(lam, dtype=float)

    def forcing(p):
        v = evaluate_callback(v_field, p, (2,))
        return v[:, :, None] * lam[None, None, :]

    th = TaylorHood(mesh)
    system = assemble_stokes(mesh, bc="periodic", th=th)
    system.F = th.load_from_functional(forcing)
    field = system.solve(tol)
    _, Du = th.values_at_quad(field.velocity)
    vq = th._at_quad(v_field, (2,))
    density = np.einsum("tqik,tqi->tqk", Du, vq)
    M_lambda = np.einsum("tq,tqk->k", th.wa, density) / float(mesh.areas.sum())
    return field, M_lambda


# ---------------------------------------------------------------- evaluation and errors


def evaluate_velocity(field: StokesField, points: np.ndarray, locator: PointLocator | None = None) -> np.ndarray:
    locator = locator or PointLocator(field.mesh)
    tri, bary = locator.locate(points)
    N = p2_values(bary)  # (npts, 6)
    return np.einsum("na,nai->ni", N, field.velocity[field.space.cell_dofs[tri]])


def velocity_errors(field: StokesField, exact_u, exact_grad=None, th: TaylorHood | None = None, region=None):
    """(L2 error, H1-seminorm error) of the velocity; exact callbacks take (x, y) arrays."""
    th = th or TaylorHood(field.mesh)
    uq, Du = th.values_at_quad(field.velocity)
    x = th.geo.points(th.bary)
    wa = th.wa
    if region is not None:
        wa = wa * region(th.geo.corners.mean(axis=1))[:, None]
    ue = exact_u(x[..., 0], x[..., 1])
    l2 = math.sqrt(float(np.sum(wa * np.sum((uq - ue) ** 2, axis=-1))))
    if exact_grad is None:
        return l2, None
    ge = exact_grad(x[..., 0], x[..., 1])
    h1 = math.sqrt(float(np.sum(wa * np.sum((Du - ge) ** 2, axis=(-2, -1)))))
    return l2, h1


def pressure_error(field: StokesField, exact_p, th: TaylorHood | None = None) -> float:
    """L2 error of the pressure after removing the mean difference."""
    th = th or TaylorHood(field.mesh)
    x = th.geo.points(th.bary)
    ph = np.einsum("qk,tk->tq", th.bary, field.pressure[field.mesh.triangles])
    diff = ph - exact_p(x[..., 0], x[..., 1])
    diff = diff - np.sum(th.wa * diff) / np.sum(th.wa)
    return math.sqrt(float(np.sum(th.wa * diff**2)))


def gradient_energy(field: StokesField, th: TaylorHood | None = None) -> float:
    th = th or TaylorHood(field.mesh)
    u = field.stacked
    K = th.stiffness
    n = th.n
    return float(u[:n] @ (K @ u[:n]) + u[n:] @ (K @ u[n:]))


def write_stokes_vtk(field: StokesField, path) -> None:
    from .mesh import write_vtk

    nv = field.mesh.n_vertices
    write_vtk(field.mesh, path, point_data={"velocity": field.velocity[:nv], "pressure": field.pressure})

