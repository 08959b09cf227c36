"""One report row per (scenario, eps): build the mesh, solve, fit and measure."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .closed_form import AnnulusSpec, brinkman_matrix, stokes_gamma_asymptotic, tartar_matrix, z_profile
from .config import ScenarioConfig, ScenarioKind
from .fem_scalar import annulus_drift, assemble_scalar_forms, cosine_drift, l2_error, solve_drift, solve_z_cell
from .fem_stokes import (
    DriftSpec,
    TaylorHood,
    cell_V,
    cell_Wsharp,
    pressure_error,
    solve_brinkman,
    solve_perturbed,
    tile_cell_velocity,
    velocity_errors,
)
from .homog_lab import (
    EffectiveReport,
    brinkman_solver,
    corrector_norm_scalar,
    corrector_norm_stokes,
    energy_identity_residual,
    fit_brinkman_matrix,
    fit_gamma_scalar,
    scalar_hom_solver,
    weak_limit_probe,
)
from .mesh import GradingSpec, Subdomain, disk_cell, periodic_cell, perforated_lattice, structured_square

log = logging.getLogger(__name__)

PI = math.pi


# ---------------------------------------------------------------- sources


def _poly(terms):
    def f(x, y):
        out = np.zeros_like(x)
        for c, i, j in terms:
            out = out + c * x**i * y**j
        return out

    return f


def scalar_source(spec):
    """Callback on QuadPoints for a scalar source preset or {'poly': [[c, i, j], ...]}."""
    if spec in (None, "one"):
        return lambda p: np.ones(len(p))
    if spec == "sinsin":
        return lambda p: np.sin(PI * p.x[:, 0]) * np.sin(PI * p.x[:, 1])
    fn = _poly(spec["poly"])
    return lambda p: fn(p.x[:, 0], p.x[:, 1])


def stokes_source(spec):
    """Callback on QuadPoints returning (n, 2)."""
    if spec in (None, "rotational"):
        # a pure gradient such as (1, 0) is absorbed by the pressure and leaves u = 0
        return lambda p: np.column_stack([-(p.x[:, 1] - 0.5), p.x[:, 0] - 0.5])
    if spec == "channel":
        # not symmetric about the square's centre, so the flow is nonzero at every cell centre
        return lambda p: np.column_stack([np.sin(PI * p.x[:, 1]), np.zeros(len(p))])
    if spec == "unit_x":
        return lambda p: np.column_stack([np.ones(len(p)), np.zeros(len(p))])
    f1, f2 = (_poly(t) for t in spec["poly"])
    return lambda p: np.column_stack([f1(p.x[:, 0], p.x[:, 1]), f2(p.x[:, 0], p.x[:, 1])])


def smooth_stokes_drift(eps: float, amplitude: float = 1.0):
    """v_eps = a cos(2 pi x2 / eps) e1."""
    k = 2 * PI / eps

    def v(p):
        out = np.zeros_like(p.x)
        out[:, 0] = amplitude * np.cos(k * p.x[:, 1])
        return out

    return v


# ---------------------------------------------------------------- manufactured solutions

# u = sin(pi x) sin(pi y) for -Lap u + b.grad u + div(b u) = f with b = (1, 0)


def mms_scalar_u(x, y):
    return np.sin(PI * x) * np.sin(PI * y)


def mms_scalar_f(p):
    x, y = p.x[:, 0], p.x[:, 1]
    return 2 * PI**2 * np.sin(PI * x) * np.sin(PI * y) + 2 * PI * np.cos(PI * x) * np.sin(PI * y)


# velocity = curl of sin^2(pi x) sin^2(pi y), pressure cos(pi x) cos(pi y)


def mms_stokes_u(x, y):
    return np.stack([PI * np.sin(PI * x) ** 2 * np.sin(2 * PI * y), -PI * np.sin(2 * PI * x) * np.sin(PI * y) ** 2], axis=-1)


def mms_stokes_grad(x, y):
    a = PI**2 * np.sin(2 * PI * x) * np.sin(2 * PI * y)
    row1 = np.stack([a, 2 * PI**2 * np.sin(PI * x) ** 2 * np.cos(2 * PI * y)], axis=-1)
    row2 = np.stack([-2 * PI**2 * np.cos(2 * PI * x) * np.sin(PI * y) ** 2, -a], axis=-1)
    return np.stack([row1, row2], axis=-2)


def mms_stokes_p(x, y):
    return np.cos(PI * x) * np.cos(PI * y)


def mms_stokes_f(p):
    x, y = p.x[:, 0], p.x[:, 1]
    f1 = -2 * PI**3 * np.sin(2 * PI * y) * (2 * np.cos(2 * PI * x) - 1) - PI * np.sin(PI * x) * np.cos(PI * y)
    f2 = 2 * PI**3 * np.sin(2 * PI * x) * (2 * np.cos(2 * PI * y) - 1) - PI * np.cos(PI * x) * np.sin(PI * y)
    return np.column_stack([f1, f2])


# ---------------------------------------------------------------- row context


@dataclass
class RowResult:
    report: EffectiveReport
    fields: dict = field(default_factory=dict)  # name -> ScalarField or StokesField, for VTK output


class ScenarioContext:
    """Objects shared by all rows of one scenario (homogenised solvers and their caches)."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.hom = None
        k = cfg.kind
        if k in (ScenarioKind.SCALAR_SMOOTH, ScenarioKind.SCALAR_CONCENTRATED):
            self.hom = scalar_hom_solver(scalar_source(cfg.f), n=cfg.hom_n, tol=cfg.tol)
        elif k == ScenarioKind.STOKES_SMOOTH:
            self.hom = brinkman_solver(stokes_source(cfg.f), 0.0, n=cfg.hom_n, tol=cfg.tol)
        elif k == ScenarioKind.STOKES_CONCENTRATED:
            self.hom = brinkman_solver(stokes_source(cfg.f), 0.25, n=cfg.hom_n, tol=cfg.tol)


def _structured_n(cfg: ScenarioConfig, eps: float) -> int:
    if "n" in cfg.mesh:
        return cfg.mesh["n"]
    return int(round(cfg.mesh.get("per_eps", 16) / eps))


def _base(cfg: ScenarioConfig, eps: float) -> EffectiveReport:
    return EffectiveReport(cfg.name, cfg.kind.value, eps)


def _scalar_smooth(cfg, eps, ctx, tol):
    r = _base(cfg, eps)
    mesh = structured_square(_structured_n(cfg, eps))
    b = cosine_drift(eps, cfg.amplitude)
    f = scalar_source(cfg.f)
    u = solve_drift(mesh, b, f, tol=tol)
    mu = 0.5 * cfg.amplitude**2
    fit = fit_gamma_scalar(u, hom_solver=ctx.hom, interior_margin=cfg.interior_margin, mu=mu)
    u_hom = ctx.hom(fit.parameters["gamma"])
    r.dofs, r.h_min = mesh.n_vertices, mesh.h_min
    r.energy_residual = energy_identity_residual(u)
    r.gamma_eff = fit.parameters["gamma"]
    r.gamma_ratio = r.gamma_eff / mu
    r.corrector_norm = corrector_norm_scalar(u, u_hom, b, interior_margin=cfg.interior_margin)
    r.corrector_baseline = corrector_norm_scalar(u, u_hom, b, interior_margin=cfg.interior_margin, with_corrector=False)
    r.solver_iters = u.report.iterations
    if fit.diverged:
        r.status = "fit_not_unimodal"
    return RowResult(r, {"u_eps": u})


def _scalar_concentrated(cfg, eps, ctx, tol):
    r = _base(cfg, eps)
    an = cfg.annulus(eps)
    mesh = perforated_lattice(pitch=eps, annulus=an, grading=cfg.grading())
    b = annulus_drift(an, eps)
    u = solve_drift(mesh, b, scalar_source(cfg.f), tol=tol)
    fit = fit_gamma_scalar(u, hom_solver=ctx.hom, interior_margin=cfg.interior_margin, mu=cfg.mu)
    u_hom = ctx.hom(fit.parameters["gamma"])
    r.r_eps = an.r_eps
    r.dofs, r.h_min = mesh.n_vertices, mesh.h_min
    r.energy_residual = energy_identity_residual(u)
    r.gamma_eff = fit.parameters["gamma"]
    r.gamma_ratio = r.gamma_eff / cfg.mu
    r.corrector_norm = corrector_norm_scalar(u, u_hom, b, interior_margin=cfg.interior_margin)
    r.corrector_baseline = corrector_norm_scalar(u, u_hom, b, interior_margin=cfg.interior_margin, with_corrector=False)
    r.probe_ratio = weak_limit_probe(eps, an).ratio
    r.solver_iters = u.report.iterations
    if fit.diverged:
        r.status = "fit_not_unimodal"
    return RowResult(r, {"u_eps": u})


def _stokes_smooth(cfg, eps, ctx, tol):
    r = _base(cfg, eps)
    mesh = structured_square(_structured_n(cfg, eps))
    u = solve_perturbed(mesh, DriftSpec.smooth(smooth_stokes_drift(eps, cfg.amplitude)), stokes_source(cfg.f), tol=tol)
    scale = 0.5 * cfg.amplitude**2
    fit = fit_brinkman_matrix(
        u,
        hom_solver=ctx.hom,
        interior_margin=cfg.interior_margin,
        start={"s": 0.0, "t": 0.0, "m22": scale},
        scale=scale,
        extra_e22=True,
        e22_bracket=(0.0, 2.0 * scale),
        curl_const=0.0,
    )
    p = fit.parameters
    r.dofs, r.h_min = 2 * u.space.n + mesh.n_vertices, mesh.h_min
    r.energy_residual = energy_identity_residual(u)
    r.s, r.t = p["s"], p["t"]
    r.m22 = p["s"] + p["m22"]  # total G[1, 1]
    r.solver_iters = u.report.iterations
    if fit.diverged:
        r.status = "fit_not_unimodal"
    return RowResult(r, {"u_eps": u})


def _stokes_concentrated(cfg, eps, ctx, tol):
    r = _base(cfg, eps)
    an = cfg.annulus(eps)
    gamma = cfg.gamma
    mesh = perforated_lattice(pitch=2 * eps, annulus=an, grading=cfg.grading(), half_width=1.0)
    f = stokes_source(cfg.f)
    u = solve_perturbed(mesh, DriftSpec.concentrated(), f, tol=tol)
    fit = fit_brinkman_matrix(u, hom_solver=ctx.hom, interior_margin=cfg.interior_margin, gamma=gamma)
    p = fit.parameters
    r.r_eps = an.r_eps
    r.dofs, r.h_min = 2 * u.space.n + mesh.n_vertices, mesh.h_min
    r.energy_residual = energy_identity_residual(u)
    r.s, r.t = p["s"], p["t"]
    r.gamma_eff = p["s"] / abs(p["t"]) if p["t"] else float("inf")
    r.gamma_ratio = r.gamma_eff / gamma
    r.objective_gamma = fit.objective_fn.at_matrix(brinkman_matrix(gamma))
    r.objective_tartar = fit.objective_fn.at_matrix(tartar_matrix(gamma))
    # corrector: limit solution on the same P2 space plus tiled cell velocities
    u_hom = solve_brinkman(mesh, 0.25, brinkman_matrix(gamma), f, tol=tol, th=u.system.th)
    template = mesh.lattice.template
    v1 = tile_cell_velocity(mesh, cell_V(template, an.r_eps, 1, tol).template_values)
    v2 = tile_cell_velocity(mesh, cell_V(template, an.r_eps, 2, tol).template_values)
    r.corrector_norm = corrector_norm_stokes(u, u_hom, v1, v2, gamma)
    r.corrector_baseline = corrector_norm_stokes(u, u_hom, v1, v2, gamma, with_corrector=False)
    r.solver_iters = u.report.iterations
    if fit.diverged:
        r.status = "fit_not_unimodal"
    return RowResult(r, {"u_eps": u, "u_hom": u_hom})


def z_cell_average(eps: float, annulus: AnnulusSpec, grading: GradingSpec, tol: float = 1e-10):
    """(FEM field, FEM cell average, closed-form cell average) on the unit cell around a disk of radius R.

    Z is extended outside the disk by its value on the circle.
    """
    mesh = disk_cell(annulus.R, grading, inner_circle=annulus.r_eps)
    z = solve_z_cell(mesh, eps, annulus, tol=tol)
    M = assemble_scalar_forms(mesh, c=1.0, bc="neumann").M
    disk_integral = float(np.sum(M @ z.values))
    outer = float(np.mean(z.values[mesh.boundary_vertices]))
    R = annulus.R
    fem = disk_integral + (1.0 - PI * R * R) * outer
    exact = z_profile(eps, annulus).cell_average()
    return z, fem, exact


def _cell_z(cfg, eps, ctx, tol):
    r = _base(cfg, eps)
    an = cfg.annulus(eps)
    z, fem, exact = z_cell_average(eps, an, cfg.grading(), tol)
    r.r_eps = an.r_eps
    r.dofs, r.h_min = z.mesh.n_vertices, z.mesh.h_min
    r.energy_residual = energy_identity_residual(z)
    r.zbar_mu = cfg.mu * fem
    r.zbar_exact = cfg.mu * exact
    r.solver_iters = z.report.iterations
    return RowResult(r, {"z": z})


def _cell_v(cfg, eps, ctx, tol):
    r = _base(cfg, eps)
    an = AnnulusSpec(1.0, cfg.radius(eps))
    mesh = periodic_cell(an, 1.0, cfg.grading())
    res = cell_V(mesh, an.r_eps, 1, tol)
    r.r_eps = an.r_eps
    r.dofs, r.h_min = 2 * res.field.space.n + res.field.mesh.n_vertices, res.field.mesh.h_min
    r.gamma_cell = res.gamma_cell
    r.gamma_cell_ratio = res.gamma_cell / stokes_gamma_asymptotic(an.r_eps)
    r.solver_iters = res.field.report.iterations
    return RowResult(r, {"V1": res.field})


def _cell_wsharp(cfg, eps, ctx, tol):
    r = _base(cfg, eps)
    an = AnnulusSpec(1.0, cfg.radius(eps))
    mesh = periodic_cell(an, 1.0, cfg.grading())
    res = cell_Wsharp(mesh, eps, an.r_eps, cfg.lam, tol)
    r.r_eps = an.r_eps
    r.dofs, r.h_min = 2 * res.field.space.n + mesh.n_vertices, mesh.h_min
    r.energy_residual = abs(res.energy - res.forcing_pairing) / abs(res.forcing_pairing)
    r.wbar1, r.wbar2 = (float(v) for v in res.Wbar)
    r.m_quadratic = res.M_quadratic
    r.solver_iters = res.field.report.iterations
    return RowResult(r, {"W": res.field})


def _manufactured(cfg, eps, ctx, tol):
    """eps is read as the mesh width 1/n."""
    r = _base(cfg, eps)
    n = int(round(1.0 / eps))
    mesh = structured_square(n)
    if cfg.space == "P1":
        u = solve_drift(mesh, np.array([1.0, 0.0]), mms_scalar_f, tol=tol)
        r.l2_error = l2_error(u, mms_scalar_u)
        r.dofs = mesh.n_vertices
        fields = {"u": u}
    else:
        u = solve_perturbed(mesh, None, mms_stokes_f, tol=tol)
        th = u.system.th
        r.l2_error, r.h1_error = velocity_errors(u, mms_stokes_u, mms_stokes_grad, th)
        r.p_error = pressure_error(u, mms_stokes_p, th)
        r.dofs = 2 * u.space.n + mesh.n_vertices
        fields = {"u": u}
    r.h_min = mesh.h_min
    r.energy_residual = energy_identity_residual(u)
    r.solver_iters = u.report.iterations
    return RowResult(r, fields)


RUNNERS = {
    ScenarioKind.SCALAR_SMOOTH: _scalar_smooth,
    ScenarioKind.SCALAR_CONCENTRATED: _scalar_concentrated,
    ScenarioKind.STOKES_SMOOTH: _stokes_smooth,
    ScenarioKind.STOKES_CONCENTRATED: _stokes_concentrated,
    ScenarioKind.CELL_Z: _cell_z,
    ScenarioKind.CELL_V: _cell_v,
    ScenarioKind.CELL_WSHARP: _cell_wsharp,
    ScenarioKind.MANUFACTURED: _manufactured,
}


def run_row(cfg: ScenarioConfig, eps: float, ctx: ScenarioContext | None = None, tol: float | None = None) -> RowResult:
    """Run one (scenario, eps) row; solver failures are recorded in ``status``."""
    ctx = ctx or ScenarioContext(cfg)
    tol = cfg.tol if tol is None else tol
    start = time.perf_counter()
    try:
        res = RUNNERS[cfg.kind](cfg, eps, ctx, tol)
    except Exception as exc:  # recorded per row; the runner maps it to exit code 2
        log.error("%s eps=%g failed: %s", cfg.name, eps, exc)
        res = RowResult(_base(cfg, eps))
        res.report.status = f"error: {type(exc).__name__}: {exc}".replace(",", ";").replace("\n", " ")
    res.report.wall_seconds = time.perf_counter() - start
    log.info("%s eps=%g done in %.1fs (%s)", cfg.name, eps, res.report.wall_seconds, res.report.status)
    return res
