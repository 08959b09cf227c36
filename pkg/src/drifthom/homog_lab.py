"""Effective coefficients from computed solutions, corrector norms and weak-limit probes."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .closed_form import AnnulusSpec, J, stokes_corrector_coeffs
from .errors import FitDiverged, SchemaError
from .fem_core import RULES, Geometry, PointLocator, evaluate_callback, p2_values
from .fem_scalar import ScalarField, assemble_scalar_forms, solve_potential
from .fem_stokes import StokesField, TaylorHood, assemble_stokes, gradient_energy
from .mesh import Mesh, Subdomain, structured_square

log = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------- results


@dataclass
class FitResult:
    parameters: dict
    objective: float
    iterations: int
    interior_margin: float
    probes: list = field(default_factory=list, repr=False)  # (parameters, objective) pairs
    diverged: bool = False
    objective_fn: object = field(default=None, repr=False)  # params dict -> objective value


REPORT_COLUMNS = (
    "scenario",
    "kind",
    "eps",
    "r_eps",
    "dofs",
    "h_min",
    "energy_residual",
    "gamma_eff",
    "gamma_ratio",
    "s",
    "t",
    "m22",
    "corrector_norm",
    "corrector_baseline",
    "probe_ratio",
    "objective_gamma",
    "objective_tartar",
    "zbar_mu",
    "zbar_exact",
    "gamma_cell",
    "gamma_cell_ratio",
    "wbar1",
    "wbar2",
    "m_quadratic",
    "l2_error",
    "h1_error",
    "p_error",
    "solver_iters",
    "wall_seconds",
    "status",
)


@dataclass
class EffectiveReport:
    """One row per (scenario, eps)."""

    scenario: str
    kind: str
    eps: float
    r_eps: float = float("nan")
    dofs: int = 0
    h_min: float = float("nan")
    energy_residual: float = float("nan")
    gamma_eff: float = float("nan")
    gamma_ratio: float = float("nan")  # gamma_eff divided by the scenario's mu (or gamma)
    s: float = float("nan")
    t: float = float("nan")
    m22: float = float("nan")
    corrector_norm: float = float("nan")
    corrector_baseline: float = float("nan")
    probe_ratio: float = float("nan")
    objective_gamma: float = float("nan")  # Brinkman fit objective at Gamma(gamma)
    objective_tartar: float = float("nan")  # ... and at the symmetric Tartar matrix
    zbar_mu: float = float("nan")
    zbar_exact: float = float("nan")
    gamma_cell: float = float("nan")
    gamma_cell_ratio: float = float("nan")
    wbar1: float = float("nan")
    wbar2: float = float("nan")
    m_quadratic: float = float("nan")
    l2_error: float = float("nan")
    h1_error: float = float("nan")
    p_error: float = float("nan")
    solver_iters: int = 0
    wall_seconds: float = 0.0
    status: str = "ok"

    def row(self) -> dict:
        return asdict(self)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_report_csv(rows: list[EffectiveReport], path) -> None:
    rows = sorted(rows, key=lambda r: (r.scenario, -r.eps))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in rows:
            d = r.row()
            w.writerow([_fmt(d[c]) for c in REPORT_COLUMNS])


def write_report_json(rows: list[EffectiveReport], path) -> None:
    rows = sorted(rows, key=lambda r: (r.scenario, -r.eps))

    def clean(v):
        return None if isinstance(v, float) and not math.isfinite(v) else v

    with open(path, "w") as fh:
        json.dump([{k: clean(v) for k, v in r.row().items()} for r in rows], fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_report_csv(path) -> list[EffectiveReport]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        unknown = [c for c in reader.fieldnames or () if c not in REPORT_COLUMNS]
        if unknown:
            raise SchemaError(f"{path}: unknown columns {unknown}")
        out = []
        for raw in reader:
            kw = {}
            for k, v in raw.items():
                if k in ("scenario", "kind", "status"):
                    kw[k] = v
                elif k in ("dofs", "solver_iters"):
                    kw[k] = int(v)
                else:
                    kw[k] = float(v)
            out.append(EffectiveReport(**kw))
    return out


# ---------------------------------------------------------------- comparison on an interior region


def interior_mask(points: np.ndarray, margin: float, lower=(0.0, 0.0), upper=(1.0, 1.0)) -> np.ndarray:
    lo = np.asarray(lower) + margin
    hi = np.asarray(upper) - margin
    return np.all((points >= lo) & (points <= hi), axis=-1)


class _InteriorQuadrature:
    """Quadrature points of the triangles of ``mesh`` whose centroid lies in the shrunk square."""

    def __init__(self, mesh: Mesh, margin: float, degree: int = 5):
        geo = Geometry(mesh)
        self.mesh = mesh
        self.tris = np.flatnonzero(interior_mask(geo.corners.mean(axis=1), margin))
        bary, w = RULES[degree]
        self.bary = bary
        self.points = geo.points(bary, self.tris).reshape(-1, 2)
        self.weights = (geo.area[self.tris, None] * w[None, :]).ravel()
        self.geo = geo

    def scalar_values(self, values: np.ndarray) -> np.ndarray:
        loc = values[self.mesh.triangles[self.tris]]
        return np.einsum("qi,ti->tq", self.bary, loc).ravel()


class _Sampler:
    """Evaluate fields of one (homogenised) mesh at fixed physical points, locating them once."""

    def __init__(self, mesh: Mesh, points: np.ndarray):
        self.mesh = mesh
        loc = PointLocator(mesh)
        self.tri, self.bary = loc.locate(points)
        self.grad_bary = loc.geo.grad_bary[self.tri]

    def p1(self, values):
        return np.einsum("ni,ni->n", self.bary, values[self.mesh.triangles[self.tri]])

    def p1_grad(self, values):
        return np.einsum("nid,ni->nd", self.grad_bary, values[self.mesh.triangles[self.tri]])

    def p2(self, field: StokesField):
        N = p2_values(self.bary)
        return np.einsum("na,nai->ni", N, field.velocity[field.space.cell_dofs[self.tri]])


# ---------------------------------------------------------------- homogenised solver factories


def scalar_hom_solver(f, n: int = 256, mesh: Mesh | None = None, tol: float = 1e-10):
    """Callable gamma -> P1 solution of -Lap u + gamma u = f (zero Dirichlet) on a structured mesh."""
    mesh = mesh or structured_square(n)
    cache: dict = {}

    def solve(gamma: float) -> ScalarField:
        key = float(gamma)
        if key not in cache:
            cache[key] = solve_potential(mesh, key, f, tol=tol)
        return cache[key]

    solve.mesh = mesh
    return solve


def brinkman_solver(f, curl_const: float = 0.0, n: int = 32, mesh: Mesh | None = None, tol: float = 1e-10):
    """Callable G (2x2) -> Taylor-Hood solution of -Lap u + curl_const J u + G u + grad p = f."""
    mesh = mesh or structured_square(n)
    th = TaylorHood(mesh)
    load = th.load(f)

    def solve(G) -> StokesField:
        system = assemble_stokes(mesh, zero_order=np.asarray(G, dtype=float), curl_const=curl_const, th=th)
        system.F = load
        return system.solve(tol)

    solve.mesh = mesh
    return solve


# ---------------------------------------------------------------- fits


def golden_section(fn, a: float, b: float, rel_width: float = 1e-3, abs_width: float = 0.0, max_iter: int = 200):
    """Minimise ``fn`` on [a, b]; returns (x, f(x), probes, unimodal)."""
    probes = []

    def ev(x):
        v = float(fn(x))
        probes.append((x, v))
        return v

    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = ev(c), ev(d)
    it = 0
    while it < max_iter and (b - a) > max(rel_width * abs(0.5 * (a + b)), abs_width, 1e-15 * max(abs(a), abs(b), 1.0)):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = ev(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = ev(d)
        it += 1
    x, fx = (c, fc) if fc <= fd else (d, fd)
    best = min(probes, key=lambda p: p[1])
    unimodal = best[1] >= fx - 1e-14 * abs(fx)
    if not unimodal:
        x, fx = best
    return x, fx, probes, unimodal


def fit_gamma_scalar(
    u_eps: ScalarField,
    f=None,
    hom_solver=None,
    interior_margin: float = 0.1,
    mu: float | None = None,
    bracket: tuple | None = None,
    rel_width: float = 1e-3,
    strict: bool = False,
) -> FitResult:
    """gamma minimising ||u_eps - u_hom(gamma)||_{L2} over the interior square.

    ``hom_solver`` maps gamma to a ScalarField; by default a structured
    256x256 solve of -Lap u + gamma u = f. The search bracket defaults to
    [0, 2 mu].
    """
    if not 0 < interior_margin < 0.5:
        raise ValueError("interior_margin must lie in (0, 0.5)")
    hom_solver = hom_solver or scalar_hom_solver(f)
    if bracket is None:
        if mu is None:
            raise ValueError("need mu or an explicit bracket")
        bracket = (0.0, 2.0 * mu)
    quad = _InteriorQuadrature(u_eps.mesh, interior_margin)
    target = quad.scalar_values(u_eps.values)
    sampler = _Sampler(hom_solver.mesh, quad.points) if hasattr(hom_solver, "mesh") else None

    def objective(gamma):
        uh = hom_solver(gamma)
        s = sampler or _Sampler(uh.mesh, quad.points)
        diff = target - s.p1(uh.values)
        return math.sqrt(float(np.sum(quad.weights * diff**2)))

    x, fx, probes, unimodal = golden_section(objective, *bracket, rel_width=rel_width)
    res = FitResult(
        {"gamma": x}, fx, len(probes), interior_margin, [({"gamma": p}, v) for p, v in probes], not unimodal,
        lambda params: objective(params["gamma"]),
    )
    if not unimodal:
        log.warning("gamma fit objective is not unimodal; returning the best probe %.6g", x)
        if strict:
            raise FitDiverged("objective not unimodal", res)
    return res


def _brinkman_G(params: dict) -> np.ndarray:
    G = params.get("s", 0.0) * np.eye(2) + params.get("t", 0.0) * J
    G[1, 1] += params.get("m22", 0.0)
    return G


class StokesObjective:
    """||u_eps - u_B(G)||_{L2(interior)^2} for Brinkman solutions u_B."""

    def __init__(self, u_eps: StokesField, hom_solver, interior_margin: float):
        self.hom_solver = hom_solver
        self.quad = _InteriorQuadrature(u_eps.mesh, interior_margin)
        q = self.quad
        N = p2_values(q.bary)
        loc = u_eps.velocity[u_eps.space.cell_dofs[q.tris]]  # (t, 6, 2)
        self.target = np.einsum("qa,tai->tqi", N, loc).reshape(-1, 2)
        self.sampler = _Sampler(hom_solver.mesh, q.points)
        self.cache: dict = {}

    def __call__(self, params: dict) -> float:
        key = tuple(sorted(params.items()))
        if key not in self.cache:
            uh = self.hom_solver(_brinkman_G(params))
            diff = self.target - self.sampler.p2(uh)
            self.cache[key] = math.sqrt(float(np.sum(self.quad.weights * np.sum(diff**2, axis=1))))
        return self.cache[key]

    def at_matrix(self, G) -> float:
        G = np.asarray(G, dtype=float)
        uh = self.hom_solver(G)
        diff = self.target - self.sampler.p2(uh)
        return math.sqrt(float(np.sum(self.quad.weights * np.sum(diff**2, axis=1))))


def fit_brinkman_matrix(
    u_eps: StokesField,
    f=None,
    hom_solver=None,
    interior_margin: float = 0.1,
    gamma: float | None = None,
    start: dict | None = None,
    scale: float | None = None,
    extra_e22: bool = False,
    e22_bracket: tuple | None = None,
    curl_const: float = 0.25,
    max_sweeps: int = 20,
    strict: bool = False,
) -> FitResult:
    """(s, t) minimising ||u_eps - u_B(sI + tJ)|| by coordinate descent with golden-section line searches.

    Defaults follow the concentrated scenario: start (gamma/(4(gamma^2+1)), 0),
    scale 1/(4 gamma), s in [0, 2 scale], t in [-scale, scale]. With
    ``extra_e22`` a third coordinate m22 (added to G[1, 1]) is searched in
    ``e22_bracket``.
    """
    if not 0 < interior_margin < 0.5:
        raise ValueError("interior_margin must lie in (0, 0.5)")
    hom_solver = hom_solver or brinkman_solver(f, curl_const)
    if scale is None:
        if gamma is None:
            raise ValueError("need gamma or an explicit scale")
        scale = 1.0 / (4.0 * gamma)
    if start is None:
        start = {"s": gamma / (4.0 * (gamma * gamma + 1.0)) if gamma else scale, "t": 0.0}
    params = dict(start)
    if extra_e22:
        params.setdefault("m22", 0.0)
    brackets = {"s": (0.0, 2.0 * scale), "t": (-scale, scale), "m22": e22_bracket or (0.0, 2.0 * scale)}
    objective = StokesObjective(u_eps, hom_solver, interior_margin)
    probes: list = []
    unimodal_all = True
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        step = 0.0
        for name in list(params):
            lo, hi = brackets[name]

            def line(x, name=name):
                trial = dict(params, **{name: x})
                v = objective(trial)
                probes.append((trial, v))
                return v

            x, _, _, unimodal = golden_section(line, lo, hi, abs_width=1e-4 * scale, rel_width=0.0)
            unimodal_all &= unimodal
            step = max(step, abs(x - params[name]))
            params[name] = x
        if step < 1e-3 * scale:
            break
    fx = objective(params)
    best = min(probes, key=lambda p: p[1]) if probes else (params, fx)
    if best[1] < fx:
        params, fx = dict(best[0]), best[1]
    res = FitResult(params, fx, sweeps, interior_margin, probes, not unimodal_all, objective)
    if not unimodal_all:
        log.warning("Brinkman fit met a non-unimodal line search; best probe returned")
        if strict:
            raise FitDiverged("line search not unimodal", res)
    return res


# ---------------------------------------------------------------- corrector norms


def corrector_norm_scalar(
    u_eps: ScalarField,
    u_hom: ScalarField,
    grad_w,
    p: float = 1.5,
    interior_margin: float = 0.1,
    with_corrector: bool = True,
) -> float:
    """||grad u_eps - grad u_hom - grad w_eps u_hom||_{L^p(interior)}.

    ``grad_w`` is a callback on :class:`QuadPoints` of the u_eps mesh
    returning grad w_eps (n, 2); the limit gradient grad w is zero.
    """
    if not 1.0 <= p < 2.0:
        raise ValueError("p must lie in [1, 2)")
    mesh = u_eps.mesh
    geo = Geometry(mesh)
    tris = np.flatnonzero(interior_mask(geo.corners.mean(axis=1), interior_margin))
    total = 0.0
    for deg in (2, 5):
        sel = tris[(mesh.subdomain[tris] == Subdomain.ANNULUS) == (deg == 5)]
        if len(sel) == 0:
            continue
        bary, w = RULES[deg]
        pts = geo.quad_points(bary, sel)
        grad_eps = np.einsum("tid,ti->td", geo.grad_bary[sel], u_eps.values[mesh.triangles[sel]])
        grad_eps = np.repeat(grad_eps, len(w), axis=0)
        s = _Sampler(u_hom.mesh, pts.x)
        d = grad_eps - s.p1_grad(u_hom.values)
        if with_corrector:
            d = d - evaluate_callback(grad_w, pts, (2,)) * s.p1(u_hom.values)[:, None]
        wts = (geo.area[sel, None] * w[None, :]).ravel()
        total += float(np.sum(wts * np.hypot(d[:, 0], d[:, 1]) ** p))
    return total ** (1.0 / p)


def corrector_norm_stokes(
    u_eps: StokesField,
    u_hom: StokesField,
    v1_eps: np.ndarray,
    v2_eps: np.ndarray,
    gamma: float,
    with_corrector: bool = True,
) -> float:
    """||D(u_eps - u_hom - c1 v_eps^1 - c2 v_eps^2)||_{L2} with (c1, c2) = stokes_corrector_coeffs(u_hom).

    ``u_hom`` must live on the same P2 space as ``u_eps``; ``v*_eps`` are
    nodal P2 values (n, 2) of the tiled cell fields. The products are
    interpolated nodally.
    """
    if u_hom.velocity.shape != u_eps.velocity.shape:
        raise ValueError("u_hom must share the P2 space of u_eps")
    z = u_eps.velocity - u_hom.velocity
    if with_corrector:
        c = stokes_corrector_coeffs(u_hom.velocity, gamma)
        z = z - c[:, :1] * v1_eps - c[:, 1:] * v2_eps
    diff = StokesField(u_eps.mesh, u_eps.space, z, u_eps.pressure)
    return math.sqrt(max(gradient_energy(diff), 0.0))


# ---------------------------------------------------------------- weak-limit probe


@dataclass
class ProbeResult:
    probe: float
    predicted: float
    cell_masses: np.ndarray = field(repr=False)
    cell_mass_exact: float = 0.0
    annulus_mass_fraction: float = 1.0  # share of the mass inside the annuli
    annulus_area_fraction: float = 0.0
    core_half_mass_area_fraction: float = 0.0  # area of the disks holding half the mass

    @property
    def ratio(self) -> float:
        return self.probe / self.predicted


def weak_limit_probe(eps: float, annulus: AnnulusSpec, g=None, domain=((0.0, 0.0), (1.0, 1.0)), n_radial: int = 64, n_angle: int = 256) -> ProbeResult:
    """Integrate |grad w_eps|^2 g over every whole cell of pitch eps and compare with the uniform density.

    In each annulus eps r_eps < rho < eps R the density is alpha^2 / rho^2,
    so in s = ln rho the integrand is alpha^2 g: Gauss-Legendre in s,
    trapezoid (spectral for periodic integrands) in theta.
    """
    (x0, y0), (x1, y1) = domain
    nx = int(round((x1 - x0) / eps))
    ny = int(round((y1 - y0) / eps))
    if abs(nx * eps - (x1 - x0)) > 1e-9 * eps or abs(ny * eps - (y1 - y0)) > 1e-9 * eps:
        raise ValueError("eps must divide the domain sides")
    g = g or (lambda x, y: np.ones_like(x))
    alpha = annulus.alpha
    xs, ws = leggauss(n_radial)
    s0, s1 = math.log(eps * annulus.r_eps), math.log(eps * annulus.R)
    s = 0.5 * (s1 - s0) * xs + 0.5 * (s1 + s0)
    ws = 0.5 * (s1 - s0) * ws
    th = 2 * math.pi * np.arange(n_angle) / n_angle
    rho = np.exp(s)
    dx = (rho[:, None] * np.cos(th)[None, :]).ravel()
    dy = (rho[:, None] * np.sin(th)[None, :]).ravel()
    wq = (ws[:, None] * np.full(n_angle, 2 * math.pi / n_angle)[None, :]).ravel() * alpha**2
    cx = x0 + eps * (np.arange(nx) + 0.5)
    cy = y0 + eps * (np.arange(ny) + 0.5)
    masses = np.empty(nx * ny)
    k = 0
    for yc in cy:
        for xc in cx:
            masses[k] = float(np.sum(wq * g(xc + dx, yc + dy)))
            k += 1
    probe = float(masses.sum())
    # uniform density 2 pi / (eps^2 ln(R/r)) against g, integrated by the same tensor rule per cell
    gx, gw = leggauss(16)
    gx = 0.5 * eps * gx
    gw = 0.5 * eps * gw
    X, Y = np.meshgrid(gx, gx)
    W = np.outer(gw, gw)
    integral = 0.0
    for yc in cy:
        for xc in cx:
            integral += float(np.sum(W * g(xc + X, yc + Y)))
    density = 2 * math.pi / (eps * eps * annulus.log_ratio)
    area = (x1 - x0) * (y1 - y0)
    half_rho = eps * math.sqrt(annulus.R * annulus.r_eps)
    return ProbeResult(
        probe,
        density * integral,
        masses,
        2 * math.pi / annulus.log_ratio,
        1.0,
        nx * ny * math.pi * (eps * annulus.R) ** 2 / area,
        nx * ny * math.pi * half_rho**2 / area,
    )


# ---------------------------------------------------------------- energy identity


def energy_identity_residual(solution, forms=None, f=None) -> float:
    """|a_sym(u, u) + c(u, u) - <f, u>| / |<f, u>| for a solution produced here.

    Drift terms are skew and drop out of a_sym. ``forms`` defaults to the
    forms or system stored on the solution.
    """
    if isinstance(solution, StokesField):
        system = forms or solution.system
        return system.energy_residual(solution)
    forms = forms or solution.forms
    if forms is None:
        forms = assemble_scalar_forms(solution.mesh, f=f, bc="neumann")
    u = solution.values
    fu = float(forms.F @ u)
    gap = float(u @ (forms.K @ u) + u @ (forms.M @ u)) - fu
    return abs(gap) / abs(fu) if fu else abs(gap)
