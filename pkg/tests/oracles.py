"""Independent reference computations used by the tests.

None of these import the package's solvers; they re-derive the quantities
from scratch so that implementation and oracle cannot share a mistake.
"""
import math

import numpy as np
from scipy.linalg import solve_banded


def z_cell_fd(eps, R, r_eps, n=20001, core_depth=14.0):
    """Finite differences for the radial cell profile on a uniform log-radius grid.

    In t = ln r the equation -(Z'' + Z'/r) + alpha^2/r^2 1_ann Z = S becomes
    -Z_tt + alpha^2 1_ann Z = S e^{2t}. The grid runs from ln(r_eps) - core_depth
    (deep in the core, where Z_t ~ 0) to ln R, with ghost-point Neumann ends.
    The annulus edge is placed on a grid node, where the potential is averaged.

    Returns (t, Z, cell_average over (-1/2, 1/2)^2).
    """
    alpha = 1.0 / math.log(R / r_eps)
    S = eps * eps / (math.pi * R * R)
    t0, t1, tc = math.log(r_eps) - core_depth, math.log(R), math.log(r_eps)
    # node count chosen so that tc falls on a node
    n_ann = max(int(round((n - 1) * (t1 - tc) / (t1 - t0))), 2)
    h = (t1 - tc) / n_ann
    n_core = int(math.ceil((tc - t0) / h))
    t = tc + h * np.arange(-n_core, n_ann + 1)
    N = t.size
    pot = np.where(t > tc, alpha**2, 0.0)
    pot[n_core] = 0.5 * alpha**2
    rhs = S * np.exp(2 * t)
    main = 2.0 / h**2 + pot
    lower = np.full(N, -1.0 / h**2)
    upper = np.full(N, -1.0 / h**2)
    # ghost nodes: Z_{-1} = Z_1 and Z_{N} = Z_{N-2} (zero slope at both ends)
    ab = np.zeros((3, N))
    ab[0, 1:] = upper[:-1]
    ab[1] = main
    ab[2, :-1] = lower[1:]
    ab[0, 1] = -2.0 / h**2
    ab[2, N - 2] = -2.0 / h**2
    Z = solve_banded((1, 1), ab, rhs)
    # cell average: 2 pi int Z r dr = 2 pi int Z e^{2t} dt
    trapezoid = getattr(np, "trapezoid", None) or np.trapz
    disk = 2 * math.pi * trapezoid(Z * np.exp(2 * t), t)
    disk += math.pi * Z[0] * math.exp(2 * t0)  # core below t0, Z ~ constant there
    avg = disk + (1.0 - math.pi * R * R) * Z[-1]
    return t, Z, avg


def annulus_stokes_flow(r_eps):
    """Stokes flow in r_eps < r < 1 with velocity e1 on the inner circle and 0 on the outer.

    Stream function psi = f(r) sin(theta), f = A r^3 + B r ln r + C r + D/r,
    with u = (psi_y, -psi_x) style convention u_r = (1/r) dpsi/dtheta,
    u_theta = -dpsi/dr. Returns (velocity(x, y) -> (n, 2), energy).
    """
    r0 = r_eps
    # conditions: inner u = e1 means u_r = cos th, u_th = -sin th => f(r0) = r0, f'(r0) = 1
    # outer: f(1) = 0, f'(1) = 0
    def row_f(r):
        return [r**3, r * math.log(r), r, 1.0 / r]

    def row_df(r):
        return [3 * r**2, math.log(r) + 1.0, 1.0, -1.0 / r**2]

    M = np.array([row_f(r0), row_df(r0), row_f(1.0), row_df(1.0)])
    coef = np.linalg.solve(M, np.array([r0, 1.0, 0.0, 0.0]))
    A, B, C, D = coef

    def velocity(x, y):
        r = np.hypot(x, y)
        th = np.arctan2(y, x)
        f = A * r**3 + B * r * np.log(r) + C * r + D / r
        df = 3 * A * r**2 + B * (np.log(r) + 1) + C - D / r**2
        ur = f / r * np.cos(th)
        ut = -df * np.sin(th)
        inside = r <= r0
        ux = np.where(inside, 1.0, ur * np.cos(th) - ut * np.sin(th))
        uy = np.where(inside, 0.0, ur * np.sin(th) + ut * np.cos(th))
        return np.stack([ux, uy], axis=-1)

    # energy by 2D quadrature in (r, theta): tensor Gauss in log r, trapezoid in theta
    from numpy.polynomial.legendre import leggauss

    xs, ws = leggauss(200)
    s0, s1 = math.log(r0), 0.0
    s = 0.5 * (s1 - s0) * xs + 0.5 * (s1 + s0)
    ws = 0.5 * (s1 - s0) * ws
    r = np.exp(s)
    f = A * r**3 + B * r * np.log(r) + C * r + D / r
    df = 3 * A * r**2 + B * (np.log(r) + 1) + C - D / r**2
    d2f = 6 * A * r + B / r + 2 * D / r**3
    # |Du|^2 averaged over theta for psi = f sin(theta), in polar components
    # u_r = f cos/r, u_t = -f' sin; grad entries:
    # d u_r/dr = (f'/r - f/r^2) cos ; (1/r) d u_r/dth - u_t/r = (-f/r^2 + f'/r) sin
    # d u_t/dr = -f'' sin ; (1/r) d u_t/dth + u_r/r = (-f'/r + f/r^2) cos
    g = (df / r - f / r**2) ** 2
    dens = math.pi * (g + g + d2f**2 + g)  # theta integrals of cos^2, sin^2 are pi
    energy = float(np.sum(ws * dens * r * r))  # dr = r ds, area element r dr
    return velocity, energy
