"""Closed-form objects of the two concentration counter-examples.

Everything here is a pure function of its arguments. Scalar-cell quantities
live on the cell Y = (-1/2, 1/2)^2 with an annulus r_eps < |y| < R, the Stokes
cell on Y = (-1, 1)^2 with the unit disk and a hole of radius r_eps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularSystem

E2 = math.e ** 2

# 90 degree rotation, J @ (x, y) = (-y, x)
J = np.array([[0.0, -1.0], [1.0, 0.0]])
J.setflags(write=False)

_MIN_GAP = 1e-12


@dataclass(frozen=True)
class AnnulusSpec:
    """Concentric circles of radii ``r_eps < R`` centred at the origin."""

    R: float
    r_eps: float

    def __post_init__(self):
        if not (math.isfinite(self.R) and math.isfinite(self.r_eps)):
            raise DomainError(f"non-finite annulus radii R={self.R}, r_eps={self.r_eps}")
        if not 0.0 < self.r_eps < self.R:
            raise DomainError(f"need 0 < r_eps < R, got r_eps={self.r_eps}, R={self.R}")
        if self.R - self.r_eps < _MIN_GAP * self.R:
            raise DomainError(f"degenerate annulus: R - r_eps = {self.R - self.r_eps:.3e}")

    @property
    def log_ratio(self) -> float:
        return math.log(self.R / self.r_eps)

    @property
    def alpha(self) -> float:
        return 1.0 / self.log_ratio


def scalar_radius(mu: float, eps: float, R: float) -> float:
    """Hole radius ``exp(-2 pi / (mu eps^2))`` of the scalar cell."""
    if mu <= 0 or eps <= 0:
        raise DomainError(f"need mu > 0 and eps > 0, got mu={mu}, eps={eps}")
    r = math.exp(-2.0 * math.pi / (mu * eps * eps))
    if r >= R:
        raise DomainError(f"r_eps = {r:.5g} >= R = {R} (mu={mu}, eps={eps})")
    if r == 0.0:
        raise DomainError(f"r_eps underflows for mu={mu}, eps={eps}")
    return r


def stokes_radius(gamma: float, eps: float) -> float:
    """Hole radius ``exp(-4 pi / (gamma eps^2))`` of the Stokes cell."""
    if gamma <= 0 or eps <= 0:
        raise DomainError(f"need gamma > 0 and eps > 0, got gamma={gamma}, eps={eps}")
    r = math.exp(-4.0 * math.pi / (gamma * eps * eps))
    if r >= 1.0:
        raise DomainError(f"r_eps = {r} >= 1")
    if r == 0.0:
        raise DomainError(f"r_eps underflows for gamma={gamma}, eps={eps}")
    return r


def w_profile(r, annulus: AnnulusSpec):
    """Logarithmic cut-off profile and the magnitude of its gradient.

    Returns ``(value, grad)``; both broadcast over array-valued ``r``. On the
    circle r = R the one-sided interior gradient alpha/R is returned.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("w_profile needs r >= 0")
    R, r0 = annulus.R, annulus.r_eps
    alpha = annulus.alpha
    inside = (r > r0) & (r <= R)
    safe = np.where(inside, r, 1.0)
    value = np.where(r <= r0, 0.0, np.where(r >= R, 1.0, np.log(safe / r0) * alpha))
    grad = np.where(inside, alpha / safe, 0.0)
    if value.ndim == 0:
        return float(value), float(grad)
    return value, grad


def cell_dirichlet_energy(annulus: AnnulusSpec) -> float:
    """Integral of |grad W|^2 over the cell, ``2 pi / ln(R / r_eps)``."""
    return 2.0 * math.pi / annulus.log_ratio


@dataclass(frozen=True)
class ZProfile:
    """Radial solution of the scaled cell problem

        -(Z'' + Z'/r) + (alpha^2 / r^2) 1_{annulus} Z = eps^2 / (pi R^2)   on |y| < R,
        Z'(R) = 0,

    stored as ``-k r^2 + c`` in the core and ``a (r/R)^alpha + b (r/r_eps)^-alpha
    + A r^2`` on the annulus. The normalised powers keep every basis function
    of order one, so the transmission system stays well scaled for any r_eps.
    """

    a: float
    b: float
    c: float
    alpha: float
    eps: float
    annulus: AnnulusSpec
    A: float
    k: float

    def value(self, r):
        r = np.asarray(r, dtype=float)
        R, r0 = self.annulus.R, self.annulus.r_eps
        rc = np.clip(r, r0, R)
        outer = self.a * (rc / R) ** self.alpha + self.b * (rc / r0) ** (-self.alpha) + self.A * rc**2
        core = self.c - self.k * r**2
        out = np.where(r <= r0, core, outer)
        return float(out) if out.ndim == 0 else out

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        R, r0 = self.annulus.R, self.annulus.r_eps
        rc = np.clip(r, r0, R)
        al = self.alpha
        outer = (al * self.a * (rc / R) ** al - al * self.b * (rc / r0) ** (-al)) / rc + 2 * self.A * rc
        out = np.where(r <= r0, -2 * self.k * r, np.where(r > R, 0.0, outer))
        return float(out) if out.ndim == 0 else out

    def _outer_value(self, r):
        R, r0 = self.annulus.R, self.annulus.r_eps
        return self.a * (r / R) ** self.alpha + self.b * (r / r0) ** (-self.alpha) + self.A * r * r

    def _outer_slope(self, r):
        R, r0 = self.annulus.R, self.annulus.r_eps
        al = self.alpha
        return (al * self.a * (r / R) ** al - al * self.b * (r / r0) ** (-al)) / r + 2 * self.A * r

    def residuals(self) -> tuple[float, float, float]:
        """(Z'(R), value jump at r_eps, slope jump at r_eps), each relative to the profile scale."""
        R, r0 = self.annulus.R, self.annulus.r_eps
        scale = max(abs(self.c), abs(self.a), abs(self.b), 1e-300)
        slope_scale = scale / r0
        inner_v = self.c - self.k * r0 * r0
        inner_s = -2 * self.k * r0
        return (
            abs(self._outer_slope(R)) * R / scale,
            abs(self._outer_value(r0) - inner_v) / scale,
            abs(self._outer_slope(r0) - inner_s) / slope_scale,
        )

    def integral_over_disk(self) -> float:
        """Integral of Z over |y| < R."""
        R, r0, al = self.annulus.R, self.annulus.r_eps, self.alpha
        core = math.pi * self.c * r0**2 - 0.5 * math.pi * self.k * r0**4
        # int r (r/R)^al dr and int r (r/r0)^-al dr over (r0, R); 2 +- al > 0 since al <= 1/ln(..)
        ia = R**2 * (1.0 - (r0 / R) ** (2 + al)) / (2 + al)
        ib = (R * R * (r0 / R) ** al - r0 * r0) / (2 - al)
        ic = 0.25 * (R**4 - r0**4)
        return core + 2 * math.pi * (self.a * ia + self.b * ib + self.A * ic)

    def cell_average(self, half_width: float = 0.5) -> float:
        """Average over the square cell, Z extended by the constant Z(R) outside the disk."""
        R = self.annulus.R
        area = (2 * half_width) ** 2
        if R > half_width:
            raise DomainError("disk does not fit in the cell")
        outside = (area - math.pi * R * R) * self._outer_value(R)
        return (self.integral_over_disk() + outside) / area


def z_profile(eps: float, annulus: AnnulusSpec, *, particular_shift: float = 4.0) -> ZProfile:
    """Solve the three transmission conditions for the radial cell profile.

    ``particular_shift`` is the constant in the particular coefficient
    ``A = eps^2 / (pi R^2 (alpha^2 - shift))``. Substituting A r^2 into the
    radial operator gives shift = 4; other values are accepted only to
    reproduce alternative derivations.
    """
    if eps <= 0:
        raise DomainError("eps must be positive")
    R, r0 = annulus.R, annulus.r_eps
    al = annulus.alpha
    src = eps * eps / (math.pi * R * R)
    denom = al * al - particular_shift
    if abs(denom) < 1e-14:
        raise SingularSystem("particular solution resonates with the homogeneous one", math.inf)
    A = src / denom
    k = 0.25 * src
    qa = (r0 / R) ** al  # (r0/R)^al, in (0, 1)
    qb = (R / r0) ** (-al)  # equal to qa
    # unknowns (a, b, c); slope conditions multiplied by r
    M = np.array(
        [
            [al, -al * qb, 0.0],  # R Z'(R) = 0
            [qa, 1.0, -1.0],  # Z(r0+) = Z(r0-)
            [al * qa, -al, 0.0],  # r0 Z'(r0+) = r0 Z'(r0-)
        ]
    )
    rhs = np.array([-2 * A * R * R, -k * r0 * r0 - A * r0 * r0, -2 * k * r0 * r0 - 2 * A * r0 * r0])
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularSystem("transmission system is numerically singular", cond)
    a, b, c = np.linalg.solve(M, rhs)
    return ZProfile(float(a), float(b), float(c), al, eps, annulus, A, k)


def zbar_limit(mu: float) -> float:
    """Limit cell average as printed with the closed-form (e^2+1)/(e^2-1) factor: ``4(e^2+1) / (3(e^2-1) mu)``."""
    if mu <= 0:
        raise DomainError("mu must be positive")
    return 4.0 * (E2 + 1.0) / (3.0 * (E2 - 1.0)) / mu


def gamma_scalar(mu: float) -> float:
    """Effective zero-order constant ``3(e^2-1) / (4(e^2+1)) mu``, the reciprocal of zbar_limit."""
    if mu <= 0:
        raise DomainError("mu must be positive")
    return 3.0 * (E2 - 1.0) / (4.0 * (E2 + 1.0)) * mu


def zbar_limit_ode(mu: float) -> float:
    """Limit cell average obtained from the radial ODE with the (alpha^2 - 4) coefficient: ``coth(1) / mu``.

    In the variable s = alpha ln(r/R) the profile solves -Z'' + Z = 0 on
    (-1, 0) with unit outward flux 1/mu at s = 0, so Z = cosh(s+1) / (mu sinh 1),
    and the outer value coth(1)/mu fills the cell as eps -> 0.
    """
    if mu <= 0:
        raise DomainError("mu must be positive")
    return 1.0 / math.tanh(1.0) / mu


def gamma_scalar_ode(mu: float) -> float:
    """``tanh(1) mu``, the reciprocal of :func:`zbar_limit_ode`."""
    if mu <= 0:
        raise DomainError("mu must be positive")
    return math.tanh(1.0) * mu


def brinkman_matrix(gamma: float) -> np.ndarray:
    """``(gamma I - J) / (4 (gamma^2 + 1))``."""
    if gamma <= 0:
        raise DomainError("gamma must be positive")
    return (gamma * np.eye(2) - J) / (4.0 * (gamma * gamma + 1.0))


def tartar_matrix(gamma: float) -> np.ndarray:
    """``I / (4 gamma)``."""
    if gamma <= 0:
        raise DomainError("gamma must be positive")
    return np.eye(2) / (4.0 * gamma)


def stokes_gamma_asymptotic(r_eps: float) -> float:
    if not 0.0 < r_eps < 1.0:
        raise DomainError("need 0 < r_eps < 1")
    return 4.0 * math.pi / abs(math.log(r_eps))


def annulus_stokes_energy(r_eps: float) -> float:
    """Exact Dirichlet energy of Stokes flow in r_eps < |y| < 1 with the hole translating at unit speed.

    Equals ``4 pi / (ln(1/r) - (1 - r^2)/(1 + r^2))``; it approaches
    :func:`stokes_gamma_asymptotic` only logarithmically slowly.
    """
    if not 0.0 < r_eps < 1.0:
        raise DomainError("need 0 < r_eps < 1")
    r2 = r_eps * r_eps
    return 4.0 * math.pi / (-math.log(r_eps) - (1.0 - r2) / (1.0 + r2))


def smooth_stokes_M(a: float) -> np.ndarray:
    """Effective matrix ``(a^2/2) e2 (x) e2`` of the drift a cos(2 pi x2 / eps) e1."""
    return np.array([[0.0, 0.0], [0.0, 0.5 * a * a]])


def stokes_corrector_coeffs(u, gamma: float) -> np.ndarray:
    """``-(I + gamma J) u / (gamma^2 + 1)``; ``u`` may have shape (..., 2)."""
    if gamma <= 0:
        raise DomainError("gamma must be positive")
    u = np.asarray(u, dtype=float)
    u1, u2 = u[..., 0], u[..., 1]
    s = 1.0 / (gamma * gamma + 1.0)
    return np.stack([(-u1 + gamma * u2) * s, (-u2 - gamma * u1) * s], axis=-1)


@dataclass(frozen=True)
class EffectiveConstants:
    mu: float
    gamma_scalar: float
    zbar: float
    Gamma: np.ndarray
    M: np.ndarray

    @classmethod
    def for_parameters(cls, mu: float, gamma: float) -> "EffectiveConstants":
        return cls(mu, gamma_scalar(mu), zbar_limit(mu), brinkman_matrix(gamma), tartar_matrix(gamma))
