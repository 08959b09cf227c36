"""Sparse matrices and the linear solvers used by every FEM system.

Storage and the ILU/sparse-LU kernels come from scipy; the Krylov loops,
the symmetry probe, the reverse Cuthill-McKee + banded LU direct path and the
solver policy live here.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import reverse_cuthill_mckee

from .errors import AsymmetryError, NotConverged, SingularMatrix

log = logging.getLogger(__name__)

# band storage (doubles) and elimination work (flops) above which the sparse LU is used instead
BANDED_LIMIT = 2e7
BANDED_WORK_LIMIT = 5e8


class Method(str, Enum):
    CG = "CG"
    GMRES = "GMRES"
    DIRECT = "DIRECT"


@dataclass
class SolveReport:
    iterations: int
    relative_residual: float
    method: Method
    history: list = field(default_factory=list, repr=False)
    note: str = ""


class CsrMatrix:
    """Square compressed-row matrix with sorted, duplicate-free rows."""

    def __init__(self, matrix):
        m = sp.csr_matrix(matrix, dtype=float)
        m.sum_duplicates()
        m.sort_indices()
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"matrix must be square, got {m.shape}")
        self._m = m

    @classmethod
    def from_triplets(cls, rows, cols, vals, n):
        return cls(sp.coo_matrix((vals, (rows, cols)), shape=(n, n)))

    @property
    def indptr(self):
        return self._m.indptr

    @property
    def indices(self):
        return self._m.indices

    @property
    def data(self):
        return self._m.data

    @property
    def shape(self):
        return self._m.shape

    @property
    def nnz(self):
        return self._m.nnz

    def scipy(self) -> sp.csr_matrix:
        return self._m

    def __matmul__(self, x):
        return self._m @ x

    def transpose(self) -> "CsrMatrix":
        return CsrMatrix(self._m.T)

    def dump(self, path) -> None:
        """Coordinate text format, one ``i j value`` line per stored entry."""
        coo = self._m.tocoo()
        with open(path, "w") as fh:
            for i, j, v in zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()):
                fh.write(f"{i} {j} {v!r}\n")


def as_scipy(A) -> sp.csr_matrix:
    if isinstance(A, CsrMatrix):
        return A.scipy()
    if sp.issparse(A):
        return A.tocsr()
    return sp.csr_matrix(np.asarray(A, dtype=float))


def symmetry_defect(A, probes: int = 3, seed: int = 7) -> float:
    """max over random x of ||(A - A^T) x|| / ||A|| ||x|| (Frobenius-free estimate)."""
    A = as_scipy(A)
    rng = np.random.default_rng(seed)
    scale = max(abs(A).sum(axis=1).max(), 1e-300)
    worst = 0.0
    for _ in range(probes):
        x = rng.standard_normal(A.shape[0])
        d = A @ x - A.T @ x
        worst = max(worst, np.linalg.norm(d) / (scale * np.linalg.norm(x)))
    return float(worst)


def solve_spd(A, b, tol: float = 1e-10, max_iter: int | None = None, x0=None, check_symmetry: bool = True):
    """Jacobi-preconditioned conjugate gradients.

    The iterate returned is the minimal-residual smoothing of the CG
    sequence, whose residual norm is non-increasing by construction. The
    report history lists those residual norms relative to ||b||.
    """
    A = as_scipy(A)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if check_symmetry:
        d = symmetry_defect(A)
        if d > 1e-12:
            raise AsymmetryError(f"matrix is not symmetric (probe defect {d:.3e})")
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise SingularMatrix("non-positive diagonal entry: matrix is not positive definite")
    inv_diag = 1.0 / diag
    max_iter = max_iter or 10 * n + 100
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros(n), SolveReport(0, 0.0, Method.CG, [0.0])
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    # smoothed pair (y, s) with s = b - A y
    y, s = x.copy(), r.copy()
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    hist = [np.linalg.norm(s) / bnorm]
    it = 0
    while hist[-1] > tol and it < max_iter:
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            raise SingularMatrix("p^T A p <= 0: matrix is not positive definite")
        a = rz / pAp
        x += a * p
        r -= a * Ap
        it += 1
        d = r - s
        dd = d @ d
        if dd > 0:
            eta = -(s @ d) / dd
            eta = min(max(eta, 0.0), 1.0)
            y += eta * (x - y)
            s += eta * d
        hist.append(np.linalg.norm(s) / bnorm)
        if hist[-1] <= tol:
            if np.linalg.norm(b - A @ y) / bnorm <= tol:
                break
            # recurrences drifted from the true residuals: resynchronise
            s = b - A @ y
            r = b - A @ x
            hist[-1] = np.linalg.norm(s) / bnorm
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = float(np.linalg.norm(b - A @ y) / bnorm)
    report = SolveReport(it, res, Method.CG, hist)
    if res > tol:
        raise NotConverged(f"CG stopped at {it} iterations, residual {res:.3e}", y, report)
    return y, report


# ---------------------------------------------------------------- banded LU


class BandedLU:
    """LU factorisation with partial pivoting of a banded matrix.

    Column-major band storage: ``ab[kl + ku + i - j, j] = A[i, j]``, with kl
    extra rows above for pivoting fill, as in LAPACK's gbtrf layout.
    """

    def __init__(self, A: sp.spmatrix, kl: int, ku: int, pivot_tol: float = 1e-14):
        n = A.shape[0]
        self.n, self.kl, self.ku = n, kl, ku
        w = 2 * kl + ku + 1
        ab = np.zeros((w, n))
        coo = A.tocoo()
        ab[kl + ku + coo.row - coo.col, coo.col] = coo.data
        scale = max(np.abs(coo.data).max(initial=0.0), 1e-300)
        piv = np.arange(n)
        d = kl + ku  # row index of the diagonal in ab
        for k in range(n):
            m = min(kl, n - 1 - k)
            col = ab[d : d + m + 1, k]
            p = int(np.argmax(np.abs(col)))
            if abs(col[p]) <= pivot_tol * scale:
                raise SingularMatrix(f"zero pivot at column {k} of the banded factorisation")
            jmax = min(n, k + ku + kl + 1)
            js = np.arange(k, jmax)
            if p:
                piv[k] = k + p
                ia = d + k - js
                ib = ia + p
                ab[ia, js], ab[ib, js] = ab[ib, js], ab[ia, js].copy()
            if m == 0:
                continue
            ab[d + 1 : d + m + 1, k] /= ab[d, k]
            lk = ab[d + 1 : d + m + 1, k]
            js = js[1:]
            if len(js) == 0:
                continue
            urow = ab[d + k - js, js]
            rows = d + (k + 1 + np.arange(m))[:, None] - js[None, :]
            ab[rows, js[None, :]] -= lk[:, None] * urow[None, :]
        self.ab = ab
        self.piv = piv

    def solve(self, b):
        n, kl, ku, ab, d = self.n, self.kl, self.ku, self.ab, self.kl + self.ku
        x = np.array(b, dtype=float)
        for k in range(n):
            p = self.piv[k]
            if p != k:
                x[k], x[p] = x[p], x[k]
            m = min(kl, n - 1 - k)
            if m:
                x[k + 1 : k + m + 1] -= ab[d + 1 : d + m + 1, k] * x[k]
        for k in range(n - 1, -1, -1):
            jmax = min(n, k + ku + kl + 1)
            js = np.arange(k + 1, jmax)
            if len(js):
                x[k] -= ab[d + k - js, js] @ x[js]
            x[k] /= ab[d, k]
        return x

    def dense_factors(self):
        """(perm, L, U) with A[perm] = L @ U, for verification on small systems."""
        n, kl, d = self.n, self.kl, self.kl + self.ku
        L = np.eye(n)
        perm = np.arange(n)
        for k in range(n):
            p = self.piv[k]
            if p != k:
                L[[k, p], :k] = L[[p, k], :k]
                perm[[k, p]] = perm[[p, k]]
            m = min(kl, n - 1 - k)
            L[k + 1 : k + m + 1, k] = self.ab[d + 1 : d + m + 1, k]
        U = np.zeros((n, n))
        for j in range(n):
            i0 = max(0, j - self.ku - kl)
            for i in range(i0, j + 1):
                U[i, j] = self.ab[d + i - j, j]
        return perm, L, U


def bandwidths(A) -> tuple[int, int]:
    coo = as_scipy(A).tocoo()
    if coo.nnz == 0:
        return 0, 0
    diff = coo.row - coo.col
    return int(max(diff.max(), 0)), int(max(-diff.min(), 0))


class DirectSolver:
    """Reverse Cuthill-McKee ordering, then banded LU; sparse LU when the band is too wide."""

    def __init__(self, A, banded_limit: float = BANDED_LIMIT):
        A = as_scipy(A)
        self.A = A
        n = A.shape[0]
        pattern = (abs(A) + abs(A.T)).tocsr()
        self.perm = reverse_cuthill_mckee(pattern, symmetric_mode=True)
        Ap = A[self.perm][:, self.perm]
        kl, ku = bandwidths(Ap)
        small = n * (2 * kl + ku + 1) <= banded_limit and n * kl * (kl + ku + 1) <= BANDED_WORK_LIMIT
        self.kind = "banded" if small else "sparse"
        if self.kind == "banded":
            self.lu = BandedLU(Ap, kl, ku)
        else:
            try:
                self.lu = spla.splu(A.tocsc(), permc_spec="COLAMD")
            except RuntimeError as exc:
                raise SingularMatrix(str(exc)) from exc

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if self.kind == "banded":
            x = np.empty_like(b)
            x[self.perm] = self.lu.solve(b[self.perm])
        else:
            x = self.lu.solve(b)
        if not np.all(np.isfinite(x)):
            raise SingularMatrix("direct solve produced non-finite values")
        return x


def _direct(A, b, tol, refine_steps=3):
    solver = DirectSolver(A)
    bnorm = np.linalg.norm(b) or 1.0
    x = solver.solve(b)
    res = np.linalg.norm(b - A @ x) / bnorm
    steps = 0
    while res > tol and steps < refine_steps:
        x += solver.solve(b - A @ x)
        res = np.linalg.norm(b - A @ x) / bnorm
        steps += 1
    return x, SolveReport(steps, float(res), Method.DIRECT, note=solver.kind)


def solve_general(A, b, tol: float = 1e-10, restart: int = 50, max_iter: int = 500, method: str = "auto"):
    """Restarted GMRES with an incomplete LU preconditioner, falling back to the direct path.

    ``method="direct"`` skips the Krylov attempt (used for saddle-point systems,
    whose zero block makes incomplete factorisations unreliable).
    """
    A = as_scipy(A)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros(n), SolveReport(0, 0.0, Method.DIRECT)
    if method == "auto":
        try:
            ilu = spla.spilu(A.tocsc(), drop_tol=0.0, fill_factor=1.0, permc_spec="NATURAL")
            M = spla.LinearOperator((n, n), ilu.solve)
            hist = []
            x, info = spla.gmres(
                A, b, rtol=tol, atol=0.0, restart=restart, maxiter=max(1, math.ceil(max_iter / restart)),
                M=M, callback=hist.append, callback_type="pr_norm",
            )
            res = float(np.linalg.norm(b - A @ x) / bnorm)
            if info == 0 and res <= tol and np.all(np.isfinite(x)):
                return x, SolveReport(len(hist), res, Method.GMRES, hist)
            log.debug("GMRES stalled after %d iterations (residual %.2e); using direct path", len(hist), res)
        except RuntimeError as exc:  # singular incomplete factor
            log.debug("incomplete factorisation failed (%s); using direct path", exc)
    elif method != "direct":
        raise ValueError(f"unknown method {method!r}")
    x, report = _direct(A, b, tol)
    if report.relative_residual > tol:
        raise NotConverged(f"direct path residual {report.relative_residual:.3e} > {tol:.1e}", x, report)
    return x, report


def solve_saddle(
    K, b, n_velocity: int, n_pressure: int, pressure_weights, n_mean: int = 0,
    tol: float = 1e-10, restart: int = 100, max_iter: int = 1000,
):
    """GMRES for a bordered saddle system with a block upper-triangular preconditioner.

    Unknown order: velocity (n_velocity), pressure (n_pressure), one
    pressure-mean multiplier, then ``n_mean`` velocity-mean multipliers.
    The Schur complement is replaced by the lumped pressure mass
    diag(pressure_weights), bordered by the same weights and inverted in
    closed form. The velocity block (bordered by the mean rows when
    present) is solved exactly through an LU factor of A + delta I and a
    small dense Schur system; delta only matters when A is singular on
    constants, where the border removes that mode.
    """
    K = as_scipy(K).tocsr()
    b = np.asarray(b, dtype=float)
    nu, npr = n_velocity, n_pressure
    n = K.shape[0]
    if n != nu + npr + 1 + n_mean:
        raise ValueError("unknown counts do not match the matrix")
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros(n), SolveReport(0, 0.0, Method.GMRES)
    m = np.asarray(pressure_weights, dtype=float)
    total = m.sum()
    A = K[:nu, :nu]
    Bt = K[:nu, nu : nu + npr]
    C = K[:nu, nu + npr + 1 :].toarray()
    if n_mean:
        A = A + 1e-6 * float(np.mean(np.abs(A.diagonal()))) * sp.identity(nu, format="csr")
    try:
        lu = spla.splu(A.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.1, options=dict(SymmetricMode=True))
    except RuntimeError as exc:
        raise SingularMatrix(str(exc)) from exc
    if n_mean:
        AinvC = np.column_stack([lu.solve(C[:, k]) for k in range(n_mean)])
        S = C.T @ AinvC

    def apply(z):
        zu, zp, zl, zk = z[:nu], z[nu : nu + npr], z[nu + npr], z[nu + npr + 1 :]
        yl = (zl + zp.sum()) / total
        yp = yl - zp / m
        ru = zu - Bt @ yp
        yu = lu.solve(ru)
        if n_mean:
            yk = np.linalg.solve(S, C.T @ yu - zk)
            yu = yu - AinvC @ yk
        else:
            yk = zk
        return np.concatenate([yu, yp, [yl], yk])

    M = spla.LinearOperator((n, n), apply)
    hist: list = []
    x = np.zeros(n)
    res = np.inf
    for _ in range(3):
        x, info = spla.gmres(
            K, b, x0=x, rtol=0.1 * tol, atol=0.0, restart=restart, maxiter=max(1, math.ceil(max_iter / restart)),
            M=M, callback=hist.append, callback_type="pr_norm",
        )
        res = float(np.linalg.norm(b - K @ x) / bnorm)
        if res <= tol:
            return x, SolveReport(len(hist), res, Method.GMRES, hist, note="block-triangular")
    raise NotConverged(f"saddle GMRES residual {res:.3e} > {tol:.1e}", x, SolveReport(len(hist), res, Method.GMRES, hist))
