"""First eigenpair of the discrete (2, q) problem.

The main routine is the normalised inverse iteration: starting from a
nonnegative w_0 with ||w_0||_q = 1, solve A v = B(w_j) by conjugate
gradients, set w_{j+1} = v / ||v||_q and track the Rayleigh values
mu_j = <A w_j, w_j>, which never increase.  For q = 2 a dense generalized
symmetric eigensolver provides an independent answer.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .discretize import (
    QuadraticForm, apply_B, check_exponent, form_apply, form_energy, lq_norm,
)
from .errors import ConfigurationError, ConvergenceError, DomainError

log = logging.getLogger(__name__)

DENSE_LIMIT = 5000


@dataclass
class Eigenpair:
    mu: float
    w: np.ndarray
    q: float
    converged: bool
    residual: float = float("nan")


@dataclass
class IterationTrace:
    mu_sequence: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    lq_growth: list = field(default_factory=list)
    cg_iterations: list = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.lq_growth)


def rayleigh_quotient(A: QuadraticForm, u, q: float) -> float:
    norm = lq_norm(A.grid, u, q)
    if norm == 0.0:
        raise DomainError("Rayleigh quotient of the zero function")
    return form_energy(A, u) / norm**2


def _matvec(A):
    if isinstance(A, QuadraticForm):
        return lambda x: form_apply(A, x)
    if sp.issparse(A) or isinstance(A, np.ndarray):
        return lambda x: A @ x
    if callable(A):
        return A
    raise TypeError(f"cannot apply {type(A).__name__} as a linear operator")


def cg_solve(A, b, tol=1e-12, max_iter=None, x0=None):
    """Conjugate gradients for A x = b with A symmetric positive definite.

    ``A`` is a QuadraticForm (its Riesz action is used), a matrix, or a
    callable.  Stops once ||b - A x|| <= tol * ||b||.  Raises
    ConvergenceError, carrying the last relative residual, when
    ``max_iter`` iterations do not suffice.
    """
    matvec = _matvec(A)
    b = np.asarray(b, dtype=float)
    if max_iter is None:
        max_iter = max(10 * b.size, 100)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - matvec(x) if x0 is not None else b.copy()
    p = r.copy()
    rr = r @ r
    target = (tol * bnorm) ** 2
    for k in range(max_iter + 1):
        if rr <= target:
            return x, k
        if k == max_iter:
            break
        ap = matvec(p)
        curv = p @ ap
        if curv <= 0.0:
            raise ConvergenceError("operator is not positive definite along the Krylov space",
                                   residual=np.sqrt(rr) / bnorm, iterations=k)
        alpha = rr / curv
        x += alpha * p
        r -= alpha * ap
        rr_new = r @ r
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise ConvergenceError(f"CG did not converge in {max_iter} iterations",
                           residual=np.sqrt(rr) / bnorm, iterations=max_iter)


def eigen_residual(A: QuadraticForm, w, mu: float, q: float) -> float:
    """||A w - mu B(w)|| / (mu ||B(w)||)."""
    bw = apply_B(A.grid, w, q)
    return float(np.linalg.norm(form_apply(A, w) - mu * bw) / (mu * np.linalg.norm(bw)))


def default_start(A: QuadraticForm, q: float) -> np.ndarray:
    w = np.ones(A.size)
    return w / lq_norm(A.grid, w, q)


def inverse_iteration(A: QuadraticForm, q: float, w0=None, tol=1e-10, max_iter=500,
                      cg_tol=None, check_sign=True):
    """Normalised inverse iteration; returns (Eigenpair, IterationTrace).

    Stops when the relative change of mu and the relative eigen-residual
    ||A w - mu B(w)|| / (mu ||B(w)||) are both below ``tol``.  When
    ``max_iter`` is exhausted the pair is returned with converged=False.
    With ``check_sign`` set and a nonnegative start, an iterate taking a
    value below -1e-12 raises DomainError.
    """
    check_exponent(A.grid.spec, q)
    grid = A.grid
    w = default_start(A, q) if w0 is None else np.array(w0, dtype=float)
    if w.shape != (A.size,):
        raise DomainError(f"start vector has shape {w.shape}, expected ({A.size},)")
    if not np.any(w != 0):
        raise DomainError("start vector is identically zero")
    nonneg_start = bool(np.all(w >= 0))
    if cg_tol is None:
        cg_tol = min(1e-12, 1e-2 * tol)
    w = w / lq_norm(grid, w, q)
    mu = rayleigh_quotient(A, w, q)
    trace = IterationTrace(mu_sequence=[mu], residuals=[eigen_residual(A, w, mu, q)])
    converged = False
    for _ in range(max_iter):
        b = apply_B(grid, w, q)
        # for the limit pair A w = mu B(w), so w / mu is a good starting guess
        v, its = cg_solve(A, b, tol=cg_tol, x0=w / mu)
        growth = lq_norm(grid, v, q)
        w_next = v / growth
        if check_sign and nonneg_start and w_next.min() < -1e-12 * np.abs(w_next).max():
            raise DomainError(f"iterate lost its sign: min value {w_next.min():.3e}")
        mu_next = rayleigh_quotient(A, w_next, q)
        res = eigen_residual(A, w_next, mu_next, q)
        trace.mu_sequence.append(mu_next)
        trace.residuals.append(res)
        trace.lq_growth.append(growth)
        trace.cg_iterations.append(its)
        done = abs(mu_next - mu) <= tol * mu and res <= tol
        w, mu = w_next, mu_next
        if done:
            converged = True
            break
    log.debug("inverse iteration: %d steps, mu=%.12g, converged=%s", trace.iterations, mu, converged)
    return Eigenpair(mu, w, q, converged, trace.residuals[-1]), trace


def dense_smallest_eigenpair(A: QuadraticForm):
    """Smallest eigenpair of M u = lambda * cv * u by LAPACK (q = 2 oracle).

    The vector is normalised to unit discrete L^2 norm and oriented so that
    its entry of largest magnitude is positive.
    """
    if A.size > DENSE_LIMIT:
        raise ConfigurationError(f"dense eigensolve limited to {DENSE_LIMIT} unknowns, got {A.size}")
    vals, vecs = scipy.linalg.eigh(A.dense(), subset_by_index=[0, 0])
    lam = float(vals[0]) / A.cell_volume
    v = vecs[:, 0]
    v = v / lq_norm(A.grid, v, 2.0)
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return lam, v


def align(u, v) -> float:
    """min_c ||u - c v|| / ||u|| with the least-squares c."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    c = (u @ v) / (v @ v)
    return float(np.linalg.norm(u - c * v) / np.linalg.norm(u))


@dataclass
class SimplicityReport:
    mus: list
    max_misalignment: float


def simplicity_check(A: QuadraticForm, q: float, trials: int = 3, seed: int = 0,
                     starts=None, tol=1e-10, max_iter=500) -> SimplicityReport:
    """Run inverse iteration from several positive starts and compare limits."""
    if starts is None:
        if trials < 2:
            raise DomainError("simplicity check needs at least two starts")
        rng = np.random.default_rng(seed)
        starts = [rng.uniform(0.1, 1.0, A.size) for _ in range(trials)]
    elif len(starts) < 2:
        raise DomainError("simplicity check needs at least two starts")
    pairs = [inverse_iteration(A, q, w0=s, tol=tol, max_iter=max_iter)[0] for s in starts]
    worst = 0.0
    for i in range(len(pairs)):
        for j in range(i + 1, len(pairs)):
            worst = max(worst, align(pairs[i].w, pairs[j].w), align(pairs[j].w, pairs[i].w))
    return SimplicityReport([p.mu for p in pairs], worst)
