"""Numerical checks of identities and qualitative properties.

Covers the operator properties of the form (coercivity, monotonicity,
boundedness), the fractional embedding ratio, positivity of the ground
state, positivity of the first eigenvalue, the dilation commutator of the
group fractional Laplacian and the Pohozaev-type balance on H^n.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from . import kernels
from .discretize import (
    DomainMask, Grid, QuadraticForm, exterior_kernel_mass, extend, form_apply,
    form_energy, inscribed_gauge_radius, lq_norm,
)
from .eigensolve import (
    DENSE_LIMIT, Eigenpair, dense_smallest_eigenpair, inverse_iteration,
)
from .errors import ConfigurationError, DomainError
from .groups import GroupSpec, dilate


# ------------------------------------------------------------ nodal calculus

def trapezoid_weights(grid: Grid) -> np.ndarray:
    """Nodal quadrature weights: cell volume, halved once per face a node lies on."""
    w = np.ones(grid.shape)
    for k in range(grid.dim):
        idx = [slice(None)] * grid.dim
        for end in (0, -1):
            idx[k] = end
            w[tuple(idx)] *= 0.5
    return w * grid.cell_volume


def euclidean_gradient(grid: Grid, full: np.ndarray) -> list:
    """Coordinate partials of a nodal array (centred inside, one-sided 2nd order on faces)."""
    full = np.asarray(full, dtype=float).reshape(grid.shape)
    return np.gradient(full, *grid.h, edge_order=2)


def _combine_fields(spec: GroupSpec, pts: np.ndarray, d: list, frame: str) -> list:
    """Apply horizontal left-invariant ("left") or right-invariant ("right") frames."""
    if not spec.is_heisenberg:
        return list(d)
    n = spec.n
    t = 2 * n
    sign = 1.0 if frame == "left" else -1.0
    xs = [d[i] - sign * 0.5 * pts[..., n + i] * d[t] for i in range(n)]
    ys = [d[n + i] + sign * 0.5 * pts[..., i] * d[t] for i in range(n)]
    return xs + ys


def horizontal_gradient(grid: Grid, full: np.ndarray) -> np.ndarray:
    """(X_1 u .. X_n u, Y_1 u .. Y_n u) at every node, stacked on the last axis."""
    pts = grid.nodes.reshape(grid.shape + (grid.dim,))
    return np.stack(_combine_fields(grid.spec, pts, euclidean_gradient(grid, full), "left"), axis=-1)


# ---------------------------------------------------------- test functions

@dataclass(frozen=True)
class Bump:
    """Tensor-product bump prod_k cos^2(pi (x_k - c_k) / (2 r_k)) on |x_k - c_k| < r_k."""

    center: tuple
    half_width: tuple

    def _parts(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        c = np.asarray(self.center)
        r = np.asarray(self.half_width)
        xi = (pts - c) / r
        inside = np.abs(xi) < 1.0
        f = np.where(inside, np.cos(0.5 * np.pi * xi) ** 2, 0.0)
        df = np.where(inside, -0.5 * np.pi / r * np.sin(np.pi * xi), 0.0)
        return f, df

    def __call__(self, pts) -> np.ndarray:
        f, _ = self._parts(pts)
        return np.prod(f, axis=1)

    def gradient(self, pts) -> np.ndarray:
        f, df = self._parts(pts)
        out = np.empty_like(f)
        for k in range(f.shape[1]):
            out[:, k] = df[:, k] * np.prod(np.delete(f, k, axis=1), axis=1)
        return out

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.all(np.abs(pts - np.asarray(self.center)) < np.asarray(self.half_width), axis=1)


def central_bump(spec: GroupSpec, radius: float = 0.3) -> Bump:
    return Bump(tuple([0.0] * spec.dim), tuple([radius] * spec.dim))


def random_bumps(grid: Grid, count: int = 20, seed: int = 0) -> list:
    """Seeded bumps supported in the central half of the box."""
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in grid.bounds])
    hi = np.array([b[1] for b in grid.bounds])
    mid = 0.5 * (lo + hi)
    quarter = 0.25 * (hi - lo)
    out = []
    for _ in range(count):
        r = quarter * rng.uniform(0.5, 1.0, grid.dim)
        c = mid + (quarter - r) * rng.uniform(-1.0, 1.0, grid.dim)
        out.append(Bump(tuple(c), tuple(r)))
    return out


# -------------------------------------------------------- operator property

@dataclass
class OperatorReport:
    rows: list = field(default_factory=list)  # (trial, coercivity, monotonicity, cs)

    @property
    def worst_coercivity(self) -> float:
        return max(abs(r[1]) for r in self.rows)

    @property
    def worst_monotonicity(self) -> float:
        return min(r[2] for r in self.rows)

    @property
    def worst_cs(self) -> float:
        return min(r[3] for r in self.rows)

    @property
    def passed(self) -> bool:
        return (self.worst_coercivity == 0.0 and self.worst_monotonicity >= -1e-12
                and self.worst_cs >= -1e-12)


def operator_property_suite(A: QuadraticForm, trials: int = 100, seed: int = 0) -> OperatorReport:
    """Coercivity, monotonicity and Cauchy-Schwarz boundedness on random pairs.

    Random vectors are scaled to unit X-norm so the absolute 1e-12 margins
    are meaningful.  Margins per trial: coercivity = <Au,u> - ||u||_X^2,
    monotonicity = <Au - Av, u - v>, cs = ||u||_X ||v||_X - |<Au,v>|.
    """
    if trials < 1:
        raise DomainError("need at least one trial")
    rng = np.random.default_rng(seed)
    report = OperatorReport()
    for k in range(trials):
        u = rng.standard_normal(A.size)
        v = rng.standard_normal(A.size)
        u /= math.sqrt(form_energy(A, u))
        v /= math.sqrt(form_energy(A, v))
        au = form_apply(A, u)
        av = form_apply(A, v)
        coercive = float(u @ au) - form_energy(A, u)
        mono = float((u - v) @ (au - av))
        cs = math.sqrt(form_energy(A, u)) * math.sqrt(form_energy(A, v)) - abs(float(v @ au))
        report.rows.append((k, coercive, mono, cs))
    return report


# --------------------------------------------------------------- embedding

def gagliardo_energy(grid: Grid, mask: DomainMask, v, p: float, s: float) -> float:
    """Discrete int_G int_G |v(x) - v(y)|^p / |y^{-1} x|^{Q+ps}, including the exterior tail."""
    spec = grid.spec
    full = extend(mask, v)
    rows = kernels.difference_rows(spec, grid.nodes, full, grid.nodes, full, spec.Q + p * s, p)
    cv = grid.cell_volume
    inner = cv * cv * float(np.sum(rows))
    pts = grid.nodes[mask.interior_index]
    tail = exterior_kernel_mass(spec, inscribed_gauge_radius(grid, pts), s, p)
    # both orders (x in box, y outside) and (x outside, y in box)
    return inner + 2.0 * cv * float(np.sum(np.abs(v) ** p * tail))


def _analytic(u) -> bool:
    return callable(u) and hasattr(u, "gradient")


def gradient_lp(grid: Grid, mask: DomainMask, v, p: float) -> float:
    """Trapezoid quadrature of |grad_G v|^p.

    ``v`` is an array of interior values (finite-difference gradient) or an
    analytic test function with ``gradient(pts)`` (exact gradient at nodes).
    """
    if _analytic(v):
        pts = grid.nodes
        d = list(v.gradient(pts).T)
        comps = _combine_fields(grid.spec, pts, d, "left")
        mag2 = sum(c * c for c in comps).reshape(grid.shape)
    else:
        g = horizontal_gradient(grid, extend(mask, v))
        mag2 = np.sum(g * g, axis=-1)
    return float(np.sum(trapezoid_weights(grid) * mag2 ** (0.5 * p)))


def embedding_ratio(grid: Grid, mask: DomainMask, v, p: float, s: float) -> float:
    """Discrete Gagliardo (p, s) energy over int |grad_G v|^p.

    The numerator always uses nodal values; for an analytic ``v`` the
    denominator uses its exact gradient at the nodes.
    """
    if not 1.0 < p < math.inf:
        raise DomainError(f"p must lie in (1, inf), got {p!r}")
    if not 0.0 < s < 1.0:
        raise DomainError(f"s must lie in (0, 1), got {s!r}")
    vals = v(grid.nodes[mask.interior_index]) if _analytic(v) else np.asarray(v, dtype=float)
    denom = gradient_lp(grid, mask, v if _analytic(v) else vals, p)
    if denom == 0.0:
        raise DomainError("test function has zero horizontal gradient")
    return gagliardo_energy(grid, mask, vals, p, s) / denom


# --------------------------------------------------------------- positivity

@dataclass
class PositivityReport:
    margin: float
    min_interior: float
    linf: float
    flipped: bool


def positivity_check(eig: Eigenpair, grid: Grid, mask: DomainMask, margin: float = 0.25) -> PositivityReport:
    """Minimum of w over nodes at relative distance >= margin from the faces, and max |w|.

    The vector is oriented by the sign of its largest-magnitude entry;
    ``flipped`` records whether that changed the sign.
    """
    if not 0.0 < margin < 0.5:
        raise DomainError(f"margin must lie in (0, 0.5), got {margin!r}")
    lo = np.array([b[0] for b in grid.bounds])
    hi = np.array([b[1] for b in grid.bounds])
    pts = grid.nodes[mask.interior_index]
    rel = np.minimum(pts - lo, hi - pts) / (hi - lo)
    inner = np.all(rel >= margin - 1e-12, axis=1)
    # omega must be a genuine sub-box: at least two nodes per axis
    per_axis = [np.unique(pts[inner, k]).size for k in range(grid.dim)]
    if not inner.any() or min(per_axis) < 2:
        raise ConfigurationError(f"margin {margin} leaves no interior sub-box on an N={grid.n} grid")
    w = np.asarray(eig.w, dtype=float)
    flipped = bool(w[np.argmax(np.abs(w))] < 0)
    if flipped:
        w = -w
    return PositivityReport(margin, float(w[inner].min()), float(np.abs(w).max()), flipped)


# ------------------------------------------------------ first eigenvalue sign

@dataclass
class NegativeLambdaReport:
    lambda1: float
    lower_bound: float
    method: str
    remark_G: float = math.nan
    remark_gu: float = math.nan

    @property
    def remark_combination(self) -> float:
        return self.remark_G + self.remark_gu

    @property
    def passed(self) -> bool:
        return self.lambda1 > 0.0


def gershgorin_lower_bound(A: QuadraticForm) -> float:
    """Lower bound on the smallest eigenvalue of the pencil (M, cv I).

    The local part is positive semidefinite; the fractional part plus tail
    is bounded below by its smallest Gershgorin disc edge.
    """
    if A.theta_nonloc == 0.0 or A.nonlocal_op is None:
        return 0.0
    op = A.nonlocal_op
    diag = np.diag(op)
    off = np.sum(np.abs(op), axis=1) - np.abs(diag)
    return float(A.theta_nonloc * np.min(diag - off + A.tail))


def negative_lambda_check(A: QuadraticForm, eig: Eigenpair | None = None,
                          dense_limit: int = 1000) -> NegativeLambdaReport:
    """Smallest generalized eigenvalue of the form, which must be positive.

    Dense LAPACK solve for up to ``dense_limit`` unknowns, q = 2 inverse
    iteration (CG inner solves) beyond.  With ``eig`` given, also evaluates
    (Q/2) int G(u) and (1 - Q/2) int g(u) u for its exponent.
    """
    if A.size <= min(dense_limit, DENSE_LIMIT):
        lam, _ = dense_smallest_eigenpair(A)
        method = "dense"
    else:
        pair, _ = inverse_iteration(A, 2.0)
        lam, method = pair.mu, "inverse-iteration"
    report = NegativeLambdaReport(lam, gershgorin_lower_bound(A), method)
    if eig is not None:
        Q = A.grid.spec.Q
        int_G, int_gu = _nonlinearity_integrals(A.grid, eig)
        report.remark_G = 0.5 * Q * int_G
        report.remark_gu = (1.0 - 0.5 * Q) * int_gu
    return report


def _nonlinearity_integrals(grid: Grid, eig: Eigenpair):
    """int G(u) and int g(u) u for g(u) = mu ||u||_q^{2-q} |u|^{q-2} u."""
    q = eig.q
    u = np.asarray(eig.w, dtype=float)
    norm = lq_norm(grid, u, q)
    if norm == 0.0:
        return 0.0, 0.0
    int_abs_q = float(np.sum(np.abs(u) ** q)) * grid.cell_volume
    int_gu = eig.mu * norm ** (2.0 - q) * int_abs_q
    return int_gu / q, int_gu


# ---------------------------------------------------------------- pohozaev

@dataclass
class PohozaevReport:
    """Terms of the Pohozaev-type balance, each with its coefficient.

    residual_X = term_G - term_grad - term_frac_X - term_boundary, where
    term_frac_A uses int |(-Delta)^s u|^2 and term_frac_B the seminorm
    int u (-Delta)^s u.
    """

    term_G: float
    term_grad: float
    term_frac_A: float
    term_frac_B: float
    term_boundary: float
    Q: int = 0

    @property
    def residual_A(self) -> float:
        return self.term_G - self.term_grad - self.term_frac_A - self.term_boundary

    @property
    def residual_B(self) -> float:
        return self.term_G - self.term_grad - self.term_frac_B - self.term_boundary

    @property
    def dilation_residual(self) -> float:
        """residual_B with Q int G in place of (Q/2) int G, the coefficient a
        direct dilation argument (div of the generator = Q) produces."""
        return self.residual_B + self.term_G

    def as_row(self) -> list:
        return [self.term_G, self.term_grad, self.term_frac_A, self.term_frac_B,
                self.term_boundary, self.residual_A, self.residual_B]


def boundary_flux(grid: Grid, sq: np.ndarray) -> float:
    """0.5 * sum over faces of int sq <Zbar, n> dS with the face trapezoid rule.

    ``sq`` is a nodal array; Zbar is the dilation generator.
    """
    pts = grid.nodes.reshape(grid.shape + (grid.dim,))
    deg = grid.spec.degrees
    total = 0.0
    for k in range(grid.dim):
        area = float(np.prod(np.delete(grid.h, k)))
        for end, sign in ((0, -1.0), (-1, 1.0)):
            idx = [slice(None)] * grid.dim
            idx[k] = end
            face = sq[tuple(idx)]
            wts = np.ones(face.shape)
            for j in range(face.ndim):
                sl = [slice(None)] * face.ndim
                for e in (0, -1):
                    sl[j] = e
                    wts[tuple(sl)] *= 0.5
            normal_part = sign * deg[k] * pts[tuple(idx)][..., k]
            total += float(np.sum(face * normal_part * wts)) * area
    return 0.5 * total


def pohozaev_residual(eig: Eigenpair, A: QuadraticForm) -> PohozaevReport:
    """Evaluate every term of the Pohozaev-type balance for an eigenpair on H^n."""
    grid, mask = A.grid, A.mask
    spec = grid.spec
    if not spec.is_heisenberg:
        raise DomainError("the Pohozaev balance is evaluated on Heisenberg groups only")
    Q, s = spec.Q, A.s
    u = np.asarray(eig.w, dtype=float)
    cv = grid.cell_volume
    int_G, _ = _nonlinearity_integrals(grid, eig)
    full = extend(mask, u)
    g = horizontal_gradient(grid, full)
    sq = np.sum(g * g, axis=-1)
    grad_sq = float(np.sum(trapezoid_weights(grid) * sq))
    frac = A.fractional(u)
    return PohozaevReport(
        term_G=0.5 * Q * int_G,
        term_grad=0.5 * (Q - 2) * grad_sq,
        term_frac_A=0.5 * (Q - 2 * s) * cv * float(frac @ frac),
        term_frac_B=0.5 * (Q - 2 * s) * cv * float(u @ frac),
        term_boundary=boundary_flux(grid, sq),
        Q=Q,
    )


# -------------------------------------------------------------- commutator

@dataclass
class CommutatorReport:
    probes: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def residuals(self) -> np.ndarray:
        return np.abs(self.lhs - self.rhs) / (np.abs(self.lhs) + np.abs(self.rhs) + 1e-14)

    @property
    def max_residual(self) -> float:
        return float(self.residuals.max()) if self.residuals.size else 0.0


def default_probes(spec: GroupSpec, radii=(0.6, 0.8)) -> np.ndarray:
    """Points at the given gauge radii along a fixed set of unit-gauge directions."""
    if spec.is_heisenberg:
        n = spec.n
        dirs = []
        for i in range(2 * n):
            for sgn in (1.0, -1.0):
                d = np.zeros(spec.dim)
                d[i] = sgn
                dirs.append(d)
        for sgn in (1.0, -1.0):
            d = np.zeros(spec.dim)
            d[-1] = sgn
            dirs.append(d)
        # mixed directions with both strata present
        for a, b in ((0.6, 0.0), (-0.5, 0.5), (0.8, -0.3)):
            d = np.zeros(spec.dim)
            d[0], d[n] = a, b
            d[-1] = math.sqrt(1.0 - (a * a + b * b) ** 2)
            dirs.append(d)
        dirs = np.array(dirs)
    else:
        dirs = np.concatenate([np.eye(spec.dim), -np.eye(spec.dim),
                               np.ones((1, spec.dim)) / math.sqrt(spec.dim)])
    return np.concatenate([dilate(spec, r, dirs) for r in radii])


def commutator_check(grid: Grid, mask: DomainMask, s: float, u, probes=None,
                     frame: str = "right") -> CommutatorReport:
    """Compare both sides of the dilation commutator at probe points.

    With Zbar = sum_k deg_k x_k d_k the dilation generator, the identity

        (-Delta)^s (Zbar u)(p) = pbar . (-Delta)^s (grad u)(p) + 2s (-Delta)^s u(p)

    holds at points p outside supp(u), where pbar = (deg_k p_k).  The
    gradient is taken in the right-invariant frame (frame="right"), which
    commutes with the left-invariant kernel and gives Zbar = xbar . grad_R;
    frame="euclidean" uses plain coordinate partials instead.  Both sides
    are nested quadratures over the grid nodes.

    ``u`` is an array of interior values (derivatives by finite
    differences) or an object with ``__call__(pts)`` and ``gradient(pts)``
    (derivatives evaluated exactly).
    """
    spec = grid.spec
    if not 0.0 < s < 1.0:
        raise DomainError(f"s must lie in (0, 1), got {s!r}")
    if frame not in ("right", "euclidean"):
        raise DomainError(f"unknown frame {frame!r}")
    probes = default_probes(spec) if probes is None else np.atleast_2d(np.asarray(probes, dtype=float))
    lo = np.array([b[0] for b in grid.bounds])
    hi = np.array([b[1] for b in grid.bounds])
    if np.any(probes <= lo) or np.any(probes >= hi):
        raise DomainError("probe points must lie inside the box")
    pts = grid.nodes
    if _analytic(u):
        if np.any(u.contains(probes)):
            raise DomainError("probe point inside the support of u")
        vals = u(pts)
        d = list(u.gradient(pts).T)
    else:
        vals = extend(mask, u)
        _probe_outside_support(grid, vals, probes)
        d = [x.ravel() for x in euclidean_gradient(grid, vals)]
    deg = spec.degrees
    zbar_u = sum(deg[k] * pts[:, k] * d[k] for k in range(spec.dim))
    if frame == "right":
        horiz = _combine_fields(spec, pts, d, "right")
        grads = horiz + list(d[spec.horizontal_dim:])
    else:
        grads = d
    K = kernels.pair_weights(spec, probes, pts, spec.Q + 2 * s) * grid.cell_volume

    def frac_at_probes(f):
        # f vanishes at the probes, so only the -int f(y) K dy part survives
        return -(K @ f)

    lhs = frac_at_probes(zbar_u)
    pbar = probes * deg
    rhs = sum(pbar[:, k] * frac_at_probes(grads[k]) for k in range(spec.dim))
    rhs = rhs + 2.0 * s * frac_at_probes(vals)
    return CommutatorReport(probes, lhs, rhs)


def _probe_outside_support(grid, vals, probes):
    lo = np.array([b[0] for b in grid.bounds])
    cell = np.floor((probes - lo) / grid.h).astype(int)
    cell = np.clip(cell, 0, grid.n - 1)
    full = vals.reshape(grid.shape)
    for c in cell:
        block = full[tuple(slice(i, i + 2) for i in c)]
        if np.any(block != 0):
            raise DomainError("probe point inside the support of u")
