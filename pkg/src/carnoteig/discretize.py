"""Uniform grids on coordinate boxes and the discrete quadratic forms.

Discrete functions are represented by their values on interior nodes (a 1-D
array in interior-node order); they vanish on the box faces and outside,
which is the Dirichlet condition on the complement of the domain.

The form is stored at operator level: ``local`` approximates -L (the
negative sub-Laplacian), ``nonlocal_op`` plus ``diag(tail)`` approximates the
group fractional Laplacian at the nodes.  Energies and Riesz actions carry
the cell volume, so ``u @ form_apply(A, u)`` is a quadrature of

    theta_loc * int |grad_G u|^2  +  theta_nonloc * int u (-Delta)^s u.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import ConfigurationError, DomainError, StructuralError
from .groups import GroupSpec, unit_ball_volume


@dataclass(frozen=True, eq=False)
class Grid:
    spec: GroupSpec
    bounds: tuple
    n: int

    @cached_property
    def h(self) -> np.ndarray:
        return np.array([(hi - lo) / self.n for lo, hi in self.bounds])

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def shape(self) -> tuple:
        return (self.n + 1,) * self.dim

    @property
    def size(self) -> int:
        return (self.n + 1) ** self.dim

    @cached_property
    def axes(self) -> list:
        return [lo + self.h[k] * np.arange(self.n + 1) for k, (lo, hi) in enumerate(self.bounds)]

    @cached_property
    def nodes(self) -> np.ndarray:
        """Node coordinates, shape (size, dim), C order over the index tuple."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    def node(self, index) -> np.ndarray:
        index = np.asarray(index)
        return np.array([lo for lo, _ in self.bounds]) + index * self.h


@dataclass(frozen=True, eq=False)
class DomainMask:
    interior: np.ndarray
    boundary: np.ndarray
    exterior: np.ndarray

    @cached_property
    def interior_index(self) -> np.ndarray:
        return np.flatnonzero(self.interior)

    @property
    def n_interior(self) -> int:
        return int(self.interior_index.size)


def build_grid(spec: GroupSpec, bounds, n: int):
    """Uniform grid with ``n`` cells per axis over a box, plus its node mask.

    ``bounds`` is one ``(lo, hi)`` pair used on every axis, or one pair per
    axis.  Nodes on the box faces are boundary nodes; the open box is the
    domain.
    """
    if int(n) != n or n < 4:
        raise ConfigurationError(f"grid needs N >= 4 cells per axis, got {n!r}")
    n = int(n)
    bounds = np.asarray(bounds, dtype=float)
    if bounds.shape == (2,):
        bounds = np.tile(bounds, (spec.dim, 1))
    if bounds.shape != (spec.dim, 2):
        raise StructuralError(f"bounds must be (lo, hi) or {spec.dim} such pairs")
    if not np.all(bounds[:, 1] > bounds[:, 0]):
        raise ConfigurationError("box bounds must satisfy lo < hi on every axis")
    grid = Grid(spec, tuple(map(tuple, bounds.tolist())), n)
    idx = np.indices(grid.shape).reshape(spec.dim, -1)
    inner = np.all((idx > 0) & (idx < n), axis=0)
    mask = DomainMask(interior=inner, boundary=~inner, exterior=np.zeros_like(inner))
    return grid, mask


def extend(mask: DomainMask, u) -> np.ndarray:
    """Interior values -> values on every node (zero off the interior)."""
    u = np.asarray(u, dtype=float)
    if u.shape != (mask.n_interior,):
        raise StructuralError(f"expected {mask.n_interior} interior values, got shape {u.shape}")
    full = np.zeros(mask.interior.shape)
    full[mask.interior_index] = u
    return full


def sample(grid: Grid, mask: DomainMask, func) -> np.ndarray:
    """Interior values of ``func(points)`` where points has shape (m, dim)."""
    return np.asarray(func(grid.nodes[mask.interior_index]), dtype=float)


# ---------------------------------------------------------------- local part

def _stencil_terms(grid: Grid, pts: np.ndarray):
    """(offset, coefficient-per-interior-node) pairs for the -L stencil."""
    spec, h, dim = grid.spec, grid.h, grid.dim
    m = pts.shape[0]
    terms = []
    center = np.zeros(m)

    def unit(*pairs):
        off = [0] * dim
        for sgn, k in pairs:
            off[k] += sgn
        return tuple(off)

    def neg_second(k, coef):
        # coef * (-d_kk)
        nonlocal center
        center = center + 2.0 * coef / h[k] ** 2
        terms.append((unit((1, k)), -coef / h[k] ** 2))
        terms.append((unit((-1, k)), -coef / h[k] ** 2))

    def cross(k, l, coef):
        # coef * d_kl with the centred four-point stencil
        c = coef / (4.0 * h[k] * h[l])
        terms.append((unit((1, k), (1, l)), c))
        terms.append((unit((-1, k), (-1, l)), c))
        terms.append((unit((1, k), (-1, l)), -c))
        terms.append((unit((-1, k), (1, l)), -c))

    ones = np.ones(m)
    if not spec.is_heisenberg:
        for k in range(dim):
            neg_second(k, ones)
    else:
        n = spec.n
        t = 2 * n
        for i in range(n):
            a = pts[:, i]
            b = pts[:, n + i]
            # -X_i^2 = -d_aa + b d_at - (b^2/4) d_tt
            neg_second(i, ones)
            cross(i, t, b)
            neg_second(t, b * b / 4.0)
            # -Y_i^2 = -d_bb - a d_bt - (a^2/4) d_tt
            neg_second(n + i, ones)
            cross(n + i, t, -a)
            neg_second(t, a * a / 4.0)
    terms.append((unit(), center))
    return terms


def assemble_local_form(grid: Grid, mask: DomainMask) -> sp.csr_matrix:
    """Sparse matrix of -L on interior nodes (Dirichlet rows/columns removed).

    Every second-order term of X_i^2 = d_aa - b d_at + (b^2/4) d_tt has a
    coefficient that is constant along the directions it differentiates,
    so the centred stencil is symmetric and positive semidefinite as
    assembled; the final (M + M^T)/2 only removes rounding asymmetry.
    """
    idx = mask.interior_index
    multi = np.array(np.unravel_index(idx, grid.shape)).T
    pts = grid.nodes[idx]
    lookup = np.full(grid.size, -1, dtype=np.int64)
    lookup[idx] = np.arange(idx.size)
    rows, cols, vals = [], [], []
    for off, coef in _stencil_terms(grid, pts):
        nb = multi + np.asarray(off)
        inside = np.all((nb >= 0) & (nb <= grid.n), axis=1)
        flat = np.full(idx.size, -1, dtype=np.int64)
        flat[inside] = np.ravel_multi_index(nb[inside].T, grid.shape)
        col = np.where(flat >= 0, lookup[np.maximum(flat, 0)], -1)
        keep = (col >= 0) & (coef != 0)
        rows.append(np.flatnonzero(keep))
        cols.append(col[keep])
        vals.append(np.broadcast_to(coef, idx.shape)[keep])
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(idx.size, idx.size),
    ).tocsr()
    mat.sum_duplicates()
    return ((mat + mat.T) * 0.5).tocsr()


# ------------------------------------------------------------- nonlocal part

def _check_s(s):
    if not 0.0 < s < 1.0:
        raise DomainError(f"fractional order s must lie in (0, 1), got {s!r}")


def _vertical_reach(r, m):
    """max over rho in [0, r] of sqrt(r^4 - rho^4) + m*rho (vectorised)."""
    # stationary point: 4 t^3 + m^2 t^2 - m^2 r^4 = 0 with t = rho^2, one root in [0, r^2]
    lo = np.zeros_like(r)
    hi = r * r
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        f = 4 * mid**3 + m * m * mid * mid - m * m * r**4
        lo = np.where(f < 0, mid, lo)
        hi = np.where(f < 0, hi, mid)
    rho = np.sqrt(0.5 * (lo + hi))
    return np.sqrt(np.maximum(r**4 - rho**4, 0.0)) + m * rho


def inscribed_gauge_radius(grid: Grid, pts: np.ndarray) -> np.ndarray:
    """Largest R with the left-translated gauge ball x o B_R inside the box."""
    lo = np.array([b[0] for b in grid.bounds])
    hi = np.array([b[1] for b in grid.bounds])
    gap = np.minimum(pts - lo, hi - pts)
    spec = grid.spec
    if not spec.is_heisenberg:
        return gap.min(axis=1)
    n = spec.n
    r_h = gap[:, : 2 * n].min(axis=1)
    gap_v = gap[:, 2 * n]
    # a horizontal offset z moves the vertical coordinate by (a.z_b - b.z_a)/2,
    # at most |z| * |(a, b)| / 2
    m = 0.5 * np.linalg.norm(pts[:, : 2 * n], axis=1)
    lo_r = np.zeros_like(r_h)
    hi_r = r_h.copy()
    ok = _vertical_reach(hi_r, m) <= gap_v
    for _ in range(80):
        mid = 0.5 * (lo_r + hi_r)
        good = _vertical_reach(mid, m) <= gap_v
        lo_r = np.where(good, mid, lo_r)
        hi_r = np.where(good, hi_r, mid)
    return np.where(ok, r_h, lo_r)


def exterior_kernel_mass(spec: GroupSpec, radius, s: float, p: float = 2.0):
    """int_{|z| > R} |z|^{-(Q + p s)} dz = Q omega_Q R^{-p s} / (p s)."""
    omega = unit_ball_volume(spec)
    return spec.Q * omega / (p * s) * np.asarray(radius, dtype=float) ** (-p * s)


def assemble_nonlocal_form(grid: Grid, mask: DomainMask, s: float):
    """Dense fractional-Laplacian matrix on interior nodes and its tail.

    Returns ``(op, tail)`` with ``(op @ u)_i + tail_i u_i`` approximating
    (-Delta)^s u at interior node i.  ``op = cv * (diag(rowsum) - W)`` where
    W_ij = |x_j^{-1} o x_i|^{-(Q+2s)} over interior pairs and rowsum runs
    over every node of the box; ``tail`` bounds the kernel mass outside the
    box by the mass outside the largest inscribed gauge ball.
    """
    _check_s(s)
    spec = grid.spec
    idx = mask.interior_index
    x_in = grid.nodes[idx]
    w_all = kernels.pair_weights(spec, x_in, grid.nodes, spec.Q + 2 * s)
    rowsum = w_all.sum(axis=1)
    w = w_all[:, idx]
    del w_all
    op = -w
    op[np.diag_indices_from(op)] += rowsum
    op *= grid.cell_volume
    op = 0.5 * (op + op.T)
    tail = exterior_kernel_mass(spec, inscribed_gauge_radius(grid, x_in), s)
    return op, tail


# ------------------------------------------------------------ form container

@dataclass(eq=False)
class QuadraticForm:
    grid: Grid
    mask: DomainMask
    local: sp.csr_matrix
    nonlocal_op: np.ndarray | None
    tail: np.ndarray | None
    s: float
    theta_loc: float = 1.0
    theta_nonloc: float = 1.0

    @property
    def size(self) -> int:
        return self.mask.n_interior

    @property
    def cell_volume(self) -> float:
        return self.grid.cell_volume

    @property
    def tail_diag(self) -> np.ndarray:
        """Exterior-interaction diagonal in energy units (cell volume times tail)."""
        if self.tail is None:
            return np.zeros(self.size)
        return self.cell_volume * self.tail

    def fractional(self, u) -> np.ndarray:
        """Nodal values of (-Delta)^s u on the interior."""
        if self.nonlocal_op is None:
            raise DomainError("form was assembled without a nonlocal part")
        return self.nonlocal_op @ u + self.tail * u

    def operator(self, u) -> np.ndarray:
        """Nodal values of theta_loc (-L u) + theta_nonloc (-Delta)^s u."""
        out = self.theta_loc * (self.local @ u)
        if self.theta_nonloc != 0.0:
            out = out + self.theta_nonloc * self.fractional(u)
        return out

    def dense(self) -> np.ndarray:
        """Energy matrix M with form_energy(u) = u^T M u (small grids only)."""
        m = self.theta_loc * self.local.toarray()
        if self.theta_nonloc != 0.0:
            m = m + self.theta_nonloc * (self.nonlocal_op + np.diag(self.tail))
        return self.cell_volume * m

    def scaled(self, factor: float) -> "QuadraticForm":
        return QuadraticForm(self.grid, self.mask, self.local, self.nonlocal_op, self.tail,
                             self.s, self.theta_loc * factor, self.theta_nonloc * factor)


def build_form(grid, mask, s, theta_loc=1.0, theta_nonloc=1.0) -> QuadraticForm:
    if theta_loc < 0 or theta_nonloc < 0:
        raise DomainError("form weights must be nonnegative")
    _check_s(s)
    local = assemble_local_form(grid, mask)
    if theta_nonloc != 0.0:
        op, tail = assemble_nonlocal_form(grid, mask, s)
    else:
        op, tail = None, None
    return QuadraticForm(grid, mask, local, op, tail, s, theta_loc, theta_nonloc)


def _conform(A: QuadraticForm, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (A.size,):
        raise StructuralError(f"function has shape {u.shape}, form acts on {A.size} interior nodes")
    return u


def form_apply(A: QuadraticForm, u) -> np.ndarray:
    """Riesz action: the vector r with v @ r = <Au, v> for every v."""
    return A.cell_volume * A.operator(_conform(A, u))


def pairing(A: QuadraticForm, u, v) -> float:
    return float(_conform(A, v) @ form_apply(A, u))


def form_energy(A: QuadraticForm, u) -> float:
    """<Au, u>, the squared discrete X-norm when both weights are 1."""
    return pairing(A, u, u)


def x_norm(A: QuadraticForm, u) -> float:
    return float(np.sqrt(max(form_energy(A, u), 0.0)))


def difference_energy(A: QuadraticForm, u) -> float:
    """The same energy computed from its difference representation.

    Local part: squared one-sided differences along edges plus the centred
    cross products of the X_i, Y_i expansions.  Nonlocal part:
    (cv^2 / 2) sum_{i != j} W_ij (u_i - u_j)^2 over all box nodes plus the
    tail.  Used as an independent check of the assembled matrices.
    """
    u = _conform(A, u)
    grid, spec = A.grid, A.grid.spec
    cv = grid.cell_volume
    full = extend(A.mask, u).reshape(grid.shape)
    h = grid.h
    local = 0.0
    if A.theta_loc != 0.0:
        pts = grid.nodes.reshape(grid.shape + (grid.dim,))

        def fwd(k):
            return np.diff(full, axis=k) / h[k]

        def cen(k):
            pad = np.pad(full, [(1, 1) if j == k else (0, 0) for j in range(grid.dim)])
            sl_p = [slice(None)] * grid.dim
            sl_m = [slice(None)] * grid.dim
            sl_p[k] = slice(2, None)
            sl_m[k] = slice(None, -2)
            return (pad[tuple(sl_p)] - pad[tuple(sl_m)]) / (2 * h[k])

        def mid(arr, k):
            return 0.5 * (np.take(arr, np.arange(arr.shape[k] - 1), axis=k)
                          + np.take(arr, np.arange(1, arr.shape[k]), axis=k))

        if not spec.is_heisenberg:
            local = sum(np.sum(fwd(k) ** 2) for k in range(grid.dim))
        else:
            n, t = spec.n, 2 * spec.n
            dt = fwd(t)
            for i in range(n):
                a = pts[..., i]
                b = pts[..., n + i]
                # coefficient is constant along the t edge, so the endpoint value is exact
                bt = np.take(b, np.arange(grid.n), axis=t)
                at = np.take(a, np.arange(grid.n), axis=t)
                local += np.sum(fwd(i) ** 2) + np.sum(bt**2 / 4 * dt**2)
                local -= np.sum(b * cen(i) * cen(t))
                local += np.sum(fwd(n + i) ** 2) + np.sum(at**2 / 4 * dt**2)
                local += np.sum(a * cen(n + i) * cen(t))
        local *= cv
    nonloc = 0.0
    if A.theta_nonloc != 0.0:
        vals = full.ravel()
        rows = kernels.difference_rows(spec, grid.nodes, vals, grid.nodes, vals,
                                       spec.Q + 2 * A.s, 2.0)
        nonloc = 0.5 * cv * cv * float(np.sum(rows)) + cv * float(np.sum(A.tail * u * u))
    return A.theta_loc * local + A.theta_nonloc * nonloc


# -------------------------------------------------------- L^q and B pairing

def check_exponent(spec: GroupSpec, q: float) -> None:
    """Admissible range 1 < q < 2* (2* infinite when Q <= 2)."""
    crit = spec.critical_exponent
    if not (1.0 < q < crit):
        raise DomainError(f"exponent q={q!r} outside (1, 2*) with 2* = {crit:g} for {spec}")


def lq_norm(grid: Grid, u, q: float) -> float:
    u = np.asarray(u, dtype=float)
    return float(np.sum(np.abs(u) ** q) * grid.cell_volume) ** (1.0 / q)


def apply_B(grid: Grid, u, q: float) -> np.ndarray:
    """Mass-weighted ||u||_q^{2-q} |u|^{q-2} u, so u @ apply_B(u) = ||u||_q^2."""
    check_exponent(grid.spec, q)
    u = np.asarray(u, dtype=float)
    norm = lq_norm(grid, u, q)
    if norm == 0.0:
        return np.zeros_like(u)
    if q == 2.0:
        return grid.cell_volume * u
    return grid.cell_volume * norm ** (2.0 - q) * np.sign(u) * np.abs(u) ** (q - 1.0)
