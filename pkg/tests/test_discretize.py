import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from carnoteig import (
    ConfigurationError, DomainError, GroupSpec, StructuralError, apply_B, assemble_local_form,
    build_form, build_grid, dense_smallest_eigenpair, form_apply, form_energy, lq_norm, pairing,
    sample,
)
from carnoteig import kernels
from carnoteig.discretize import (
    check_exponent, difference_energy, exterior_kernel_mass, inscribed_gauge_radius, x_norm,
)
from carnoteig.groups import dilate, koranyi_norm, multiply, unit_ball_volume

from conftest import heis_form

H1 = GroupSpec.heisenberg(1)
R1 = GroupSpec.abelian(1)


def test_grid_counts():
    grid, mask = build_grid(R1, (0, 1), 4)
    assert grid.size == 5 and mask.n_interior == 3
    grid, mask = build_grid(H1, (-1, 1), 8)
    assert grid.size == 729 and mask.n_interior == 343
    assert np.array_equal(mask.interior ^ mask.boundary ^ mask.exterior, np.ones(729, bool))
    with pytest.raises(ConfigurationError):
        build_grid(H1, (-1, 1), 2)
    with pytest.raises(ConfigurationError):
        build_grid(H1, (1, -1), 8)


def test_nodes_follow_affine_formula():
    grid, _ = build_grid(H1, [(-1, 1), (0, 2), (-0.5, 0.5)], 6)
    idx = np.unravel_index(np.arange(grid.size), grid.shape)
    for k in range(3):
        assert np.allclose(grid.nodes[:, k], grid.bounds[k][0] + idx[k] * grid.h[k])
    assert grid.cell_volume == pytest.approx(np.prod(grid.h))


def test_1d_stencil():
    grid, mask = build_grid(R1, (0, 1), 4)
    L = assemble_local_form(grid, mask).toarray()
    assert np.allclose(L[1], np.array([-1, 2, -1]) / 0.25 ** 2)


def test_second_difference_annihilates_affine():
    grid, mask = build_grid(R1, (0, 1), 16)
    L = assemble_local_form(grid, mask)
    r = L @ sample(grid, mask, lambda x: x[:, 0])
    assert np.all(r[1:-1] == 0)


def test_1d_discrete_eigenvalue():
    grid, mask = build_grid(R1, (0, 1), 16)
    A = build_form(grid, mask, 0.5, theta_nonloc=0.0)
    lam, _ = dense_smallest_eigenpair(A)
    h = 1 / 16
    exact = 2 / h ** 2 * (1 - math.cos(math.pi * h))
    assert exact == pytest.approx(9.83794, abs=1e-5)
    assert lam == pytest.approx(exact, rel=1e-10)


def test_abelian_convergence_order():
    errs = []
    for n in (8, 16, 32):
        grid, mask = build_grid(R1, (0, 1), n)
        lam, _ = dense_smallest_eigenpair(build_form(grid, mask, 0.5, theta_nonloc=0.0))
        errs.append(abs(lam - math.pi ** 2))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 1.9


def test_symmetry_and_psd(form8):
    M = form8.dense()
    assert np.max(np.abs(M - M.T)) == 0
    L = form8.local
    assert abs(L - L.T).max() == 0
    assert np.linalg.eigvalsh(M).min() > 0
    rng = np.random.default_rng(0)
    for _ in range(100):
        u = rng.standard_normal(form8.size)
        assert form_energy(form8, u) >= -1e-12 * (u @ u)


def test_nonlocal_sign_structure(form8):
    op = form8.nonlocal_op
    off = op - np.diag(np.diag(op))
    assert np.all(off <= 0)
    assert np.all(form8.tail > 0)


def test_kernel_symmetry_and_homogeneity():
    grid, _ = build_grid(H1, (-1, 1), 4)
    x = grid.nodes
    alpha = 4 + 2 * 0.5
    W = kernels.pair_weights(H1, x, x, alpha)
    assert np.array_equal(W, W.T)
    d = 1.7
    Wd = kernels.pair_weights(H1, dilate(H1, d, x), dilate(H1, d, x), alpha)
    nz = W > 0
    assert np.allclose(Wd[nz], d ** -alpha * W[nz], rtol=1e-12, atol=0)


def test_kernel_matches_gauge_of_group_difference():
    rng = np.random.default_rng(3)
    t, s = rng.uniform(-1, 1, (2, 20, 3))
    W = kernels.pair_weights(H1, t, s, 5.0)
    inv_s = -s
    expect = koranyi_norm(H1, multiply(H1, inv_s[None, :, :], t[:, None, :])) ** -5.0
    assert np.allclose(W, expect, rtol=1e-13)


def test_constant_has_zero_interaction_energy():
    # no exterior: take every node as a source and a constant vector
    grid, _ = build_grid(H1, (-1, 1), 4)
    ones = np.ones(grid.size)
    rows = kernels.difference_rows(H1, grid.nodes, ones, grid.nodes, ones, 5.0, 2.0)
    assert np.all(rows == 0)


def _exterior_integral(x, alpha, samples=400_000, seed=5):
    """int over {z : x o z outside [-1,1]^3} of |z|^-alpha dz, by Monte Carlo inside
    a gauge ball of radius M plus the exact mass beyond M."""
    M = 3.0
    rng = np.random.default_rng(seed)
    z = rng.uniform(-1, 1, (samples, 3)) * np.array([M, M, M * M])
    vol = (2 * M) ** 2 * (2 * M * M)
    r = koranyi_norm(H1, z)
    y = multiply(H1, x, z)
    outside = np.any(np.abs(y) >= 1, axis=1) & (r < M)
    inner = vol * np.mean(np.where(outside, r ** -alpha, 0.0))
    far = 4 * unit_ball_volume(H1) * M ** (4 - alpha) / (alpha - 4)
    # every point with |z| >= M lands outside the box (|x^{-1} y| < M for y in the box)
    return inner + far


def test_tail_center_vs_corner():
    A = heis_form(8)
    pts = A.grid.nodes[A.mask.interior_index]
    center = int(np.argmin(np.abs(pts).sum(axis=1)))
    corner = int(np.argmin(np.abs(pts - 0.75).sum(axis=1)))
    assert 0 < A.tail[center] < A.tail[corner]
    alpha = 4 + 2 * 0.5
    exact_c = _exterior_integral(pts[center], alpha)
    exact_k = _exterior_integral(pts[corner], alpha)
    assert exact_c < exact_k
    # inscribed-ball tail bounds the true exterior mass from above
    assert A.tail[center] >= 0.95 * exact_c
    assert A.tail[corner] >= 0.95 * exact_k


def test_inscribed_radius_keeps_ball_inside():
    grid, mask = build_grid(H1, (-1, 1), 8)
    pts = grid.nodes[mask.interior_index][::7]
    R = inscribed_gauge_radius(grid, pts)
    rng = np.random.default_rng(4)
    dirs = rng.standard_normal((2000, 3))
    # unit gauge: dilate (not scale) by the inverse norm
    dirs = dirs * (1 / koranyi_norm(H1, dirs))[:, None] ** H1.degrees
    assert np.allclose(koranyi_norm(H1, dirs), 1)
    for x, r in zip(pts, R):
        y = multiply(H1, x, dilate(H1, r * (1 - 1e-9), dirs))
        assert np.all(np.abs(y) <= 1 + 1e-12)


def test_exterior_mass_formula():
    m = exterior_kernel_mass(H1, 2.0, 0.5)
    assert m == pytest.approx(4 * unit_ball_volume(H1) / 1.0 * 2.0 ** -1.0)


def test_form_energy_examples(form8):
    rng = np.random.default_rng(1)
    u = rng.standard_normal(form8.size)
    assert form_energy(form8, np.zeros(form8.size)) == 0
    assert form_energy(form8, 3 * u) == pytest.approx(9 * form_energy(form8, u), rel=1e-13)
    assert u @ form_apply(form8, u) == form_energy(form8, u)


def test_energy_matches_difference_form(form8):
    rng = np.random.default_rng(2)
    for _ in range(5):
        u = rng.standard_normal(form8.size)
        assert form_energy(form8, u) == pytest.approx(difference_energy(form8, u), rel=1e-12)
        assert x_norm(form8, u) ** 2 == pytest.approx(form_energy(form8, u), rel=1e-14)


def test_grid_mismatch(form8):
    with pytest.raises(StructuralError):
        form_energy(form8, np.ones(10))


def test_exponent_range():
    check_exponent(H1, 3.99)
    with pytest.raises(DomainError):
        check_exponent(H1, 4.0)
    with pytest.raises(DomainError):
        check_exponent(H1, 1.0)
    check_exponent(GroupSpec.abelian(2), 100.0)


def test_B_examples(form8):
    grid = form8.grid
    rng = np.random.default_rng(3)
    u = rng.standard_normal(form8.size)
    assert np.array_equal(apply_B(grid, u, 2.0), grid.cell_volume * u)
    for q in (1.5, 3.0):
        assert u @ apply_B(grid, u, q) == pytest.approx(lq_norm(grid, u, q) ** 2, rel=1e-13)
    assert np.array_equal(apply_B(grid, np.zeros(5), 1.5), np.zeros(5))


def test_build_form_rejects_bad_s():
    grid, mask = build_grid(H1, (-1, 1), 4)
    for s in (0.0, 1.0, -0.2):
        with pytest.raises(DomainError):
            build_form(grid, mask, s)


def test_operator_consistency_on_smooth_function():
    # local part of the operator applied to a quadratic: -(X^2 + Y^2) of
    # a^2 + b^2 + c^2 is -(2 + 2 + (a^2 + b^2)/2)
    grid, mask = build_grid(H1, (-1, 1), 8)
    A = build_form(grid, mask, 0.5, theta_nonloc=0.0)
    pts = grid.nodes[mask.interior_index]
    u = np.sum(pts ** 2, axis=1)
    deep = np.all(np.abs(pts) < 0.7, axis=1)
    expect = -(4 + 0.5 * (pts[:, 0] ** 2 + pts[:, 1] ** 2))
    assert np.allclose(A.operator(u)[deep], expect[deep], atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(-5, 5), st.floats(-5, 5))
def test_pairing_is_symmetric_bilinear(seed, c1, c2):
    A = heis_form(8)
    rng = np.random.default_rng(seed)
    u, v, w = rng.standard_normal((3, A.size))
    assert pairing(A, u, v) == pytest.approx(pairing(A, v, u), rel=1e-12, abs=1e-12)
    lhs = pairing(A, c1 * u + c2 * w, v)
    rhs = c1 * pairing(A, u, v) + c2 * pairing(A, w, v)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-9)
