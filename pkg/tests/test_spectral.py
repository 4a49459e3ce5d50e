import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thinfilm.spectral import (Field, Grid, apply_I, basis, calibrate_kernel_constant,
                               dx_of_cosine_series, div_of_sine_series, fractional_laplacian,
                               inverse_transform, kernel_apply, operators, seminorm, seminorm_sq,
                               solve_fractional_poisson)

PI_GRID = Grid(0.0, np.pi, 128)
UNIT_GRID = Grid(0.0, 1.0, 128)


def random_field(grid, rng, decay=2.0):
    k = np.arange(grid.N)
    return Field.from_coeffs(grid, rng.standard_normal(grid.N) * (1.0 + k) ** (-decay))


def inner(f, g):
    return float(np.sum(f.nodal * g.nodal) * f.grid.h)


# --- grid and basis --------------------------------------------------------

def test_grid_rejects_bad_interval():
    with pytest.raises(ValueError):
        Grid(1.0, 1.0, 8)
    with pytest.raises(ValueError):
        Grid(0.0, 1.0, 1)


def test_midpoint_nodes():
    g = Grid(0.0, 1.0, 4)
    assert np.allclose(g.nodes, [0.125, 0.375, 0.625, 0.875])


def test_basis_is_orthonormal_on_nodes():
    B = basis(PI_GRID)
    Phi = PI_GRID.cosine_at(PI_GRID.nodes)
    gram = Phi @ Phi.T * PI_GRID.h
    assert np.max(np.abs(gram - np.eye(PI_GRID.N))) < 1e-12
    assert np.max(np.abs(B.forward @ B.inverse - np.eye(PI_GRID.N))) < 1e-12


@pytest.mark.parametrize("grid", [PI_GRID, UNIT_GRID, Grid(-1.0, 2.5, 64)])
def test_transform_round_trip(grid):
    rng = np.random.default_rng(1)
    u = rng.standard_normal(grid.N)
    f = Field.from_nodal(grid, u)
    back = inverse_transform(grid, f.coeffs)
    assert np.linalg.norm(back - u) <= 1e-12 * np.linalg.norm(u)


def test_constant_field_coefficients():
    f = Field.constant(UNIT_GRID, 2.0)
    assert f.coeffs[0] == pytest.approx(2.0)
    assert np.max(np.abs(f.coeffs[1:])) < 1e-13
    assert f.mean() == pytest.approx(2.0)
    assert f.integral() == pytest.approx(2.0)


# --- the fractional operator ----------------------------------------------

@pytest.mark.parametrize("s", [0.25, 0.5, 0.75, 1.0])
def test_apply_I_on_eigenfunctions(s):
    g = PI_GRID
    for k in range(0, g.N // 2 + 1):
        phi = g.eigenfunction(k)
        got = apply_I(phi, s).nodal
        want = -g.eigenvalue_power(s)[k] * phi.nodal
        scale = max(np.linalg.norm(want), 1e-300)
        assert np.linalg.norm(got - want) <= 1e-12 * scale + (1e-14 if k == 0 else 0.0)


def test_eigenfunction_example_values():
    # on (0, pi) lambda_k = k^2, so lambda_3^{1/2} = 3
    phi3 = PI_GRID.eigenfunction(3)
    assert np.allclose(apply_I(phi3, 0.5).nodal, -3.0 * phi3.nodal, atol=1e-12)


def test_s_equal_one_is_the_laplacian():
    g = PI_GRID
    x = g.nodes
    f = Field.from_function(g, lambda x: np.cos(2 * x) + 0.5 * np.cos(5 * x))
    assert np.allclose(apply_I(f, 1.0).nodal, -4 * np.cos(2 * x) - 12.5 * np.cos(5 * x), atol=1e-10)


def test_apply_I_rejects_bad_order():
    f = PI_GRID.eigenfunction(1)
    for s in (0.0, -0.5, 1.5):
        with pytest.raises(ValueError):
            apply_I(f, s)


def test_seminorm_conventions():
    g = PI_GRID
    f = Field.from_coeffs(g, [2.0, 0.0, 0.5])
    assert seminorm_sq(f, 0.0) == pytest.approx(4.25)      # mean mode included
    assert seminorm_sq(f, 0.5) == pytest.approx(0.25 * 2.0)  # lambda_2^{1/2} = 2
    with pytest.raises(ValueError):
        seminorm_sq(f, -1.0)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), s=st.floats(0.05, 0.95))
def test_operator_identities_random_fields(seed, s):
    g = PI_GRID
    rng = np.random.default_rng(seed)
    u = random_field(g, rng)
    ops = operators(g, s)
    h = g.h
    Iu = apply_I(u, s)
    tol = 1e-8
    # [u]_s^2 = -<I u, u>
    assert abs(-inner(Iu, u) - seminorm_sq(u, s)) <= tol * max(1.0, seminorm_sq(u, s))
    # [u]_{2s}^2 = int (I u)^2
    assert abs(inner(Iu, Iu) - seminorm_sq(u, 2 * s)) <= tol * max(1.0, seminorm_sq(u, 2 * s))
    # [u]_{s+1}^2 = -int dx(I u) dx(u)
    dIu = ops.dxI_matrix @ u.nodal
    du = basis(g).dx_matrix @ u.nodal
    lhs3 = -float(np.sum(dIu * du) * h)
    assert abs(lhs3 - seminorm_sq(u, s + 1)) <= tol * max(1.0, seminorm_sq(u, s + 1))
    # [u]_{2s+1}^2 = int (dx I u)^2
    lhs4 = float(np.sum(dIu * dIu) * h)
    assert abs(lhs4 - seminorm_sq(u, 2 * s + 1)) <= tol * max(1.0, seminorm_sq(u, 2 * s + 1))


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), s1=st.floats(0.0, 1.5), s2=st.floats(0.0, 1.5))
def test_fractional_powers_commute(seed, s1, s2):
    rng = np.random.default_rng(seed)
    u, v = random_field(PI_GRID, rng, 2.5), random_field(PI_GRID, rng, 2.5)
    lhs = inner(fractional_laplacian(u, s1), fractional_laplacian(v, s2))
    rhs = inner(fractional_laplacian(u, s1 + s2), v)
    scale = float(np.sum(np.abs(u.coeffs * v.coeffs) * PI_GRID.eigenvalue_power(s1 + s2)))
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, scale)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), s1=st.floats(0.05, 1.0), s2=st.floats(0.05, 1.0))
def test_semigroup_law(seed, s1, s2):
    u = random_field(PI_GRID, np.random.default_rng(seed))
    twice = apply_I(apply_I(u, s1), s2).coeffs       # (-1)^2 lambda^{s1+s2} c
    want = u.coeffs * PI_GRID.eigenvalue_power(s1 + s2)
    assert np.max(np.abs(twice - want)) <= 1e-12 * max(1.0, np.max(np.abs(want)))


def test_dx_of_constant_is_zero():
    # roundoff in the high coefficients is amplified by k <= N
    assert np.max(np.abs(dx_of_cosine_series(Field.constant(PI_GRID, 3.0)))) < 1e-10


def test_dx_matches_analytic_derivative():
    g = PI_GRID
    f = Field.from_function(g, lambda x: np.cos(3 * x))
    assert np.allclose(dx_of_cosine_series(f), -3 * np.sin(3 * g.nodes), atol=1e-11)


def test_divergence_has_zero_mass():
    rng = np.random.default_rng(3)
    d = div_of_sine_series(PI_GRID, rng.standard_normal(PI_GRID.N))
    assert d.coeffs[0] == 0.0
    with pytest.raises(ValueError):
        div_of_sine_series(PI_GRID, np.zeros(5))


def test_divergence_inverts_derivative():
    g = PI_GRID
    f = Field.from_function(g, lambda x: np.cos(2 * x) + 0.1 * np.cos(7 * x))
    back = div_of_sine_series(g, dx_of_cosine_series(f))
    assert np.allclose(back.nodal, -4 * np.cos(2 * g.nodes) - 4.9 * np.cos(7 * g.nodes), atol=1e-10)


def test_matrix_operators_agree_with_field_operators():
    g, s = Grid(0.0, 2.0, 48), 0.6
    rng = np.random.default_rng(7)
    u = random_field(g, rng)
    ops = operators(g, s)
    assert np.allclose(ops.I_matrix @ u.nodal, apply_I(u, s).nodal, atol=1e-12)
    dI = dx_of_cosine_series(apply_I(u, s))
    assert np.allclose(ops.dxI_matrix @ u.nodal, dI, atol=1e-10)


# --- fractional Poisson ----------------------------------------------------

def test_poisson_on_eigenfunction():
    u = solve_fractional_poisson(PI_GRID.eigenfunction(3), 0.5)
    assert np.allclose(u.nodal, PI_GRID.eigenfunction(3).nodal / 3.0, atol=1e-13)


def test_poisson_zero_rhs():
    u = solve_fractional_poisson(Field.from_coeffs(PI_GRID, np.zeros(PI_GRID.N)), 0.4)
    assert np.all(u.nodal == 0.0)


def test_poisson_round_trip_and_mean_check():
    rng = np.random.default_rng(11)
    c = rng.standard_normal(PI_GRID.N) / (1.0 + np.arange(PI_GRID.N)) ** 2
    c[0] = 0.0
    gfield = Field.from_coeffs(PI_GRID, c)
    u = solve_fractional_poisson(gfield, 0.7)
    assert abs(u.coeffs[0]) < 1e-15
    assert np.linalg.norm(apply_I(u, 0.7).nodal + gfield.nodal) < 1e-10
    with pytest.raises(ValueError):
        solve_fractional_poisson(gfield + Field.constant(PI_GRID, 1.0), 0.7)


# --- singular integral form --------------------------------------------------

def test_kernel_of_constant_vanishes():
    out = kernel_apply(Field.constant(UNIT_GRID, 2.5), 0.5)
    assert np.max(np.abs(out.nodal)) < 1e-12


def _kernel_error(N, s, k):
    g = Grid(0.0, 1.0, N)
    f = g.eigenfunction(k)
    want = apply_I(f, s).nodal
    return np.linalg.norm(kernel_apply(f, s).nodal - want) / np.linalg.norm(want)


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("k", [2, 3])
def test_kernel_matches_spectral_operator(s, k):
    assert _kernel_error(64, s, k) < 0.05


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_kernel_error_decreases_with_refinement(s):
    errs = [_kernel_error(N, s, 2) for N in (32, 64, 128)]
    assert errs[2] < errs[0]
    assert errs[2] < errs[1] * 1.0001


def test_kernel_calibration_constant_is_positive():
    for s in (0.3, 0.5, 0.7):
        assert calibrate_kernel_constant(Grid(0.0, 1.0, 64), s) > 0


def test_seminorm_homogeneity():
    rng = np.random.default_rng(2)
    u = random_field(PI_GRID, rng)
    assert seminorm(u * -3.0, 0.75) == pytest.approx(3.0 * seminorm(u, 0.75), rel=1e-13)
