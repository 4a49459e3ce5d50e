import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thinfilm.entropy import (EntropyParams, G_eps_nodal, G_eps_prime, G_eps_prime_nodal,
                              G_eps_value, G_prime, G_value, dissipation, energy_report,
                              entropy_forcing, entropy_integral, mobility, mobility_prime)
from thinfilm.spectral import Field, Grid, seminorm_sq

PI_GRID = Grid(0.0, np.pi, 64)

# G_eps(z) = int_A^z (z - t) / (t_+^n + eps) dt and G'_eps, evaluated with
# mpmath at 30 digits: (z, n, A, eps) -> (G_eps, G'_eps)
MP_REFERENCE = {
    (-1.0, 2.0, 1.0, 1.0): (1.6319717536774209643, -1.7853981633974483096),
    (0.3, 3.0, 1.0, 1e-2): (0.76373035552842915007, -4.3851639210202366115),
    (2.5, 2.5, 1.2, 1e-4): (0.28539709136505943172, 0.33848429180534251476),
    (0.5, 2.0, 1.0, 1e-6): (0.19314684722726197466, -0.99999766667286664852),
}


def test_params_validation():
    with pytest.raises(ValueError):
        EntropyParams(n=2, A=0.0)
    with pytest.raises(ValueError):
        EntropyParams(n=2, A=1.0, eps=-1e-3)
    with pytest.raises(ValueError):
        EntropyParams(n=0.0, A=1.0)


@pytest.mark.parametrize("n", [1.0, 1.5, 2.0, 2.5, 3.0, 4.0])
def test_G_vanishes_with_its_derivative_at_anchor(n):
    p = EntropyParams(n, 1.7)
    assert G_value(1.7, p) == pytest.approx(0.0, abs=1e-15)
    assert G_prime(1.7, p) == pytest.approx(0.0, abs=1e-15)


def test_G_closed_form_examples():
    assert G_value(math.e, EntropyParams(2, 1.0)) == pytest.approx(math.e - 2, rel=1e-14)
    # n = 3: int_1^2 int_1^r t^-3 dt dr = 1/4
    assert G_value(2.0, EntropyParams(3, 1.0)) == pytest.approx(0.25, rel=1e-14)
    assert G_prime(2.0, EntropyParams(2, 1.0)) == pytest.approx(0.5, rel=1e-14)


def test_G_at_zero_and_negative():
    assert G_value(-0.1, EntropyParams(1.5, 1.0)) == math.inf
    assert G_value(0.0, EntropyParams(2.0, 1.0)) == math.inf
    assert G_value(0.0, EntropyParams(3.0, 1.0)) == math.inf
    assert G_value(0.0, EntropyParams(1.5, 1.0)) == pytest.approx(1.0 / 0.5)
    assert G_value(0.0, EntropyParams(1.0, 2.0)) == pytest.approx(2.0)


@settings(max_examples=200, deadline=None)
@given(n=st.sampled_from([1.0, 1.5, 2.0, 2.5, 3.0]), z1=st.floats(0.05, 20), z2=st.floats(0.05, 20),
       t=st.floats(0.0, 1.0))
def test_G_is_convex(n, z1, z2, t):
    p = EntropyParams(n, 1.0)
    mid = G_value(t * z1 + (1 - t) * z2, p)
    assert mid <= t * G_value(z1, p) + (1 - t) * G_value(z2, p) + 1e-12 * (1 + G_value(z1, p) + G_value(z2, p))


@pytest.mark.parametrize("n", [1.0, 1.5, 2.0, 3.0])
def test_G_derivatives_by_finite_differences(n):
    p = EntropyParams(n, 1.3)
    zs = np.linspace(0.2, 5.0, 20)
    for z in zs:
        h = 1e-4 * z
        fd1 = (G_value(z + h, p) - G_value(z - h, p)) / (2 * h)
        assert abs(fd1 - G_prime(z, p)) < 1e-6 * max(1.0, abs(G_prime(z, p)))
        fd2 = (G_prime(z + h, p) - G_prime(z - h, p)) / (2 * h)
        assert fd2 * z**n == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("key", list(MP_REFERENCE))
def test_G_eps_against_high_precision_reference(key):
    z, n, A, eps = key
    p = EntropyParams(n, A, eps)
    Gref, dref = MP_REFERENCE[key]
    assert G_eps_value(z, p) == pytest.approx(Gref, rel=1e-10)
    assert G_eps_prime(z, p) == pytest.approx(dref, rel=1e-10)
    assert float(G_eps_nodal(np.array([z]), p)[0]) == pytest.approx(Gref, rel=1e-10)
    assert float(G_eps_prime_nodal(np.array([z]), p)[0]) == pytest.approx(dref, rel=1e-10)


def test_G_eps_finite_below_zero():
    p = EntropyParams(2.0, 1.0, 1.0)
    v = G_eps_value(-1.0, p)
    assert np.isfinite(v) and v >= 0
    assert G_eps_value(1.0, p) == 0.0


def test_G_eps_tends_to_G():
    for z in (0.3, 0.8, 2.5):
        p0 = EntropyParams(2.0, 1.0)
        gaps = [G_value(z, p0) - G_eps_value(z, EntropyParams(2.0, 1.0, e)) for e in (1e-2, 1e-4, 1e-6)]
        assert all(g >= -1e-12 for g in gaps)
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 1e-5


@settings(max_examples=100, deadline=None)
@given(z=st.floats(-2.0, 6.0), n=st.sampled_from([1.5, 2.0, 3.0]),
       e1=st.floats(1e-6, 1e-1), ratio=st.floats(1.5, 100.0))
def test_G_eps_monotone_in_eps(z, n, e1, ratio):
    e2 = e1 * ratio
    g1 = G_eps_value(z, EntropyParams(n, 1.0, e1))
    g2 = G_eps_value(z, EntropyParams(n, 1.0, e2))
    assert g2 <= g1 + 1e-11 * max(1.0, g1)
    if z > 0:
        assert g1 <= G_value(z, EntropyParams(n, 1.0)) + 1e-11 * max(1.0, g1)


def test_nodal_path_matches_reference():
    rng = np.random.default_rng(0)
    for n in (2.0, 3.0, 2.5):
        p = EntropyParams(n, 1.1, 1e-6)
        z = rng.uniform(0.05, 4.0, 25)
        ref = np.array([G_eps_value(x, p) for x in z])
        dref = np.array([G_eps_prime(x, p) for x in z])
        assert np.allclose(G_eps_nodal(z, p), ref, rtol=1e-11, atol=1e-13)
        assert np.allclose(G_eps_prime_nodal(z, p), dref, rtol=1e-11, atol=1e-13)


@settings(max_examples=100, deadline=None)
@given(V=st.floats(0.05, 1.0), extra=st.floats(0.0, 10.0))
def test_G_prime_bound_above_lower_envelope(V, extra):
    # |G'(z)| <= V^{1-n} / (n - 1) for z >= V when n = 3, provided V <= A
    p = EntropyParams(3.0, 1.0)
    z = V + extra
    assert abs(G_prime(z, p)) <= V ** (-2) / 2 * (1 + 1e-12)


def test_G_prime_bound_needs_lower_envelope_below_anchor():
    # with V > A the bound fails for large z: |G'(z)| -> A^{1-n}/(n-1)
    p = EntropyParams(3.0, 1.0)
    V, z = 3.0, 100.0
    assert abs(G_prime(z, p)) > V ** (-2) / 2


def test_mobility():
    z = np.array([-1.0, 0.0, 0.5, 2.0])
    assert np.allclose(mobility(z, 2.0, 1e-3), [1e-3, 1e-3, 0.25 + 1e-3, 4 + 1e-3])
    assert np.allclose(mobility_prime(z, 2.0), [0.0, 0.0, 1.0, 4.0])
    assert np.allclose(mobility_prime(z, 0.5)[:2], 0.0)


def test_energy_report_constant_field():
    r = energy_report(Field.constant(PI_GRID, 2.0), None, 2.0, 0.75, 1e-6)
    assert r.J == pytest.approx(0.0, abs=1e-20)
    assert r.dissipation == pytest.approx(0.0, abs=1e-20)


def test_energy_report_forcing_on_eigenfunction():
    phi = PI_GRID.eigenfunction(1)
    r = energy_report(phi, phi, 2.0, 0.5, 0.0)
    assert r.forcing_term == pytest.approx(1.0, rel=1e-12)


def test_dissipation_positive_and_bounded_below():
    u = Field.constant(PI_GRID, 2.0) + PI_GRID.eigenfunction(1)
    eps = 1e-3
    D = dissipation(u, 0.75, 2.0, eps)
    assert D > 0
    assert D >= eps * seminorm_sq(u, 2 * 0.75 + 1) * (1 - 1e-10)


def test_entropy_integral_examples():
    p = EntropyParams(2.0, 1.5)
    assert entropy_integral(Field.constant(PI_GRID, 1.5), p) == pytest.approx(0.0, abs=1e-14)
    want = np.pi * (2.0 - math.log(2.0) - 1.0)
    assert entropy_integral(Field.constant(PI_GRID, 3.0), p) == pytest.approx(want, rel=1e-12)
    neg = Field.from_nodal(PI_GRID, np.linspace(-0.1, 1.0, PI_GRID.N))
    assert entropy_integral(neg, p) == math.inf
    assert math.isnan(entropy_forcing(neg, Field.constant(PI_GRID, 1.0), p))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), eps=st.sampled_from([0.0, 1e-6, 1e-3]))
def test_entropy_integral_nonnegative(seed, eps):
    rng = np.random.default_rng(seed)
    u = Field.from_nodal(PI_GRID, rng.uniform(0.1, 3.0, PI_GRID.N))
    assert entropy_integral(u, EntropyParams(2.5, 1.0, eps)) >= 0.0
