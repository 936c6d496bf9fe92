"""Property-based checks of structural invariants."""
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from serrinlab.deviation import deviation_field, lp_norm, r_mean
from serrinlab.geometry import Ellipsoid, Fourier2D, boundary_grid
from serrinlab.harmonic import HarmonicBasis
from serrinlab.identities import deficits
from serrinlab.torsion import solve

axes = st.lists(st.floats(0.5, 2.0), min_size=2, max_size=5)
values = st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=30)


@settings(max_examples=40, deadline=None)
@given(axes, st.floats(-5, 5))
def test_deviation_hessian_trace_free_and_a_shift(a, shift):
    field = solve(Ellipsoid(tuple(a)))
    dev0 = deviation_field(field, np.zeros(len(a)))
    dev1 = deviation_field(field, np.zeros(len(a)), a=shift)
    x = 0.3 * np.asarray(a) * np.linspace(-1, 1, len(a))
    h0, g0, H0 = dev0.evaluate(x[None])
    h1, g1, H1 = dev1.evaluate(x[None])
    assert abs(np.trace(H0[0])) <= 1e-12 * np.abs(H0).max() + 1e-14
    np.testing.assert_allclose(h0 - h1, shift / 2, atol=1e-12)
    np.testing.assert_allclose(g0, g1)


@settings(max_examples=40, deadline=None)
@given(axes, st.floats(0.2, 5.0))
def test_deficits_scale_with_dilation(a, s):
    """Under x -> s x, u scales by s^2, so u_nu - R scales by s."""
    f1 = solve(Ellipsoid(tuple(a)))
    f2 = solve(Ellipsoid(tuple(s * np.asarray(a))))
    d1, d2 = deficits(f1), deficits(f2)
    N = len(a)
    assert np.isclose(d2.R, s * d1.R, rtol=1e-10)
    assert np.isclose(d2.serrin_l2, s * s ** ((N - 1) / 2) * d1.serrin_l2,
                      rtol=1e-8, atol=1e-12 * s ** ((N + 1) / 2))


@settings(max_examples=60, deadline=None)
@given(values, st.sampled_from([1.0, 1.5, 2.0, 3.0]), st.floats(-100, 100))
def test_r_mean_equivariance_and_optimality(v, r, c):
    v = np.asarray(v)
    w = np.linspace(1.0, 2.0, len(v))
    m = r_mean(v, w, r)
    assert v.min() - 1e-12 <= m <= v.max() + 1e-12
    assert np.isclose(r_mean(v + c, w, r), m + c, atol=1e-8 * (1 + abs(c) + np.abs(v).max()))

    def obj(lam):
        return float(w @ np.abs(v - lam) ** r)

    span = v.max() - v.min() + 1.0
    for lam in (m - 1e-3 * span, m + 1e-3 * span):
        assert obj(m) <= obj(lam) * (1 + 1e-9) + 1e-12


@settings(max_examples=40, deadline=None)
@given(values, st.floats(1.0, 6.0),
       st.floats(-10, 10).filter(lambda c: c == 0 or abs(c) > 1e-50))
def test_lp_norm_homogeneous(v, p, c):
    v = np.asarray(v)
    w = np.ones_like(v)
    assert np.isclose(lp_norm(c * v, w, p), abs(c) * lp_norm(v, w, p), rtol=1e-10, atol=1e-300)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 4), st.integers(1, 4), st.integers(0, 10 ** 6))
def test_harmonic_basis_is_harmonic(dim, degree, seed):
    rng = np.random.default_rng(seed)
    basis = HarmonicBasis(dim, degree, center=rng.normal(size=dim))
    x = rng.normal(size=(3, dim))
    h = 1e-4
    vals = basis.evaluate(x)[0]
    lap = -2 * dim * vals
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = h
        lap = lap + basis.evaluate(x + e)[0] + basis.evaluate(x - e)[0]
    lap /= h * h
    assert np.abs(lap).max() <= 1e-4 * (1 + np.abs(vals).max())


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 2 * np.pi))
def test_deficits_rotation_invariant(phi):
    base = Fourier2D((1.0, 0.0, 0.06), (0.0, 0.0))
    rot = Fourier2D((1.0, 0.0, 0.06 * np.cos(2 * phi)), (0.0, 0.06 * np.sin(2 * phi)))
    d0 = deficits(solve(base), boundary_grid(base))
    d1 = deficits(solve(rot), boundary_grid(rot))
    assert np.isclose(d0.serrin_l2, d1.serrin_l2, rtol=1e-8)
    assert np.isclose(d0.sbt_l2, d1.sbt_l2, rtol=1e-8)
