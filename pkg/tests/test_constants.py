import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from serrinlab import constants
from serrinlab.errors import InvalidDimension
from serrinlab.geometry import Ellipsoid, geometric_summary, unit_ball_volume


def test_tau_values():
    assert constants.tau(5, "serrin") == 0.5
    assert constants.tau(5, "sbt") == pytest.approx(2 / 3)
    assert constants.tau(3, "sbt") == 1
    assert constants.tau(2, "serrin") == 1
    assert constants.tau(3, "serrin", 0.2) == pytest.approx(0.8)
    assert constants.tau(4, "hk", 0.1) == pytest.approx(0.9)
    assert constants.tau(4, "serrin") == pytest.approx(2 / 3)
    assert constants.tau(6, "one-over-h") == pytest.approx(0.5)


def test_tau_errors():
    with pytest.raises(InvalidDimension):
        constants.tau(1, "serrin")
    with pytest.raises(ValueError):
        constants.tau(3, "unknown")
    with pytest.raises(ValueError):
        constants.tau(3, "serrin", 1.5)


def test_unit_ball_volume():
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)


def test_ledger_printed_examples():
    led = constants.ledger(geometric_summary(Ellipsoid((1.0, 1.0))), 2, 2, None, 1.0)
    assert led.a_Np == pytest.approx(4 / math.pi**0.25)
    assert led.alpha_Np == pytest.approx(math.sqrt(math.pi))
    assert led.b0_bound == pytest.approx(2.0)
    assert led.delta_z_lower_bound == pytest.approx(0.5)
    assert led.R == pytest.approx(1.0) and led.H0 == pytest.approx(1.0)
    assert led.placeholder_k
    assert led.tau_table["serrin"][5] == 0.5 and led.tau_table["sbt"][5] == pytest.approx(2 / 3)


def test_ledger_cli_example():
    led = constants.ledger(None, 5, 2, None, 3.0, d=4.0, r_i=0.5)
    assert led.delta_z == pytest.approx(0.25 / 6)
    assert led.volume_is_bound and led.delta_z_is_bound
    assert led.volume == pytest.approx(unit_ball_volume(5) * 2.0**5)


def test_convex_branch_not_above_general():
    assert constants.gradient_bound_convex(3, 2.0) <= constants.gradient_bound_general(3, 2.0, 5.0)
    assert constants.gradient_bound_general(2, 2.0, math.inf) == pytest.approx(3.0)
    assert constants.c_N(2) == 1.5 and constants.c_N(5) == 2.5


def test_mean_convex_flag():
    led = constants.ledger(None, 2, 2, 0.5, 1.0, d=2.5, r_i=0.3, r_e=0.4, mean_convex=True)
    assert led.mean_convex_unverified_constant


def test_l0_not_above_b0_when_delta_large():
    b0, L0 = constants.john_bounds(4.0, 0.5, 0.7)
    assert L0 <= b0


def test_mu_bounds_regimes():
    hs = constants.mu_inverse_bounds(3, 2, 2, 0.5, 2.0, 0.5, 0.6, 4.0)
    assert set(k for k in hs if k.startswith("hs")) and not any(k.startswith("bs") for k in hs)
    bs = constants.mu_inverse_bounds(3, 2, 2, 0.0, 2.0, 0.5, 0.6, 4.0)
    assert any(k.startswith("bs") for k in bs)
    none = constants.mu_inverse_bounds(2, 10, 2, 1.0, 2.0, 0.5, 0.6, 4.0)
    assert none == {}


pos = st.floats(0.1, 10.0)


@settings(max_examples=60, deadline=None)
@given(N=st.integers(2, 6), d=pos, re=pos, scale=st.floats(1.01, 3.0))
def test_gradient_bound_monotone(N, d, re, scale):
    assert constants.gradient_bound_general(N, d * scale, re) > constants.gradient_bound_general(N, d, re)
    assert constants.gradient_bound_general(N, d, re * scale) < constants.gradient_bound_general(N, d, re)


@settings(max_examples=60, deadline=None)
@given(N=st.integers(2, 6), p=st.floats(1.0, 6.0), d=pos, ri=st.floats(0.05, 1.0),
       M=pos, scale=st.floats(1.01, 3.0))
def test_lemma_constant_monotone(N, p, d, ri, M, scale):
    base = constants.lemma_oscillation_constant(N, p, d, ri, M)
    assert base > 0
    assert constants.lemma_oscillation_constant(N, p, d, ri, M * scale) > base
    assert constants.lemma_oscillation_constant(N, p, d, ri * scale, M) < base


@settings(max_examples=60, deadline=None)
@given(N=st.integers(2, 6), ri=st.floats(0.05, 2.0), M=pos, mu=st.floats(0.1, 10.0),
       scale=st.floats(1.01, 3.0))
def test_factors_monotone(N, ri, M, mu, scale):
    assert constants.trace_factor(N, ri * scale, mu) < constants.trace_factor(N, ri, mu)
    assert constants.trace_factor(N, ri, mu * scale) < constants.trace_factor(N, ri, mu)
    assert constants.feldman_factor(N, M * scale, 1.0, ri, mu) > constants.feldman_factor(N, M, 1.0, ri, mu)
    assert constants.distance_lower_bound(ri, M * scale) < constants.distance_lower_bound(ri, M)


@settings(max_examples=40, deadline=None)
@given(N=st.integers(2, 6), d=st.floats(0.5, 5.0), ri=st.floats(0.05, 0.25), p=st.floats(1.0, 4.0))
def test_ledger_entries_positive(N, d, ri, p):
    led = constants.ledger(None, N, p, None, 1.0, d=d, r_i=ri, surface=1.0)
    for key in ("volume", "M_bound_general", "a_Np", "alpha_Np", "b0_bound", "L0_bound",
                "delta_z", "trace_factor", "lemma_constant", "lemma_constant_geometric"):
        assert getattr(led, key) > 0
    assert all(v > 0 for v in led.mu_inverse.values())
    assert np.isfinite(led.feldman_factor)
