import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phibvp import DomainError, PhiMap
from phibvp.phimaps import check_hypotheses

from oracles import (
    p_relativistic_inverse_scalar,
    p_relativistic_scalar,
    relativistic_inverse_scalar,
    relativistic_scalar,
)


def test_relativistic_known_values():
    # phi(0.6) = 0.6 / sqrt(1 - 0.36) = 0.75 at a = 1, and Phi(0) = -a
    m = PhiMap.relativistic(1.0)
    assert m.phi_eval(np.array([0.6]))[0] == pytest.approx(0.75, abs=1e-15)
    assert m.phi_eval(np.array([0.8]))[0] == pytest.approx(4.0 / 3.0, abs=1e-15)
    assert m.Phi_eval(np.array([0.0])) == pytest.approx(-1.0, abs=0)
    assert m.Phi_eval(np.array([0.6])) == pytest.approx(-0.8, abs=1e-15)
    assert m.phi0_value == -1.0
    assert m.phi_inverse(np.array([0.75]))[0] == pytest.approx(0.6, abs=1e-15)


def test_scaled_radius_is_reparametrization():
    # phi_a(y) = phi_1(y/a): doubling a doubles the slope giving the same flux
    m1 = PhiMap.relativistic(1.0)
    m2 = PhiMap.relativistic(2.0)
    y = np.linspace(-0.9, 0.9, 13)[:, None]
    np.testing.assert_allclose(m2.phi_eval(2 * y), m1.phi_eval(y), rtol=1e-14)
    assert m2.phi0_value == -2.0
    assert m2.Phi_eval(np.array([0.0])) == pytest.approx(-2.0)


def test_p3_profile_matches_hand_formula():
    m = PhiMap.p_relativistic(3.0, 1.0)
    for s in (0.1, 0.35, 0.5, 0.77, 0.93):
        assert m.phi_eval(np.array([s]))[0] == pytest.approx(
            p_relativistic_scalar(s, 3.0), rel=1e-14
        )
        # odd symmetry
        assert m.phi_eval(np.array([-s]))[0] == pytest.approx(
            -p_relativistic_scalar(s, 3.0), rel=1e-14
        )


def test_p3_inverse_against_bisection():
    m = PhiMap.p_relativistic(3.0, 1.0)
    for v in (1e-3, 0.2, 1.0, 7.5, 120.0, 4e4):
        got = m.phi_inverse(np.array([v]))[0]
        ref = p_relativistic_inverse_scalar(v, 3.0)
        assert got == pytest.approx(ref, rel=1e-12, abs=1e-14)
    assert m.phi_inverse(np.array([0.0]))[0] == 0.0


def test_relativistic_is_p2():
    m2 = PhiMap.p_relativistic(2.0, 1.5)
    mr = PhiMap.relativistic(1.5)
    y = np.linspace(-1.4, 1.4, 9)[:, None]
    np.testing.assert_allclose(m2.phi_eval(y), mr.phi_eval(y), rtol=1e-14)
    z = np.linspace(-30, 30, 9)[:, None]
    np.testing.assert_allclose(m2.phi_inverse(z), mr.phi_inverse(z), rtol=1e-14)


def test_eval_refuses_near_boundary_sample():
    m = PhiMap.relativistic(1.0)
    with pytest.raises(DomainError):
        m.phi_eval(np.array([1.0 - 1e-12]))
    with pytest.raises(DomainError):
        m.Phi_eval(np.array([1.0 + 1e-6]))
    # but the closed ball itself is fine for the potential
    assert m.Phi_eval(np.array([1.0])) == pytest.approx(0.0, abs=1e-12)


@given(
    s=st.floats(min_value=-0.93, max_value=0.93),
    a=st.floats(min_value=0.3, max_value=4.0),
)
@settings(max_examples=150, deadline=None)
def test_round_trip_property_relativistic(s, a):
    m = PhiMap.relativistic(a)
    y = np.array([s * a])
    z = m.phi_eval(y)
    back = m.phi_inverse(z)
    assert abs(back[0] - y[0]) <= 1e-12 * (1 + abs(y[0]))
    assert z[0] == pytest.approx(relativistic_scalar(s * a, a), rel=1e-13, abs=1e-300)


@given(
    v=st.floats(min_value=-1e6, max_value=1e6),
    p=st.sampled_from([1.5, 2.0, 3.0, 4.0]),
)
@settings(max_examples=150, deadline=None)
def test_inverse_lands_in_open_ball(v, p):
    m = PhiMap.p_relativistic(p, 1.0)
    y = m.phi_inverse(np.array([v]))
    assert np.isfinite(y[0])
    assert abs(y[0]) < 1.0


@given(
    v=st.floats(min_value=-50.0, max_value=50.0),
    p=st.sampled_from([1.5, 2.0, 3.0, 4.0]),
)
@settings(max_examples=150, deadline=None)
def test_inverse_round_trip_moderate_flux(v, p):
    # recovering z from phi(phi_inverse(z)) cancels digits in 1 - rho^p, so
    # the achievable accuracy degrades like |z|^(p/(p-1)) * eps; on this
    # range the 1e-9 relative tolerance still has two orders of headroom
    # at the worst corner (p = 1.5, |v| = 50)
    m = PhiMap.p_relativistic(p, 1.0)
    y = m.phi_inverse(np.array([v]))
    z = m.phi_eval(y, margin=0.0)
    assert abs(z[0] - v) <= 1e-9 * (1 + abs(v))


@given(
    s1=st.floats(min_value=-0.95, max_value=0.95),
    s2=st.floats(min_value=-0.95, max_value=0.95),
)
@settings(max_examples=150, deadline=None)
def test_monotone_property(s1, s2):
    m = PhiMap.p_relativistic(3.0, 1.0)
    y1, y2 = np.array([s1]), np.array([s2])
    d = (m.phi_eval(y1, margin=0.0) - m.phi_eval(y2, margin=0.0)) * (y1 - y2)
    assert d[0] >= -1e-14


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_large_flux_inverse_is_stable(p):
    # the naive rho = (s^pc/(1+s^pc))^(1/p) overflows near s ~ 1e300, and
    # the squared norm already overflows at s ~ 1e154; fluxes this large
    # all land on the largest representable interior radius, so ordering
    # is non-strict
    m = PhiMap.p_relativistic(p, 1.0)
    z = np.array([1e12, 1e150, 1e300])[:, None]
    y = m.phi_inverse(z)
    assert np.all(np.isfinite(y))
    assert np.all(y[:, 0] < 1.0)
    assert y[2, 0] >= y[1, 0] >= y[0, 0] > 0.999


def test_vectorized_shapes():
    m = PhiMap.relativistic(1.0)
    y = np.zeros((5, 4, 2))
    y[..., 0] = 0.3
    out = m.phi_eval(y)
    assert out.shape == (5, 4, 2)
    assert m.Phi_eval(y).shape == (5, 4)
    assert m.phi_jacobian(y).shape == (5, 4, 2, 2)


def test_jacobian_matches_finite_differences():
    m = PhiMap.p_relativistic(3.0, 1.0)
    rng = np.random.default_rng(3)
    y = rng.uniform(-0.4, 0.4, size=(6, 2))
    jac = m.phi_jacobian(y)
    eps = 1e-7
    for k in range(2):
        dy = np.zeros_like(y)
        dy[:, k] = eps
        fd = (m.phi_eval(y + dy) - m.phi_eval(y - dy)) / (2 * eps)
        np.testing.assert_allclose(jac[:, :, k], fd, atol=1e-6)


def test_hypothesis_audit_builtin_maps():
    for m in (PhiMap.relativistic(1.0), PhiMap.relativistic(0.5), PhiMap.p_relativistic(3.0, 2.0)):
        rep = check_hypotheses(m, n_samples=300, dim=2)
        assert rep.ok(), rep


def test_custom_map_and_numeric_inverse():
    # a hand-wrapped copy of the relativistic map without an inverse supplied
    phi = lambda y: y / np.sqrt(np.maximum(1 - np.sum(y * y, axis=-1, keepdims=True), 1e-300))
    Phi = lambda y: -np.sqrt(np.maximum(1 - np.sum(y * y, axis=-1), 0.0))
    m = PhiMap.custom(phi, Phi, a=1.0)
    z = np.array([[0.75], [3.0], [-10.0]])
    ref = np.array([relativistic_inverse_scalar(v) for v in z[:, 0]])[:, None]
    np.testing.assert_allclose(m.phi_inverse(z), ref, atol=1e-12)
    rep = check_hypotheses(m, n_samples=100)
    assert rep.ok(grad_tol=1e-5), rep


def test_non_monotone_custom_map_flagged():
    # deliberately broken: decreasing "profile" is not a gradient of a convex
    # potential and must be caught by the audit
    phi = lambda y: -y
    Phi = lambda y: -np.sqrt(np.maximum(1 - np.sum(y * y, axis=-1), 0.0))
    m = PhiMap.custom(phi, Phi, a=1.0, phi_inv=lambda z: -z * 0.5)
    rep = check_hypotheses(m, n_samples=100)
    assert not rep.ok()
    assert rep.monotonicity_min < 0
    # the bogus inverse escapes the ball; the audit must report that
    # rather than crash while evaluating phi there
    assert rep.inverse_radius_max >= 1.0


def test_invalid_parameters():
    with pytest.raises(DomainError):
        PhiMap.p_relativistic(1.0, 1.0)
    with pytest.raises(DomainError):
        PhiMap.relativistic(0.0)
    with pytest.raises(DomainError):
        PhiMap.relativistic(-2.0)
