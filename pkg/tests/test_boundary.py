import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phibvp import (
    BoundaryFunctional,
    ConvexSetK,
    DomainError,
    SmoothBoundaryTerm,
    j_eval,
    normal_cone_membership,
    projections_bounded,
    prox_j,
)
from phibvp.boundary import (
    bounded_on_domain,
    cone_diagonal_trivial,
    diagonal_zero,
    pair,
    project_K,
    projection_radii,
    prox_pair,
    shift_invariant_diagonal,
    subdifferential_residual,
)

from oracles import cone_contains_sampled, prox_bruteforce_catalog, sample_set_pairs


def _bf(set_k, g=None):
    return BoundaryFunctional(set=set_k, g=g)


# -- membership / projection ------------------------------------------------------


def test_point_set_values():
    bf = _bf(ConvexSetK.point())
    assert j_eval(bf, [0.0], [0.0]) == 0.0
    assert j_eval(bf, [1.0], [0.0]) == math.inf
    assert projections_bounded(bf) == (True, True)


def test_strip_projection_example():
    k = ConvexSetK.strip(1.0)
    px, py = project_K(k, [2.0], [0.0])
    assert px[0] == pytest.approx(1.5)
    assert py[0] == pytest.approx(0.5)
    # inside: identity
    qx, qy = project_K(k, [0.3], [-0.2])
    assert qx[0] == 0.3 and qy[0] == -0.2


def test_strip_aliases():
    assert ConvexSetK.strip(0.0).kind == "diagonal"
    assert ConvexSetK.strip(math.inf).kind == "full"
    with pytest.raises(DomainError):
        ConvexSetK.strip(-1.0)
    with pytest.raises(DomainError):
        ConvexSetK.subspace(0.0, 0.0)


def test_projection_idempotent_and_nonexpansive():
    rng = np.random.default_rng(11)
    sets = [
        ConvexSetK.point(),
        ConvexSetK.full_space(),
        ConvexSetK.diagonal(),
        ConvexSetK.antidiagonal(),
        ConvexSetK.subspace(2.0, -1.0),
        ConvexSetK.strip(0.7),
    ]
    for k in sets:
        for _ in range(25):
            z = pair(rng.normal(size=2), rng.normal(size=2))
            w = pair(rng.normal(size=2), rng.normal(size=2))
            pz, pw = k.project(z), k.project(w)
            np.testing.assert_allclose(k.project(pz), pz, atol=1e-13)
            assert np.linalg.norm(pz - pw) <= np.linalg.norm(z - w) + 1e-13
            assert k.contains(pz)


# -- normal cones ---------------------------------------------------------------


def test_strip_cone_examples():
    k = ConvexSetK.strip(1.0)
    z = pair([1.0], [0.0])  # on the boundary: |z1 - z2| = sigma
    assert normal_cone_membership(k, z, pair([2.0], [-2.0]))
    assert not normal_cone_membership(k, z, pair([-2.0], [2.0]))  # inward
    assert not normal_cone_membership(k, z, pair([2.0], [2.0]))
    z_in = pair([0.2], [0.0])  # interior: cone is {0}
    assert normal_cone_membership(k, z_in, pair([0.0], [0.0]))
    assert not normal_cone_membership(k, z_in, pair([1e-3], [0.0]))


def test_diagonal_cone_is_antidiagonal():
    k = ConvexSetK.diagonal()
    z = pair([0.7], [0.7])
    assert normal_cone_membership(k, z, pair([3.0], [-3.0]))
    assert not normal_cone_membership(k, z, pair([3.0], [-2.9]))


def test_subspace_cone():
    # K = span{(3, 2)}; the cone at any point is its orthogonal complement
    k = ConvexSetK.subspace(2.0, 3.0)
    z = pair([3.0], [2.0])
    assert k.contains(z)
    assert normal_cone_membership(k, z, pair([2.0], [-3.0]))
    assert not normal_cone_membership(k, z, pair([2.0], [3.0]))


def test_cone_query_outside_set_raises():
    with pytest.raises(DomainError):
        normal_cone_membership(ConvexSetK.diagonal(), pair([1.0], [0.0]), pair([0.0], [0.0]))


@pytest.mark.parametrize(
    "kind,kwargs",
    [
        ("diagonal", {}),
        ("strip", {"sigma": 0.8}),
        ("subspace", {"a_coef": 1.0, "b_coef": -2.0}),
        ("antidiagonal", {}),
    ],
)
def test_cone_against_sampled_separation(kind, kwargs):
    # closed form vs brute-force separation over sampled members of the set
    rng = np.random.default_rng(5)
    if kind == "strip":
        k = ConvexSetK.strip(kwargs["sigma"])
    elif kind == "subspace":
        k = ConvexSetK.subspace(kwargs["a_coef"], kwargs["b_coef"])
    elif kind == "antidiagonal":
        k = ConvexSetK.antidiagonal()
    else:
        k = ConvexSetK.diagonal()
    samples = sample_set_pairs(kind, 500, rng, radius=4.0, n_dim=2, **kwargs)
    for _ in range(100):
        z = k.project(pair(rng.normal(size=2), rng.normal(size=2)))
        xi = pair(rng.normal(size=2), rng.normal(size=2))
        closed = k.normal_cone_membership(z, xi)
        sampled = cone_contains_sampled(samples, z, xi, tol=1e-7)
        assert closed == sampled, (kind, z, xi)


# -- smooth terms and j values -----------------------------------------------------


def test_smooth_term_values():
    g = SmoothBoundaryTerm.exp_diff()
    z = pair([1.0], [0.0])
    assert g.value(z) == pytest.approx(0.5 * (math.e - 1.0))
    gr = g.grad(z)
    assert gr[0, 0] == pytest.approx(math.e)
    assert gr[1, 0] == pytest.approx(-math.e)

    q = SmoothBoundaryTerm.quadratic_diff(2.0)
    assert q.value(z) == pytest.approx(1.0)
    assert q.grad(z)[0, 0] == pytest.approx(2.0)


def test_custom_term_must_vanish_at_origin():
    with pytest.raises(DomainError):
        SmoothBoundaryTerm.custom(lambda z: 1.0, lambda z: np.zeros_like(z))
    with pytest.raises(DomainError):
        SmoothBoundaryTerm.custom(lambda z: 0.0, lambda z: np.ones_like(z))


def test_j_eval_composite():
    bf = _bf(ConvexSetK.strip(1.0), SmoothBoundaryTerm.exp_diff())
    assert j_eval(bf, [0.5], [0.0]) == pytest.approx(0.5 * (math.exp(0.25) - 1.0))
    assert j_eval(bf, [2.0], [0.0]) == math.inf  # outside the strip


def test_structure_flags():
    periodic = _bf(ConvexSetK.diagonal())
    pinned = _bf(ConvexSetK.point())
    # the diagonal itself (and anything containing it) has nontrivial diagonal rays
    assert not cone_diagonal_trivial(periodic)
    assert not cone_diagonal_trivial(_bf(ConvexSetK.full_space()))
    assert not cone_diagonal_trivial(_bf(ConvexSetK.strip(0.5)))
    assert cone_diagonal_trivial(pinned)
    assert cone_diagonal_trivial(_bf(ConvexSetK.antidiagonal()))
    assert cone_diagonal_trivial(_bf(ConvexSetK.subspace(2.0, 1.0)))
    assert not cone_diagonal_trivial(_bf(ConvexSetK.subspace(1.0, 1.0)))

    assert shift_invariant_diagonal(periodic)
    assert diagonal_zero(periodic)
    assert not shift_invariant_diagonal(pinned)
    assert not diagonal_zero(_bf(ConvexSetK.antidiagonal()))

    assert projections_bounded(pinned) == (True, True)
    assert projections_bounded(periodic) == (False, False)
    assert projection_radii(pinned) == (0.0, 0.0)
    assert projection_radii(periodic) == (math.inf, math.inf)

    assert bounded_on_domain(_bf(ConvexSetK.strip(1.0), SmoothBoundaryTerm.exp_diff()))
    assert not bounded_on_domain(_bf(ConvexSetK.full_space(), SmoothBoundaryTerm.exp_diff()))
    assert bounded_on_domain(_bf(ConvexSetK.full_space()))


# -- prox -------------------------------------------------------------------------

_GAP_FORMULAS = {
    "exp": lambda rho: 0.5 * (math.exp(rho * rho) - 1.0),
    "quad": lambda rho: 0.5 * 1.3 * rho * rho,
}


def test_prox_without_smooth_term_is_projection():
    bf = _bf(ConvexSetK.strip(1.0))
    px, py = prox_j(bf, [2.0], [0.0], step=3.7)
    assert px[0] == pytest.approx(1.5)
    assert py[0] == pytest.approx(0.5)


def test_prox_rejects_nonpositive_step():
    bf = _bf(ConvexSetK.full_space(), SmoothBoundaryTerm.exp_diff())
    with pytest.raises(DomainError):
        prox_j(bf, [0.1], [0.0], step=0.0)


@pytest.mark.parametrize(
    "kind,kwargs",
    [
        ("full", {}),
        ("strip", {"sigma": 1.0}),
        ("diagonal", {}),
        ("antidiagonal", {}),
        ("subspace", {"a_coef": 2.0, "b_coef": 1.0}),
    ],
)
@pytest.mark.parametrize("term", ["exp", "quad"])
def test_prox_matches_bruteforce(kind, kwargs, term):
    if kind == "full":
        set_k = ConvexSetK.full_space()
    elif kind == "strip":
        set_k = ConvexSetK.strip(kwargs["sigma"])
    elif kind == "diagonal":
        set_k = ConvexSetK.diagonal()
    elif kind == "antidiagonal":
        set_k = ConvexSetK.antidiagonal()
    else:
        set_k = ConvexSetK.subspace(kwargs["a_coef"], kwargs["b_coef"])
    g = SmoothBoundaryTerm.exp_diff() if term == "exp" else SmoothBoundaryTerm.quadratic_diff(1.3)
    bf = _bf(set_k, g)

    rng = np.random.default_rng(17)
    for _ in range(6):
        z1, z2 = rng.uniform(-1.5, 1.5, size=2)
        step = float(rng.uniform(0.2, 2.5))
        px, py = prox_j(bf, [z1], [z2], step)
        b1, b2, cell = prox_bruteforce_catalog(
            kind, _GAP_FORMULAS[term], z1, z2, step, n=121, **kwargs
        )
        assert abs(px[0] - b1) <= 2 * cell
        assert abs(py[0] - b2) <= 2 * cell


def test_prox_stationarity_exact():
    # interior prox points must satisfy the optimality equation far beyond
    # anything a grid search could certify
    bf = _bf(ConvexSetK.full_space(), SmoothBoundaryTerm.exp_diff())
    rng = np.random.default_rng(23)
    for _ in range(20):
        z = pair(rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2))
        step = float(rng.uniform(0.05, 4.0))
        w = prox_pair(bf, z, step)
        grad = (w - z) + step * bf.g.grad(w)
        assert float(np.max(np.abs(grad))) < 5e-11


@given(
    z1=st.floats(min_value=-2, max_value=2),
    z2=st.floats(min_value=-2, max_value=2),
    w1=st.floats(min_value=-2, max_value=2),
    w2=st.floats(min_value=-2, max_value=2),
    step=st.floats(min_value=0.1, max_value=3.0),
)
@settings(max_examples=80, deadline=None)
def test_prox_nonexpansive_property(z1, z2, w1, w2, step):
    bf = _bf(ConvexSetK.strip(1.0), SmoothBoundaryTerm.exp_diff())
    a = prox_pair(bf, pair([z1], [z2]), step)
    b = prox_pair(bf, pair([w1], [w2]), step)
    lhs = float(np.linalg.norm(a - b))
    rhs = float(np.linalg.norm(pair([z1], [z2]) - pair([w1], [w2])))
    assert lhs <= rhs + 1e-9


def test_prox_custom_term_fallback():
    # a custom (non-difference-form) term exercises the projected-gradient route
    g = SmoothBoundaryTerm.custom(
        lambda z: 0.5 * float(np.sum(z ** 2)),
        lambda z: z,
        difference_form=False,
    )
    bf = _bf(ConvexSetK.full_space(), g)
    z = pair([1.0], [-2.0])
    w = prox_pair(bf, z, step=1.0, tol=1e-12)
    # closed form for this g: w = z / (1 + step)
    np.testing.assert_allclose(w, z / 2.0, atol=1e-10)


# -- subdifferential residual -------------------------------------------------------


def test_subdifferential_residual_at_true_pairs():
    bf = _bf(ConvexSetK.diagonal())
    z = pair([0.4], [0.4])
    xi = pair([1.7], [-1.7])  # in the normal cone
    assert subdifferential_residual(bf, z, xi) <= 1e-12
    bad = pair([1.7], [0.0])
    assert subdifferential_residual(bf, z, bad) > 1e-3


def test_subdifferential_residual_with_smooth_term():
    bf = _bf(ConvexSetK.full_space(), SmoothBoundaryTerm.exp_diff())
    z = pair([0.3], [0.1])
    xi = bf.g.grad(z)  # gradient of g is the only subgradient here
    assert subdifferential_residual(bf, z, xi) <= 1e-9
    assert subdifferential_residual(bf, z, 2.0 * xi) > 1e-4


def test_subdifferential_residual_outside_domain_raises():
    bf = _bf(ConvexSetK.diagonal())
    with pytest.raises(DomainError):
        subdifferential_residual(bf, pair([1.0], [0.0]), pair([0.0], [0.0]))
