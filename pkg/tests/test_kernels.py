import numpy as np
import pytest

from phibvp import Grid, PhiMap
from phibvp import kernels
from phibvp.auxiliary import solve_dirichlet, solve_neumann


@pytest.fixture
def pure_backend():
    kernels.force_pure_python(True)
    try:
        yield
    finally:
        kernels.force_pure_python(False)


def _aux_inputs(m=50, seed=1):
    grid = Grid(1.0, m)
    rng = np.random.default_rng(seed)
    h = 0.3 * np.sin(2 * np.pi * grid.nodes)[:, None] + rng.normal(scale=0.05, size=(m + 1, 1))
    return grid, h


@pytest.mark.parametrize("phi", [PhiMap.relativistic(1.0), PhiMap.p_relativistic(3.0, 1.0)])
def test_neumann_kernel_backend_agreement(phi):
    grid, h = _aux_inputs()
    u0 = np.zeros((grid.m + 1, 1))
    args = (h, np.array([0.2]), np.array([-0.1]), 1.0, grid.dt, grid.big_t, 1e-13, 5000, 0.5, 1.0 / 64)
    u_fast, r_fast, _, _ = kernels.neumann_picard(phi, u0.copy(), *args)
    kernels.force_pure_python(True)
    try:
        u_pure, r_pure, _, _ = kernels.neumann_picard(phi, u0.copy(), *args)
    finally:
        kernels.force_pure_python(False)
    np.testing.assert_allclose(u_fast, u_pure, atol=1e-12)
    assert abs(r_fast - r_pure) < 1e-12


@pytest.mark.parametrize("phi", [PhiMap.relativistic(1.0), PhiMap.p_relativistic(3.0, 1.0)])
def test_dirichlet_kernel_backend_agreement(phi):
    grid, h = _aux_inputs(seed=2)
    u0 = np.linspace(0.0, 0.4, grid.m + 1)[:, None]
    args = (h, np.array([0.0]), np.array([0.3]), 1.0, grid.dt, 1e-13, 5000, 0.5, 1.0 / 64)
    u_fast, end_fast, r_fast, _, _ = kernels.dirichlet_picard(phi, u0.copy(), *args)
    kernels.force_pure_python(True)
    try:
        u_pure, end_pure, r_pure, _, _ = kernels.dirichlet_picard(phi, u0.copy(), *args)
    finally:
        kernels.force_pure_python(False)
    np.testing.assert_allclose(u_fast, u_pure, atol=1e-12)
    np.testing.assert_allclose(end_fast, end_pure, atol=1e-12)


def test_solver_output_identical_across_backends(pure_backend):
    # the high-level solves must not depend on which backend ran
    grid, h = _aux_inputs(m=80, seed=3)
    phi = PhiMap.relativistic(1.0)
    sol_pure = solve_neumann(phi, h, [0.1], [0.1], grid)
    kernels.force_pure_python(False)
    sol_fast = solve_neumann(phi, h, [0.1], [0.1], grid)
    np.testing.assert_allclose(sol_pure.values, sol_fast.values, atol=1e-11)

    d_pure_kwargs = dict(tol=1e-13)
    kernels.force_pure_python(True)
    d_pure = solve_dirichlet(phi, h, [0.0], [0.5], grid, **d_pure_kwargs)
    kernels.force_pure_python(False)
    d_fast = solve_dirichlet(phi, h, [0.0], [0.5], grid, **d_pure_kwargs)
    np.testing.assert_allclose(d_pure.values, d_fast.values, atol=1e-11)


def test_backend_report():
    name = kernels.active_backend()
    assert name in ("compiled", "numpy")
    kernels.force_pure_python(True)
    try:
        assert kernels.active_backend() == "numpy"
    finally:
        kernels.force_pure_python(False)


def test_system_inputs_use_fallback():
    # N = 2 has no compiled path; the dispatcher must route it to numpy
    grid = Grid(1.0, 30)
    phi = PhiMap.relativistic(1.0)
    h = np.zeros((31, 2))
    u0 = np.zeros((31, 2))
    u, resid, it, _ = kernels.neumann_picard(
        phi, u0, h, np.array([0.1, -0.2]), np.array([0.1, -0.2]),
        1.0, grid.dt, grid.big_t, 1e-12, 4000, 0.5, 1.0 / 64,
    )
    assert u.shape == (31, 2)
    assert resid < 1e-10
