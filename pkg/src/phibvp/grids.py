"""Uniform grids, grid functions, problem containers, discrete energies.

The discretization is the conservative midpoint scheme: nodal values
``u_0..u_M`` on a uniform grid, derivatives as midpoint differences
``Du_i = (u_{i+1} - u_i) / dt``, the kinetic term integrated by the
midpoint rule and the potential terms by the trapezoid rule.  Trapezoid
node weights are ``dt/2`` at the two ends and ``dt`` inside; they double
as the diagonal of the discrete L2 inner product used to scale gradients.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .boundary import BoundaryFunctional, j_eval_pair, pair
from .errors import ConfigError, UnsupportedError
from .phimaps import PhiMap


@dataclass(frozen=True)
class Grid:
    """Uniform grid with ``m`` intervals on [0, big_t]."""

    big_t: float
    m: int

    def __post_init__(self):
        if self.big_t <= 0:
            raise ConfigError(f"big_t must be positive, got {self.big_t}")
        if self.m < 2:
            raise ConfigError(f"m must be at least 2, got {self.m}")

    @property
    def dt(self) -> float:
        return self.big_t / self.m

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.big_t, self.m + 1)

    @cached_property
    def midpoints(self) -> np.ndarray:
        return self.nodes[:-1] + 0.5 * self.dt

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.full(self.m + 1, self.dt)
        w[0] = 0.5 * self.dt
        w[-1] = 0.5 * self.dt
        return w

    def refine(self) -> "Grid":
        return Grid(self.big_t, 2 * self.m)


@dataclass
class GridFunction:
    """Nodal values of shape (m+1, n) attached to a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.atleast_1d(np.asarray(self.values, dtype=float))
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if self.values.shape[0] != self.grid.m + 1:
            raise ConfigError(
                f"values has {self.values.shape[0]} rows, grid wants {self.grid.m + 1}"
            )

    @property
    def n_dim(self) -> int:
        return self.values.shape[1]

    def endpoints(self) -> np.ndarray:
        return pair(self.values[0], self.values[-1])

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_csv_text())

    def to_csv_text(self) -> str:
        cols = ", ".join(f"u_{k + 1}" for k in range(self.n_dim))
        buf = io.StringIO()
        buf.write(f"t, {cols}\n")
        for t, row in zip(self.grid.nodes, self.values):
            cells = ", ".join(f"{v:.17g}" for v in row)
            buf.write(f"{t:.17g}, {cells}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        t = data[:, 0]
        m = len(t) - 1
        if m < 2 or t[0] != 0.0:
            raise ConfigError(f"grid column in {path} is not a grid starting at 0")
        return cls(Grid(float(t[-1]), m), data[:, 1:])


def _coerce(u, grid: Optional[Grid]):
    """Accept a GridFunction or a bare value array plus explicit grid."""
    if isinstance(u, GridFunction):
        return u.values, u.grid
    if grid is None:
        raise ConfigError("a bare value array needs an explicit grid")
    values = np.atleast_1d(np.asarray(u, dtype=float))
    if values.ndim == 1:
        values = values[:, None]
    return values, grid


def derivative(u, grid: Optional[Grid] = None) -> np.ndarray:
    """Midpoint slopes of nodal values: shape (m, n)."""
    values, grid = _coerce(u, grid)
    return np.diff(values, axis=0) / grid.dt


def trapz(u, grid: Optional[Grid] = None) -> np.ndarray:
    """Trapezoid integral over the grid; integrates axis 0."""
    values, grid = _coerce(u, grid)
    w = grid.weights.reshape((-1,) + (1,) * (values.ndim - 1))
    return np.sum(w * values, axis=0)


def mean_oscillation(u, grid: Optional[Grid] = None):
    """Split nodal values into (mean over [0, T], zero-mean oscillation)."""
    values, grid = _coerce(u, grid)
    mean = trapz(values, grid) / grid.big_t
    return mean, values - mean


def feasible(u, phi_map: PhiMap, margin: float = 0.0, grid: Optional[Grid] = None):
    """Whether all midpoint slopes stay inside the ball of radius a(1-margin).

    Returns (ok, worst_ratio) with worst_ratio = max |Du| / a.
    """
    values, grid = _coerce(u, grid)
    ratios = np.linalg.norm(derivative(values, grid), axis=-1) / phi_map.a
    worst = float(ratios.max()) if ratios.size else 0.0
    return worst <= 1.0 - margin, worst


@dataclass
class ProblemSpec:
    """Full problem data: operator, boundary functional, grid, potential.

    ``F(t, u)`` is the smooth potential with the normalization F(t, 0) = 0;
    ``grad_F`` its u-gradient.  Both are vectorized: given t of shape (k,)
    and u of shape (k, n) they return (k,) and (k, n).  The forcing ``h``
    enters the energy through -integral(<h, u>) and is kept separate from F
    so solvers can exploit its linearity.  ``omegas`` (shape (n,)) declares
    coordinate periods of F for periodic reduction, if any.  Setting
    ``h_mean_zero`` declares that h integrates to zero over [0, T]; the
    claim is checked by ``validate``.
    """

    phi: PhiMap
    boundary: BoundaryFunctional
    grid: Grid
    n_dim: int = 1
    F: Optional[Callable] = None
    grad_F: Optional[Callable] = None
    h: Optional[Callable] = None
    omegas: Optional[np.ndarray] = None
    h_mean_zero: bool = False
    name: str = ""

    def __post_init__(self):
        if self.n_dim < 1:
            raise ConfigError(f"n_dim must be >= 1, got {self.n_dim}")
        if (self.F is None) != (self.grad_F is None):
            raise ConfigError("F and grad_F must be supplied together")
        if self.omegas is not None:
            self.omegas = np.asarray(self.omegas, dtype=float)
            if self.omegas.shape != (self.n_dim,):
                raise ConfigError(f"omegas must have shape ({self.n_dim},)")
            if np.any(self.omegas <= 0):
                raise ConfigError("omegas must be positive periods")

    @property
    def big_t(self) -> float:
        return self.grid.big_t

    # -- vectorized evaluation helpers ---------------------------------

    def eval_F(self, t: np.ndarray, u: np.ndarray) -> np.ndarray:
        if self.F is None:
            return np.zeros(len(np.atleast_1d(t)))
        return np.asarray(self.F(np.asarray(t, dtype=float), np.asarray(u, dtype=float)), dtype=float)

    def eval_grad_F(self, t: np.ndarray, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.grad_F is None:
            return np.zeros_like(u)
        return np.asarray(self.grad_F(np.asarray(t, dtype=float), u), dtype=float)

    def eval_h(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.h is None:
            return np.zeros((len(t), self.n_dim))
        out = np.asarray(self.h(t), dtype=float)
        if out.ndim == 1:
            out = out[:, None]
        return out

    def h_mean(self, grid: Optional[Grid] = None) -> np.ndarray:
        grid = grid or self.grid
        return trapz(self.eval_h(grid.nodes), grid) / grid.big_t

    def validate(self, fd_tol: float = 1e-5) -> None:
        """Spot-check the supplied callables; raises ConfigError on mismatch."""
        grid = self.grid
        t = grid.nodes[:: max(1, grid.m // 8)]
        zeros = np.zeros((len(t), self.n_dim))
        f0 = self.eval_F(t, zeros)
        if np.max(np.abs(f0)) > 1e-10:
            raise ConfigError("F must vanish at u = 0 (normalization F(t, 0) = 0)")
        h = self.eval_h(grid.nodes)
        if h.shape != (grid.m + 1, self.n_dim):
            raise ConfigError(f"h returned shape {h.shape}, expected {(grid.m + 1, self.n_dim)}")
        if self.h_mean_zero:
            worst = float(np.max(np.abs(self.h_mean(grid))))
            if worst > 1e-8 * (1.0 + float(np.max(np.abs(h)))):
                raise ConfigError(
                    f"h declared mean-zero but its average has magnitude {worst:.3e}"
                )
        if self.F is not None:
            rng = np.random.default_rng(7)
            u = rng.normal(scale=0.5, size=(len(t), self.n_dim))
            g = self.eval_grad_F(t, u)
            eps = 1e-6
            for k in range(self.n_dim):
                du = np.zeros_like(u)
                du[:, k] = eps
                fd = (self.eval_F(t, u + du) - self.eval_F(t, u - du)) / (2 * eps)
                err = np.max(np.abs(fd - g[:, k]) / (1.0 + np.abs(g[:, k])))
                if err > fd_tol:
                    raise ConfigError(
                        f"grad_F disagrees with finite differences of F (component {k}, rel err {err:.2e})"
                    )


@dataclass(frozen=True)
class EnergyBreakdown:
    """Discrete energy split into its named parts (total = their sum)."""

    psi: float
    f_term: float
    quad_term: float
    j_term: float

    @property
    def total(self) -> float:
        return self.psi + self.f_term + self.quad_term + self.j_term


def energy_eval(
    problem: ProblemSpec,
    u,
    mode: str = "full",
    kappa: float = 1.0,
    grid: Optional[Grid] = None,
) -> EnergyBreakdown:
    """Discrete energy of nodal values.

    mode="full":       Psi + ( -sum w (F + <h, u>) ) + j(endpoints)
    mode="auxiliary":  Psi + kappa * sum w (|u|^2/2 - <h, u>) + j(endpoints)

    Psi is the midpoint kinetic term sum dt (Phi(Du) - Phi(0)), nonnegative;
    it is +inf when some slope leaves the closed ball of radius a, making
    the breakdown total +inf for infeasible values.
    """
    values, grid = _coerce(u, grid or problem.grid)
    du = derivative(values, grid)
    if np.max(np.linalg.norm(du, axis=-1), initial=0.0) > problem.phi.a:
        psi = math.inf
    else:
        psi = float(np.sum(grid.dt * (problem.phi.Phi_eval(du) - problem.phi.phi0_value)))
    w = grid.weights[:, None]
    h = problem.eval_h(grid.nodes)
    if mode == "full":
        f_vals = problem.eval_F(grid.nodes, values)
        f_term = -float(np.sum(grid.weights * f_vals)) - float(np.sum(w * h * values))
        quad_term = 0.0
    elif mode == "auxiliary":
        f_term = 0.0
        quad_term = kappa * float(np.sum(w * (0.5 * values * values - h * values)))
    else:
        raise ConfigError(f"unknown energy mode {mode!r}")
    j_term = j_eval_pair(problem.boundary, pair(values[0], values[-1]))
    return EnergyBreakdown(psi=psi, f_term=f_term, quad_term=quad_term, j_term=j_term)


def smooth_gradient(
    problem: ProblemSpec,
    u,
    mode: str = "full",
    kappa: float = 1.0,
    grid: Optional[Grid] = None,
) -> np.ndarray:
    """L2-scaled gradient of the smooth part of the discrete energy.

    Component i is (1/w_i) d(smooth energy)/d(u_i); at interior nodes this
    is the discrete equation residual -D[phi(Du)]_i - grad_F_total(t_i, u_i)
    (full mode) or -D[phi(Du)]_i + kappa (u_i - h_i) (auxiliary mode).
    """
    values, grid = _coerce(u, grid or problem.grid)
    du = derivative(values, grid)
    flux = problem.phi.phi_eval(du)
    m = grid.m
    g = np.zeros_like(values)
    g[0] = -flux[0]
    g[1:m] = flux[: m - 1] - flux[1:m]
    g[m] = flux[m - 1]
    g /= grid.weights[:, None]
    h = problem.eval_h(grid.nodes)
    if mode == "full":
        g -= problem.eval_grad_F(grid.nodes, values) + h
    elif mode == "auxiliary":
        g += kappa * (values - h)
    else:
        raise ConfigError(f"unknown energy mode {mode!r}")
    return g


def _endpoint_basis(kind: str, m: int, a_coef: float, b_coef: float) -> np.ndarray:
    """Scalar basis of the linear endpoint constraint on (m+1) nodal values."""
    inner = np.eye(m + 1)[:, 1:m]
    if kind == "point":
        return inner
    if kind == "full":
        return np.eye(m + 1)
    first = np.zeros((m + 1, 1))
    if kind == "diagonal":
        first[0, 0] = 1.0
        first[m, 0] = 1.0
    elif kind == "antidiagonal":
        first[0, 0] = 1.0
        first[m, 0] = -1.0
    elif kind == "subspace":
        # (v_0, v_m) ranges over span{(b_coef, a_coef)}
        first[0, 0] = b_coef
        first[m, 0] = a_coef
    else:
        raise UnsupportedError(f"no linear endpoint basis for set kind {kind!r}")
    return np.hstack([first, inner])


def rayleigh_lambda1(boundary: BoundaryFunctional, grid: Grid, n_dim: int = 1) -> float:
    """Smallest Rayleigh quotient sum dt |Dv|^2 / sum w |v|^2 on the set's
    linear endpoint constraint.

    Only subspace-type constraint sets admit this reduction; a strip with
    0 < sigma < inf is not a subspace and raises UnsupportedError.  The
    constraint acts componentwise, so the value does not depend on n_dim.
    """
    from scipy.linalg import eigh

    k = boundary.set
    if k.kind == "strip":
        raise UnsupportedError("rayleigh_lambda1 needs a subspace constraint; a strip of finite positive width is not one")
    basis = _endpoint_basis(k.kind, grid.m, k.a_coef, k.b_coef)
    d = (np.eye(grid.m + 1)[1:] - np.eye(grid.m + 1)[:-1]) / grid.dt
    db = d @ basis
    stiff = grid.dt * (db.T @ db)
    mass = basis.T @ (grid.weights[:, None] * basis)
    vals = eigh(stiff, mass, eigvals_only=True)
    lam = float(vals[0])
    return max(lam, 0.0)
