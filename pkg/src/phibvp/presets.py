"""Named problem configurations and the config -> problem builder.

A configuration is a plain nested dict (the TOML surface of the CLI):

    T = 1.0, M = 800, N = 1        # top-level scalars
    [phi]       variant = "relativistic" | "p_relativistic", a, p
    [boundary]  variant = "point" | "full" | "diagonal" | "antidiagonal"
                          | "subspace" | "strip",
                sigma, a_coef, b_coef, g = "none" | "quadratic" | "exp",
                g_weight
    [potential] preset = "none" | "pendulum", rho, beta
    [h]         preset = "none" | "sinusoid" | "constant"
                          | "manufactured_neumann",
                amplitude, cycles, value
    [problem]   type = "full" | "neumann" | "dirichlet" | "partial_j"
    [auxiliary] flux_left, flux_right, x, y       (per problem type)
    [solver]    route = "minimize" | "fixed_point" | "auto", tol_grad,
                tol_fix, inner_tol, max_outer, seed, vi_samples
    [outputs]   solution, report                   (file names)

``build_problem`` turns such a dict into a ProblemSpec plus a solve plan;
it raises ConfigError naming the offending section and field.  The preset
catalog returns ready-made configs for the cases the test suite and the
command line exercise; ``preset_lines`` renders the catalog listing.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .boundary import BoundaryFunctional, ConvexSetK, SmoothBoundaryTerm
from .errors import ConfigError
from .grids import Grid, ProblemSpec
from .phimaps import PhiMap

# -- potential and forcing catalogs -----------------------------------------


def pendulum_potential(rho: float, beta: float):
    """F(t, u) = rho (cos(|u| - beta) - cos beta - sin(beta) |u|) and its
    u-gradient rho (sin(beta - |u|) - sin beta) u / |u| (limit -rho cos(beta) u
    at the origin)."""
    cb, sb = math.cos(beta), math.sin(beta)

    def f_val(t, u):
        r = np.linalg.norm(np.atleast_2d(u), axis=-1)
        return rho * (np.cos(r - beta) - cb - sb * r)

    def f_grad(t, u):
        u = np.atleast_2d(u)
        r = np.linalg.norm(u, axis=-1, keepdims=True)
        near0 = r < 1e-12
        safe_r = np.where(near0, 1.0, r)
        fac = np.where(near0, -rho * cb, rho * (np.sin(beta - r) - sb) / safe_r)
        return fac * u

    return f_val, f_grad


def sinusoid_forcing(amplitude: float, cycles: float, big_t: float, n_dim: int):
    """Mean-zero forcing amplitude * sin(2 pi cycles t / T) in each component."""

    def h(t):
        base = amplitude * np.sin(2.0 * math.pi * cycles * np.asarray(t) / big_t)
        return np.tile(base[:, None], (1, n_dim))

    return h


def constant_forcing(value: float, n_dim: int):
    def h(t):
        return np.full((len(np.atleast_1d(t)), n_dim), float(value))

    return h


# -- manufactured reference for the flux-data solve ---------------------------

#: reference profile u*(t) = C0 + C1 sin(2 pi t); max |u*'| = 2 pi C1 = 0.4398
MANUFACTURED_C0 = 0.15
MANUFACTURED_C1 = 0.07


def manufactured_reference(t):
    t = np.asarray(t, dtype=float)
    return MANUFACTURED_C0 + MANUFACTURED_C1 * np.sin(2.0 * math.pi * t)


def manufactured_slope(t):
    t = np.asarray(t, dtype=float)
    return 2.0 * math.pi * MANUFACTURED_C1 * np.cos(2.0 * math.pi * t)


def manufactured_forcing(t):
    """h = -[phi(u*')]' + u* for the relativistic map with a = 1.

    With s = u*' one has [phi(s)]' = s' (1 - s^2)^(-3/2), differentiated by
    hand from phi(s) = s (1 - s^2)^(-1/2).
    """
    t = np.asarray(t, dtype=float)
    w = 2.0 * math.pi
    s = w * MANUFACTURED_C1 * np.cos(w * t)
    sp = -(w ** 2) * MANUFACTURED_C1 * np.sin(w * t)
    out = -sp * (1.0 - s * s) ** -1.5 + manufactured_reference(t)
    return out[:, None]


def manufactured_flux_data():
    """Exact endpoint fluxes phi(u*'(0)), phi(u*'(T)) of the reference."""
    s0 = float(manufactured_slope(0.0))
    s1 = float(manufactured_slope(1.0))
    f = lambda s: s / math.sqrt(1.0 - s * s)
    return np.array([f(s0)]), np.array([f(s1)])


# -- config access helpers ----------------------------------------------------

_BOUNDARY_VARIANTS = ("point", "full", "diagonal", "antidiagonal", "subspace", "strip")
_G_VARIANTS = ("none", "quadratic", "exp")
_PHI_VARIANTS = ("relativistic", "p_relativistic")
_PROBLEM_TYPES = ("full", "neumann", "dirichlet", "partial_j")
_H_PRESETS = ("none", "sinusoid", "constant", "manufactured_neumann")
_POTENTIAL_PRESETS = ("none", "pendulum")
_ROUTES = ("minimize", "fixed_point", "auto")


def _section(config: dict, name: str) -> dict:
    sec = config.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table, got {type(sec).__name__}")
    return sec


def _get(sec: dict, section: str, key: str, default=None, required: bool = False):
    if key in sec:
        return sec[key]
    if required:
        raise ConfigError(f"[{section}] missing field '{key}'")
    return default


def _number(sec, section, key, default=None, required=False):
    v = _get(sec, section, key, default, required)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"[{section}] field '{key}' must be a number, got {v!r}")
    return float(v)


def _vector(sec, section, key, n_dim, default=None):
    v = sec.get(key, default)
    if v is None:
        return None
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.shape != (n_dim,):
        raise ConfigError(f"[{section}] field '{key}' must have {n_dim} entries, got {arr.shape}")
    return arr


# -- plan: what the CLI should run --------------------------------------------


@dataclass
class SolvePlan:
    """Problem plus routing information extracted from one config."""

    problem: ProblemSpec
    problem_type: str          # full | neumann | dirichlet | partial_j
    route: str                 # minimize | fixed_point | auto  (full only)
    flux_left: Optional[np.ndarray] = None
    flux_right: Optional[np.ndarray] = None
    pinned_left: Optional[np.ndarray] = None
    pinned_right: Optional[np.ndarray] = None
    reference: Optional[Callable] = None
    solver_options: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    name: str = ""


def build_problem(config: dict) -> SolvePlan:
    """Validate a config dict and build the problem and solve plan."""
    if not isinstance(config, dict):
        raise ConfigError("config root must be a table")

    big_t = config.get("T", None)
    if big_t is None:
        raise ConfigError("missing top-level field 'T'")
    m = config.get("M", None)
    if m is None:
        raise ConfigError("missing top-level field 'M'")
    if not isinstance(m, int) or isinstance(m, bool):
        raise ConfigError(f"top-level field 'M' must be an integer, got {m!r}")
    n_dim = config.get("N", 1)
    if not isinstance(n_dim, int) or isinstance(n_dim, bool) or n_dim < 1:
        raise ConfigError(f"top-level field 'N' must be a positive integer, got {n_dim!r}")
    grid = Grid(float(big_t), m)

    phi_sec = _section(config, "phi")
    variant = _get(phi_sec, "phi", "variant", required=True)
    if variant not in _PHI_VARIANTS:
        raise ConfigError(f"[phi] unknown variant {variant!r}; choose from {_PHI_VARIANTS}")
    a = _number(phi_sec, "phi", "a", required=True)
    if variant == "relativistic":
        phi = PhiMap.relativistic(a)
    else:
        p = _number(phi_sec, "phi", "p", required=True)
        phi = PhiMap.p_relativistic(p, a)

    b_sec = _section(config, "boundary")
    b_variant = _get(b_sec, "boundary", "variant", required=True)
    if b_variant not in _BOUNDARY_VARIANTS:
        raise ConfigError(f"[boundary] unknown variant {b_variant!r}; choose from {_BOUNDARY_VARIANTS}")
    if b_variant == "point":
        set_k = ConvexSetK.point()
    elif b_variant == "full":
        set_k = ConvexSetK.full_space()
    elif b_variant == "diagonal":
        set_k = ConvexSetK.diagonal()
    elif b_variant == "antidiagonal":
        set_k = ConvexSetK.antidiagonal()
    elif b_variant == "subspace":
        set_k = ConvexSetK.subspace(
            _number(b_sec, "boundary", "a_coef", required=True),
            _number(b_sec, "boundary", "b_coef", required=True),
        )
    else:
        sigma = _number(b_sec, "boundary", "sigma", required=True)
        set_k = ConvexSetK.strip(sigma)
    g_variant = _get(b_sec, "boundary", "g", "none")
    if g_variant not in _G_VARIANTS:
        raise ConfigError(f"[boundary] unknown g {g_variant!r}; choose from {_G_VARIANTS}")
    if g_variant == "none":
        g_term = None
    elif g_variant == "quadratic":
        g_term = SmoothBoundaryTerm.quadratic_diff(_number(b_sec, "boundary", "g_weight", 1.0))
    else:
        g_term = SmoothBoundaryTerm.exp_diff()
    boundary = BoundaryFunctional(set=set_k, g=g_term)

    pot_sec = _section(config, "potential")
    pot_preset = _get(pot_sec, "potential", "preset", "none")
    if pot_preset not in _POTENTIAL_PRESETS:
        raise ConfigError(f"[potential] unknown preset {pot_preset!r}; choose from {_POTENTIAL_PRESETS}")
    omegas = None
    if pot_preset == "pendulum":
        rho = _number(pot_sec, "potential", "rho", required=True)
        beta = _number(pot_sec, "potential", "beta", required=True)
        f_val, f_grad = pendulum_potential(rho, beta)
        if beta == 0.0 and n_dim == 1:
            omegas = np.array([2.0 * math.pi])
    else:
        f_val, f_grad = None, None

    h_sec = _section(config, "h")
    h_preset = _get(h_sec, "h", "preset", "none")
    if h_preset not in _H_PRESETS:
        raise ConfigError(f"[h] unknown preset {h_preset!r}; choose from {_H_PRESETS}")
    h_mean_zero = False
    if h_preset == "none":
        h_fn = None
    elif h_preset == "sinusoid":
        h_fn = sinusoid_forcing(
            _number(h_sec, "h", "amplitude", required=True),
            _number(h_sec, "h", "cycles", 1.0),
            grid.big_t, n_dim,
        )
        h_mean_zero = True
    elif h_preset == "constant":
        h_fn = constant_forcing(_number(h_sec, "h", "value", required=True), n_dim)
    else:
        if n_dim != 1 or variant != "relativistic" or a != 1.0:
            raise ConfigError("[h] preset 'manufactured_neumann' needs N=1 and the relativistic map with a=1")
        h_fn = manufactured_forcing

    prob_sec = _section(config, "problem")
    p_type = _get(prob_sec, "problem", "type", "full")
    if p_type not in _PROBLEM_TYPES:
        raise ConfigError(f"[problem] unknown type {p_type!r}; choose from {_PROBLEM_TYPES}")
    if p_type == "full" and (f_val is None) and h_fn is None:
        # a full solve with no potential and no forcing is legal but pointless;
        # leave it to run (the solution is 0 for most boundary laws)
        pass

    spec = ProblemSpec(
        phi=phi, boundary=boundary, grid=grid, n_dim=n_dim,
        F=f_val, grad_F=f_grad, h=h_fn, omegas=omegas,
        h_mean_zero=h_mean_zero, name=str(config.get("name", "")),
    )

    s_sec = _section(config, "solver")
    route = _get(s_sec, "solver", "route", "auto")
    if route not in _ROUTES:
        raise ConfigError(f"[solver] unknown route {route!r}; choose from {_ROUTES}")
    solver_options = {}
    for key in ("tol_grad", "tol_fix", "inner_tol", "max_outer", "seed", "vi_samples", "damping", "alpha0"):
        if key in s_sec:
            v = s_sec[key]
            if key in ("max_outer", "seed", "vi_samples"):
                if not isinstance(v, int) or isinstance(v, bool):
                    raise ConfigError(f"[solver] field '{key}' must be an integer, got {v!r}")
                solver_options[key] = v
            else:
                solver_options[key] = _number(s_sec, "solver", key)

    aux_sec = _section(config, "auxiliary")
    plan = SolvePlan(
        problem=spec, problem_type=p_type, route=route,
        solver_options=solver_options,
        outputs=dict(_section(config, "outputs")),
        name=str(config.get("name", "")),
    )
    if p_type == "neumann":
        if h_preset == "manufactured_neumann" and "flux_left" not in aux_sec:
            plan.flux_left, plan.flux_right = manufactured_flux_data()
        else:
            plan.flux_left = _vector(aux_sec, "auxiliary", "flux_left", n_dim)
            plan.flux_right = _vector(aux_sec, "auxiliary", "flux_right", n_dim)
            if plan.flux_left is None or plan.flux_right is None:
                raise ConfigError("[auxiliary] neumann solves need 'flux_left' and 'flux_right'")
    elif p_type == "dirichlet":
        plan.pinned_left = _vector(aux_sec, "auxiliary", "x", n_dim)
        plan.pinned_right = _vector(aux_sec, "auxiliary", "y", n_dim)
        if plan.pinned_left is None or plan.pinned_right is None:
            raise ConfigError("[auxiliary] dirichlet solves need 'x' and 'y'")
    if h_preset == "manufactured_neumann":
        plan.reference = manufactured_reference
    return plan


# -- preset catalog -----------------------------------------------------------


def _base_pendulum(beta: float, route: str) -> dict:
    return {
        "T": 1.0,
        "M": 800,
        "N": 1,
        "phi": {"variant": "relativistic", "a": 1.0},
        "boundary": {"variant": "diagonal", "g": "none"},
        "potential": {"preset": "pendulum", "rho": 1.0, "beta": beta},
        "h": {"preset": "sinusoid", "amplitude": 0.3, "cycles": 1.0},
        "problem": {"type": "full"},
        "solver": {"route": route, "seed": 0},
        "outputs": {},
    }


def _preset_pendulum_anticoercive() -> dict:
    cfg = _base_pendulum(math.pi / 2.0, "minimize")
    cfg["name"] = "pendulum_anticoercive"
    return cfg


def _preset_exp_steklov() -> dict:
    cfg = _base_pendulum(math.pi / 2.0, "minimize")
    cfg["name"] = "exp_steklov"
    cfg["boundary"] = {"variant": "full", "g": "exp"}
    return cfg


def _preset_strip_sigma_half() -> dict:
    cfg = _base_pendulum(math.pi / 2.0, "minimize")
    cfg["name"] = "strip_sigma_half"
    cfg["boundary"] = {"variant": "strip", "sigma": 0.5, "g": "exp"}
    return cfg


def _preset_strip_sigma_narrow() -> dict:
    cfg = _base_pendulum(math.pi / 2.0, "minimize")
    cfg["name"] = "strip_sigma_narrow"
    cfg["boundary"] = {"variant": "strip", "sigma": 0.125, "g": "exp"}
    return cfg


def _preset_pendulum_semicoercive() -> dict:
    cfg = _base_pendulum(-math.pi / 2.0, "fixed_point")
    cfg["name"] = "pendulum_semicoercive"
    return cfg


def _preset_pendulum_periodic() -> dict:
    cfg = _base_pendulum(0.0, "minimize")
    cfg["name"] = "pendulum_periodic"
    return cfg


def _preset_manufactured_neumann() -> dict:
    return {
        "name": "manufactured_neumann",
        "T": 1.0,
        "M": 400,
        "N": 1,
        "phi": {"variant": "relativistic", "a": 1.0},
        "boundary": {"variant": "full", "g": "none"},
        "potential": {"preset": "none"},
        "h": {"preset": "manufactured_neumann"},
        "problem": {"type": "neumann"},
        "solver": {"route": "auto", "seed": 0},
        "outputs": {},
    }


def _preset_dirichlet_infeasible_gap() -> dict:
    return {
        "name": "dirichlet_infeasible_gap",
        "T": 1.0,
        "M": 200,
        "N": 1,
        "phi": {"variant": "relativistic", "a": 1.0},
        "boundary": {"variant": "point", "g": "none"},
        "potential": {"preset": "none"},
        "h": {"preset": "none"},
        "problem": {"type": "dirichlet"},
        "auxiliary": {"x": [0.0], "y": [1.2]},
        "solver": {"route": "auto", "seed": 0},
        "outputs": {},
    }


def _preset_dirichlet_frontier() -> dict:
    cfg = _preset_dirichlet_infeasible_gap()
    cfg["name"] = "dirichlet_frontier"
    cfg["auxiliary"] = {"x": [0.0], "y": [0.9]}
    return cfg


_PRESETS = {
    "pendulum_anticoercive": (
        _preset_pendulum_anticoercive,
        "scalar pendulum with decaying mean potential, periodic endpoints; energy descent route",
    ),
    "exp_steklov": (
        _preset_exp_steklov,
        "same pendulum with free endpoints coupled through the exponential difference term",
    ),
    "strip_sigma_half": (
        _preset_strip_sigma_half,
        "same pendulum with |u(0)-u(T)| <= Ta/2 plus the exponential coupling",
    ),
    "strip_sigma_narrow": (
        _preset_strip_sigma_narrow,
        "strip variant with the tighter width Ta/8",
    ),
    "pendulum_semicoercive": (
        _preset_pendulum_semicoercive,
        "pendulum with growing mean potential, periodic endpoints; fixed-point route (saddle)",
    ),
    "pendulum_periodic": (
        _preset_pendulum_periodic,
        "pendulum with 2*pi-periodic potential and declared period for cell reduction",
    ),
    "manufactured_neumann": (
        _preset_manufactured_neumann,
        "flux-data solve with a closed-form reference solution for convergence studies",
    ),
    "dirichlet_frontier": (
        _preset_dirichlet_frontier,
        "pinned endpoint data at 90% of the reachable range T*a",
    ),
    "dirichlet_infeasible_gap": (
        _preset_dirichlet_infeasible_gap,
        "pinned endpoint data beyond the reachable range T*a; the solve must refuse",
    ),
}


def preset_names() -> tuple:
    return tuple(_PRESETS)


def preset_config(name: str) -> dict:
    """A fresh config dict for the named preset (deep-copied, safe to edit)."""
    if name not in _PRESETS:
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(_PRESETS)}")
    return copy.deepcopy(_PRESETS[name][0]())


def preset_lines() -> str:
    """The catalog listing: one 'name: description' line per preset."""
    width = max(len(n) for n in _PRESETS)
    lines = [f"{name:<{width}}  {desc}" for name, (_, desc) in sorted(_PRESETS.items())]
    return "\n".join(lines) + "\n"
