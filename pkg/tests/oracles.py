"""Independent reference computations for the test suite.

Everything here is derived directly from the defining formulas, using
routes different from the package implementation: closed-form inverses,
scipy collocation, dense loop-assembled eigenproblems, grid searches and
sampled separation tests.  Tests compare package output against these.
"""

import math

import numpy as np
from scipy.integrate import solve_bvp
from scipy.linalg import eigh
from scipy.optimize import brentq


# -- gradient maps, by hand -----------------------------------------------------


def relativistic_scalar(s, a=1.0):
    """phi(s) for the scaled relativistic map: phi_a(s) = phi_1(s/a)."""
    r = s / a
    return r / math.sqrt(1.0 - r * r)


def relativistic_inverse_scalar(v, a=1.0):
    """Closed-form inverse: s = a v / sqrt(1 + v^2)."""
    return a * v / math.sqrt(1.0 + v * v)


def p_relativistic_scalar(s, p, a=1.0):
    """Radial profile r^(p-1) / (1 - r^p)^((p-1)/p) at r = s/a."""
    r = s / a
    return r ** (p - 1.0) / (1.0 - r ** p) ** ((p - 1.0) / p)


def p_relativistic_inverse_scalar(v, p, a=1.0, lo=0.0, hi=1.0 - 1e-15):
    """Invert the p-radial profile by bisection (v >= 0)."""
    if v == 0.0:
        return 0.0
    f = lambda r: r ** (p - 1.0) / (1.0 - r ** p) ** ((p - 1.0) / p) - v
    return a * brentq(f, lo, hi, xtol=1e-15, rtol=8.9e-16)


def fd_gradient(fun, x, eps=1e-6):
    """Central-difference gradient of a scalar function of a flat array."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for k in range(x.size):
        d = np.zeros_like(x)
        d.flat[k] = eps
        g.flat[k] = (fun(x + d) - fun(x - d)) / (2.0 * eps)
    return g


# -- collocation reference for the zeroth-order auxiliary equation ----------------
#
# The scalar equation -[phi(u')]' + kappa (u - h) = 0 in first-order form:
# u' = phi^{-1}(v), v' = kappa (u - h(t)).


def collocation_aux(
    h_fn,
    big_t,
    bc_kind,
    bc_data,
    inverse,
    kappa=1.0,
    tol=1e-10,
    max_nodes=400000,
    guess=None,
):
    """Reference solution via scipy collocation; returns a callable t -> u(t).

    bc_kind/bc_data: "flux" with (alpha, beta) prescribing v(0), v(T);
    "pinned" with (x, y) prescribing u(0), u(T); "periodic" for
    u(0) = u(T), v(0) = v(T).
    """
    inv = np.vectorize(inverse)

    def rhs(t, yv):
        u, v = yv
        return np.vstack([inv(v), kappa * (u - h_fn(t))])

    if bc_kind == "flux":
        alpha, beta = bc_data

        def bc(ya, yb):
            return np.array([ya[1] - alpha, yb[1] - beta])

    elif bc_kind == "pinned":
        x, y = bc_data

        def bc(ya, yb):
            return np.array([ya[0] - x, yb[0] - y])

    elif bc_kind == "periodic":

        def bc(ya, yb):
            return np.array([ya[0] - yb[0], ya[1] - yb[1]])

    else:
        raise ValueError(bc_kind)

    t0 = np.linspace(0.0, big_t, 201)
    y0 = np.zeros((2, t0.size)) if guess is None else guess(t0)
    sol = solve_bvp(rhs, bc, t0, y0, tol=tol, max_nodes=max_nodes)
    if not sol.success:
        raise RuntimeError(f"collocation reference failed: {sol.message}")
    return lambda t: sol.sol(np.asarray(t, dtype=float))[0]


# -- brute-force composite prox ----------------------------------------------------


def prox_bruteforce(j_value, z1, z2, step, span=2.5, n=241, stages=2):
    """Two-stage grid minimization of |w - z|^2/2 + step j(w) for scalar pairs.

    ``j_value(w1, w2)`` returns the composite value (may be +inf outside the
    set).  Returns (w1, w2, final_cell).
    """
    lo1, hi1 = z1 - span, z1 + span
    lo2, hi2 = z2 - span, z2 + span
    best = (z1, z2)
    cell = max(hi1 - lo1, hi2 - lo2) / (n - 1)
    for _ in range(stages):
        xs = np.linspace(lo1, hi1, n)
        ys = np.linspace(lo2, hi2, n)
        bval = math.inf
        for w1 in xs:
            for w2 in ys:
                jv = j_value(w1, w2)
                if not math.isfinite(jv):
                    continue
                val = 0.5 * ((w1 - z1) ** 2 + (w2 - z2) ** 2) + step * jv
                if val < bval:
                    bval, best = val, (w1, w2)
        cell = max(xs[1] - xs[0], ys[1] - ys[0])
        lo1, hi1 = best[0] - 2 * cell, best[0] + 2 * cell
        lo2, hi2 = best[1] - 2 * cell, best[1] + 2 * cell
    return best[0], best[1], cell


# -- sampled separation test for normal cones -----------------------------------------


def sample_set_pairs(kind, n, rng, radius=3.0, sigma=1.0, a_coef=1.0, b_coef=1.0, n_dim=1):
    """Random points of the constraint set, shape (n, 2, n_dim)."""
    out = np.zeros((n, 2, n_dim))
    if kind == "full":
        out[:] = rng.uniform(-radius, radius, size=(n, 2, n_dim))
    elif kind == "diagonal":
        c = rng.uniform(-radius, radius, size=(n, n_dim))
        out[:, 0], out[:, 1] = c, c
    elif kind == "antidiagonal":
        c = rng.uniform(-radius, radius, size=(n, n_dim))
        out[:, 0], out[:, 1] = c, -c
    elif kind == "subspace":
        c = rng.uniform(-radius, radius, size=(n, n_dim))
        out[:, 0], out[:, 1] = b_coef * c, a_coef * c
    elif kind == "strip":
        mid = rng.uniform(-radius, radius, size=(n, n_dim))
        d = rng.uniform(-1.0, 1.0, size=(n, n_dim))
        nd = np.linalg.norm(d, axis=1, keepdims=True)
        nd[nd == 0.0] = 1.0
        r = sigma * rng.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / n_dim)
        half = 0.5 * r * d / nd
        out[:, 0], out[:, 1] = mid + half, mid - half
    elif kind == "point":
        pass
    else:
        raise ValueError(kind)
    return out


def cone_contains_sampled(samples, z, xi, tol=1e-9):
    """Brute-force normal cone test: <<xi | w - z>> <= tol for sampled w in K."""
    z = np.asarray(z, dtype=float)
    xi = np.asarray(xi, dtype=float)
    scale = tol * (1.0 + float(np.sqrt(np.sum(xi * xi)))) * (
        1.0 + float(np.max(np.sqrt(np.sum((samples - z) ** 2, axis=(1, 2)))))
    )
    worst = float(np.max(np.sum((samples - z) * xi, axis=(1, 2))))
    return worst <= scale


# -- dense eigenproblem for the first Rayleigh eigenvalue --------------------------------
#
# Assembled with explicit loops so the construction shares nothing with the
# package's vectorized route.


def eig_lambda1_dense(kind, m, big_t, a_coef=1.0, b_coef=1.0):
    dt = big_t / m
    n_nodes = m + 1
    stiff_full = np.zeros((n_nodes, n_nodes))
    for i in range(m):
        for (r, c, s) in ((i, i, 1.0), (i, i + 1, -1.0), (i + 1, i, -1.0), (i + 1, i + 1, 1.0)):
            stiff_full[r, c] += s / dt
    mass_full = np.zeros((n_nodes, n_nodes))
    for i in range(n_nodes):
        mass_full[i, i] = dt if 0 < i < m else 0.5 * dt

    cols = []
    for i in range(1, m):
        e = np.zeros(n_nodes)
        e[i] = 1.0
        cols.append(e)
    if kind == "point":
        pass
    elif kind == "full":
        e0 = np.zeros(n_nodes)
        e0[0] = 1.0
        em = np.zeros(n_nodes)
        em[m] = 1.0
        cols = [e0] + cols + [em]
    elif kind in ("diagonal", "antidiagonal", "subspace"):
        e = np.zeros(n_nodes)
        if kind == "diagonal":
            e[0], e[m] = 1.0, 1.0
        elif kind == "antidiagonal":
            e[0], e[m] = 1.0, -1.0
        else:
            e[0], e[m] = b_coef, a_coef
        cols = [e] + cols
    else:
        raise ValueError(kind)
    basis = np.array(cols).T
    stiff = basis.T @ stiff_full @ basis
    mass = basis.T @ mass_full @ basis
    vals = eigh(stiff, mass, eigvals_only=True)
    return max(float(vals[0]), 0.0)


# -- feasible random grid functions -------------------------------------------------


def random_feasible_values(grid_nodes, big_t, a, rng, n_dim=1, slope_frac=0.8, offset=0.0):
    """Smooth random nodal values whose midpoint slopes stay below slope_frac * a."""
    t = np.asarray(grid_nodes, dtype=float)
    vals = np.zeros((t.size, n_dim))
    for k in range(n_dim):
        c = rng.normal(size=4)
        raw = (
            c[0] * np.sin(2.0 * math.pi * t / big_t)
            + c[1] * np.cos(2.0 * math.pi * t / big_t)
            + c[2] * np.sin(4.0 * math.pi * t / big_t)
            + c[3] * t / big_t
        )
        vals[:, k] = raw
    dv = np.diff(vals, axis=0) / (t[1] - t[0])
    worst = float(np.max(np.linalg.norm(dv, axis=1)))
    if worst > 0.0:
        vals *= slope_frac * a / max(worst, slope_frac * a)
    vals += offset
    return vals


def prox_bruteforce_catalog(
    kind,
    g_of_gap,
    z1,
    z2,
    step,
    sigma=1.0,
    a_coef=1.0,
    b_coef=1.0,
    span=2.5,
    n=201,
    stages=3,
):
    """Brute-force prox for scalar pairs, gridding the set's own parameters.

    Measure-zero sets (diagonal, antidiagonal, subspace) cannot be searched
    by a plain 2-D grid with a membership filter, so each catalog set is
    swept along its natural parameterization instead.  ``g_of_gap(rho)`` is
    the scalar difference-form value g = f(w1 - w2) (pass 0 for none).
    Returns (w1, w2, final_cell) with final_cell the pair-space resolution.
    """
    if kind == "point":
        return 0.0, 0.0, 0.0

    def objective(w1, w2):
        return 0.5 * ((w1 - z1) ** 2 + (w2 - z2) ** 2) + step * g_of_gap(w1 - w2)

    if kind == "full":
        lo1, hi1 = z1 - span, z1 + span
        lo2, hi2 = z2 - span, z2 + span
        best, cell = (z1, z2), math.inf
        for _ in range(stages):
            xs = np.linspace(lo1, hi1, n)
            ys = np.linspace(lo2, hi2, n)
            bval = math.inf
            for w1 in xs:
                for w2 in ys:
                    val = objective(w1, w2)
                    if val < bval:
                        bval, best = val, (w1, w2)
            cell = max(xs[1] - xs[0], ys[1] - ys[0])
            lo1, hi1 = best[0] - 2 * cell, best[0] + 2 * cell
            lo2, hi2 = best[1] - 2 * cell, best[1] + 2 * cell
        return best[0], best[1], cell

    if kind == "strip":
        # mean m free, half-gap d clamped to [-sigma/2, sigma/2]
        cap = 0.5 * sigma
        m_lo, m_hi = 0.5 * (z1 + z2) - span, 0.5 * (z1 + z2) + span
        d_lo, d_hi = -cap, cap
        best, cell = (0.5 * (z1 + z2), 0.0), math.inf
        for _ in range(stages):
            ms = np.linspace(m_lo, m_hi, n)
            ds = np.linspace(d_lo, d_hi, n)
            bval = math.inf
            for m in ms:
                for d in ds:
                    val = objective(m + d, m - d)
                    if val < bval:
                        bval, best = val, (m, d)
            cm, cd = ms[1] - ms[0], ds[1] - ds[0]
            cell = cm + cd
            m_lo, m_hi = best[0] - 2 * cm, best[0] + 2 * cm
            d_lo, d_hi = max(-cap, best[1] - 2 * cd), min(cap, best[1] + 2 * cd)
        return best[0] + best[1], best[0] - best[1], cell

    # one-parameter families through the origin: w = (c1 t, c2 t)
    if kind == "diagonal":
        c1, c2 = 1.0, 1.0
    elif kind == "antidiagonal":
        c1, c2 = 1.0, -1.0
    elif kind == "subspace":
        c1, c2 = b_coef, a_coef
    else:
        raise ValueError(kind)
    scale = math.hypot(c1, c2)
    t0 = (c1 * z1 + c2 * z2) / (scale * scale)
    lo, hi = t0 - span, t0 + span
    best_t, cell = t0, math.inf
    for _ in range(stages):
        ts = np.linspace(lo, hi, 8 * n)
        bval = math.inf
        for t in ts:
            val = objective(c1 * t, c2 * t)
            if val < bval:
                bval, best_t = val, t
        cell = (ts[1] - ts[0]) * scale
        lo, hi = best_t - 2 * (ts[1] - ts[0]), best_t + 2 * (ts[1] - ts[0])
    return c1 * best_t, c2 * best_t, cell
