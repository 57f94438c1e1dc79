"""Reference numpy implementation of the inner iteration kernels.

These are the hot loops of the package: damped fixed-point sweeps for the
auxiliary two-point problem written against the conservative midpoint
discretization.  A compiled twin lives in ``_fastpath.pyx`` for the scalar
closed-form operator variants; ``kernels.py`` picks between them.  Both
implementations must track each other exactly (same update order, same
damping policy) -- the test suite compares them to ~1e-12.

Array convention: node values have shape (M+1, N); ``h`` likewise.
"""

from __future__ import annotations

import numpy as np


def trapezoid_weights(m: int, dt: float) -> np.ndarray:
    w = np.full(m + 1, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def _trapz(values: np.ndarray, dt: float) -> np.ndarray:
    """Trapezoid integral along axis 0 of node values; returns shape (N,)."""
    return dt * (values[1:-1].sum(axis=0) + 0.5 * (values[0] + values[-1]))


def midpoint_cumulative(f: np.ndarray, dt: float) -> np.ndarray:
    """Integrals of node data ``f`` from 0 to each interval midpoint.

    Entry i approximates the integral over [0, s_i] (s_i the i-th midpoint)
    by the node-trapezoid rule up to t_i plus a half-cell rectangle; this is
    the quadrature under which the sweep's fixed point satisfies the
    conservative scheme exactly.  Shape (M, N) from (M+1, N).
    """
    m = f.shape[0] - 1
    out = np.empty((m,) + f.shape[1:])
    out[0] = 0.5 * dt * f[0]
    if m > 1:
        np.cumsum(dt * f[1:m], axis=0, out=out[1:])
        out[1:] += out[0]
    return out


def neumann_picard(
    phi_inv,
    u: np.ndarray,
    h: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    kappa: float,
    dt: float,
    big_t: float,
    tol: float,
    max_iter: int,
    relax: float,
    relax_floor: float,
):
    """Damped Picard iteration for the flux-prescribed auxiliary problem.

    Solves the discrete system whose strong form is
    ``-[phi(u')]' + kappa (u - h) = 0`` with endpoint fluxes
    ``phi(u')(0) = x`` and ``phi(u')(T) = y``.  Each sweep rebuilds the
    midpoint flux ``W = x + kappa * int_0^s (u - h)``, integrates
    ``phi_inv(W)`` forward, and re-anchors the additive constant so the
    trapezoid mean identity ``int u = (y - x)/kappa + int h`` holds exactly.

    Returns ``(u, residual, iterations, relax)``; the caller decides whether
    a residual above ``tol`` is an error.
    """
    u = np.array(u, dtype=float)
    trapz_h = _trapz(h, dt)
    prev = np.inf
    resid = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        s_mid = midpoint_cumulative(u - h, dt)
        v = phi_inv(x + kappa * s_mid)
        path = np.vstack([np.zeros((1,) + u.shape[1:]), dt * np.cumsum(v, axis=0)])
        anchor = ((y - x) / kappa + trapz_h - _trapz(path, dt)) / big_t
        u_new = anchor + path
        resid = float(np.abs(u_new - u).max())
        if resid <= tol:
            u = u_new
            break
        if resid > prev and relax > relax_floor:
            relax = max(0.5 * relax, relax_floor)
        u += relax * (u_new - u)
        prev = resid
    return u, resid, it, relax


def dirichlet_picard(
    phi_inv,
    u: np.ndarray,
    h: np.ndarray,
    x: np.ndarray,
    c_mid: np.ndarray,
    kappa: float,
    dt: float,
    tol: float,
    max_iter: int,
    relax: float,
    relax_floor: float,
):
    """Damped Picard iteration for the forward (shooting) sweep.

    ``c_mid`` parametrizes the discrete flux at the first midpoint, so that
    the fixed point satisfies the conservative interior rows exactly with
    ``phi(Du_i) = c_mid + kappa * dt * sum_{k=1..i}(u_k - h_k)`` and
    ``u_0 = x``.  Returns ``(u, u_end, residual, iterations, relax)``.
    """
    m = u.shape[0] - 1
    u = np.array(u, dtype=float)
    u[0] = x
    prev = np.inf
    resid = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        f = u - h
        inner = np.empty((m,) + u.shape[1:])
        inner[0] = 0.0
        if m > 1:
            np.cumsum(dt * f[1:m], axis=0, out=inner[1:])
        v = phi_inv(c_mid + kappa * inner)
        u_new = np.empty_like(u)
        u_new[0] = x
        np.cumsum(dt * v, axis=0, out=u_new[1:])
        u_new[1:] += x
        resid = float(np.abs(u_new - u).max())
        if resid <= tol:
            u = u_new
            break
        if resid > prev and relax > relax_floor:
            relax = max(0.5 * relax, relax_floor)
        u += relax * (u_new - u)
        prev = resid
    return u, u[-1].copy(), resid, it, relax
