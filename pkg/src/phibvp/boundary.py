"""Convex endpoint sets and boundary functionals.

Boundary behaviour is encoded by a proper convex lower-semicontinuous
functional ``j`` on pairs of endpoint values, here always of the composite
form ``j = g + indicator(K)`` with ``K`` a convex set from a small catalog
and ``g`` an optional smooth convex term with ``g(0) = 0`` and
``grad g(0) = 0``.  A pair is stored as an array of shape (2, N):
row 0 the left endpoint value, row 1 the right.

Catalog sets: a single point (pinned endpoints), the full space (free
endpoints), the diagonal (equal endpoints), the antidiagonal (opposite
endpoints), a coupled subspace ``a_coef * left = b_coef * right``, and the
strip ``|left - right| <= sigma``.  A strip with ``sigma = 0`` is constructed
as the diagonal and ``sigma = inf`` as the full space, so the closed-form
normal cones stay correct in the degenerate limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError, DomainError

#: absolute tolerance (scaled by 1 + |z|) for set membership decisions
MEMBER_TOL = 1e-9


def pair(x, y) -> np.ndarray:
    """Stack two endpoint values into the (2, N) pair layout."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return np.stack([x, y])


def pair_dot(u: np.ndarray, v: np.ndarray) -> float:
    """Inner product of two pairs (sum over both endpoints and components)."""
    return float(np.sum(u * v))


def pair_norm(u: np.ndarray) -> float:
    return float(np.sqrt(np.sum(u * u)))


@dataclass(frozen=True)
class ConvexSetK:
    """One of the catalog endpoint constraint sets."""

    kind: str
    sigma: float = math.inf
    a_coef: float = 1.0
    b_coef: float = 1.0

    @classmethod
    def point(cls):
        return cls(kind="point")

    @classmethod
    def full_space(cls):
        return cls(kind="full")

    @classmethod
    def diagonal(cls):
        return cls(kind="diagonal")

    @classmethod
    def antidiagonal(cls):
        return cls(kind="antidiagonal")

    @classmethod
    def subspace(cls, a_coef: float, b_coef: float):
        if a_coef == 0.0 and b_coef == 0.0:
            raise DomainError("subspace coupling needs |a_coef| + |b_coef| > 0")
        return cls(kind="subspace", a_coef=float(a_coef), b_coef=float(b_coef))

    @classmethod
    def strip(cls, sigma: float):
        if sigma < 0:
            raise DomainError(f"strip width must be >= 0, got {sigma}")
        if sigma == 0.0:
            return cls.diagonal()
        if math.isinf(sigma):
            return cls.full_space()
        return cls(kind="strip", sigma=float(sigma))

    # -- geometry --------------------------------------------------------

    def contains(self, z: np.ndarray, tol: float = MEMBER_TOL) -> bool:
        z = np.asarray(z, dtype=float)
        scale = 1.0 + pair_norm(z)
        return self._distance(z) <= tol * scale

    def _distance(self, z: np.ndarray) -> float:
        return pair_norm(z - self.project(z))

    def project(self, z: np.ndarray) -> np.ndarray:
        """Euclidean projection onto the set."""
        z = np.asarray(z, dtype=float)
        x, y = z[0], z[1]
        if self.kind == "point":
            return np.zeros_like(z)
        if self.kind == "full":
            return z.copy()
        if self.kind == "diagonal":
            m = 0.5 * (x + y)
            return np.stack([m, m])
        if self.kind == "antidiagonal":
            d = 0.5 * (x - y)
            return np.stack([d, -d])
        if self.kind == "subspace":
            a, b = self.a_coef, self.b_coef
            v = (b * x + a * y) / (a * a + b * b)
            return np.stack([b * v, a * v])
        if self.kind == "strip":
            d = x - y
            nd = float(np.linalg.norm(d))
            if nd <= self.sigma:
                return z.copy()
            m = 0.5 * (x + y)
            half = 0.5 * self.sigma * d / nd
            return np.stack([m + half, m - half])
        raise DomainError(f"unknown set kind {self.kind!r}")

    def normal_cone_membership(self, z: np.ndarray, xi: np.ndarray, tol: float = 1e-9) -> bool:
        """Closed-form test ``xi in N_K(z)``; requires ``z in K``."""
        z = np.asarray(z, dtype=float)
        xi = np.asarray(xi, dtype=float)
        if not self.contains(z):
            raise DomainError("normal cone queried at a point outside the set")
        scale = tol * (1.0 + pair_norm(xi))
        if self.kind == "point":
            return True
        if self.kind == "full":
            return pair_norm(xi) <= scale
        if self.kind == "diagonal":
            return float(np.linalg.norm(xi[0] + xi[1])) <= scale
        if self.kind == "antidiagonal":
            return float(np.linalg.norm(xi[0] - xi[1])) <= scale
        if self.kind == "subspace":
            a, b = self.a_coef, self.b_coef
            return float(np.linalg.norm(b * xi[0] + a * xi[1])) <= scale
        if self.kind == "strip":
            d = z[0] - z[1]
            nd = float(np.linalg.norm(d))
            if nd < self.sigma * (1.0 - 1e-9) - 1e-12:
                return pair_norm(xi) <= scale
            # boundary: xi = s (d, -d) with s >= 0
            denom = 2.0 * nd * nd
            s = (float(np.dot(xi[0], d)) - float(np.dot(xi[1], d))) / denom
            if s < -tol:
                return False
            s = max(s, 0.0)
            model = np.stack([s * d, -s * d])
            return pair_norm(xi - model) <= scale
        raise DomainError(f"unknown set kind {self.kind!r}")


@dataclass(frozen=True)
class SmoothBoundaryTerm:
    """Smooth convex term ``g`` added to the indicator of the set.

    Built-ins are difference forms ``g(z) = f(z[0] - z[1])``:

    * ``quadratic_diff(weight)``: f(w) = weight * |w|^2 / 2
    * ``exp_diff()``:             f(w) = (exp(|w|^2) - 1) / 2

    Custom terms supply ``g`` and ``grad`` callables on (2, N) pairs plus the
    structural flags the solvers need.
    """

    kind: str
    weight: float = 1.0
    g_callable: Optional[Callable] = None
    grad_callable: Optional[Callable] = None
    difference_form: bool = True
    bounded_given_bounded_gap: bool = True

    @classmethod
    def quadratic_diff(cls, weight: float = 1.0):
        if weight < 0:
            raise DomainError("quadratic boundary term needs weight >= 0")
        return cls(kind="quadratic_diff", weight=float(weight))

    @classmethod
    def exp_diff(cls):
        return cls(kind="exp_diff")

    @classmethod
    def custom(cls, g, grad, difference_form=False, bounded_given_bounded_gap=False):
        term = cls(
            kind="custom",
            g_callable=g,
            grad_callable=grad,
            difference_form=difference_form,
            bounded_given_bounded_gap=bounded_given_bounded_gap,
        )
        origin = np.zeros((2, 1))
        if abs(float(term.value(origin))) > 1e-12 or pair_norm(term.grad(origin)) > 1e-12:
            raise DomainError("custom boundary term must satisfy g(0)=0, grad g(0)=0")
        return term

    def value(self, z: np.ndarray) -> float:
        z = np.asarray(z, dtype=float)
        if self.kind == "custom":
            return float(self.g_callable(z))
        w = z[0] - z[1]
        q = float(np.dot(w, w))
        if self.kind == "quadratic_diff":
            return 0.5 * self.weight * q
        if self.kind == "exp_diff":
            return 0.5 * (math.exp(q) - 1.0)
        raise DomainError(f"unknown smooth term {self.kind!r}")

    def grad(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.kind == "custom":
            return np.asarray(self.grad_callable(z), dtype=float)
        w = z[0] - z[1]
        q = float(np.dot(w, w))
        if self.kind == "quadratic_diff":
            gw = self.weight * w
        elif self.kind == "exp_diff":
            gw = math.exp(q) * w
        else:
            raise DomainError(f"unknown smooth term {self.kind!r}")
        return np.stack([gw, -gw])


@dataclass(frozen=True)
class BoundaryFunctional:
    """``j = g + indicator(K)`` on endpoint pairs."""

    set: ConvexSetK
    g: Optional[SmoothBoundaryTerm] = None

    def domain_dim_hint(self) -> Optional[int]:
        return None


# -- operations on boundary functionals ------------------------------------
#
# Public entry points take the two endpoint values as separate vectors;
# the pair-layout variants (suffix _pair) are what the solvers call.


def _as_set(obj) -> ConvexSetK:
    return obj.set if isinstance(obj, BoundaryFunctional) else obj


def j_eval_pair(bf: BoundaryFunctional, z: np.ndarray, tol: float = MEMBER_TOL) -> float:
    """Value of j at the pair ``z`` (+inf outside the set within tolerance)."""
    z = np.asarray(z, dtype=float)
    if not bf.set.contains(z, tol):
        return math.inf
    return bf.g.value(z) if bf.g is not None else 0.0


def j_eval(bf: BoundaryFunctional, x, y, tol: float = MEMBER_TOL) -> float:
    """Value of j at endpoint values ``(x, y)``; +inf outside the set."""
    return j_eval_pair(bf, pair(x, y), tol)


def project_K(set_k, x, y):
    """Euclidean projection of ``(x, y)`` onto the set, as a pair of vectors."""
    out = _as_set(set_k).project(pair(x, y))
    return out[0], out[1]


def _radial_profile(term: SmoothBoundaryTerm):
    """|grad f|(rho) for the built-in difference forms f; None for custom."""
    if term.kind == "quadratic_diff":
        return lambda rho: term.weight * rho
    if term.kind == "exp_diff":
        return lambda rho: rho * math.exp(rho * rho)
    return None


def _prox_catalog(bf: BoundaryFunctional, z: np.ndarray, step: float) -> Optional[np.ndarray]:
    """Exact prox for a built-in difference-form g over a catalog set.

    In mean/half-difference coordinates s = (w0 + w1)/2, d = (w0 - w1)/2 the
    objective |w - z|^2/2 + step f(2d) separates: every catalog set either
    fixes one coordinate or couples them linearly, and since f is radial the
    half-difference minimizer points along the data, leaving one strictly
    increasing scalar equation in r = |d|.  Returns None when g is custom.
    """
    gr = _radial_profile(bf.g)
    if gr is None:
        return None
    k = bf.set
    sz = 0.5 * (z[0] + z[1])
    dz = 0.5 * (z[0] - z[1])
    if k.kind == "point":
        return np.zeros_like(z)
    if k.kind == "diagonal":
        return np.stack([sz, sz])
    gamma = None
    cap = math.inf
    if k.kind == "full":
        mean, target = sz, dz
    elif k.kind == "antidiagonal":
        mean, target = np.zeros_like(sz), dz
    elif k.kind == "strip":
        mean, target = sz, dz
        cap = 0.5 * k.sigma
    elif k.kind == "subspace":
        a, b = k.a_coef, k.b_coef
        if b == a:
            return np.stack([sz, sz])
        gamma = (b + a) / (b - a)
        mean, target = None, gamma * sz + dz
    else:
        raise DomainError(f"unknown set kind {k.kind!r}")
    coef = 1.0 + (gamma * gamma if gamma is not None else 0.0)
    rz = float(np.linalg.norm(target))
    if rz == 0.0:
        delta = np.zeros_like(dz)
    else:
        fun = lambda r: coef * r + step * gr(2.0 * r) - rz
        hi = min(rz / coef, cap)
        if fun(hi) <= 0.0:
            r_star = hi  # the cap binds (or g vanishes along the bracket)
        else:
            r_star = brentq(fun, 0.0, hi, xtol=1e-15, rtol=4.0 * np.finfo(float).eps)
        delta = (min(r_star, cap) / rz) * target
    if gamma is not None:
        mean = gamma * delta
    return np.stack([mean + delta, mean - delta])


def prox_pair(bf: BoundaryFunctional, z: np.ndarray, step: float, tol: float = 1e-10, max_iter: int = 200) -> np.ndarray:
    """Proximal point of ``step * j`` at the pair ``z``.

    With no smooth term this is the projection.  Built-in difference-form
    terms over catalog sets reduce exactly to a scalar root-find (see
    ``_prox_catalog``); only custom smooth terms fall back to projected
    gradient with backtracking, whose step never exceeds 1/(1 + step) so the
    quadratic part alone cannot destabilize it.
    """
    if step <= 0:
        raise DomainError(f"prox step must be positive, got {step}")
    z = np.asarray(z, dtype=float)
    if bf.g is None:
        return bf.set.project(z)
    exact = _prox_catalog(bf, z, step)
    if exact is not None:
        return exact

    def merit(w):
        return 0.5 * pair_norm(w - z) ** 2 + step * bf.g.value(w)

    w = bf.set.project(z)
    mw = merit(w)
    s_cap = 1.0 / (1.0 + step)
    s = s_cap
    scale = 1.0 + pair_norm(z)
    resid = math.inf
    for _ in range(max_iter):
        grad = (w - z) + step * bf.g.grad(w)
        while True:
            w_new = bf.set.project(w - s * grad)
            dw = w_new - w
            ndw = pair_norm(dw)
            m_new = merit(w_new)
            if m_new <= mw + pair_dot(grad, dw) + ndw * ndw / (2.0 * s) + 4e-16 * abs(mw):
                break
            s *= 0.5
            if s < 1e-16:
                raise ConvergenceError("prox_j backtracking underflowed", residual=ndw)
        resid = ndw / s
        w, mw = w_new, m_new
        if resid <= tol * scale:
            return w
        s = min(s * 1.3, s_cap)
    raise ConvergenceError(
        f"prox_j projected gradient stalled (residual {resid:.3e} after {max_iter} iterations)",
        residual=resid,
        iterations=max_iter,
    )


def prox_j(bf: BoundaryFunctional, x, y, step: float, tol: float = 1e-10, max_iter: int = 200):
    """Proximal point of ``step * j`` at ``(x, y)``, as a pair of vectors."""
    out = prox_pair(bf, pair(x, y), step, tol=tol, max_iter=max_iter)
    return out[0], out[1]


def normal_cone_membership(set_k, z: np.ndarray, xi: np.ndarray, tol: float = 1e-9) -> bool:
    """Closed-form test ``xi in N_K(z)``; requires ``z in K``.

    ``z`` and ``xi`` are pairs, either (2, N) arrays or (left, right) tuples.
    """
    z = np.asarray(z, dtype=float) if not isinstance(z, tuple) else pair(*z)
    xi = np.asarray(xi, dtype=float) if not isinstance(xi, tuple) else pair(*xi)
    return _as_set(set_k).normal_cone_membership(z, xi, tol)


def subdifferential_residual(
    bf: BoundaryFunctional,
    z: np.ndarray,
    xi: np.ndarray,
    probe_radius: float = 1.0,
    probe_count: int = 128,
    seed: int = 0,
) -> float:
    """Sampled violation of the subgradient inequality for ``xi`` at ``z``.

    Returns max(0, sup_w [ <xi, w - z> - j(w) + j(z) ]) over probe points
    ``w`` in the domain of j (random perturbations of z projected onto K,
    plus a few structured directions).  Zero within tolerance certifies
    ``xi in subdiff j(z)`` as far as the probes can see.
    """
    z = np.asarray(z, dtype=float) if not isinstance(z, tuple) else pair(*z)
    xi = np.asarray(xi, dtype=float) if not isinstance(xi, tuple) else pair(*xi)
    jz = j_eval_pair(bf, z)
    if math.isinf(jz):
        raise DomainError("subdifferential residual queried outside the domain of j")
    rng = np.random.default_rng(seed)
    worst = 0.0
    n = z.shape[1]
    for k in range(probe_count):
        noise = rng.normal(size=(2, n))
        noise *= probe_radius * rng.random() / max(pair_norm(noise), 1e-300)
        w = bf.set.project(z + noise)
        jw = j_eval_pair(bf, w)
        gain = pair_dot(xi, w - z) - jw + jz
        if gain > worst:
            worst = gain
    return worst


def cone_diagonal_trivial(bf: BoundaryFunctional) -> bool:
    """True when the closed cone of the domain meets the diagonal only at 0."""
    k = bf.set
    if k.kind == "point":
        return True
    if k.kind == "antidiagonal":
        return True
    if k.kind == "subspace":
        return k.a_coef != k.b_coef
    # diagonal, full space, strip with sigma > 0 all contain diagonal rays
    return False


def projections_bounded(bf: BoundaryFunctional):
    """Boundedness flags of the two coordinate projections of the domain."""
    bounded = bf.set.kind == "point"
    return bounded, bounded


def projection_radii(bf: BoundaryFunctional):
    """Radii of the coordinate projections of the domain (inf if unbounded)."""
    if bf.set.kind == "point":
        return 0.0, 0.0
    return math.inf, math.inf


def shift_invariant_diagonal(bf: BoundaryFunctional) -> bool:
    """True when j(z + (c, c)) = j(z) for every diagonal shift c."""
    k = bf.set
    set_ok = k.kind in ("diagonal", "full", "strip") or (
        k.kind == "subspace" and k.a_coef == k.b_coef
    )
    if not set_ok:
        return False
    if bf.g is None:
        return True
    return bf.g.difference_form


def diagonal_zero(bf: BoundaryFunctional) -> bool:
    """True when the whole diagonal lies in the domain with j = 0 there."""
    k = bf.set
    if k.kind not in ("diagonal", "full", "strip") and not (
        k.kind == "subspace" and k.a_coef == k.b_coef
    ):
        return False
    if bf.g is None:
        return True
    return bf.g.difference_form  # difference forms satisfy g = f(0) = 0 on it


def bounded_on_domain(bf: BoundaryFunctional) -> bool:
    """True when j is bounded on its domain."""
    k = bf.set
    if bf.g is None:
        return True  # indicator is 0 on its domain
    if k.kind in ("point", "diagonal"):
        return True
    if k.kind == "strip":
        return bf.g.difference_form and bf.g.bounded_given_bounded_gap
    if k.kind == "subspace" and k.a_coef == k.b_coef:
        return True if bf.g.difference_form else bf.g.bounded_given_bounded_gap
    return False
