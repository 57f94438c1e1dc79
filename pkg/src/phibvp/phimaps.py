"""Gradient maps ``phi`` acting on a bounded ball of derivative values.

A map here is a homeomorphism ``phi`` from the open ball of radius ``a`` in
R^N onto all of R^N, with ``phi = grad(Phi)`` for a strictly convex potential
``Phi`` that is continuous up to the closed ball, nonpositive, and vanishes on
the sphere ``|y| = a``.  The two built-in families are

* ``relativistic``:      phi(y) = (y/a) / sqrt(1 - |y/a|^2)
* ``p_relativistic(p)``: phi(y) = |y/a|^(p-2) (y/a) / (1 - |y/a|^p)^(1-1/p)

with potentials ``Phi(y) = -a (1 - |y/a|^p)^(1/p)`` (p = 2 for the first
family, so ``relativistic`` is exactly ``p_relativistic(2)``).  Both have
closed-form inverses.  ``custom`` wraps user callables; a missing inverse is
reconstructed numerically from the radial profile.

All evaluators accept arrays whose last axis indexes the N components and are
vectorized over any leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError

#: Default relative margin for near-boundary evaluation: phi_eval refuses
#: arguments with |y| > a * (1 - EVAL_MARGIN).
EVAL_MARGIN = 1e-8

#: Largest radius fraction phi_inverse may return.  Chosen so that
#: a * _RHO_MAX < a holds exactly in floating point for every a (a gap of
#: one ulp can be lost in the multiply, three cannot).
_RHO_MAX = 1.0 - 3e-16


def _norms(y):
    """Euclidean norm along the last axis, keeping that axis (length 1)."""
    return np.sqrt(np.sum(y * y, axis=-1, keepdims=True))


@dataclass(frozen=True)
class PhiMap:
    """A singular gradient map and its potential.

    Use the constructors :meth:`relativistic`, :meth:`p_relativistic` or
    :meth:`custom` rather than instantiating directly.
    """

    variant: str
    a: float = 1.0
    p: float = 2.0
    _phi: Optional[Callable] = field(default=None, repr=False)
    _Phi: Optional[Callable] = field(default=None, repr=False)
    _phi_inv: Optional[Callable] = field(default=None, repr=False)
    _phi0: Optional[float] = field(default=None, repr=False)

    # -- constructors ------------------------------------------------------

    @classmethod
    def relativistic(cls, a: float = 1.0) -> "PhiMap":
        """Curvature map of the flat-space relativistic action, radius ``a``."""
        return cls(variant="relativistic", a=float(a), p=2.0)

    @classmethod
    def p_relativistic(cls, p: float, a: float = 1.0) -> "PhiMap":
        """Power-type generalization; requires ``p > 1``."""
        if not p > 1.0:
            raise DomainError(f"p_relativistic requires p > 1, got p={p}")
        return cls(variant="p_relativistic", a=float(a), p=float(p))

    @classmethod
    def custom(
        cls,
        phi: Callable,
        Phi: Callable,
        a: float,
        phi_inv: Optional[Callable] = None,
        phi0_value: Optional[float] = None,
    ) -> "PhiMap":
        """Wrap user callables.

        ``phi`` and ``Phi`` take arrays shaped (..., N).  If ``phi_inv`` is
        omitted, the inverse is computed numerically assuming the map is
        radial (``phi(y) = profile(|y|) * y/|y|``), by bisection plus Newton
        polish on the profile.  ``phi0_value`` defaults to ``Phi(0)`` probed
        at a 1-vector origin.
        """
        return cls(
            variant="custom",
            a=float(a),
            _phi=phi,
            _Phi=Phi,
            _phi_inv=phi_inv,
            _phi0=phi0_value,
        )

    def __post_init__(self):
        if not self.a > 0:
            raise DomainError(f"operator radius must be positive, got a={self.a}")

    # -- core evaluations --------------------------------------------------

    @property
    def phi0_value(self) -> float:
        """Potential value at the origin (its minimum)."""
        if self.variant == "custom":
            if self._phi0 is not None:
                return self._phi0
            origin = np.zeros(1)
            return float(np.asarray(self._Phi(origin)))
        return -self.a

    def phi_eval(self, y, margin: float = EVAL_MARGIN):
        """Evaluate phi at derivative samples ``y`` with |y| <= a(1-margin).

        Raises DomainError if any sample is closer to the singular sphere
        than the margin allows.
        """
        y = np.asarray(y, dtype=float)
        r = _norms(y)
        if np.any(r > self.a * (1.0 - margin)):
            worst = float(np.max(r))
            raise DomainError(
                f"phi_eval: derivative sample with |y|={worst:.17g} exceeds "
                f"a*(1-margin)={self.a * (1.0 - margin):.17g}"
            )
        if self.variant == "custom":
            return np.asarray(self._phi(y), dtype=float)
        rho = r / self.a
        if self.p == 2.0:
            # factor = profile(rho)/rho, finite at 0
            factor = 1.0 / (self.a * np.sqrt(1.0 - rho * rho))
        else:
            p = self.p
            w = 1.0 - rho**p
            # |y/a|^(p-2) * (y/a) = rho^(p-2) * y / a; guard rho=0 (limit 0
            # for p>1; for p<2 the power alone would blow up).
            with np.errstate(divide="ignore", invalid="ignore"):
                factor = np.where(
                    rho > 0.0, rho ** (p - 2.0) / (self.a * w ** (1.0 - 1.0 / p)), 0.0
                )
        return factor * y

    def phi_inverse(self, z):
        """Inverse map, defined on all of R^N with values in the open ball.

        The radial profile is evaluated on two branches (|z| <= 1 and
        |z| > 1, the latter in terms of 1/|z|) so that no intermediate
        overflows even at |z| ~ 1e300, and the returned radius is clamped
        strictly below a: huge fluxes land at the largest representable
        interior point instead of on the singular sphere itself.
        """
        z = np.asarray(z, dtype=float)
        if self.variant == "custom":
            if self._phi_inv is not None:
                return np.asarray(self._phi_inv(z), dtype=float)
            return self._phi_inverse_numeric(z)
        # scaled norm: |z| ~ 1e300 must not overflow the squared sum
        m = np.max(np.abs(z), axis=-1, keepdims=True)
        scale = np.maximum(m, 1.0)
        s = scale * _norms(z / scale)
        p = self.p
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            lo = np.minimum(s, 1.0)
            hi = np.maximum(s, 1.0)
            if p == 2.0:
                rho = np.where(
                    s <= 1.0,
                    lo / np.sqrt(1.0 + lo * lo),
                    1.0 / np.sqrt(1.0 + hi**-2.0),
                )
            else:
                pc = p / (p - 1.0)
                # radial inverse: rho^p = s^pc / (1 + s^pc)
                rho = np.where(
                    s <= 1.0,
                    lo ** (pc / p) * (1.0 + lo**pc) ** (-1.0 / p),
                    (1.0 + hi**-pc) ** (-1.0 / p),
                )
            rho = np.minimum(rho, _RHO_MAX)
            out = np.where(s > 0.0, self.a * rho * z / np.where(s > 0.0, s, 1.0), 0.0)
        return out

    def Phi_eval(self, y):
        """Potential value at ``y``; finite on the closed ball |y| <= a.

        Scalar per sample: output drops the component axis.
        """
        y = np.asarray(y, dtype=float)
        r = _norms(y)
        if np.any(r > self.a * (1.0 + 1e-12)):
            raise DomainError(
                f"Phi_eval: |y|={float(np.max(r)):.17g} outside the closed ball "
                f"of radius a={self.a:.17g}"
            )
        if self.variant == "custom":
            return np.asarray(self._Phi(y), dtype=float)
        rho = np.minimum(r / self.a, 1.0)
        val = -self.a * (np.maximum(1.0 - rho**self.p, 0.0)) ** (1.0 / self.p)
        return val[..., 0]

    # -- derivatives (used by the Newton fallback and the verifier) ---------

    def phi_jacobian(self, y):
        """Jacobian d(phi)/d(y) at each sample; shape (..., N, N).

        For the built-in radial families the closed form
        ``(profile(r)/r) I + (profile'(r) - profile(r)/r) yhat yhat^T`` is
        used; custom maps get central differences.
        """
        y = np.asarray(y, dtype=float)
        n = y.shape[-1]
        if self.variant == "custom":
            eps = 1e-7 * (1.0 + _norms(y))
            jac = np.empty(y.shape + (n,))
            for k in range(n):
                dy = np.zeros_like(y)
                dy[..., k] = eps[..., 0]
                jac[..., k] = (self._phi(y + dy) - self._phi(y - dy)) / (2 * eps)
            return jac
        r = _norms(y)
        rho = r / self.a
        p = self.p
        w = np.maximum(1.0 - rho**p, 1e-300)
        if p == 2.0:
            prof_over_rho = 1.0 / np.sqrt(w)  # psi(rho)/rho
            dprof = 1.0 / w**1.5  # psi'(rho)
        else:
            with np.errstate(divide="ignore"):
                prof_over_rho = np.where(rho > 0, rho ** (p - 2.0), 0.0) / w ** (
                    1.0 - 1.0 / p
                )
            dprof = (p - 1.0) * np.where(rho > 0, rho ** (p - 2.0), 0.0) / w ** (
                2.0 - 1.0 / p
            )
        eye = np.eye(n)
        with np.errstate(invalid="ignore", divide="ignore"):
            yhat = np.where(r > 0, y / np.where(r > 0, r, 1.0), 0.0)
        base = (prof_over_rho / self.a)[..., None] * eye
        corr = ((dprof - prof_over_rho) / self.a)[..., None] * (
            yhat[..., :, None] * yhat[..., None, :]
        )
        jac = base + corr
        if p != 2.0:
            # profile'(0+) is 0 for p > 2 and diverges for p < 2; pin exact
            # origins to a finite symmetric surrogate so Newton callers never
            # see inf (derivative samples are essentially never exactly 0).
            at0 = (r[..., 0] == 0.0)
            if np.any(at0):
                rho_floor = 1e-12
                jac[at0] = eye * ((p - 1.0) * rho_floor ** (p - 2.0) / self.a)
        return jac

    # -- numeric radial inverse for custom maps -----------------------------

    def _phi_inverse_numeric(self, z):
        z = np.asarray(z, dtype=float)
        flat = z.reshape(-1, z.shape[-1])
        out = np.empty_like(flat)
        for i, zi in enumerate(flat):
            s = float(np.linalg.norm(zi))
            if s == 0.0:
                out[i] = 0.0
                continue
            e = zi / s
            prof = lambda r: float(np.linalg.norm(self._phi(r * e)))
            lo, hi = 0.0, self.a * (1.0 - 1e-14)
            # expand lower bracket is unnecessary: prof(0)=0 <= s always
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if prof(mid) < s:
                    lo = mid
                else:
                    hi = mid
                if hi - lo < 1e-15 * self.a:
                    break
            out[i] = 0.5 * (lo + hi) * e
        return out.reshape(z.shape)


@dataclass
class HypothesisReport:
    """Numeric evidence that a map satisfies the structural hypotheses."""

    round_trip_max: float
    gradient_consistency_max: float
    monotonicity_min: float
    convexity_violation: float
    phi_at_zero: float
    potential_max: float
    phi0_value: float
    inverse_radius_max: float
    samples: int

    def ok(self, grad_tol: float = 1e-6) -> bool:
        return (
            self.round_trip_max <= 1e-10
            and self.gradient_consistency_max <= grad_tol
            and self.monotonicity_min >= -1e-12
            and self.convexity_violation <= 1e-12
            and abs(self.phi_at_zero) <= 1e-12
            and self.potential_max <= 1e-12
            and self.inverse_radius_max < 1.0
        )


def check_hypotheses(phi_map: PhiMap, n_samples: int = 200, seed: int = 0, dim: int = 1) -> HypothesisReport:
    """Sample-based audit of the structural hypotheses for ``phi_map``.

    Checks, over deterministic random samples:

    * round trip  |phi(phi_inverse(z)) - z| <= 1e-10 (1 + |z|),
    * phi matches the central-difference gradient of Phi away from the
      boundary (|y| <= 0.9 a),
    * monotonicity  <phi(y1) - phi(y2), y1 - y2>  >= 0,
    * midpoint convexity of Phi on the closed ball,
    * phi(0) = 0, Phi <= 0, and the inverse lands strictly inside the ball.

    Returns the worst observed values; ``report.ok()`` applies the default
    tolerances.
    """
    rng = np.random.default_rng(seed)
    a = phi_map.a

    def ball_samples(count, radius):
        d = rng.normal(size=(count, dim))
        d /= np.maximum(_norms(d), 1e-300)
        r = radius * rng.random((count, 1)) ** (1.0 / dim)
        return d * r

    # round trip over a wide range of flux magnitudes; containment is
    # checked first, and the round trip only evaluated at samples the
    # inverse actually placed inside the ball -- a stray inverse shows up
    # as inverse_radius_max >= 1 instead of crashing phi_eval
    z = rng.normal(size=(n_samples, dim)) * np.exp(rng.uniform(-3, 5, size=(n_samples, 1)))
    y_back = phi_map.phi_inverse(z)
    back_radius = _norms(y_back) / a
    inverse_radius = float(back_radius.max())
    contained = (back_radius < 1.0)[:, 0]
    if contained.any():
        z_in = z[contained]
        round_trip = float(
            (
                _norms(phi_map.phi_eval(y_back[contained], margin=0.0) - z_in)
                / (1.0 + _norms(z_in))
            ).max()
        )
    else:
        round_trip = float("inf")

    # gradient consistency on the safe interior
    y = ball_samples(n_samples, 0.9 * a)
    g = phi_map.phi_eval(y)
    eps = 1e-6 * a
    fd = np.empty_like(y)
    for k in range(dim):
        dy = np.zeros_like(y)
        dy[:, k] = eps
        fd[:, k] = (phi_map.Phi_eval(y + dy) - phi_map.Phi_eval(y - dy)) / (2 * eps)
    denom = 1.0 + _norms(g)
    grad_err = float((_norms(fd - g) / denom).max())

    # monotonicity of phi on pairs
    y1 = ball_samples(n_samples, a * (1 - 1e-6))
    y2 = ball_samples(n_samples, a * (1 - 1e-6))
    mono = float(
        np.sum((phi_map.phi_eval(y1, margin=0.0) - phi_map.phi_eval(y2, margin=0.0)) * (y1 - y2), axis=-1).min()
    )

    # midpoint convexity of Phi up to the boundary
    c1 = ball_samples(n_samples, a)
    c2 = ball_samples(n_samples, a)
    conv = float(
        np.max(
            phi_map.Phi_eval(0.5 * (c1 + c2))
            - 0.5 * (phi_map.Phi_eval(c1) + phi_map.Phi_eval(c2))
        )
    )

    zero = np.zeros((1, dim))
    return HypothesisReport(
        round_trip_max=float(round_trip),
        gradient_consistency_max=grad_err,
        monotonicity_min=mono,
        convexity_violation=max(conv, 0.0),
        phi_at_zero=float(_norms(phi_map.phi_eval(zero))[0, 0]),
        potential_max=float(phi_map.Phi_eval(ball_samples(n_samples, a)).max()),
        phi0_value=phi_map.phi0_value,
        inverse_radius_max=inverse_radius,
        samples=n_samples,
    )
