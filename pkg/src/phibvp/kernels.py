"""Backend selection for the inner iteration kernels.

At import time the compiled extension (``_fastpath``) is preferred when
present; the numpy reference (``_purepath``) is the fallback and also covers
every case the compiled path does not (N > 1, custom operator callables).
``force_pure_python`` lets benchmarks and tests pin the fallback.
"""

from __future__ import annotations

import numpy as np

from . import _purepath

try:  # pragma: no cover - exercised only in builds with the extension
    from . import _fastpath

    _HAVE_FASTPATH = True
except ImportError:  # pragma: no cover
    _fastpath = None
    _HAVE_FASTPATH = False

_FORCE_PURE = False


def force_pure_python(flag: bool) -> None:
    """Pin the numpy backend regardless of extension availability."""
    global _FORCE_PURE
    _FORCE_PURE = bool(flag)


def active_backend() -> str:
    """'compiled' when the extension is loaded and not pinned off."""
    return "compiled" if (_HAVE_FASTPATH and not _FORCE_PURE) else "numpy"


def _fast_eligible(phi_map, u: np.ndarray) -> bool:
    return (
        _HAVE_FASTPATH
        and not _FORCE_PURE
        and u.shape[-1] == 1
        and phi_map.variant in ("relativistic", "p_relativistic")
    )


def _variant_code(phi_map) -> int:
    return 0 if phi_map.p == 2.0 else 1


def neumann_picard(phi_map, u, h, x, y, kappa, dt, big_t, tol, max_iter, relax, relax_floor):
    """Dispatching wrapper: see ``_purepath.neumann_picard``."""
    if _fast_eligible(phi_map, u):
        buf = np.ascontiguousarray(u[:, 0], dtype=float)
        resid, it, relax_out = _fastpath.neumann_picard_1d(
            buf,
            np.ascontiguousarray(h[:, 0], dtype=float),
            float(x[0]),
            float(y[0]),
            kappa,
            dt,
            big_t,
            _variant_code(phi_map),
            phi_map.p,
            phi_map.a,
            tol,
            max_iter,
            relax,
            relax_floor,
        )
        return buf[:, None], resid, it, relax_out
    return _purepath.neumann_picard(
        phi_map.phi_inverse, u, h, x, y, kappa, dt, big_t, tol, max_iter, relax, relax_floor
    )


def dirichlet_picard(phi_map, u, h, x, c_mid, kappa, dt, tol, max_iter, relax, relax_floor):
    """Dispatching wrapper: see ``_purepath.dirichlet_picard``."""
    if _fast_eligible(phi_map, u):
        buf = np.ascontiguousarray(u[:, 0], dtype=float)
        u_end, resid, it, relax_out = _fastpath.dirichlet_picard_1d(
            buf,
            np.ascontiguousarray(h[:, 0], dtype=float),
            float(x[0]),
            float(c_mid[0]),
            kappa,
            dt,
            _variant_code(phi_map),
            phi_map.p,
            phi_map.a,
            tol,
            max_iter,
            relax,
            relax_floor,
        )
        return buf[:, None], np.array([u_end]), resid, it, relax_out
    return _purepath.dirichlet_picard(
        phi_map.phi_inverse, u, h, x, c_mid, kappa, dt, tol, max_iter, relax, relax_floor
    )
