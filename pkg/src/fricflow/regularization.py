"""Smoothed absolute value for the friction law and its derivatives.

The friction functional integrates g*|u| over the interface; its smooth
surrogate replaces |z| by sqrt(|z|^2 + eps^2) - eps. The three functions here
are that surrogate, its gradient, and its Hessian, which drive the Robin-type
interface residual, the Newton linearisation, and every bound the solver's
dissipation and complementarity checks rely on:

* 0 <= |z| - smooth_abs(z) <= eps
* |smooth_abs_grad(z)| < 1 and smooth_abs_grad(z) . z >= 0
* smooth_abs_hess(z) is symmetric positive semidefinite

All functions broadcast: z may be a single 2-vector or an (..., 2) array.
"""

from __future__ import annotations

import numpy as np


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not eps > 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    return eps


def smooth_abs(z: np.ndarray, eps: float) -> np.ndarray | float:
    """sqrt(|z|^2 + eps^2) - eps, a C^2 convex approximation of |z|."""
    eps = _check_eps(eps)
    z = np.asarray(z, dtype=float)
    r2 = np.sum(z * z, axis=-1)
    out = np.sqrt(r2 + eps * eps) - eps
    return float(out) if out.ndim == 0 else out


def smooth_abs_grad(z: np.ndarray, eps: float) -> np.ndarray:
    """Gradient z / sqrt(|z|^2 + eps^2); magnitude strictly below 1."""
    eps = _check_eps(eps)
    z = np.asarray(z, dtype=float)
    root = np.sqrt(np.sum(z * z, axis=-1, keepdims=True) + eps * eps)
    return z / root


def smooth_abs_hess(z: np.ndarray, eps: float) -> np.ndarray:
    """Hessian (I (|z|^2 + eps^2) - z z^T) / (|z|^2 + eps^2)^(3/2); PSD."""
    eps = _check_eps(eps)
    z = np.asarray(z, dtype=float)
    r2e = np.sum(z * z, axis=-1) + eps * eps
    eye = np.eye(2)
    outer = z[..., :, None] * z[..., None, :]
    return (r2e[..., None, None] * eye - outer) / r2e[..., None, None] ** 1.5


def slip_defect_bound(eps: float) -> float:
    """Supremum over z of |z| - smooth_abs_grad(z) . z; strictly below eps.

    The defect s * (1 - s / sqrt(s^2 + eps^2)) with s = |z| scales as
    eps * t(1 - t/sqrt(t^2+1)); the 1D maximum is a fixed constant of the
    surrogate, about 0.3003 * eps.
    """
    eps = _check_eps(eps)
    t = np.linspace(0.0, 60.0, 600001)
    vals = t * (1.0 - t / np.sqrt(t * t + 1.0))
    return eps * float(vals.max())
