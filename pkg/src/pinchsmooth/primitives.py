"""Scalar building blocks: pinch profiles, smooth ramps and cylindrical coordinates.

Every function is vectorized over numpy arrays and has an exact first
derivative companion. The pinch profiles are odd, C1, increasing, fix
``±delta`` and have zero slope at the origin; outside ``[-delta, delta]`` they
are the identity, returned literally (no arithmetic) so that identity
regions are bitwise exact.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PinchProfile",
    "g_eval",
    "g_deriv",
    "g_alpha_eval",
    "g_alpha_deriv",
    "ramp_eval",
    "ramp_deriv",
    "cyl_to_cart",
    "cart_to_cyl",
    "cyl_jacobian",
    "CUBIC_MAX_SLOPE",
]

CUBIC_MAX_SLOPE = 4.0 / 3.0


def _check_width(delta):
    d = np.asarray(delta, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError(f"pinch width must be positive, got {delta!r}")
    return d


def g_eval(delta, x):
    """Cubic pinch ``sgn(x)(2x^2/delta - |x|^3/delta^2)`` on ``[-delta, delta]``."""
    d = _check_width(delta)
    x = np.asarray(x, dtype=float)
    d = np.broadcast_to(d, x.shape) if d.ndim else d
    ax = np.abs(x)
    inside = ax < d
    out = np.array(x, dtype=float, copy=True)
    if np.any(inside):
        di = d[inside] if np.ndim(d) else d
        a = ax[inside]
        out[inside] = np.sign(x[inside]) * (2.0 * a * a / di - a**3 / (di * di))
    return out if out.ndim else float(out)


def g_deriv(delta, x):
    """Derivative ``4|x|/delta - 3x^2/delta^2`` inside, 1 outside."""
    d = _check_width(delta)
    x = np.asarray(x, dtype=float)
    d = np.broadcast_to(d, x.shape) if d.ndim else d
    ax = np.abs(x)
    inside = ax < d
    out = np.ones_like(x, dtype=float)
    if np.any(inside):
        di = d[inside] if np.ndim(d) else d
        a = ax[inside]
        out[inside] = 4.0 * a / di - 3.0 * a * a / (di * di)
    return out if out.ndim else float(out)


def _check_alpha(alpha):
    if alpha < 0:
        raise ValueError(f"profile exponent must be >= 0, got {alpha!r}")


def g_alpha_eval(alpha, delta, x):
    """Power pinch ``(1+a)/d^a t^(1+a) - a/d^(1+a) t^(2+a)``, odd extension."""
    _check_alpha(alpha)
    d = float(_check_width(delta))
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    inside = ax < d
    out = np.array(x, dtype=float, copy=True)
    if np.any(inside):
        u = ax[inside] / d
        out[inside] = np.sign(x[inside]) * d * ((1 + alpha) * u ** (1 + alpha) - alpha * u ** (2 + alpha))
    return out if out.ndim else float(out)


def g_alpha_deriv(alpha, delta, x):
    _check_alpha(alpha)
    d = float(_check_width(delta))
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    inside = ax < d
    out = np.ones_like(x, dtype=float)
    if np.any(inside):
        u = ax[inside] / d
        out[inside] = (1 + alpha) * (u**alpha - u ** (1 + alpha)) + u ** (1 + alpha)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PinchProfile:
    """A pinch profile of width ``delta``; ``alpha=None`` selects the cubic kind."""

    delta: float
    alpha: float | None = None

    def __post_init__(self):
        _check_width(self.delta)
        if self.alpha is not None:
            _check_alpha(self.alpha)

    @property
    def kind(self) -> str:
        return "cubic" if self.alpha is None else "power"

    def __call__(self, x):
        if self.alpha is None:
            return g_eval(self.delta, x)
        return g_alpha_eval(self.alpha, self.delta, x)

    def deriv(self, x):
        if self.alpha is None:
            return g_deriv(self.delta, x)
        return g_alpha_deriv(self.alpha, self.delta, x)


def _check_ramp(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(~(a > 0)) or np.any(~(b > a)):
        raise ValueError(f"ramp needs 0 < a < b, got a={a!r}, b={b!r}")
    return a, b


def ramp_eval(a, b, x):
    """Smooth step: 0 below ``a``, 1 above ``b``, half a sine period between."""
    a, b = _check_ramp(a, b)
    x = np.asarray(x, dtype=float)
    u = np.clip((x - a) / (b - a), 0.0, 1.0)
    out = 0.5 * (1.0 + np.sin(np.pi * u - 0.5 * np.pi))
    out = np.where(x <= a, 0.0, np.where(x >= b, 1.0, out))
    return out if out.ndim else float(out)


def ramp_deriv(a, b, x):
    a, b = _check_ramp(a, b)
    x = np.asarray(x, dtype=float)
    u = (x - a) / (b - a)
    inside = (u > 0) & (u < 1)
    out = np.where(inside, 0.5 * np.pi / (b - a) * np.cos(np.pi * np.clip(u, 0, 1) - 0.5 * np.pi), 0.0)
    return out if out.ndim else float(out)


def cyl_to_cart(y, r, phi):
    """Map axial, radial, angular coordinates to ``(y, r cos phi, r sin phi)``."""
    y, r, phi = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (y, r, phi)))
    return np.stack([y, r * np.cos(phi), r * np.sin(phi)], axis=-1)


def cart_to_cyl(p):
    """Inverse of :func:`cyl_to_cart`; angle in ``[-pi, pi)``, zero on the axis."""
    p = np.asarray(p, dtype=float)
    y = p[..., 0]
    r = np.hypot(p[..., 1], p[..., 2])
    phi = np.arctan2(p[..., 2], p[..., 1])
    phi = np.where(phi >= np.pi, phi - 2 * np.pi, phi)
    phi = np.where(r > 0, phi, 0.0)
    return y, r, phi


def cyl_jacobian(r, phi):
    """Jacobian of ``cyl_to_cart`` w.r.t. ``(y, r, phi)``, shape ``(..., 3, 3)``."""
    r, phi = np.broadcast_arrays(np.asarray(r, float), np.asarray(phi, float))
    c, s = np.cos(phi), np.sin(phi)
    J = np.zeros(r.shape + (3, 3))
    J[..., 0, 0] = 1.0
    J[..., 1, 1] = c
    J[..., 1, 2] = -r * s
    J[..., 2, 1] = s
    J[..., 2, 2] = r * c
    return J
