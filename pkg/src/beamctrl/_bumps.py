"""Compactly supported C-infinity bump kernels and smoothstep utilities.

The standard bump g(u) = exp(-1/(1-u^2)) on (-1,1) underlies three
constructions in this package: the mollifier that rounds the corners of the
spatial weight profile, localized test functions supported in the control
collar, and the smooth time cutoff used by the control synthesis.  Its
derivatives are rational-function multiples of g itself; they are generated
once at import time with sympy and evaluated with numpy afterwards.
"""

from __future__ import annotations

import numpy as np
import sympy as sp
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad

_MAX_BUMP_ORDER = 4

_u = sp.symbols("u")
_g = sp.exp(-1 / (1 - _u**2))
_BUMP_FUNCS = [
    sp.lambdify(_u, sp.diff(_g, _u, j), "numpy") for j in range(_MAX_BUMP_ORDER + 1)
]

# unit-bump mass, used to normalize the mollifier to unit integral
BUMP_MASS = quad(lambda y: float(np.exp(-1.0 / (1.0 - y * y))), -1.0, 1.0)[0]

# smoothstep s(u) = sigma(u) / (sigma(u) + sigma(1-u)), sigma(u) = exp(-1/u);
# s rises from 0 to 1 on (0,1) with all derivatives vanishing at both ends.
_sigma = sp.exp(-1 / _u)
_step = _sigma / (_sigma + _sigma.subs(_u, 1 - _u))
_STEP_FUNCS = [sp.lambdify(_u, sp.diff(_step, _u, j), "numpy") for j in range(3)]

_GAUSS_NODES, _GAUSS_WEIGHTS = leggauss(64)


def bump(u: np.ndarray, order: int = 0) -> np.ndarray:
    """Derivative of order `order` of exp(-1/(1-u^2)), zero for |u| >= 1."""
    if order > _MAX_BUMP_ORDER:
        raise ValueError(f"bump derivatives available up to order {_MAX_BUMP_ORDER}")
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0 - 1e-12
    if np.any(inside):
        out[inside] = _BUMP_FUNCS[order](u[inside])
    return out


def mollifier(y: np.ndarray, radius: float, order: int = 0) -> np.ndarray:
    """Derivatives of the unit-mass mollifier of the given support radius."""
    y = np.asarray(y, dtype=float)
    scale = 1.0 / (BUMP_MASS * radius ** (order + 1))
    return scale * bump(y / radius, order)


def _gauss_integral(lo: np.ndarray, hi: np.ndarray, f) -> np.ndarray:
    """Vectorized fixed-order Gauss quadrature of f over [lo, hi] per entry."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = mid[..., None] + half[..., None] * _GAUSS_NODES
    vals = f(nodes)
    return half * (vals @ _GAUSS_WEIGHTS)


def mollified_hinge(z: np.ndarray, radius: float, order: int = 0) -> np.ndarray:
    """Derivatives of H = mollifier * max(z, 0), the smoothed hinge.

    H(z) equals max(z, 0) exactly for |z| >= radius, because the kernel has
    unit mass and zero first moment.  Orders >= 2 reduce to mollifier
    derivatives.
    """
    z = np.asarray(z, dtype=float)
    if order >= 2:
        return mollifier(z, radius, order - 2)
    out = np.where(z > 0, z if order == 0 else 1.0, 0.0).astype(float)
    trans = np.abs(z) < radius
    if np.any(trans):
        zt = z[trans]
        if order == 0:
            vals = _gauss_integral(
                np.full_like(zt, -radius), zt,
                lambda y: mollifier(y, radius) * (zt[..., None] - y),
            )
        else:
            vals = _gauss_integral(
                np.full_like(zt, -radius), zt, lambda y: mollifier(y, radius)
            )
        out[trans] = vals
    return out


def corner_blend(z: np.ndarray, radius: float, order: int = 0) -> np.ndarray:
    """Derivatives of B = H - max(z, 0), supported on |z| < radius.

    Adding `jump * B(x - c)` to a piecewise-linear function whose slope jumps
    by `jump` at the corner c replaces the corner with a C-infinity blend and
    leaves the function untouched at distance >= radius.
    """
    z = np.asarray(z, dtype=float)
    if order >= 2:
        return mollifier(z, radius, order - 2)
    h = mollified_hinge(z, radius, order)
    ramp = np.where(z > 0, z if order == 0 else 1.0, 0.0)
    return h - ramp


def smoothstep(u: np.ndarray, order: int = 0) -> np.ndarray:
    """C-infinity monotone step from 0 at u<=0 to 1 at u>=1 (derivatives to 2)."""
    if order > 2:
        raise ValueError("smoothstep derivatives available up to order 2")
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    if order == 0:
        out[u >= 1.0] = 1.0
    inside = (u > 1e-12) & (u < 1.0 - 1e-12)
    if np.any(inside):
        out[inside] = _STEP_FUNCS[order](u[inside])
    return out
