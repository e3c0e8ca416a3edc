"""Named analytic pinning potentials and equilibrium densities.

Every catalog entry supplies closed-form evaluators (and gradients) that
accept scalars or numpy arrays, so the same functions serve the PDE solver,
the vortex ODE, and the critical-point analysis.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import ConfigurationError

OmegaPair = tuple[Callable, Callable]


def _quadratic(cx: float, cy: float, strength: float, offset: float) -> OmegaPair:
    def omega(x, y):
        return strength * ((x - cx) ** 2 + (y - cy) ** 2) + offset

    def grad(x, y):
        return 2.0 * strength * (x - cx), 2.0 * strength * (y - cy)

    return omega, grad


def _constant(value: float) -> OmegaPair:
    def omega(x, y):
        return value + 0.0 * np.asarray(x, dtype=np.float64)

    def grad(x, y):
        z = 0.0 * np.asarray(x, dtype=np.float64)
        return z, z

    return omega, grad


def _double_well(cx: float, cy: float, well: float) -> OmegaPair:
    w2 = well * well

    def omega(x, y):
        return ((x - cx) ** 2 - w2) ** 2 + (y - cy) ** 2

    def grad(x, y):
        return 4.0 * (x - cx) * ((x - cx) ** 2 - w2), 2.0 * (y - cy)

    return omega, grad


def _anisotropic(cx: float, cy: float, ax: float, ay: float) -> OmegaPair:
    def omega(x, y):
        return ax * (x - cx) ** 2 + ay * (y - cy) ** 2

    def grad(x, y):
        return 2.0 * ax * (x - cx), 2.0 * ay * (y - cy)

    return omega, grad


def omega_catalog(name: str, params: dict) -> OmegaPair:
    """Return (omega, grad_omega) evaluators for a named potential.

    Supported names: quadratic, constant, double_well, anisotropic.
    """
    cx = float(params.get("center_x", 0.5))
    cy = float(params.get("center_y", 0.5))
    if name == "quadratic":
        return _quadratic(cx, cy, float(params.get("strength", 1.0)), float(params.get("offset", 0.0)))
    if name == "constant":
        return _constant(float(params.get("value", 1.0)))
    if name == "double_well":
        return _double_well(cx, cy, float(params.get("well", 0.5)))
    if name == "anisotropic":
        return _anisotropic(cx, cy, float(params.get("ax", 1.0)), float(params.get("ay", 4.0)))
    raise ConfigurationError(f"unknown omega profile {name!r}")


def density_catalog(name: str, params: dict) -> OmegaPair:
    """Return (a, grad_a) evaluators for a named equilibrium density.

    Supported names: gaussian_bump, constant, one_plus_r2, exp_quadratic.
    """
    cx = float(params.get("center_x", 0.5))
    cy = float(params.get("center_y", 0.5))
    if name == "gaussian_bump":
        base = float(params.get("base", 1.0))
        amp = float(params.get("amp", 0.5))
        width = float(params.get("width", 8.0))

        def a(x, y):
            return base + amp * np.exp(-width * ((x - cx) ** 2 + (y - cy) ** 2))

        def grad_a(x, y):
            e = amp * np.exp(-width * ((x - cx) ** 2 + (y - cy) ** 2))
            return -2.0 * width * (x - cx) * e, -2.0 * width * (y - cy) * e

        return a, grad_a
    if name == "constant":
        value = float(params.get("value", 1.0))

        def a(x, y):
            return value + 0.0 * np.asarray(x, dtype=np.float64)

        def grad_a(x, y):
            z = 0.0 * np.asarray(x, dtype=np.float64)
            return z, z

        return a, grad_a
    if name == "one_plus_r2":

        def a(x, y):
            return 1.0 + (x - cx) ** 2 + (y - cy) ** 2

        def grad_a(x, y):
            return 2.0 * (x - cx), 2.0 * (y - cy)

        return a, grad_a
    if name == "exp_quadratic":
        lam = float(params.get("strength", 1.0))

        def a(x, y):
            return np.exp(lam * ((x - cx) ** 2 + (y - cy) ** 2))

        def grad_a(x, y):
            v = np.exp(lam * ((x - cx) ** 2 + (y - cy) ** 2))
            return 2.0 * lam * (x - cx) * v, 2.0 * lam * (y - cy) * v

        return a, grad_a
    raise ConfigurationError(f"unknown density profile {name!r}")
