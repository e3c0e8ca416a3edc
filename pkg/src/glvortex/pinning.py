"""Inhomogeneity profiles (omega, A, B), their construction from equilibrium
densities, and critical-point analysis of the pinning potential.

The two physical models reduce to the same evolution equation:
  * density model:   omega = ln a, A = lap(sqrt a)/sqrt a, B = a
  * thin-film model: omega = ln a, A = 0, B = 1
A profile therefore stores omega/A/B both as grid samples and as analytic
evaluators; the evaluators drive the ODE law and the critical-point search.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from .errors import ConfigurationError, ModelError
from .fields import Grid2D, ScalarField, laplacian

log = logging.getLogger(__name__)

# step for analytic-evaluator finite differences; balances truncation against
# rounding for second-order central formulas on O(1) data
FD_STEP = 3e-4

TOL_CRIT = 1e-10
MERGE_TOL = 1e-6


def _fd_gradient_fn(f: Callable) -> Callable:
    def grad(x, y):
        d = FD_STEP
        gx = (f(x + d, y) - f(x - d, y)) / (2.0 * d)
        gy = (f(x, y + d) - f(x, y - d)) / (2.0 * d)
        return gx, gy

    return grad


def _fd_laplacian_fn(f: Callable) -> Callable:
    def lap(x, y):
        d = FD_STEP
        return (f(x + d, y) + f(x - d, y) + f(x, y + d) + f(x, y - d) - 4.0 * f(x, y)) / (d * d)

    return lap


def _grad_log_fn(a_fn: Callable, grad_a: Callable) -> Callable:
    """Gradient of ln(a) from the analytic density gradient: grad(a)/a."""

    def grad(x, y):
        gax, gay = grad_a(x, y)
        av = a_fn(x, y)
        return gax / av, gay / av

    return grad


def _bilinear_fn(grid: Grid2D, values: np.ndarray) -> Callable:
    """Evaluator backed by grid samples, for profiles built without analytic input."""

    def ev(x, y):
        fx = (np.asarray(x, dtype=np.float64) - grid.origin[0]) / grid.h
        fy = (np.asarray(y, dtype=np.float64) - grid.origin[1]) / grid.h
        i = np.clip(np.floor(fx).astype(int), 0, grid.nx - 2)
        j = np.clip(np.floor(fy).astype(int), 0, grid.ny - 2)
        tx = np.clip(fx - i, 0.0, 1.0)
        ty = np.clip(fy - j, 0.0, 1.0)
        v00 = values[i, j]
        v10 = values[i + 1, j]
        v01 = values[i, j + 1]
        v11 = values[i + 1, j + 1]
        return (1 - tx) * (1 - ty) * v00 + tx * (1 - ty) * v10 + (1 - tx) * ty * v01 + tx * ty * v11

    return ev


@dataclass(frozen=True)
class PinningProfile:
    """omega, A, B sampled on the grid plus their analytic evaluators."""

    grid: Grid2D
    kind: str  # generic | from_density | thin_film
    omega: ScalarField
    A: ScalarField
    B: ScalarField
    omega_fn: Callable
    grad_omega_fn: Callable
    A_fn: Callable
    B_fn: Callable

    def __post_init__(self):
        if self.kind not in ("generic", "from_density", "thin_film"):
            raise ConfigurationError(f"unknown profile kind {self.kind!r}")
        if float(self.B.values.min()) <= 0.0:
            raise ModelError("profile requires B > 0 on the whole grid")
        if float(self.omega.values.min()) <= 0.0:
            warnings.warn(
                "omega is not positive everywhere; dynamics only involve grad(omega), continuing",
                stacklevel=2,
            )

    def grad_omega_at(self, x: float, y: float) -> tuple[float, float]:
        gx, gy = self.grad_omega_fn(x, y)
        return float(gx), float(gy)

    @cached_property
    def grad_omega_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """grad(omega) sampled on the full mesh, contiguous for the step kernels."""
        X, Y = self.grid.mesh
        gx, gy = self.grad_omega_fn(X, Y)
        wx = np.ascontiguousarray(np.broadcast_to(gx, X.shape), dtype=np.float64)
        wy = np.ascontiguousarray(np.broadcast_to(gy, X.shape), dtype=np.float64)
        return wx, wy

    @cached_property
    def sup_grad_omega(self) -> float:
        wx, wy = self.grad_omega_arrays
        return float(np.max(np.hypot(wx, wy)))

    @cached_property
    def sup_B(self) -> float:
        return float(self.B.values.max())


def make_generic(
    grid: Grid2D,
    omega_fn: Callable,
    grad_omega_fn: Optional[Callable] = None,
    A_fn: Optional[Callable] = None,
    B_fn: Optional[Callable] = None,
    kind: str = "generic",
) -> PinningProfile:
    """Profile from a direct omega evaluator; A defaults to 0 and B to 1."""
    if grad_omega_fn is None:
        grad_omega_fn = _fd_gradient_fn(omega_fn)
    if A_fn is None:
        A_fn = lambda x, y: 0.0 * np.asarray(x, dtype=np.float64)
    if B_fn is None:
        B_fn = lambda x, y: 1.0 + 0.0 * np.asarray(x, dtype=np.float64)
    return PinningProfile(
        grid=grid,
        kind=kind,
        omega=ScalarField.from_function(grid, omega_fn),
        A=ScalarField.from_function(grid, A_fn),
        B=ScalarField.from_function(grid, B_fn),
        omega_fn=omega_fn,
        grad_omega_fn=grad_omega_fn,
        A_fn=A_fn,
        B_fn=B_fn,
    )


def _density_samples(a, grid: Grid2D) -> np.ndarray:
    if isinstance(a, ScalarField):
        if a.grid != grid:
            raise ConfigurationError("density field lives on a different grid")
        return a.values
    X, Y = grid.mesh
    return np.broadcast_to(np.asarray(a(X, Y), dtype=np.float64), grid.shape).copy()


def from_density(a, grid: Grid2D, grad_a: Optional[Callable] = None) -> PinningProfile:
    """Density model: omega = ln a, A = lap(sqrt a)/sqrt a, B = a.

    ``a`` may be an analytic evaluator (preferred; A is then computed by
    small-step finite differences of sqrt(a), independent of the grid) or a
    ScalarField of samples (A falls back to the 5-point stencil, zero on the
    boundary ring).
    """
    a_vals = _density_samples(a, grid)
    if float(a_vals.min()) <= 0.0:
        bad = np.argwhere(a_vals <= 0.0)[0]
        raise ModelError(f"density must be positive, a <= 0 at node (i={bad[0]}, j={bad[1]})")

    analytic = not isinstance(a, ScalarField)
    if analytic:
        a_fn = a
        sqrt_a = lambda x, y: np.sqrt(a_fn(x, y))
        lap_sqrt_a = _fd_laplacian_fn(sqrt_a)
        A_fn = lambda x, y: lap_sqrt_a(x, y) / sqrt_a(x, y)
        A_field = ScalarField.from_function(grid, A_fn)
    else:
        sqrt_vals = np.sqrt(a_vals)
        A_vals = laplacian(ScalarField(grid, sqrt_vals)).values / sqrt_vals
        A_field = ScalarField(grid, A_vals)
        A_fn = _bilinear_fn(grid, A_vals)
        a_fn = _bilinear_fn(grid, a_vals)

    omega_fn = lambda x, y: np.log(a_fn(x, y))
    grad_omega_fn = _grad_log_fn(a_fn, grad_a) if grad_a is not None else _fd_gradient_fn(omega_fn)

    return PinningProfile(
        grid=grid,
        kind="from_density",
        omega=ScalarField(grid, np.log(a_vals)),
        A=A_field,
        B=ScalarField(grid, a_vals.copy()),
        omega_fn=omega_fn,
        grad_omega_fn=grad_omega_fn,
        A_fn=A_fn,
        B_fn=a_fn,
    )


def thin_film(a, grid: Grid2D, grad_a: Optional[Callable] = None) -> PinningProfile:
    """Thin-film model: omega = ln a, A = 0, B = 1."""
    a_vals = _density_samples(a, grid)
    if float(a_vals.min()) <= 0.0:
        bad = np.argwhere(a_vals <= 0.0)[0]
        raise ModelError(f"density must be positive, a <= 0 at node (i={bad[0]}, j={bad[1]})")
    a_fn = a if not isinstance(a, ScalarField) else _bilinear_fn(grid, a_vals)
    omega_fn = lambda x, y: np.log(a_fn(x, y))
    grad_omega_fn = _grad_log_fn(a_fn, grad_a) if grad_a is not None else _fd_gradient_fn(omega_fn)
    zero = lambda x, y: 0.0 * np.asarray(x, dtype=np.float64)
    one = lambda x, y: 1.0 + 0.0 * np.asarray(x, dtype=np.float64)
    return PinningProfile(
        grid=grid,
        kind="thin_film",
        omega=ScalarField(grid, np.log(a_vals)),
        A=ScalarField.constant(grid, 0.0),
        B=ScalarField.constant(grid, 1.0),
        omega_fn=omega_fn,
        grad_omega_fn=grad_omega_fn,
        A_fn=zero,
        B_fn=one,
    )


def epsilon0(p: PinningProfile) -> float:
    """Coherence-length threshold sqrt(inf B / (1 + sup |A|)), node samples."""
    inf_B = float(p.B.values.min())
    sup_A = float(np.abs(p.A.values).max())
    return float(np.sqrt(inf_B / (1.0 + sup_A)))


@dataclass
class CriticalPoint:
    location: tuple[float, float]
    omega_value: float
    classification: str  # min | max | saddle | degenerate
    theta1: Optional[float] = None
    theta2: Optional[float] = None


def _grad_jacobian(p: PinningProfile, x: float, y: float, step: float = 1e-5) -> np.ndarray:
    gxp = p.grad_omega_at(x + step, y)
    gxm = p.grad_omega_at(x - step, y)
    gyp = p.grad_omega_at(x, y + step)
    gym = p.grad_omega_at(x, y - step)
    return np.array(
        [
            [(gxp[0] - gxm[0]) / (2 * step), (gyp[0] - gym[0]) / (2 * step)],
            [(gxp[1] - gxm[1]) / (2 * step), (gyp[1] - gym[1]) / (2 * step)],
        ]
    )


def _classify(hessian: np.ndarray) -> str:
    sym = 0.5 * (hessian + hessian.T)
    eigs = np.linalg.eigvalsh(sym)
    tol = 1e-5 * max(1.0, float(np.max(np.abs(eigs))))
    if np.any(np.abs(eigs) <= tol):
        return "degenerate"
    if np.all(eigs > 0):
        return "min"
    if np.all(eigs < 0):
        return "max"
    return "saddle"


def find_critical_points(
    p: PinningProfile,
    seeds: Sequence[tuple[float, float]],
    tol_crit: float = TOL_CRIT,
    max_iter: int = 100,
    merge_tol: float = MERGE_TOL,
) -> list[CriticalPoint]:
    """Damped Newton search for zeros of grad(omega) from each seed.

    Non-convergent seeds are logged and skipped; duplicates within
    ``merge_tol`` are merged. Results are sorted by location.
    """
    found: list[CriticalPoint] = []
    for seed in seeds:
        x, y = float(seed[0]), float(seed[1])
        converged = False
        for _ in range(max_iter):
            g = np.array(p.grad_omega_at(x, y))
            res = float(np.hypot(g[0], g[1]))
            if res < tol_crit:
                converged = True
                break
            J = _grad_jacobian(p, x, y)
            try:
                dx = np.linalg.solve(J, -g)
            except np.linalg.LinAlgError:
                break
            # damping: halve the step while the residual grows
            lam = 1.0
            for _ in range(40):
                g_new = np.array(p.grad_omega_at(x + lam * dx[0], y + lam * dx[1]))
                if float(np.hypot(g_new[0], g_new[1])) <= res:
                    break
                lam *= 0.5
            x += lam * dx[0]
            y += lam * dx[1]
        if not converged:
            g = np.array(p.grad_omega_at(x, y))
            if float(np.hypot(g[0], g[1])) < tol_crit:
                converged = True
        if not converged:
            log.warning("critical-point search failed from seed (%g, %g)", seed[0], seed[1])
            continue
        if any(np.hypot(x - c.location[0], y - c.location[1]) < merge_tol for c in found):
            continue
        hess = _grad_jacobian(p, x, y)
        found.append(
            CriticalPoint(
                location=(x, y),
                omega_value=float(p.omega_fn(x, y)),
                classification=_classify(hess),
            )
        )
    found.sort(key=lambda c: c.location)
    return found


def estimate_theta(
    p: PinningProfile,
    b: CriticalPoint,
    radius: float,
    samples: int = 512,
    seed: int = 0,
) -> tuple[float, float]:
    """Estimate the gradient-inequality constants near a nondegenerate point.

    theta2 is the probed radius; theta1 is the minimum over quasi-random
    samples in the punctured ball of |grad omega| / sqrt(|omega - omega(b)|).
    """
    if b.classification == "degenerate":
        raise ModelError("theta estimation refused: critical point is degenerate")
    if radius <= 0:
        raise ConfigurationError("theta estimation requires radius > 0")
    halton = qmc.Halton(d=2, scramble=True, seed=seed)
    u = halton.random(samples)
    r = radius * np.sqrt(u[:, 0])
    phi = 2.0 * np.pi * u[:, 1]
    xs = b.location[0] + r * np.cos(phi)
    ys = b.location[1] + r * np.sin(phi)
    gx, gy = p.grad_omega_fn(xs, ys)
    grad_mag = np.hypot(gx, gy)
    dom = np.abs(np.asarray(p.omega_fn(xs, ys), dtype=np.float64) - b.omega_value)
    denom = np.sqrt(dom)
    ok = (r > radius * 1e-9) & (denom > 1e-15 * max(1.0, abs(b.omega_value)))
    if not np.any(ok):
        raise ModelError("theta estimation found no usable samples")
    theta1 = float(np.min(grad_mag[ok] / denom[ok]))
    return theta1, float(radius)


def _point_in_polygon(x: float, y: float, verts: np.ndarray) -> bool:
    inside = False
    n = len(verts)
    for k in range(n):
        x1, y1 = verts[k]
        x2, y2 = verts[(k + 1) % n]
        if (y1 > y) != (y2 > y):
            x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < x_cross:
                inside = not inside
    return inside


def check_A4(
    p: PinningProfile,
    b: tuple[float, float],
    polyline: Sequence[tuple[float, float]],
    samples: int = 512,
) -> bool:
    """True iff min of omega along the closed polyline strictly exceeds omega(b).

    The polyline is sampled uniformly by arclength; b must lie inside it.
    """
    verts = np.asarray(polyline, dtype=np.float64)
    if len(verts) >= 2 and np.allclose(verts[0], verts[-1]):
        verts = verts[:-1]
    if len(verts) < 3:
        raise ConfigurationError("polyline needs at least 3 distinct vertices")
    if not _point_in_polygon(float(b[0]), float(b[1]), verts):
        raise ConfigurationError(f"point {tuple(b)} is not inside the polyline")

    seg = np.vstack([verts, verts[:1]])
    lengths = np.hypot(np.diff(seg[:, 0]), np.diff(seg[:, 1]))
    total = float(lengths.sum())
    min_omega = np.inf
    for k, L in enumerate(lengths):
        n_k = max(2, int(round(samples * L / total)))
        t = np.linspace(0.0, 1.0, n_k, endpoint=False)
        xs = seg[k, 0] + t * (seg[k + 1, 0] - seg[k, 0])
        ys = seg[k, 1] + t * (seg[k + 1, 1] - seg[k, 1])
        vals = np.asarray(p.omega_fn(xs, ys), dtype=np.float64)
        min_omega = min(min_omega, float(vals.min()))
    return min_omega > float(p.omega_fn(b[0], b[1]))
