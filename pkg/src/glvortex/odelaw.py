"""Limiting vortex motion law: gradient descent on the pinning potential.

Trajectories solve dy/dt = -grad(omega)(y) with classical fixed-step RK4 on
the analytic gradient. The density form -a^{-1} grad(a) is the same field
written through a, so it delegates after the omega = ln a transform.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError
from .fields import Grid2D
from .pinning import CriticalPoint, PinningProfile, find_critical_points, thin_film

DEFAULT_DT = 1e-3
PINNING_TOL = 1e-6


@dataclass
class OdeTrajectory:
    initial: tuple[float, float]
    times: np.ndarray
    points: np.ndarray  # shape (n, 2)
    exited: bool = False
    pinned_to: Optional[CriticalPoint] = None

    @property
    def end(self) -> tuple[float, float]:
        return (float(self.points[-1, 0]), float(self.points[-1, 1]))

    def at(self, t: float) -> tuple[float, float]:
        """Linear interpolation of the recorded samples at time t."""
        x = float(np.interp(t, self.times, self.points[:, 0]))
        y = float(np.interp(t, self.times, self.points[:, 1]))
        return (x, y)


def _rk4_step(f: Callable, x: float, y: float, dt: float) -> tuple[float, float]:
    k1x, k1y = f(x, y)
    k2x, k2y = f(x + 0.5 * dt * k1x, y + 0.5 * dt * k1y)
    k3x, k3y = f(x + 0.5 * dt * k2x, y + 0.5 * dt * k2y)
    k4x, k4y = f(x + dt * k3x, y + dt * k3y)
    return (
        x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        y + dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y),
    )


def integrate(
    p: PinningProfile,
    starts: Sequence[tuple[float, float]],
    t_end: float,
    dt: float = DEFAULT_DT,
    record_every: int = 1,
) -> list[OdeTrajectory]:
    """RK4 descent trajectories from each start; trajectories never interact.

    A trajectory leaving the closed domain is truncated at its last inside
    sample and flagged ``exited`` (confinement failing signals a violated
    assumption, which is reported rather than fatal).
    """
    if dt <= 0:
        raise ConfigurationError("ode integration requires dt > 0")
    if t_end <= 0:
        raise ConfigurationError("ode integration requires t_end > 0")
    grid = p.grid

    def f(x: float, y: float) -> tuple[float, float]:
        gx, gy = p.grad_omega_at(x, y)
        return (-gx, -gy)

    n_full = int(np.floor(t_end / dt + 1e-12))
    last = t_end - n_full * dt
    steps = [dt] * n_full + ([last] if last > 1e-15 * t_end else [])

    out: list[OdeTrajectory] = []
    for b in starts:
        x, y = float(b[0]), float(b[1])
        if not grid.contains(x, y):
            raise ConfigurationError(f"start point {b} lies outside the domain")
        times = [0.0]
        pts = [(x, y)]
        t = 0.0
        exited = False
        for k, step in enumerate(steps):
            x, y = _rk4_step(f, x, y, step)
            t += step
            if not grid.contains(x, y):
                exited = True
                break
            if (k + 1) % record_every == 0 or k == len(steps) - 1:
                times.append(t)
                pts.append((x, y))
        out.append(
            OdeTrajectory(
                initial=(float(b[0]), float(b[1])),
                times=np.asarray(times),
                points=np.asarray(pts),
                exited=exited,
            )
        )
    return out


def integrate_density_law(
    a: Callable,
    starts: Sequence[tuple[float, float]],
    t_end: float,
    dt: float = DEFAULT_DT,
    grid: Optional[Grid2D] = None,
    grad_a: Optional[Callable] = None,
    record_every: int = 1,
) -> list[OdeTrajectory]:
    """Integrate dy/dt = -a^{-1}(y) grad(a)(y) by the omega = ln a transform."""
    if grid is None:
        raise ConfigurationError("integrate_density_law needs a grid to define the domain")
    p = thin_film(a, grid, grad_a)
    return integrate(p, starts, t_end, dt=dt, record_every=record_every)


def _pinning_criteria(traj: OdeTrajectory, p: PinningProfile, tol: float) -> bool:
    """Small gradient at the endpoint and small tail displacement."""
    x_end, y_end = traj.end
    gx, gy = p.grad_omega_at(x_end, y_end)
    if not np.hypot(gx, gy) < tol:
        return False
    t_end = float(traj.times[-1])
    x_half, y_half = traj.at(0.5 * t_end)
    return bool(np.hypot(x_end - x_half, y_end - y_half) < tol)


def pinning_status(traj: OdeTrajectory, p: PinningProfile, tol: float = PINNING_TOL) -> str:
    """One of "pinned", "not_pinned", "undetermined".

    Undetermined covers the case where the trajectory satisfies both halt
    criteria but no critical point can be located from its endpoint (for
    example near a degenerate landscape feature).
    """
    if not _pinning_criteria(traj, p, tol):
        return "not_pinned"
    pts = find_critical_points(p, [traj.end])
    return "pinned" if pts else "undetermined"


def detect_pinning(
    traj: OdeTrajectory, p: PinningProfile, tol: float = PINNING_TOL
) -> Optional[CriticalPoint]:
    """The critical point the trajectory pinned to, or None."""
    if not _pinning_criteria(traj, p, tol):
        return None
    pts = find_critical_points(p, [traj.end])
    if not pts:
        return None
    x_end, y_end = traj.end
    pts.sort(key=lambda c: np.hypot(c.location[0] - x_end, c.location[1] - y_end))
    return pts[0]


def _points_in_polygon(points: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Vectorized even-odd ray casting; points shape (n,2), verts shape (m,2)."""
    x = points[:, 0]
    y = points[:, 1]
    inside = np.zeros(len(points), dtype=bool)
    m = len(verts)
    for k in range(m):
        x1, y1 = verts[k]
        x2, y2 = verts[(k + 1) % m]
        crosses = (y1 > y) != (y2 > y)
        if not np.any(crosses):
            continue
        x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1 + 0.0)
        inside ^= crosses & (x < x_cross)
    return inside


@dataclass
class SeparationReport:
    min_separation: float
    at_time: float
    duplicate_starts: bool
    confined: Optional[list[bool]] = None


def separation_report(
    trajs: Sequence[OdeTrajectory],
    polylines: Optional[Sequence[Sequence[tuple[float, float]]]] = None,
) -> SeparationReport:
    """Minimum pairwise trajectory distance over time, plus confinement flags.

    A single trajectory reports +inf separation. Identical start points are
    reported as degenerate input (the separation hypothesis assumes distinct
    initial vortices).
    """
    if not trajs:
        raise ConfigurationError("separation_report needs at least one trajectory")
    t0 = trajs[0].times
    for tr in trajs[1:]:
        if len(tr.times) != len(t0) or not np.array_equal(tr.times, t0):
            raise ConfigurationError("trajectories do not share a time mesh")

    duplicate = False
    starts = [tr.initial for tr in trajs]
    for i in range(len(starts)):
        for j in range(i + 1, len(starts)):
            if starts[i][0] == starts[j][0] and starts[i][1] == starts[j][1]:
                duplicate = True

    min_sep = np.inf
    at_time = 0.0
    for i in range(len(trajs)):
        for j in range(i + 1, len(trajs)):
            d = np.hypot(
                trajs[i].points[:, 0] - trajs[j].points[:, 0],
                trajs[i].points[:, 1] - trajs[j].points[:, 1],
            )
            k = int(np.argmin(d))
            if d[k] < min_sep:
                min_sep = float(d[k])
                at_time = float(t0[k])

    confined = None
    if polylines is not None:
        if len(polylines) != len(trajs):
            raise ConfigurationError("need one polyline per trajectory")
        confined = []
        for tr, poly in zip(trajs, polylines):
            verts = np.asarray(poly, dtype=np.float64)
            if len(verts) >= 2 and np.allclose(verts[0], verts[-1]):
                verts = verts[:-1]
            confined.append(bool(np.all(_points_in_polygon(tr.points, verts))))
    return SeparationReport(
        min_separation=float(min_sep),
        at_time=at_time,
        duplicate_starts=duplicate,
        confined=confined,
    )


# --- serialization -----------------------------------------------------------

def write_ode_csv(trajs: Sequence[OdeTrajectory], path: str) -> None:
    """CSV schema: traj_id,t,x,y with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        fh.write("traj_id,t,x,y\n")
        for tid, tr in enumerate(trajs):
            lines = [
                "%d,%.17g,%.17g,%.17g\n" % (tid, t, xy[0], xy[1])
                for t, xy in zip(tr.times, tr.points)
            ]
            fh.writelines(lines)


def read_ode_csv(path: str) -> list[OdeTrajectory]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        return []
    if data.shape[1] != 4:
        raise ConfigurationError(f"{path}: expected 4 columns traj_id,t,x,y")
    out = []
    for tid in np.unique(data[:, 0].astype(int)):
        rows = data[data[:, 0].astype(int) == tid]
        out.append(
            OdeTrajectory(
                initial=(float(rows[0, 2]), float(rows[0, 3])),
                times=rows[:, 1].copy(),
                points=rows[:, 2:4].copy(),
            )
        )
    return out
