"""Energies, modulus-deviation norms, convergence-rate fits, and the
PDE-versus-ODE trajectory comparison.

All integrals use the grid's trapezoidal quadrature weights and fixed
row-major reduction order, matching the field-norm conventions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError
from .fields import ComplexField, RegionMask, ScalarField, gradient, masked_norms
from .odelaw import OdeTrajectory
from .pinning import PinningProfile
from .vortex import VortexTrack


@dataclass
class EnergyReport:
    t: float
    total_weighted: float  # integral of phi(rho) * E
    total_plain: float  # integral of E outside the sigma-balls
    sigma: float


@dataclass
class DeviationReport:
    epsilon: float
    delta: float
    t: float
    sup_dev: float
    l2_dev: float
    h1_dev: float
    contained: bool


@dataclass
class RateFit:
    pairs: list[tuple[float, float]]
    slope: float
    intercept: float
    r_squared: float


def grad_mag2(V: ComplexField) -> np.ndarray:
    """|grad V|^2 nodewise from the componentwise difference gradients."""
    rx, ry = gradient(ScalarField(V.grid, V.re))
    ix, iy = gradient(ScalarField(V.grid, V.im))
    return rx.values**2 + ry.values**2 + ix.values**2 + iy.values**2


def energy_density(V: ComplexField, p: PinningProfile, epsilon: float) -> ScalarField:
    """Pointwise e^omega/2 * (|grad V|^2 + B/(2 eps^2) (1-|V|^2)^2)."""
    if V.grid != p.grid:
        raise ConfigurationError("field and profile live on different grids")
    one_minus = 1.0 - V.modulus2()
    dens = 0.5 * np.exp(p.omega.values) * (
        grad_mag2(V) + p.B.values / (2.0 * epsilon * epsilon) * one_minus * one_minus
    )
    return ScalarField(V.grid, dens)


def _cutoff(rho: np.ndarray, sigma: float) -> np.ndarray:
    """Quadratic core weight saturating at sigma^2 beyond 2*sigma.

    The bridge on [sigma, 2*sigma] is the cubic Hermite with value sigma^2 and
    slope 2*sigma at the left end, value sigma^2 and slope 0 at the right end.
    """
    phi = np.empty_like(rho)
    lo = rho <= sigma
    hi = rho >= 2.0 * sigma
    mid = ~(lo | hi)
    phi[lo] = rho[lo] ** 2
    phi[hi] = sigma * sigma
    u = (rho[mid] - sigma) / sigma
    phi[mid] = sigma * sigma * (1.0 + 2.0 * u * (1.0 - u) ** 2)
    return phi


def weighted_energy(
    V: ComplexField,
    p: PinningProfile,
    epsilon: float,
    vortex_centers: Sequence[tuple[float, float]],
    sigma: float,
    t: float = 0.0,
) -> EnergyReport:
    """Core-suppressed and core-excluded energy totals.

    total_weighted integrates phi(rho) * E where rho is the distance to the
    nearest center (no centers means phi saturates at sigma^2 everywhere);
    total_plain integrates E over the mask excluding the sigma-balls.
    """
    if sigma <= 0:
        raise ConfigurationError("weighted_energy requires sigma > 0")
    grid = V.grid
    E = energy_density(V, p, epsilon).values
    w = grid.quad_weights
    if vortex_centers:
        X, Y = grid.mesh
        rho = np.full(grid.shape, np.inf)
        for cx, cy in vortex_centers:
            np.minimum(rho, np.hypot(X - cx, Y - cy), out=rho)
        phi = _cutoff(rho, sigma)
        mask = RegionMask.excluding_balls(grid, vortex_centers, sigma)
    else:
        phi = np.full(grid.shape, sigma * sigma)
        mask = RegionMask.full(grid)
    total_weighted = float(np.sum(w * phi * E))
    total_plain = float(np.sum((w * E)[mask.included]))
    return EnergyReport(t=t, total_weighted=total_weighted, total_plain=total_plain, sigma=sigma)


def deviation_report(
    V: ComplexField,
    positions: Sequence[tuple[float, float]],
    epsilon: float,
    delta: float,
    t: float = 0.0,
) -> DeviationReport:
    """Modulus deviation norms outside the delta-balls around the vortices.

    sup and L2 come from the masked norms of |V| - 1; the H1 figure adds the
    masked integral of |grad |V||^2. ``contained`` records whether every node
    with |V| <= 1/2 lies inside some delta-ball.
    """
    if delta <= 0:
        raise ConfigurationError("deviation_report requires delta > 0")
    grid = V.grid
    mod = V.modulus()
    mask = RegionMask.excluding_balls(grid, positions, delta)
    dev = ScalarField(grid, mod.values - 1.0)
    sup_dev, l2_dev = masked_norms(dev, mask)

    gx, gy = gradient(mod)
    grad2 = gx.values**2 + gy.values**2
    h1_dev = float(np.sqrt(l2_dev**2 + np.sum((grid.quad_weights * grad2)[mask.included])))

    low = mod.values <= 0.5
    if not np.any(low):
        contained = True
    elif not positions:
        contained = False
    else:
        X, Y = grid.mesh
        rho = np.full(grid.shape, np.inf)
        for cx, cy in positions:
            np.minimum(rho, np.hypot(X - cx, Y - cy), out=rho)
        contained = bool(np.all(rho[low] < delta))
    return DeviationReport(
        epsilon=epsilon,
        delta=delta,
        t=t,
        sup_dev=sup_dev,
        l2_dev=l2_dev,
        h1_dev=h1_dev,
        contained=contained,
    )


def rate_fit(pairs: Sequence[tuple[float, float]]) -> RateFit:
    """Least-squares exponent of value ~ C * eps^slope through (ln eps, ln value)."""
    if len(pairs) < 3:
        raise ConfigurationError("rate_fit needs at least 3 (epsilon, value) pairs")
    eps = np.array([p[0] for p in pairs], dtype=np.float64)
    val = np.array([p[1] for p in pairs], dtype=np.float64)
    if np.any(eps <= 0) or np.any(val <= 0):
        raise ConfigurationError("rate_fit requires positive epsilons and values")
    x = np.log(eps)
    y = np.log(val)
    xm = x.mean()
    ym = y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0.0:
        raise ConfigurationError("rate_fit requires distinct epsilon values")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_res = float(np.sum((y - (intercept + slope * x)) ** 2))
    ss_tot = float(np.sum((y - ym) ** 2))
    if ss_tot > 0.0:
        r2 = 1.0 - ss_res / ss_tot
    else:
        r2 = 1.0 if ss_res < 1e-28 else 0.0
    return RateFit(pairs=[(float(e), float(v)) for e, v in pairs], slope=slope, intercept=intercept, r_squared=r2)


@dataclass
class TrackOdePair:
    track_id: int
    traj_index: int
    times: np.ndarray
    errors: np.ndarray

    @property
    def sup_error(self) -> float:
        return float(np.max(self.errors)) if len(self.errors) else 0.0


@dataclass
class PdeOdeComparison:
    pairs: list[TrackOdePair]
    unmatched_track_ids: list[int]
    global_max: Optional[float]


def pde_vs_ode(
    tracks: Sequence[VortexTrack], odes: Sequence[OdeTrajectory]
) -> PdeOdeComparison:
    """Sup-over-time distance between each detected track and its ODE twin.

    Tracks are matched to trajectories by nearest initial position (greedy in
    increasing distance). The ODE is linearly interpolated at the track's
    snapshot times; leftover tracks are reported and excluded from the max.
    """
    usable = [tr for tr in tracks if tr.observations]
    cand = []
    for a, tr in enumerate(usable):
        p0 = tr.observations[0].position
        for b, ode in enumerate(odes):
            d = float(np.hypot(p0[0] - ode.initial[0], p0[1] - ode.initial[1]))
            cand.append((d, a, b))
    cand.sort()
    taken_tr: set[int] = set()
    taken_ode: set[int] = set()
    pairs: list[TrackOdePair] = []
    for d, a, b in cand:
        if a in taken_tr or b in taken_ode:
            continue
        taken_tr.add(a)
        taken_ode.add(b)
        tr = usable[a]
        ode = odes[b]
        times = tr.times()
        in_range = (times >= ode.times[0]) & (times <= ode.times[-1])
        times = times[in_range]
        pos = tr.positions()[in_range]
        ex = pos[:, 0] - np.interp(times, ode.times, ode.points[:, 0])
        ey = pos[:, 1] - np.interp(times, ode.times, ode.points[:, 1])
        pairs.append(
            TrackOdePair(
                track_id=tr.track_id, traj_index=b, times=times, errors=np.hypot(ex, ey)
            )
        )
    pairs.sort(key=lambda pr: pr.track_id)
    unmatched = [tr.track_id for a, tr in enumerate(usable) if a not in taken_tr]
    global_max = max((pr.sup_error for pr in pairs), default=None)
    return PdeOdeComparison(pairs=pairs, unmatched_track_ids=unmatched, global_max=global_max)


def write_rates_json(fits: dict[str, RateFit], path: str) -> None:
    """JSON map quantity -> {slope, intercept, r_squared, pairs}."""
    payload = {
        name: {
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "pairs": [[e, v] for e, v in fit.pairs],
        }
        for name, fit in fits.items()
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_deviations_csv(reports: Sequence[DeviationReport], path: str) -> None:
    """CSV schema: epsilon,delta,t,sup_dev,l2_dev,h1_dev,contained."""
    with open(path, "w", newline="") as fh:
        fh.write("epsilon,delta,t,sup_dev,l2_dev,h1_dev,contained\n")
        for r in reports:
            fh.write(
                "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%s\n"
                % (r.epsilon, r.delta, r.t, r.sup_dev, r.l2_dev, r.h1_dev, str(r.contained).lower())
            )
