"""Vortex detection by plaquette winding numbers and time-matched tracking.

A vortex is an isolated zero of the order parameter carrying a nonzero
integer circulation of the phase. Detection scans every grid plaquette for
nonzero winding and refines the zero location by bilinear interpolation;
tracking greedily links equal-degree observations across snapshots.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ComputationError, ConfigurationError, WindingError
from .fields import ComplexField

TWO_PI = 2.0 * np.pi


def _wrap(d):
    """Wrap phase differences to (-pi, pi]."""
    return d - TWO_PI * np.ceil((d - np.pi) / TWO_PI)


@dataclass
class VortexObservation:
    t: float
    position: tuple[float, float]
    degree: int
    min_modulus: float

    def __post_init__(self):
        if self.degree == 0:
            raise ComputationError("vortex observation with zero degree")


@dataclass
class VortexTrack:
    track_id: int
    observations: list[VortexObservation] = field(default_factory=list)
    closed: bool = False

    @property
    def degree(self) -> int:
        return self.observations[0].degree

    @property
    def last(self) -> VortexObservation:
        return self.observations[-1]

    def times(self) -> np.ndarray:
        return np.array([o.t for o in self.observations])

    def positions(self) -> np.ndarray:
        return np.array([o.position for o in self.observations])

    def append(self, obs: VortexObservation) -> None:
        if self.observations:
            if obs.t <= self.observations[-1].t:
                raise ConfigurationError("track times must be strictly increasing")
            if obs.degree != self.degree:
                raise ConfigurationError("track degree must stay constant")
        self.observations.append(obs)


def plaquette_winding(V: ComplexField, i: int, j: int) -> int:
    """Winding of V around the plaquette with lower-left node (i, j)."""
    if not (0 <= i <= V.grid.nx - 2 and 0 <= j <= V.grid.ny - 2):
        raise ConfigurationError(f"plaquette ({i}, {j}) is not interior to the grid")
    corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
    for ci, cj in corners:
        if V.re[ci, cj] == 0.0 and V.im[ci, cj] == 0.0:
            raise WindingError(f"field vanishes at plaquette corner (i={ci}, j={cj})")
    th = [np.arctan2(V.im[c], V.re[c]) for c in corners]
    total = sum(float(_wrap(th[(k + 1) % 4] - th[k])) for k in range(4))
    w = total / TWO_PI
    k = int(np.rint(w))
    if abs(w - k) > 1e-6:
        raise ComputationError(f"winding {w!r} at plaquette ({i}, {j}) is not an integer")
    return k


def boundary_winding(V: ComplexField) -> int:
    """Winding of V along the counterclockwise boundary loop of the grid."""
    nx, ny = V.grid.shape
    loop = (
        [(i, 0) for i in range(nx)]
        + [(nx - 1, j) for j in range(1, ny)]
        + [(i, ny - 1) for i in range(nx - 2, -1, -1)]
        + [(0, j) for j in range(ny - 2, -1, -1)]
    )
    re = V.re[tuple(np.array(loop).T)]
    im = V.im[tuple(np.array(loop).T)]
    if np.any((re == 0.0) & (im == 0.0)):
        raise WindingError("field vanishes on the boundary loop")
    th = np.arctan2(im, re)
    diffs = _wrap(np.diff(np.concatenate([th, th[:1]])))
    w = float(diffs.sum()) / TWO_PI
    k = int(np.rint(w))
    if abs(w - k) > 1e-6:
        raise ComputationError("boundary winding is not an integer")
    return k


def _bilinear_zero(re4: np.ndarray, im4: np.ndarray) -> Optional[tuple[float, float]]:
    """Common zero (s, t) in [0,1]^2 of the two bilinear corner interpolants.

    Corner order: (0,0), (1,0), (0,1), (1,1). Returns None when the system
    is degenerate or the zero lies outside the cell.
    """
    a0, a1, a2, a3 = (
        re4[0],
        re4[1] - re4[0],
        re4[2] - re4[0],
        re4[3] - re4[1] - re4[2] + re4[0],
    )
    b0, b1, b2, b3 = (
        im4[0],
        im4[1] - im4[0],
        im4[2] - im4[0],
        im4[3] - im4[1] - im4[2] + im4[0],
    )
    # eliminate t: (b0 + b1 s)(a2 + a3 s) = (b2 + b3 s)(a0 + a1 s)
    q2 = b1 * a3 - b3 * a1
    q1 = b0 * a3 + b1 * a2 - b2 * a1 - b3 * a0
    q0 = b0 * a2 - b2 * a0
    scale = max(abs(q2), abs(q1), abs(q0), 1e-300)
    roots: list[float] = []
    if abs(q2) / scale < 1e-12:
        if abs(q1) / scale < 1e-12:
            return None
        roots = [-q0 / q1]
    else:
        disc = q1 * q1 - 4.0 * q2 * q0
        if disc < 0.0:
            return None
        sq = float(np.sqrt(disc))
        roots = [(-q1 - sq) / (2.0 * q2), (-q1 + sq) / (2.0 * q2)]
    pad = 1e-9
    for s in roots:
        if not (-pad <= s <= 1.0 + pad):
            continue
        den_re = a2 + a3 * s
        den_im = b2 + b3 * s
        if abs(den_re) >= abs(den_im):
            if den_re == 0.0:
                continue
            t = -(a0 + a1 * s) / den_re
        else:
            t = -(b0 + b1 * s) / den_im
        if -pad <= t <= 1.0 + pad:
            return (min(max(s, 0.0), 1.0), min(max(t, 0.0), 1.0))
    return None


class Detections(list):
    """List of VortexObservation plus a count of skipped zero-corner plaquettes."""

    skipped: int = 0


def detect_vortices(V: ComplexField, t: float) -> Detections:
    """One observation per plaquette with nonzero winding, ordered by (j, i).

    Positions are refined by the bilinear zero crossing inside the plaquette,
    falling back to the plaquette center. Plaquettes with an exactly zero
    corner cannot carry a well-defined winding and are skipped and counted.
    """
    grid = V.grid
    th = V.phase()
    zero = (V.re == 0.0) & (V.im == 0.0)
    dx = _wrap(th[1:, :] - th[:-1, :])  # (nx-1, ny)
    dy = _wrap(th[:, 1:] - th[:, :-1])  # (nx, ny-1)
    circ = dx[:, :-1] + dy[1:, :] - dx[:, 1:] - dy[:-1, :]
    winding = np.rint(circ / TWO_PI).astype(int)
    bad = zero[:-1, :-1] | zero[1:, :-1] | zero[:-1, 1:] | zero[1:, 1:]
    winding[bad] = 0

    out = Detections()
    out.skipped = int(np.count_nonzero(bad))
    hits = np.argwhere(winding != 0)
    mod = np.hypot(V.re, V.im)
    for i, j in sorted(map(tuple, hits), key=lambda ij: (ij[1], ij[0])):
        re4 = np.array([V.re[i, j], V.re[i + 1, j], V.re[i, j + 1], V.re[i + 1, j + 1]])
        im4 = np.array([V.im[i, j], V.im[i + 1, j], V.im[i, j + 1], V.im[i + 1, j + 1]])
        st = _bilinear_zero(re4, im4)
        if st is None:
            st = (0.5, 0.5)
        x = grid.origin[0] + (i + st[0]) * grid.h
        y = grid.origin[1] + (j + st[1]) * grid.h
        mm = float(min(mod[i, j], mod[i + 1, j], mod[i, j + 1], mod[i + 1, j + 1]))
        out.append(
            VortexObservation(t=t, position=(x, y), degree=int(winding[i, j]), min_modulus=mm)
        )
    return out


def default_jump_max(h: float, snapshot_dt: float, sup_grad_omega: float) -> float:
    """Detection-noise floor plus twice the gradient-flow speed bound."""
    return 10.0 * h + snapshot_dt * 2.0 * sup_grad_omega


def match_tracks(
    prev: Sequence[VortexTrack], now: Sequence[VortexObservation], jump_max: float
) -> list[VortexTrack]:
    """Greedy nearest-neighbor extension of open tracks by new observations.

    Pairs must have equal degree and distance <= jump_max; they are taken in
    increasing distance order. Unmatched observations open new tracks, and
    open tracks that receive no observation are closed. Returns the full
    track list (extended, newly opened, and closed alike).
    """
    open_tracks = [tr for tr in prev if not tr.closed]
    closed_tracks = [tr for tr in prev if tr.closed]

    pairs = []
    for a, tr in enumerate(open_tracks):
        for b, obs in enumerate(now):
            if obs.degree != tr.degree:
                continue
            d = float(np.hypot(obs.position[0] - tr.last.position[0], obs.position[1] - tr.last.position[1]))
            if d <= jump_max:
                pairs.append((d, a, b))
    pairs.sort()

    used_tracks: set[int] = set()
    used_obs: set[int] = set()
    for d, a, b in pairs:
        if a in used_tracks or b in used_obs:
            continue
        used_tracks.add(a)
        used_obs.add(b)
        open_tracks[a].append(now[b])

    for a, tr in enumerate(open_tracks):
        if a not in used_tracks:
            tr.closed = True

    next_id = max((tr.track_id for tr in list(prev)), default=-1) + 1
    new_tracks = []
    for b, obs in enumerate(now):
        if b not in used_obs:
            tr = VortexTrack(track_id=next_id)
            tr.append(obs)
            new_tracks.append(tr)
            next_id += 1

    merged = closed_tracks + open_tracks + new_tracks
    merged.sort(key=lambda tr: tr.track_id)
    return merged


def write_tracks_csv(tracks: Sequence[VortexTrack], path: str) -> None:
    """CSV schema: track_id,t,x,y,degree,min_modulus."""
    with open(path, "w", newline="") as fh:
        fh.write("track_id,t,x,y,degree,min_modulus\n")
        for tr in sorted(tracks, key=lambda tr: tr.track_id):
            lines = [
                "%d,%.17g,%.17g,%.17g,%d,%.17g\n"
                % (tr.track_id, o.t, o.position[0], o.position[1], o.degree, o.min_modulus)
                for o in tr.observations
            ]
            fh.writelines(lines)


def read_tracks_csv(path: str) -> list[VortexTrack]:
    import csv

    tracks: dict[int, VortexTrack] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["track_id", "t", "x", "y", "degree", "min_modulus"]:
            raise ConfigurationError(f"{path}: unexpected tracks header {reader.fieldnames}")
        for row in reader:
            tid = int(row["track_id"])
            obs = VortexObservation(
                t=float(row["t"]),
                position=(float(row["x"]), float(row["y"])),
                degree=int(row["degree"]),
                min_modulus=float(row["min_modulus"]),
            )
            tracks.setdefault(tid, VortexTrack(track_id=tid)).append(obs)
    return [tracks[k] for k in sorted(tracks)]
