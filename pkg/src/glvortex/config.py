"""Experiment definitions: flat key=value files parsed into ExperimentConfig.

One experiment per file. Lines are `key = value`; `#` starts a comment. The
profile is selected as `<name>` from the analytic omega catalog, or
`density:<name>` / `thinfilm:<name>` from the density catalog, with numeric
parameters supplied via `profile.<param>` keys.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigurationError
from .fields import Grid2D
from .pinning import PinningProfile, epsilon0, from_density, make_generic, thin_film
from .profiles import density_catalog, omega_catalog

KNOWN_KEYS = {
    "profile",
    "grid.n",
    "epsilons",
    "vortices",
    "starts",
    "t_end",
    "delta",
    "sigma",
    "dt_policy",
    "cfl_safety",
    "snapshot_every",
    "save_snapshots",
    "out",
    "seed",
    "ode_dt",
    "ode_t_end",
    "rate_time",
}


def _parse_lines(text: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigurationError(f"line {lineno}: empty key or value in {raw!r}")
        if key in pairs:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def _parse_float(pairs: dict[str, str], key: str, default: Optional[float] = None) -> Optional[float]:
    if key not in pairs:
        return default
    try:
        return float(pairs[key])
    except ValueError:
        raise ConfigurationError(f"config key {key!r} is not a number: {pairs[key]!r}")


def _parse_points(value: str, key: str, with_degree: bool) -> list[tuple]:
    out = []
    for chunk in value.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.replace(",", " ").split()
        want = 3 if with_degree else 2
        if len(parts) != want:
            raise ConfigurationError(
                f"config key {key!r}: each entry needs {want} fields, got {chunk!r}"
            )
        try:
            x, y = float(parts[0]), float(parts[1])
            if with_degree:
                out.append((x, y, int(parts[2])))
            else:
                out.append((x, y))
        except ValueError:
            raise ConfigurationError(f"config key {key!r}: bad entry {chunk!r}")
    return out


@dataclass
class ExperimentConfig:
    profile_kind: str  # generic | density | thinfilm
    profile_name: str
    profile_params: dict[str, float]
    grid_n: int
    epsilons: list[float]
    t_end: float
    vortices: list[tuple[float, float, int]] = field(default_factory=list)
    starts: list[tuple[float, float]] = field(default_factory=list)
    delta: float = 0.15
    sigma: float = 0.15
    dt_policy: str = "explicit"
    cfl_safety: float = 0.9
    snapshot_every: Optional[float] = None
    save_snapshots: str = "all"  # all | last | none
    out: Optional[str] = None
    seed: int = 0
    ode_dt: float = 1e-3
    ode_t_end: Optional[float] = None
    rate_time: Optional[float] = None

    def __post_init__(self):
        if self.profile_kind not in ("generic", "density", "thinfilm"):
            raise ConfigurationError(f"config key 'profile': unknown kind {self.profile_kind!r}")
        if self.grid_n < 3:
            raise ConfigurationError(f"config key 'grid.n': need at least 3 nodes, got {self.grid_n}")
        if not self.epsilons:
            raise ConfigurationError("config key 'epsilons': at least one value required")
        if any(e <= 0 for e in self.epsilons):
            raise ConfigurationError("config key 'epsilons': values must be positive")
        if any(b >= a for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise ConfigurationError("config key 'epsilons': values must be strictly decreasing")
        h = 1.0 / (self.grid_n - 1)
        if min(self.epsilons) < 2.0 * h:
            raise ConfigurationError(
                f"config key 'epsilons': smallest epsilon {min(self.epsilons):g} is below "
                f"2h = {2.0 * h:g}; the grid does not resolve the core"
            )
        if not (self.t_end > 0):
            raise ConfigurationError(f"config key 't_end': must be positive, got {self.t_end}")
        if not (0.0 < self.delta < 0.25):
            raise ConfigurationError(
                f"config key 'delta': must lie in (0, 1/4), got {self.delta}"
            )
        if not (self.sigma > 0):
            raise ConfigurationError(f"config key 'sigma': must be positive, got {self.sigma}")
        if self.dt_policy not in ("explicit", "strang"):
            raise ConfigurationError(
                f"config key 'dt_policy': must be explicit or strang, got {self.dt_policy!r}"
            )
        if not (0.0 < self.cfl_safety <= 1.0):
            raise ConfigurationError(
                f"config key 'cfl_safety': must lie in (0, 1], got {self.cfl_safety}"
            )
        if self.snapshot_every is None:
            self.snapshot_every = self.t_end / 10.0
        if not (0.0 < self.snapshot_every <= self.t_end):
            raise ConfigurationError(
                f"config key 'snapshot_every': must lie in (0, t_end], got {self.snapshot_every}"
            )
        if self.save_snapshots not in ("all", "last", "none"):
            raise ConfigurationError(
                f"config key 'save_snapshots': must be all, last, or none, got {self.save_snapshots!r}"
            )
        for x, y, d in self.vortices:
            if not (0.0 < x < 1.0 and 0.0 < y < 1.0):
                raise ConfigurationError(
                    f"config key 'vortices': center ({x:g}, {y:g}) is not interior to the unit square"
                )
            if d == 0:
                raise ConfigurationError("config key 'vortices': degree must be nonzero")
        seen = set()
        for x, y, _ in self.vortices:
            if (x, y) in seen:
                raise ConfigurationError(f"config key 'vortices': duplicate center ({x:g}, {y:g})")
            seen.add((x, y))
        if not self.starts:
            self.starts = [(x, y) for x, y, _ in self.vortices]
        for x, y in self.starts:
            if not (0.0 < x < 1.0 and 0.0 < y < 1.0):
                raise ConfigurationError(
                    f"config key 'starts': point ({x:g}, {y:g}) is not interior to the unit square"
                )
        if not (self.ode_dt > 0):
            raise ConfigurationError(f"config key 'ode_dt': must be positive, got {self.ode_dt}")
        if self.ode_t_end is None:
            self.ode_t_end = self.t_end
        if not (self.ode_t_end > 0):
            raise ConfigurationError(
                f"config key 'ode_t_end': must be positive, got {self.ode_t_end}"
            )
        if self.rate_time is None:
            self.rate_time = self.t_end / 2.0
        if not (0.0 < self.rate_time <= self.t_end):
            raise ConfigurationError(
                f"config key 'rate_time': must lie in (0, t_end], got {self.rate_time}"
            )
        if self.seed < 0:
            raise ConfigurationError(f"config key 'seed': must be nonnegative, got {self.seed}")

    @classmethod
    def from_file(cls, path: str, out_override: Optional[str] = None) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                text = fh.read()
        except FileNotFoundError:
            raise ConfigurationError(f"config file not found: {path}")
        pairs = _parse_lines(text)

        profile_params = {}
        for key in list(pairs):
            if key.startswith("profile."):
                try:
                    profile_params[key[len("profile."):]] = float(pairs.pop(key))
                except ValueError:
                    raise ConfigurationError(f"config key {key!r} is not a number: {pairs[key]!r}")
        unknown = set(pairs) - KNOWN_KEYS
        if unknown:
            raise ConfigurationError(f"unknown config key {sorted(unknown)[0]!r}")

        if "profile" not in pairs:
            raise ConfigurationError("config key 'profile' is required")
        sel = pairs["profile"]
        if ":" in sel:
            kind, name = (s.strip() for s in sel.split(":", 1))
            kind = {"density": "density", "thinfilm": "thinfilm"}.get(kind, kind)
        else:
            kind, name = "generic", sel.strip()

        for required in ("grid.n", "epsilons", "t_end"):
            if required not in pairs:
                raise ConfigurationError(f"config key {required!r} is required")
        try:
            grid_n = int(pairs["grid.n"])
        except ValueError:
            raise ConfigurationError(f"config key 'grid.n' is not an integer: {pairs['grid.n']!r}")
        try:
            epsilons = [float(tok) for tok in pairs["epsilons"].replace(",", " ").split()]
        except ValueError:
            raise ConfigurationError(f"config key 'epsilons': bad value {pairs['epsilons']!r}")
        try:
            seed = int(pairs.get("seed", "0"))
        except ValueError:
            raise ConfigurationError(f"config key 'seed' is not an integer: {pairs['seed']!r}")

        return cls(
            profile_kind=kind,
            profile_name=name,
            profile_params=profile_params,
            grid_n=grid_n,
            epsilons=epsilons,
            t_end=_parse_float(pairs, "t_end"),
            vortices=_parse_points(pairs.get("vortices", ""), "vortices", with_degree=True),
            starts=_parse_points(pairs.get("starts", ""), "starts", with_degree=False),
            delta=_parse_float(pairs, "delta", 0.15),
            sigma=_parse_float(pairs, "sigma", 0.15),
            dt_policy=pairs.get("dt_policy", "explicit"),
            cfl_safety=_parse_float(pairs, "cfl_safety", 0.9),
            snapshot_every=_parse_float(pairs, "snapshot_every"),
            save_snapshots=pairs.get("save_snapshots", "all"),
            out=out_override or pairs.get("out"),
            seed=seed,
            ode_dt=_parse_float(pairs, "ode_dt", 1e-3),
            ode_t_end=_parse_float(pairs, "ode_t_end"),
            rate_time=_parse_float(pairs, "rate_time"),
        )

    def grid(self) -> Grid2D:
        return Grid2D.square(self.grid_n)

    def build_profile(self, grid: Grid2D) -> PinningProfile:
        if self.profile_kind == "generic":
            om, gom = omega_catalog(self.profile_name, self.profile_params)
            return make_generic(grid, om, gom)
        a, ga = density_catalog(self.profile_name, self.profile_params)
        if self.profile_kind == "density":
            return from_density(a, grid, grad_a=ga)
        return thin_film(a, grid, grad_a=ga)

    def warn_if_epsilons_large(self, profile: PinningProfile) -> Optional[str]:
        eps0 = epsilon0(profile)
        if max(self.epsilons) >= eps0:
            msg = (
                f"largest epsilon {max(self.epsilons):g} is not below epsilon0 = {eps0:g}; "
                "modulus bounds are not guaranteed"
            )
            warnings.warn(msg, stacklevel=2)
            return msg
        return None

    def profile_echo(self) -> dict:
        return {
            "kind": self.profile_kind,
            "name": self.profile_name,
            "params": dict(sorted(self.profile_params.items())),
            "grid_n": self.grid_n,
        }
