"""Grid geometry, field containers, finite-difference operators, and region masks.

Conventions used throughout the package:
  * values[i, j] lives at (origin_x + i*h, origin_y + j*h); i runs along x.
  * serialization and reductions are row-major with i as the outer index,
    so repeated runs are bit-identical.
  * derivative operators return zero on boundary nodes (except ``gradient``,
    which uses one-sided second-order differences there); Dirichlet data is
    applied by the solver, never by the operators.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence, TextIO, Union

import numpy as np

from .errors import ComputationError, ConfigurationError

Evaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Grid2D:
    """Uniform rectangular grid of nx*ny nodes with spacing h."""

    nx: int
    ny: int
    h: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ConfigurationError(f"grid needs nx, ny >= 3, got {self.nx}x{self.ny}")
        if not (self.h > 0.0 and np.isfinite(self.h)):
            raise ConfigurationError(f"grid spacing must be positive and finite, got {self.h}")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @classmethod
    def square(cls, n: int, length: float = 1.0, origin: tuple[float, float] = (0.0, 0.0)) -> "Grid2D":
        return cls(nx=n, ny=n, h=length / (n - 1), origin=origin)

    @property
    def extent(self) -> tuple[float, float]:
        return ((self.nx - 1) * self.h, (self.ny - 1) * self.h)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @cached_property
    def xs(self) -> np.ndarray:
        return self.origin[0] + self.h * np.arange(self.nx)

    @cached_property
    def ys(self) -> np.ndarray:
        return self.origin[1] + self.h * np.arange(self.ny)

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xs, self.ys, indexing="ij")

    def node_xy(self, i: int, j: int) -> tuple[float, float]:
        return (self.origin[0] + i * self.h, self.origin[1] + j * self.h)

    def contains(self, x: float, y: float, margin: float = 0.0) -> bool:
        """True if (x, y) lies in the domain shrunk inward by ``margin``."""
        ex, ey = self.extent
        return (
            self.origin[0] + margin <= x <= self.origin[0] + ex - margin
            and self.origin[1] + margin <= y <= self.origin[1] + ey - margin
        )

    @cached_property
    def boundary(self) -> np.ndarray:
        """Boolean array marking nodes with i in {0, nx-1} or j in {0, ny-1}."""
        b = np.zeros((self.nx, self.ny), dtype=bool)
        b[0, :] = b[-1, :] = True
        b[:, 0] = b[:, -1] = True
        b.setflags(write=False)
        return b

    @cached_property
    def quad_weights(self) -> np.ndarray:
        """Trapezoidal cell weights: h^2 interior, halved on edges, quartered
        on corners, so the weights sum exactly to the domain area."""
        wx = np.ones(self.nx)
        wx[0] = wx[-1] = 0.5
        wy = np.ones(self.ny)
        wy[0] = wy[-1] = 0.5
        w = self.h * self.h * np.outer(wx, wy)
        w.setflags(write=False)
        return w


def _check_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values))[0]
        raise ComputationError(f"non-finite {what} value at node (i={bad[0]}, j={bad[1]})")


@dataclass
class ScalarField:
    """One real value per grid node."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ConfigurationError(
                f"scalar field shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        _check_finite(self.values, "scalar field")

    @classmethod
    def from_function(cls, grid: Grid2D, fn: Evaluator) -> "ScalarField":
        X, Y = grid.mesh
        return cls(grid, np.broadcast_to(fn(X, Y), grid.shape).copy())

    @classmethod
    def constant(cls, grid: Grid2D, c: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(c)))

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


@dataclass
class ComplexField:
    """One complex value (re, im) per grid node; stores the order parameter."""

    grid: Grid2D
    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        self.re = np.ascontiguousarray(self.re, dtype=np.float64)
        self.im = np.ascontiguousarray(self.im, dtype=np.float64)
        if self.re.shape != self.grid.shape or self.im.shape != self.grid.shape:
            raise ConfigurationError(
                f"complex field shape {self.re.shape}/{self.im.shape} does not match grid {self.grid.shape}"
            )
        _check_finite(self.re, "field re")
        _check_finite(self.im, "field im")

    @classmethod
    def from_function(cls, grid: Grid2D, fn: Evaluator) -> "ComplexField":
        X, Y = grid.mesh
        z = np.asarray(fn(X, Y), dtype=np.complex128)
        z = np.broadcast_to(z, grid.shape)
        return cls(grid, z.real.copy(), z.imag.copy())

    @classmethod
    def constant(cls, grid: Grid2D, re: float, im: float = 0.0) -> "ComplexField":
        return cls(grid, np.full(grid.shape, float(re)), np.full(grid.shape, float(im)))

    def copy(self) -> "ComplexField":
        return ComplexField(self.grid, self.re.copy(), self.im.copy())

    def modulus(self) -> ScalarField:
        return ScalarField(self.grid, np.hypot(self.re, self.im))

    def modulus2(self) -> np.ndarray:
        return self.re * self.re + self.im * self.im

    def phase(self) -> np.ndarray:
        return np.arctan2(self.im, self.re)


@dataclass
class RegionMask:
    """Boolean node selection; balls are excluded by strict distance < delta."""

    grid: Grid2D
    included: np.ndarray

    def __post_init__(self):
        self.included = np.ascontiguousarray(self.included, dtype=bool)
        if self.included.shape != self.grid.shape:
            raise ConfigurationError(
                f"mask shape {self.included.shape} does not match grid {self.grid.shape}"
            )

    @classmethod
    def full(cls, grid: Grid2D) -> "RegionMask":
        return cls(grid, np.ones(grid.shape, dtype=bool))

    @classmethod
    def excluding_balls(
        cls, grid: Grid2D, centers: Sequence[tuple[float, float]], delta: float
    ) -> "RegionMask":
        inc = np.ones(grid.shape, dtype=bool)
        X, Y = grid.mesh
        for cx, cy in centers:
            inc &= (X - cx) ** 2 + (Y - cy) ** 2 >= delta * delta
        return cls(grid, inc)

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.included))


AnyField = Union[ScalarField, ComplexField]


def _lap(values: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(values)
    out[1:-1, 1:-1] = (
        values[2:, 1:-1] + values[:-2, 1:-1] + values[1:-1, 2:] + values[1:-1, :-2]
        - 4.0 * values[1:-1, 1:-1]
    ) / (h * h)
    return out


def laplacian(f: AnyField) -> AnyField:
    """5-point Laplacian on interior nodes, zero on boundary nodes."""
    if isinstance(f, ComplexField):
        return ComplexField(f.grid, _lap(f.re, f.grid.h), _lap(f.im, f.grid.h))
    return ScalarField(f.grid, _lap(f.values, f.grid.h))


def _grad_axis(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    v = values if axis == 0 else values.T
    out = np.empty_like(v)
    out[1:-1, :] = (v[2:, :] - v[:-2, :]) / (2.0 * h)
    # one-sided second-order differences keep the boundary O(h^2); written as
    # differences so constant fields map to exact zero
    out[0, :] = (4.0 * (v[1, :] - v[0, :]) - (v[2, :] - v[0, :])) / (2.0 * h)
    out[-1, :] = (4.0 * (v[-1, :] - v[-2, :]) - (v[-1, :] - v[-3, :])) / (2.0 * h)
    return out if axis == 0 else out.T


def gradient(f: ScalarField) -> tuple[ScalarField, ScalarField]:
    """Central differences inside, one-sided second-order on the boundary."""
    gx = _grad_axis(f.values, f.grid.h, axis=0)
    gy = _grad_axis(f.values, f.grid.h, axis=1)
    return ScalarField(f.grid, gx), ScalarField(f.grid, gy)


def _central_interior(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    out = np.zeros_like(values)
    if axis == 0:
        out[1:-1, :] = (values[2:, :] - values[:-2, :]) / (2.0 * h)
    else:
        out[:, 1:-1] = (values[:, 2:] - values[:, :-2]) / (2.0 * h)
    return out


def advect(v: ComplexField, gx: ScalarField, gy: ScalarField) -> ComplexField:
    """gx * dv/dx + gy * dv/dy componentwise; zero on boundary nodes."""
    if gx.grid != v.grid or gy.grid != v.grid:
        raise ConfigurationError("advect requires all fields on the same grid")
    h = v.grid.h
    out_re = gx.values * _central_interior(v.re, h, 0) + gy.values * _central_interior(v.re, h, 1)
    out_im = gx.values * _central_interior(v.im, h, 0) + gy.values * _central_interior(v.im, h, 1)
    out_re[v.grid.boundary] = 0.0
    out_im[v.grid.boundary] = 0.0
    return ComplexField(v.grid, out_re, out_im)


def masked_norms(f: ScalarField, mask: RegionMask) -> tuple[float, float]:
    """(sup |f|, weighted-L2 of f) over the included nodes.

    The L2 sum uses the grid's trapezoidal weights so that a full mask
    integrates exactly over the domain area; reduction order is the fixed
    row-major numpy order, so results are bit-stable across runs.
    """
    if mask.grid != f.grid:
        raise ConfigurationError("masked_norms requires field and mask on the same grid")
    if not mask.included.any():
        raise ConfigurationError("masked_norms over an empty mask")
    vals = f.values[mask.included]
    w = f.grid.quad_weights[mask.included]
    sup = float(np.max(np.abs(vals)))
    l2 = float(np.sqrt(np.sum(w * vals * vals)))
    return sup, l2


# ---------------------------------------------------------------------------
# CSV serialization: header i,j,x,y,value (scalar) or i,j,x,y,re,im (complex),
# row-major with i outer, 17 significant digits.

def _write_rows(fh: TextIO, grid: Grid2D, columns: Sequence[np.ndarray], header: str) -> None:
    fh.write(header + "\n")
    X, Y = grid.mesh
    cols = [X.ravel(), Y.ravel()] + [c.ravel() for c in columns]
    ii = np.repeat(np.arange(grid.nx), grid.ny)
    jj = np.tile(np.arange(grid.ny), grid.nx)
    n_extra = len(columns)
    fmt = "%d,%d,%.17g,%.17g" + ",%.17g" * n_extra + "\n"
    lines = [fmt % row for row in zip(ii, jj, *cols)]
    fh.writelines(lines)


def write_scalar_csv(f: ScalarField, path: str) -> None:
    with open(path, "w", newline="") as fh:
        _write_rows(fh, f.grid, [f.values], "i,j,x,y,value")


def write_complex_csv(v: ComplexField, path: str) -> None:
    with open(path, "w", newline="") as fh:
        _write_rows(fh, v.grid, [v.re, v.im], "i,j,x,y,re,im")


def _read_csv(path: str, n_values: int) -> tuple[Grid2D, list[np.ndarray]]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 4 + n_values:
        raise ConfigurationError(f"{path}: expected {4 + n_values} columns, got {data.shape[1]}")
    ii = data[:, 0].astype(int)
    jj = data[:, 1].astype(int)
    nx = int(ii.max()) + 1
    ny = int(jj.max()) + 1
    if len(data) != nx * ny:
        raise ConfigurationError(f"{path}: {len(data)} rows do not fill a {nx}x{ny} grid")
    origin = (float(data[:, 2].min()), float(data[:, 3].min()))
    h = (float(data[:, 2].max()) - origin[0]) / (nx - 1)
    grid = Grid2D(nx=nx, ny=ny, h=h, origin=origin)
    out = []
    for k in range(n_values):
        arr = np.empty((nx, ny))
        arr[ii, jj] = data[:, 4 + k]
        out.append(arr)
    return grid, out


def read_scalar_csv(path: str) -> ScalarField:
    grid, (vals,) = _read_csv(path, 1)
    return ScalarField(grid, vals)


def read_complex_csv(path: str) -> ComplexField:
    grid, (re, im) = _read_csv(path, 2)
    return ComplexField(grid, re, im)
