"""Rectangular pixel grids, images, vector fields and time grids.

Conventions used throughout the package:

* Image arrays have shape ``(nx, ny)`` with axis 0 along x, so ``a[i, j]``
  is the value at pixel center ``(x_i, y_j)``.
* Pixel centers are ``x_min + (i + 1/2) * hx`` (cell-centered sampling).
* Everything is float64.
* The discrete L2 inner product on images is ``hx * hy * sum(a * b)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid2",
    "Image",
    "VectorField2",
    "TimeGrid",
    "VelocityFieldSeries",
    "interp_bilinear",
    "interp_bilinear_with_gradient",
    "splat_bilinear",
    "gradient_central",
    "divergence",
    "image_inner",
    "image_norm",
    "velocity_series_inner",
]


@dataclass(frozen=True)
class Grid2:
    """Cell-centered rectangular grid on ``[x_min, x_max] x [y_min, y_max]``."""

    nx: int
    ny: int
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least 2 pixels per axis")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("grid extents must be nonempty")

    @property
    def hx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def hy(self) -> float:
        return (self.y_max - self.y_min) / self.ny

    @property
    def shape(self) -> tuple:
        return (self.nx, self.ny)

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    def x_centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.nx) + 0.5) * self.hx

    def y_centers(self) -> np.ndarray:
        return self.y_min + (np.arange(self.ny) + 0.5) * self.hy

    def meshgrid(self):
        """Pixel-center coordinate arrays of shape (nx, ny) each."""
        return np.meshgrid(self.x_centers(), self.y_centers(), indexing="ij")

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)


@dataclass
class Image:
    """A scalar field sampled at the pixel centers of ``grid``."""

    grid: Grid2
    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"image shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    def copy(self) -> "Image":
        return Image(self.grid, self.values.copy())


@dataclass
class VectorField2:
    """A 2D vector field (u, v) sampled at the pixel centers of ``grid``."""

    grid: Grid2
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.ascontiguousarray(self.u, dtype=np.float64)
        self.v = np.ascontiguousarray(self.v, dtype=np.float64)
        if self.u.shape != self.grid.shape or self.v.shape != self.grid.shape:
            raise ValueError("vector field components must match the grid shape")

    @classmethod
    def zeros(cls, grid: Grid2) -> "VectorField2":
        return cls(grid, grid.zeros(), grid.zeros())

    def copy(self) -> "VectorField2":
        return VectorField2(self.grid, self.u.copy(), self.v.copy())


@dataclass(frozen=True)
class TimeGrid:
    """Gate times ``t_i = i/N`` and fine times ``tau_j = j/(M*N)``.

    ``N`` is the number of gates (data at gates 1..N, template at gate 0) and
    ``M`` the refinement factor of the fine time discretization, so there are
    ``M*N + 1`` fine time nodes and gate ``i`` sits exactly at fine index
    ``i*M``.
    """

    n_gates: int
    m_factor: int

    def __post_init__(self):
        if self.n_gates < 1:
            raise ValueError("need at least one gate")
        if self.m_factor < 1:
            raise ValueError("time refinement factor must be >= 1")

    @property
    def mn(self) -> int:
        return self.m_factor * self.n_gates

    @property
    def dt(self) -> float:
        return 1.0 / self.mn

    def gate_time(self, i: int) -> float:
        return i / self.n_gates

    def fine_time(self, j: int) -> float:
        return j / self.mn

    def gate_fine_index(self, i: int) -> int:
        """Fine index of gate i; ``tau_{i*M} == t_i`` holds exactly."""
        return i * self.m_factor


@dataclass
class VelocityFieldSeries:
    """Velocity fields nu(tau_j, .) for all fine times j = 0..MN."""

    grid: Grid2
    time_grid: TimeGrid
    fields: list = field(default_factory=list)

    def __post_init__(self):
        n = self.time_grid.mn + 1
        if not self.fields:
            self.fields = [VectorField2.zeros(self.grid) for _ in range(n)]
        if len(self.fields) != n:
            raise ValueError(f"expected {n} velocity fields, got {len(self.fields)}")
        for f in self.fields:
            if f.grid != self.grid:
                raise ValueError("velocity field grid mismatch")

    def __len__(self) -> int:
        return len(self.fields)

    def __getitem__(self, j: int) -> VectorField2:
        return self.fields[j]

    def __setitem__(self, j: int, value: VectorField2):
        self.fields[j] = value

    def copy(self) -> "VelocityFieldSeries":
        return VelocityFieldSeries(
            self.grid, self.time_grid, [f.copy() for f in self.fields]
        )

    def norm(self) -> float:
        """Discrete L2([0,1]; L2) norm with weight 1/(MN) per slice."""
        acc = 0.0
        for f in self.fields:
            acc += image_inner(f.grid, f.u, f.u) + image_inner(f.grid, f.v, f.v)
        return float(np.sqrt(self.time_grid.dt * acc))


def image_inner(grid: Grid2, a: np.ndarray, b: np.ndarray) -> float:
    """Quadrature-weighted L2 inner product of two pixel arrays."""
    return float(grid.cell_area * np.dot(a.ravel(), b.ravel()))


def velocity_series_inner(a: VelocityFieldSeries, b: VelocityFieldSeries) -> float:
    """The pairing matching :meth:`VelocityFieldSeries.norm` (weight dt per slice)."""
    if a.time_grid != b.time_grid or a.grid != b.grid:
        raise ValueError("velocity series must share grid and time grid")
    acc = 0.0
    for fa, fb in zip(a.fields, b.fields):
        acc += image_inner(a.grid, fa.u, fb.u) + image_inner(a.grid, fa.v, fb.v)
    return float(a.time_grid.dt * acc)


def image_norm(grid: Grid2, a: np.ndarray) -> float:
    return float(np.sqrt(image_inner(grid, a, a)))


def _sample_prep(grid: Grid2, px: np.ndarray, py: np.ndarray):
    """Cell indices, fractional offsets and hull mask for sample points.

    Points outside the convex hull of pixel centers get ``inside = False``
    and are treated as sampling the zero extension.  Points exactly on the
    far edge of the hull fall into the last cell with fraction 1.
    """
    u = (px - (grid.x_min + 0.5 * grid.hx)) / grid.hx
    v = (py - (grid.y_min + 0.5 * grid.hy)) / grid.hy
    inside = (u >= 0.0) & (u <= grid.nx - 1) & (v >= 0.0) & (v <= grid.ny - 1)
    i0 = np.clip(np.floor(u).astype(np.int64), 0, grid.nx - 2)
    j0 = np.clip(np.floor(v).astype(np.int64), 0, grid.ny - 2)
    fx = np.where(inside, u - i0, 0.0)
    fy = np.where(inside, v - j0, 0.0)
    return i0, j0, fx, fy, inside


def interp_bilinear(
    grid: Grid2, values: np.ndarray, px: np.ndarray, py: np.ndarray
) -> np.ndarray:
    """Bilinear interpolation of pixel-center samples at arbitrary points.

    Samples outside the convex hull of the pixel centers return 0.0 (zero
    extension); out-of-domain sampling is defined behavior, not an error.
    """
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    i0, j0, fx, fy, inside = _sample_prep(grid, px, py)
    f00 = values[i0, j0]
    f10 = values[i0 + 1, j0]
    f01 = values[i0, j0 + 1]
    f11 = values[i0 + 1, j0 + 1]
    out = (
        f00 * (1.0 - fx) * (1.0 - fy)
        + f10 * fx * (1.0 - fy)
        + f01 * (1.0 - fx) * fy
        + f11 * fx * fy
    )
    return np.where(inside, out, 0.0)


def interp_bilinear_with_gradient(
    grid: Grid2, values: np.ndarray, px: np.ndarray, py: np.ndarray
):
    """Interpolated values plus the interpolant's own partial derivatives.

    The derivatives are those of the piecewise-bilinear interpolant at the
    sample points (cell-local, one-sided on cell edges via the floor rule),
    which is what exact differentiation of ``interp_bilinear`` w.r.t. the
    sample coordinates requires.  Zero outside the hull.
    """
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    i0, j0, fx, fy, inside = _sample_prep(grid, px, py)
    f00 = values[i0, j0]
    f10 = values[i0 + 1, j0]
    f01 = values[i0, j0 + 1]
    f11 = values[i0 + 1, j0 + 1]
    val = (
        f00 * (1.0 - fx) * (1.0 - fy)
        + f10 * fx * (1.0 - fy)
        + f01 * (1.0 - fx) * fy
        + f11 * fx * fy
    )
    gx = ((f10 - f00) * (1.0 - fy) + (f11 - f01) * fy) / grid.hx
    gy = ((f01 - f00) * (1.0 - fx) + (f11 - f10) * fx) / grid.hy
    zero = np.zeros_like(val)
    return (
        np.where(inside, val, zero),
        np.where(inside, gx, zero),
        np.where(inside, gy, zero),
    )


def splat_bilinear(
    grid: Grid2, weights_at: np.ndarray, px: np.ndarray, py: np.ndarray
) -> np.ndarray:
    """Exact transpose of ``interp_bilinear`` as a linear map in the values.

    Scatters each sample's value onto the four surrounding pixel centers
    with the same bilinear weights the interpolation would use, so that for
    any image ``f`` and sample weights ``w``::

        sum(w * interp_bilinear(grid, f, px, py)) == sum(f * splat_bilinear(grid, w, px, py))

    holds to round-off.
    """
    px = np.asarray(px, dtype=np.float64).ravel()
    py = np.asarray(py, dtype=np.float64).ravel()
    w = np.asarray(weights_at, dtype=np.float64).ravel()
    i0, j0, fx, fy, inside = _sample_prep(grid, px, py)
    i0 = i0.ravel()
    j0 = j0.ravel()
    fx = fx.ravel()
    fy = fy.ravel()
    w = np.where(inside.ravel(), w, 0.0)
    ny = grid.ny
    flat00 = i0 * ny + j0
    size = grid.nx * grid.ny
    out = np.bincount(flat00, weights=w * (1.0 - fx) * (1.0 - fy), minlength=size)
    out += np.bincount(flat00 + ny, weights=w * fx * (1.0 - fy), minlength=size)
    out += np.bincount(flat00 + 1, weights=w * (1.0 - fx) * fy, minlength=size)
    out += np.bincount(flat00 + ny + 1, weights=w * fx * fy, minlength=size)
    return out.reshape(grid.shape)


def gradient_central(grid: Grid2, values: np.ndarray):
    """Central differences in the interior, one-sided at the boundary.

    Returns ``(d/dx, d/dy)`` arrays scaled by the pixel sizes.
    """
    gx = np.empty_like(values)
    gy = np.empty_like(values)
    gx[1:-1, :] = (values[2:, :] - values[:-2, :]) / (2.0 * grid.hx)
    gx[0, :] = (values[1, :] - values[0, :]) / grid.hx
    gx[-1, :] = (values[-1, :] - values[-2, :]) / grid.hx
    gy[:, 1:-1] = (values[:, 2:] - values[:, :-2]) / (2.0 * grid.hy)
    gy[:, 0] = (values[:, 1] - values[:, 0]) / grid.hy
    gy[:, -1] = (values[:, -1] - values[:, -2]) / grid.hy
    return gx, gy


def divergence(grid: Grid2, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Divergence consistent with :func:`gradient_central` applied per component."""
    gx, _ = gradient_central(grid, u)
    _, gy = gradient_central(grid, v)
    return gx + gy
