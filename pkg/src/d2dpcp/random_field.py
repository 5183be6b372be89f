"""Gaussian and chi-square random fields on a regular grid.

Fields are drawn as multivariate normal vectors whose covariance is the
squared-exponential kernel evaluated between cell centers, factorized by
Cholesky with escalating diagonal jitter. Two factorization routes exist:

``"dense"``
    One Cholesky factor of the full ``n_cells x n_cells`` matrix. Capped at
    :data:`DENSE_CELL_CAP` cells.
``"kron"``
    The kernel is separable on a rectangular lattice, so the covariance is
    ``C_y (x) C_x`` and its Cholesky factor is ``L_y (x) L_x``. Same Gaussian
    law, O(nx^3 + ny^3) work, usable on 200 x 200 or larger grids.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from d2dpcp._rng import make_rng, seed_record

DENSE_CELL_CAP = 10_000
JITTER_START = 1e-10
JITTER_MAX = 1e-6

# rows of standard normals drawn per block in the batch samplers; fixed so
# output does not depend on memory settings
_BATCH_BLOCK = 64


class FactorizationError(np.linalg.LinAlgError):
    """Cholesky failed even at the largest allowed jitter."""


class GridTooLargeError(MemoryError):
    """Dense covariance requested for more cells than the configured cap."""


@dataclass(frozen=True)
class GridSpec:
    """Regular lattice of ``nx * ny`` square cells.

    Cell ``(i, j)`` is centered at ``origin + (i * spacing, j * spacing)``;
    field arrays are indexed ``values[j, i]`` (one row per grid row).
    """

    nx: int
    ny: int
    spacing: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ValueError("nx and ny must be integers")
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"grid must have at least one cell, got {self.nx}x{self.ny}")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def width(self) -> float:
        return self.nx * self.spacing

    @property
    def height(self) -> float:
        return self.ny * self.spacing

    @property
    def cell_area(self) -> float:
        return self.spacing**2

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """Outer cell edges ``(xmin, xmax, ymin, ymax)``."""
        h = 0.5 * self.spacing
        x0, y0 = self.origin
        return (x0 - h, x0 - h + self.width, y0 - h, y0 - h + self.height)

    def x_coords(self) -> np.ndarray:
        return self.origin[0] + self.spacing * np.arange(self.nx)

    def y_coords(self) -> np.ndarray:
        return self.origin[1] + self.spacing * np.arange(self.ny)

    def cell_centers(self) -> np.ndarray:
        """Centers as an ``(n_cells, 2)`` array in row-major ``(j, i)`` order."""
        xx, yy = np.meshgrid(self.x_coords(), self.y_coords())
        return np.column_stack([xx.ravel(), yy.ravel()])

    def cell_index(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Column and row index of the cell containing each point (clipped to the grid)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        xmin, _, ymin, _ = self.bounds
        i = np.floor((pts[:, 0] - xmin) / self.spacing).astype(int)
        j = np.floor((pts[:, 1] - ymin) / self.spacing).astype(int)
        return np.clip(i, 0, self.nx - 1), np.clip(j, 0, self.ny - 1)

    def to_dict(self) -> dict:
        return {"nx": self.nx, "ny": self.ny, "spacing": self.spacing, "origin": list(self.origin)}


@dataclass(frozen=True)
class SquaredExponentialKernel:
    """``C(s1, s2) = exp(-|s1 - s2|^2 / (2 l^2))``."""

    length_scale: float

    def __post_init__(self):
        if not self.length_scale > 0:
            raise ValueError(f"length_scale must be positive, got {self.length_scale}")

    def __call__(self, distance):
        d = np.asarray(distance, dtype=float)
        return np.exp(-0.5 * (d / self.length_scale) ** 2)

    @property
    def second_spectral_moment(self) -> float:
        """Variance of a directional derivative of the unit-variance field, ``1/l^2``."""
        return 1.0 / self.length_scale**2

    def to_dict(self) -> dict:
        return {"type": "squared_exponential", "length_scale": self.length_scale}


def kernel_eval(kernel: SquaredExponentialKernel, s1, s2) -> float:
    d = np.linalg.norm(np.asarray(s1, dtype=float) - np.asarray(s2, dtype=float))
    return float(kernel(d))


def build_covariance(
    grid: GridSpec, kernel: SquaredExponentialKernel, max_cells: int = DENSE_CELL_CAP
) -> np.ndarray:
    """Dense covariance between all cell centers, in :meth:`GridSpec.cell_centers` order."""
    if grid.n_cells > max_cells:
        raise GridTooLargeError(
            f"{grid.n_cells} cells exceeds the dense cap of {max_cells}; "
            "use method='kron' or a coarser grid"
        )
    centers = grid.cell_centers()
    cov = kernel(cdist(centers, centers))
    np.fill_diagonal(cov, 1.0)
    return cov


def cholesky_with_jitter(
    cov: np.ndarray, start: float = JITTER_START, stop: float = JITTER_MAX
) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``cov + eps*I`` for the smallest eps in start, 10*start, ..., stop."""
    eye = np.eye(cov.shape[0])
    eps = start
    while eps <= stop * (1 + 1e-9):
        try:
            return np.linalg.cholesky(cov + eps * eye), eps
        except np.linalg.LinAlgError:
            eps *= 10.0
    raise FactorizationError(f"covariance not positive definite with jitter up to {stop:g}")


@lru_cache(maxsize=16)
def _axis_factor(n: int, spacing: float, length_scale: float) -> tuple[np.ndarray, float]:
    lag = spacing * np.arange(n, dtype=float)
    cov = np.exp(-0.5 * ((lag[:, None] - lag[None, :]) / length_scale) ** 2)
    factor, eps = cholesky_with_jitter(cov)
    factor.setflags(write=False)
    return factor, eps


@lru_cache(maxsize=2)
def _dense_factor(grid: GridSpec, kernel: SquaredExponentialKernel) -> tuple[np.ndarray, float]:
    factor, eps = cholesky_with_jitter(build_covariance(grid, kernel))
    factor.setflags(write=False)
    return factor, eps


def factor_jitter(grid: GridSpec, kernel: SquaredExponentialKernel, method: str = "kron") -> dict:
    """Diagonal jitter the factorization needed, per axis for ``kron``."""
    if method == "kron":
        return {
            "jitter_x": _axis_factor(grid.nx, grid.spacing, kernel.length_scale)[1],
            "jitter_y": _axis_factor(grid.ny, grid.spacing, kernel.length_scale)[1],
        }
    if method == "dense":
        return {"jitter": _dense_factor(grid, kernel)[1]}
    raise ValueError(f"unknown factorization method {method!r}")


def _color(grid: GridSpec, kernel: SquaredExponentialKernel, z: np.ndarray, method: str) -> np.ndarray:
    """Map iid standard normals of shape ``(..., ny, nx)`` to correlated fields."""
    if method == "kron":
        lx = _axis_factor(grid.nx, grid.spacing, kernel.length_scale)[0]
        ly = _axis_factor(grid.ny, grid.spacing, kernel.length_scale)[0]
        return ly @ z @ lx.T
    if method == "dense":
        lo = _dense_factor(grid, kernel)[0]
        flat = z.reshape(z.shape[:-2] + (grid.n_cells,))
        return (flat @ lo.T).reshape(z.shape)
    raise ValueError(f"unknown factorization method {method!r}")


@dataclass(frozen=True, eq=False)
class FieldRealization:
    grid: GridSpec
    values: np.ndarray
    kind: str
    df: int | None = None
    seed_record: object = None
    kernel: SquaredExponentialKernel | None = None
    method: str = "kron"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        if self.kind not in ("gaussian", "chi_square"):
            raise ValueError(f"kind must be 'gaussian' or 'chi_square', got {self.kind!r}")
        if self.kind == "chi_square":
            if self.df is None or int(self.df) != self.df or self.df < 1:
                raise ValueError("chi_square fields need an integer df >= 1")
            if np.any(vals < 0):
                raise ValueError("chi_square field values must be non-negative")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def metadata(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "kernel": None if self.kernel is None else self.kernel.to_dict(),
            "kind": self.kind,
            "df": self.df,
            "seed": self.seed_record,
            "method": self.method,
            **self.meta,
        }

    def write(self, csv_path) -> tuple[Path, Path]:
        """Write the value matrix as CSV plus a ``.json`` sidecar with the metadata."""
        csv_path = Path(csv_path)
        np.savetxt(csv_path, self.values, fmt="%.12g", delimiter=",")
        side = csv_path.with_suffix(".json")
        side.write_text(json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n")
        return csv_path, side

    @classmethod
    def read(cls, csv_path) -> "FieldRealization":
        csv_path = Path(csv_path)
        meta = json.loads(csv_path.with_suffix(".json").read_text())
        g = meta["grid"]
        grid = GridSpec(g["nx"], g["ny"], g["spacing"], tuple(g["origin"]))
        values = np.loadtxt(csv_path, delimiter=",", ndmin=2).reshape(grid.shape)
        kern = meta.get("kernel")
        return cls(
            grid=grid,
            values=values,
            kind=meta["kind"],
            df=meta.get("df"),
            seed_record=meta.get("seed"),
            kernel=None if kern is None else SquaredExponentialKernel(kern["length_scale"]),
            method=meta.get("method", "kron"),
        )


def _standard_normal_blocks(rng: np.random.Generator, n: int, shape: tuple) -> np.ndarray:
    out = np.empty((n,) + shape)
    for start in range(0, n, _BATCH_BLOCK):
        stop = min(n, start + _BATCH_BLOCK)
        out[start:stop] = rng.standard_normal((stop - start,) + shape)
    return out


def sample_grf_batch(
    grid: GridSpec, kernel: SquaredExponentialKernel, n: int, seed, method: str = "kron"
) -> np.ndarray:
    """``n`` independent zero-mean unit-variance fields, shape ``(n, ny, nx)``."""
    rng = make_rng(seed)
    z = _standard_normal_blocks(rng, n, grid.shape)
    return _color(grid, kernel, z, method)


def sample_chi2_batch(
    grid: GridSpec, kernel: SquaredExponentialKernel, k: int, n: int, seed, method: str = "kron"
) -> np.ndarray:
    """``n`` independent chi-square fields with ``k`` df, shape ``(n, ny, nx)``."""
    _check_df(k)
    rng = make_rng(seed)
    out = np.empty((n,) + grid.shape)
    for start in range(0, n, _BATCH_BLOCK):
        stop = min(n, start + _BATCH_BLOCK)
        z = rng.standard_normal((stop - start, k) + grid.shape)
        out[start:stop] = np.sum(_color(grid, kernel, z, method) ** 2, axis=1)
    return out


def sample_grf(
    grid: GridSpec, kernel: SquaredExponentialKernel, seed, method: str = "kron"
) -> FieldRealization:
    values = _color(grid, kernel, make_rng(seed).standard_normal(grid.shape), method)
    meta = factor_jitter(grid, kernel, method)
    return FieldRealization(grid, values, "gaussian", None, seed_record(seed), kernel, method, meta)


def chi2_from_components(components) -> np.ndarray:
    """Pointwise sum of squares of component fields stacked on axis 0."""
    comps = np.asarray(components, dtype=float)
    return np.sum(comps**2, axis=0)


def sample_chi2_field(
    grid: GridSpec, kernel: SquaredExponentialKernel, k: int, seed, method: str = "kron"
) -> FieldRealization:
    _check_df(k)
    z = make_rng(seed).standard_normal((k,) + grid.shape)
    values = chi2_from_components(_color(grid, kernel, z, method))
    meta = factor_jitter(grid, kernel, method)
    return FieldRealization(grid, values, "chi_square", int(k), seed_record(seed), kernel, method, meta)


def _check_df(k):
    if int(k) != k or k < 1:
        raise ValueError(f"degrees of freedom must be an integer >= 1, got {k}")
