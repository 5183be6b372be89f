"""Homogeneous Poisson and permanental Cox point patterns.

The canonical Cox sampler (:func:`sample_cox`) gives every grid cell an
independent Poisson count with mean ``intensity * cell_area``. The
Metropolis-Hastings sampler (:func:`sample_mh_fixed_n`) instead draws a fixed
number of points with density proportional to the field, i.e. it conditions
on the total count.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from d2dpcp._rng import make_rng, seed_record
from d2dpcp.random_field import FieldRealization, GridSpec


class EmptyRegionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RectWindow:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError("window must have positive width and height")

    @classmethod
    def square(cls, side: float, origin=(0.0, 0.0)) -> "RectWindow":
        return cls(origin[0], origin[0] + side, origin[1], origin[1] + side)

    @classmethod
    def from_grid(cls, grid: GridSpec) -> "RectWindow":
        return cls(*grid.bounds)

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))

    def contains(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return (
            (p[:, 0] >= self.xmin) & (p[:, 0] <= self.xmax)
            & (p[:, 1] >= self.ymin) & (p[:, 1] <= self.ymax)
        )

    def sample_uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        u = rng.random((n, 2))
        return np.column_stack([self.xmin + self.width * u[:, 0], self.ymin + self.height * u[:, 1]])

    def to_dict(self) -> dict:
        return {"type": "rectangle", "xmin": self.xmin, "xmax": self.xmax, "ymin": self.ymin, "ymax": self.ymax}


@dataclass(frozen=True)
class AnnulusWindow:
    """Ring between the protection radius ``R0`` and the cell radius ``R``."""

    R: float
    R0: float = 0.0
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not (0 <= self.R0 < self.R):
            raise ValueError(f"need 0 <= R0 < R, got R0={self.R0}, R={self.R}")

    @property
    def area(self) -> float:
        return math.pi * (self.R**2 - self.R0**2)

    def radii(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return np.hypot(p[:, 0] - self.center[0], p[:, 1] - self.center[1])

    def contains(self, points) -> np.ndarray:
        r = self.radii(points)
        # relative slack for points generated exactly on a boundary circle
        tol = 1e-12 * self.R
        return (r >= self.R0 - tol) & (r <= self.R + tol)

    def sample_uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        # radius density 2r / (R^2 - R0^2) by inverse transform
        u = rng.random((n, 2))
        r = np.sqrt(self.R0**2 + u[:, 0] * (self.R**2 - self.R0**2))
        theta = 2 * np.pi * u[:, 1]
        return np.column_stack([self.center[0] + r * np.cos(theta), self.center[1] + r * np.sin(theta)])

    def to_dict(self) -> dict:
        return {"type": "annulus", "R": self.R, "R0": self.R0, "center": list(self.center)}


def window_from_dict(d: dict):
    if d["type"] == "rectangle":
        return RectWindow(d["xmin"], d["xmax"], d["ymin"], d["ymax"])
    if d["type"] == "annulus":
        return AnnulusWindow(d["R"], d["R0"], tuple(d["center"]))
    raise ValueError(f"unknown window type {d['type']!r}")


@dataclass(frozen=True, eq=False)
class PointPattern:
    points: np.ndarray
    window: RectWindow | AnnulusWindow
    label: str
    seed_record: object = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 2)
        if self.label not in ("sppp", "pcp_poisson", "pcp_mh"):
            raise ValueError(f"unknown pattern label {self.label!r}")
        if pts.size and not np.all(self.window.contains(pts)):
            raise ValueError("every point must lie inside the window")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return len(self)

    def header(self) -> dict:
        return {"window": self.window.to_dict(), "label": self.label, "seed": self.seed_record, **self.meta}

    def to_csv(self, path) -> Path:
        path = Path(path)
        lines = [f"# {json.dumps(self.header(), sort_keys=True)}", "x,y"]
        lines += [f"{x:.12g},{y:.12g}" for x, y in self.points]
        path.write_text("\n".join(lines) + "\n")
        return path

    @classmethod
    def read_csv(cls, path) -> "PointPattern":
        text = Path(path).read_text().splitlines()
        head = json.loads(text[0][1:].strip())
        rows = [tuple(map(float, ln.split(","))) for ln in text[2:] if ln.strip()]
        extra = {k: v for k, v in head.items() if k not in ("window", "label", "seed")}
        return cls(np.array(rows).reshape(-1, 2), window_from_dict(head["window"]), head["label"], head["seed"], extra)


def sample_sppp(window, lam: float, seed) -> PointPattern:
    """Homogeneous Poisson pattern with ``lam`` points per unit area."""
    if lam < 0:
        raise ValueError(f"intensity must be non-negative, got {lam}")
    rng = make_rng(seed)
    n = rng.poisson(lam * window.area)
    return PointPattern(window.sample_uniform(rng, n), window, "sppp", seed_record(seed), {"lambda": lam})


def sample_cox(field: FieldRealization, seed, scale: float = 1.0) -> PointPattern:
    """Poisson points given the field: cell counts ~ Poisson(scale * value * spacing^2).

    ``scale`` converts field units to points per unit area; use
    ``target_mean_intensity / df`` to match the mean intensity of a chi-square
    field to a given homogeneous baseline.
    """
    if field.kind != "chi_square":
        raise ValueError("sample_cox needs a chi_square field realization")
    if scale < 0:
        raise ValueError("scale must be non-negative")
    grid = field.grid
    rng = make_rng(seed)
    counts = rng.poisson(scale * field.values * grid.cell_area).ravel()
    centers = np.repeat(grid.cell_centers(), counts, axis=0)
    jitter = (rng.random(centers.shape) - 0.5) * grid.spacing
    meta = {"scale": scale, "field_seed": field.seed_record}
    return PointPattern(centers + jitter, RectWindow.from_grid(grid), "pcp_poisson", seed_record(seed), meta)


def _reflect(c: float, lo: float, hi: float) -> float:
    w = hi - lo
    y = (c - lo) % (2 * w)
    return lo + (2 * w - y if y > w else y)


def sample_mh_fixed_n(
    field: FieldRealization,
    n: int,
    burn_in: int | None = None,
    thin: int = 10,
    proposal_sigma: float | None = None,
    seed=0,
) -> PointPattern:
    """``n`` points from a component-wise random-walk Metropolis-Hastings chain.

    The target density is proportional to the field value of the cell holding
    the current state. Each sweep proposes a Gaussian step in x, then in y,
    reflecting at the window edges so the proposal stays symmetric and the
    acceptance ratio reduces to a ratio of field values. The chain starts at
    the center of the largest-valued cell, runs ``burn_in`` sweeps (default
    ``10 * n``) and then keeps every ``thin``-th state. The default step is
    two cell widths.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if thin < 1:
        raise ValueError("thin must be >= 1")
    vals = np.asarray(field.values, dtype=float)
    if np.any(vals < 0):
        raise ValueError("field must be non-negative")
    if not np.any(vals > 0):
        raise ValueError("field is identically zero; no stationary density")
    grid = field.grid
    burn_in = 10 * n if burn_in is None else int(burn_in)
    sigma = 2.0 * grid.spacing if proposal_sigma is None else float(proposal_sigma)
    xmin, xmax, ymin, ymax = grid.bounds
    s = grid.spacing
    nx1, ny1 = grid.nx - 1, grid.ny - 1
    table = vals.tolist()

    j0, i0 = np.unravel_index(int(np.argmax(vals)), vals.shape)
    x, y = float(grid.x_coords()[i0]), float(grid.y_coords()[j0])
    ci, cj = int(i0), int(j0)
    cur = table[cj][ci]

    n_sweeps = burn_in + n * thin
    rng = make_rng(seed)
    steps = (sigma * rng.standard_normal((n_sweeps, 2))).tolist()
    unif = rng.random((n_sweeps, 2)).tolist()

    out = np.empty((n, 2))
    kept = 0
    accepted = 0
    for t in range(n_sweeps):
        dx, dy = steps[t]
        ux, uy = unif[t]
        xp = _reflect(x + dx, xmin, xmax)
        ip = min(int((xp - xmin) / s), nx1)
        fp = table[cj][ip]
        if fp > 0 and ux * cur < fp:
            x, ci, cur = xp, ip, fp
            accepted += 1
        yp = _reflect(y + dy, ymin, ymax)
        jp = min(int((yp - ymin) / s), ny1)
        fp = table[jp][ci]
        if fp > 0 and uy * cur < fp:
            y, cj, cur = yp, jp, fp
            accepted += 1
        if t >= burn_in and (t - burn_in + 1) % thin == 0:
            out[kept] = (x, y)
            kept += 1

    meta = {
        "burn_in": burn_in,
        "thin": thin,
        "proposal_sigma": sigma,
        "acceptance_rate": accepted / (2 * n_sweeps),
        "field_seed": field.seed_record,
    }
    return PointPattern(out, RectWindow.from_grid(grid), "pcp_mh", seed_record(seed), meta)


def intensity_measure(field: FieldRealization, region) -> float:
    """Sum of ``value * spacing^2`` over cells whose centers fall in ``region``.

    ``region`` is any window-like object with ``contains(points)`` or a
    callable mapping an ``(m, 2)`` array to a boolean mask.
    """
    grid = field.grid
    centers = grid.cell_centers()
    mask = region.contains(centers) if hasattr(region, "contains") else np.asarray(region(centers), bool)
    if not mask.any():
        warnings.warn("region contains no cell centers; intensity measure is 0", EmptyRegionWarning, stacklevel=2)
        return 0.0
    return float(np.sum(field.values.ravel()[mask]) * grid.cell_area)
