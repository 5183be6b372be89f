"""Second-order summary statistics: pair correlation, Ripley K and L, and G.

Closed forms are for the permanental Cox process with ``k = 2`` (pair
correlation ``1 + C(r)^2`` under the squared-exponential kernel) and for the
homogeneous Poisson process. The empirical estimators carry no edge
correction, so they are biased low once ``r`` is a sizeable fraction of the
window side.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate
from scipy.spatial import cKDTree

from d2dpcp.point_process import PointPattern

MODELS = ("sppp", "pcp")


@dataclass(frozen=True, eq=False)
class SummaryCurve:
    r_values: np.ndarray
    values: np.ndarray
    kind: str
    source: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        r = _check_r(self.r_values)
        v = np.array(self.values, dtype=float)
        if v.shape != r.shape:
            raise ValueError("values and r_values must have the same length")
        if self.kind not in ("K", "L", "g", "G"):
            raise ValueError(f"unknown curve kind {self.kind!r}")
        if self.source not in ("closed_form", "empirical"):
            raise ValueError(f"unknown curve source {self.source!r}")
        if self.kind in ("K", "G") and np.any(v < 0):
            raise ValueError(f"{self.kind} values must be non-negative")
        if self.kind == "G" and self.source == "empirical" and np.any(v > 1):
            raise ValueError("empirical G values must lie in [0, 1]")
        r.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "r_values", r)
        object.__setattr__(self, "values", v)

    def to_csv(self, path) -> Path:
        path = Path(path)
        head = {"kind": self.kind, "source": self.source, **self.params}
        lines = [f"# {json.dumps(head, sort_keys=True)}", "r,value"]
        lines += [f"{r:.12g},{v:.12g}" for r, v in zip(self.r_values, self.values)]
        path.write_text("\n".join(lines) + "\n")
        return path


def _check_r(r_values) -> np.ndarray:
    r = np.array(r_values, dtype=float).ravel()
    if r.size == 0:
        raise ValueError("need at least one distance")
    if np.any(r < 0):
        raise ValueError("distances must be non-negative")
    if np.any(np.diff(r) <= 0):
        raise ValueError("distances must be strictly ascending")
    return r


def _check_model(model, l):
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}, got {model!r}")
    if model == "pcp" and not (l is not None and l > 0):
        raise ValueError("pcp model needs a positive length scale")


def pair_correlation_pcp(r, l: float):
    """``g(r) = 1 + C(r)^2 = 1 + exp(-r^2 / l^2)``."""
    if not l > 0:
        raise ValueError("length scale must be positive")
    r = np.asarray(r, dtype=float)
    return 1.0 + np.exp(-((r / l) ** 2))


def k_closed(r, l: float | None = None, model: str = "pcp"):
    _check_model(model, l)
    r = np.asarray(r, dtype=float)
    if model == "sppp":
        return np.pi * r**2
    return np.pi * r**2 - np.pi * l**2 * np.expm1(-((r / l) ** 2))


def l_closed(r, l: float | None = None, model: str = "pcp"):
    return np.sqrt(k_closed(r, l, model) / np.pi)


def k_by_quadrature(r: float, l: float | None = None, model: str = "pcp", tol: float = 1e-9) -> float:
    """``K(r) = int_0^r g(s) 2 pi s ds`` by adaptive quadrature (independent of :func:`k_closed`)."""
    _check_model(model, l)
    if model == "sppp":
        g = lambda s: 1.0
    else:
        g = lambda s: 1.0 + np.exp(-((s / l) ** 2))
    val, err = integrate.quad(lambda s: g(s) * 2 * np.pi * s, 0.0, r, epsabs=tol, epsrel=tol, limit=200)
    return val


def _close_pairs(points: np.ndarray, r_max: float) -> tuple[np.ndarray, np.ndarray]:
    tree = cKDTree(points)
    pairs = tree.query_pairs(r_max, output_type="ndarray")
    if pairs.size == 0:
        return np.empty(0), np.empty((0, 2), dtype=int)
    d = np.linalg.norm(points[pairs[:, 0]] - points[pairs[:, 1]], axis=1)
    return d, pairs


def k_hat(pattern: PointPattern, r_values, intensity) -> SummaryCurve:
    """Naive Ripley K estimate, no edge correction.

    With a scalar ``intensity`` this is ``(1/(lam n)) sum_{i != j} 1(d_ij <= r)``.
    With one intensity value per point it is
    ``(1/n) sum_{i != j} 1(d_ij <= r) / (lam_i lam_j)``.
    """
    r = _check_r(r_values)
    pts = pattern.points
    n = len(pts)
    if n < 2:
        raise ValueError("K estimate needs at least two points")
    lam = np.asarray(intensity, dtype=float)
    per_point = lam.ndim > 0
    if per_point:
        if lam.shape != (n,):
            raise ValueError("per-point intensity must have one value per point")
    if np.any(lam <= 0):
        raise ValueError("intensity must be positive")

    d, pairs = _close_pairs(pts, r[-1])
    order = np.argsort(d, kind="stable")
    d = d[order]
    if per_point:
        w = 1.0 / (lam[pairs[order, 0]] * lam[pairs[order, 1]])
    else:
        w = np.ones_like(d)
    cum = np.concatenate([[0.0], np.cumsum(w)])
    # each unordered pair appears twice in the ordered double sum
    sums = 2.0 * cum[np.searchsorted(d, r, side="right")]
    vals = sums / n if per_point else sums / (float(lam) * n)
    form = "per_point" if per_point else "constant"
    params = {"n": n, "intensity": form if per_point else float(lam)}
    return SummaryCurve(r, vals, "K", "empirical", params)


def l_from_k(curve: SummaryCurve) -> SummaryCurve:
    if curve.kind != "K":
        raise ValueError("expected a K curve")
    return SummaryCurve(curve.r_values, np.sqrt(curve.values / np.pi), "L", curve.source, dict(curve.params))


def g_hat(pattern: PointPattern, r_values) -> SummaryCurve:
    """Empirical nearest-neighbor distance distribution (fraction of points with NN distance <= r)."""
    r = _check_r(r_values)
    pts = pattern.points
    if len(pts) < 2:
        raise ValueError("G estimate needs at least two points")
    nn, _ = cKDTree(pts).query(pts, k=2)
    nn = np.sort(nn[:, 1])
    vals = np.searchsorted(nn, r, side="right") / len(pts)
    return SummaryCurve(r, vals, "G", "empirical", {"n": len(pts)})


def ensemble_envelope(curves, level: float = 0.95) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pointwise mean and central ``level`` quantile band of a stack of curves."""
    vals = np.vstack([c.values if isinstance(c, SummaryCurve) else np.asarray(c) for c in curves])
    a = 0.5 * (1 - level)
    lo, hi = np.quantile(vals, [a, 1 - a], axis=0)
    return vals.mean(axis=0), lo, hi
