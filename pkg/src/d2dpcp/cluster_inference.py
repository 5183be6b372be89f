"""Nearest-neighbor distribution of the Cox process via expected EC and Poisson clumping.

Excursion clusters above ``u`` are treated as Poisson clumps: their number
has mean ``psi0`` and a cluster's volume exceeds ``r`` with probability
``exp(-beta r^(2/N))``, ``beta = (Gamma(N/2 + 1) / eta)^(2/N)``, where
``eta = rho_0^v L_N / psi0`` is the mean cluster volume. Then
``G(r) = 1 - exp(-psi0 * p(v >= r))``.

By default all of these are evaluated over the ball ``B_r`` of the same
radius ``r`` the function is evaluated at (``ClumpingParams.domain=None``).
Passing a fixed :class:`DomainGeometry` evaluates them over that domain
instead, e.g. the whole cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from d2dpcp.ec_geometry import (
    DomainGeometry,
    ExcursionSummary,
    ec_densities,
    resolve_domain,
    unit_ball_volume,
    validity_floor,
)


class ClumpingError(ValueError):
    """Expected EC not positive, so cluster volume and G are undefined."""


@dataclass(frozen=True)
class ClumpingParams:
    u: float
    k: int = 2
    N: int = 2
    domain: DomainGeometry | None = None
    v: int = 1
    metric_scaling: str = "none"
    length_scale: float | None = None
    u_min: float | None = None

    def __post_init__(self):
        if self.N != 2:
            raise ValueError("only planar domains (N = 2) are supported")
        if int(self.v) != self.v or self.v < 1:
            raise ValueError(f"v must be an integer >= 1, got {self.v}")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be an integer >= 1, got {self.k}")
        if self.domain is not None and self.domain.N != self.N:
            raise ValueError("domain dimension does not match N")
        if self.u < self.floor:
            raise ValueError(f"u={self.u} is below the validity floor {self.floor:g}")

    @property
    def floor(self) -> float:
        return validity_floor(self.k, self.N) if self.u_min is None else float(self.u_min)

    @property
    def per_ball(self) -> bool:
        return self.domain is None


def _ball_lk(N: int, r: np.ndarray) -> list[np.ndarray]:
    wN = unit_ball_volume(N)
    return [math.comb(N, j) * wN / unit_ball_volume(N - j) * r**j for j in range(N + 1)]


def _pieces(params: ClumpingParams, r=None):
    """rho_j, psi0 (in the chosen metric) and physical L_N, broadcast over r for per-ball domains."""
    rho = ec_densities(params.u, params.k, params.N)
    if params.per_ball:
        if r is None:
            raise ValueError("per-ball clumping needs the radius r")
        rr = np.asarray(r, dtype=float)
        lk = _ball_lk(params.N, rr)
        scale = 1.0
        if params.metric_scaling == "spectral":
            if params.length_scale is None:
                raise ValueError("spectral metric scaling needs the kernel length scale")
            scale = 1.0 / params.length_scale
        elif params.metric_scaling != "none":
            raise ValueError(f"unknown metric scaling {params.metric_scaling!r}")
        psi0 = sum(rho[j] * lk[j] * scale**j for j in range(params.N + 1))
        return rho, psi0, lk[params.N]
    dom = resolve_domain(params.domain, params.metric_scaling, params.length_scale)
    psi0 = float(np.dot(rho, dom.lk))
    return rho, psi0, params.domain.volume


def summarize(params: ClumpingParams, r: float | None = None) -> ExcursionSummary:
    rho, psi0, vol = _pieces(params, r)
    psi0 = float(psi0)
    eta = _eta(rho[0], float(vol), psi0, params.v)
    beta = math.inf if eta == 0 else (math.gamma(params.N / 2 + 1) / eta) ** (2 / params.N)
    domain = params.domain if params.domain is not None else DomainGeometry.ball(params.N, r)
    return ExcursionSummary(params.u, params.k, domain, tuple(float(x) for x in rho), psi0, eta, beta, params.metric_scaling)


def _eta(rho0, vol, psi0, v):
    if np.any(np.asarray(psi0) <= 0):
        raise ClumpingError("expected EC is not positive; threshold too high or below the clumping regime")
    return rho0**v * vol / psi0


def expected_cluster_volume(params: ClumpingParams, r: float | None = None):
    """``eta = rho_0^v L_N / psi0``, the mean volume of one excursion cluster (physical units)."""
    rho, psi0, vol = _pieces(params, r)
    out = _eta(rho[0], vol, psi0, params.v)
    return float(out) if np.ndim(out) == 0 else out


def _extent(r, eta, N):
    r = np.asarray(r, dtype=float)
    # eta can underflow to 0 for tiny balls; the limit p = 0 follows from beta = inf
    with np.errstate(divide="ignore"):
        beta = (math.gamma(N / 2 + 1) / np.asarray(eta, dtype=float)) ** (2 / N)
    return np.exp(-beta * r ** (2 / N))


def extent_probability(r, params: ClumpingParams):
    """``p(v >= r) = exp(-beta r^(2/N))``.

    For per-ball parameters ``eta`` is itself a function of ``r``; at ``r = 0``
    the ball has no volume and the limit value 0 is returned.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be non-negative")
    if params.per_ball:
        out = np.zeros_like(r)
        pos = r > 0
        if np.any(pos):
            eta = np.asarray(expected_cluster_volume(params, r[pos]))
            out[pos] = _extent(r[pos], eta, params.N)
    else:
        eta = expected_cluster_volume(params)
        if eta <= 0:
            raise ClumpingError("expected cluster volume is zero; extent probability undefined")
        out = _extent(r, eta, params.N)
    return float(out) if out.ndim == 0 else out


def g_pcp(r, params: ClumpingParams):
    """``G(r) = 1 - exp(-psi0 * p(v >= r))``, computed as ``-expm1`` so it never goes negative."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be non-negative")
    if params.per_ball:
        out = np.zeros_like(r)
        pos = r > 0
        if np.any(pos):
            _, psi0, _ = _pieces(params, r[pos])
            out[pos] = -np.expm1(-psi0 * extent_probability(r[pos], params))
    else:
        _, psi0, _ = _pieces(params)
        out = -np.expm1(-psi0 * np.asarray(extent_probability(r, params)))
    return float(out) if out.ndim == 0 else out


def g_sppp(r, lam: float):
    """``G(r) = 1 - exp(-lam pi r^2)`` for a homogeneous Poisson process."""
    if lam < 0:
        raise ValueError("intensity must be non-negative")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be non-negative")
    out = -np.expm1(-lam * np.pi * r**2)
    return float(out) if out.ndim == 0 else out


def sppp_intensity_for(g_value: float, r: float) -> float:
    """Invert :func:`g_sppp`: the intensity giving ``G(r) = g_value``."""
    if not 0 <= g_value < 1 or r <= 0:
        raise ValueError("need 0 <= G < 1 and r > 0")
    return -math.log1p(-g_value) / (math.pi * r**2)
