"""Uplink coverage of a cellular user under D2D interference.

The cellular user sits at distance ``r_c`` from the small-cell base station
(density ``2 r_c / R^2`` on ``[R0, R]``) and transmits with power ``p_c``.
Interfering D2D transmitters form a Poisson field of density
``lambda_I = tdd_factor * psi0_density * retention`` and all links see
Rayleigh fading. The PGFL of that field gives

    p_cov = int exp(-2 pi^2 lambda_I r_c^2 / (alpha sin(2 pi / alpha)) (gamma/p_c)^(2/alpha) p_i^(2/alpha)) 2 r_c / R^2 dr_c

which collapses to ``(1 - e^-A) / A`` for ``alpha = 4`` and ``R0 = 0``.

How the EC quantities turn into an interferer density is configurable:

``normalization``
    ``"per_area"`` (default) divides the expected cluster count ``psi0`` of
    the domain by its area ``L_2`` to get clusters per m^2; ``"absolute"``
    uses ``psi0`` as is.
``retention``
    ``"extent_cdf"`` (default) keeps the clusters whose volume is below the
    D2D extent ``r``, ``1 - exp(-beta r)``; ``"extent"`` keeps
    ``p(v >= r) = exp(-beta r)``; ``"g_pcp"`` keeps ``G(r)`` over the domain.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from d2dpcp._rng import child_sequences, make_rng
from d2dpcp.cluster_inference import ClumpingParams, expected_cluster_volume, extent_probability, g_pcp
from d2dpcp.ec_geometry import DomainGeometry, expected_ec, validity_floor

NORMALIZATIONS = ("per_area", "absolute")
RETENTIONS = ("extent_cdf", "extent", "g_pcp")
METHODS = ("integral", "closed_form_alpha4", "monte_carlo")
QUAD_TOL = 1e-9
MC_CHUNK = 5000
MC_POINTS_PER_CHUNK = 4_000_000


class QuadratureError(RuntimeError):
    pass


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(w):
    return 10.0 * np.log10(np.asarray(w, dtype=float)) + 30.0


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class NetworkConfig:
    R: float = 100.0
    R0: float = 0.1
    alpha: float = 4.0
    p_c: float = 0.1
    p_i: float = 1e-3
    gamma: float = 1.0
    u: float = 31.0
    r: float = 4.0
    k: int = 2
    l: float = 50.0
    metric_scaling: str = "none"
    normalization: str = "per_area"
    retention: str = "extent_cdf"
    tdd_factor: int = 1
    v: int = 1
    domain: DomainGeometry | None = None
    density: float | None = None

    def __post_init__(self):
        if not (0 <= self.R0 < self.R):
            raise ValueError(f"need 0 <= R0 < R, got R0={self.R0}, R={self.R}")
        if not self.alpha > 2:
            raise ValueError(f"alpha must exceed 2, got {self.alpha}")
        for name in ("p_c", "p_i", "gamma"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.r < 0:
            raise ValueError("r must be non-negative")
        if not self.l > 0:
            raise ValueError("l must be positive")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
        if self.retention not in RETENTIONS:
            raise ValueError(f"retention must be one of {RETENTIONS}")
        if self.tdd_factor not in (1, 2):
            raise ValueError("tdd_factor must be 1 or 2")
        if self.density is not None and self.density < 0:
            raise ValueError("density must be non-negative")
        if self.density is None and self.u < validity_floor(self.k):
            raise ValueError(f"u={self.u} is below the validity floor {validity_floor(self.k):g}")

    @property
    def cell_domain(self) -> DomainGeometry:
        """Domain used for ``psi0``: the ``2R x 2R`` square around the cell unless given."""
        return self.domain if self.domain is not None else DomainGeometry.rectangle(2 * self.R, 2 * self.R)

    def replace(self, **kw) -> "NetworkConfig":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(kw)
        return NetworkConfig(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        dom = self.cell_domain
        d["domain"] = {"shape": dom.shape, "size": list(dom.size)}
        return d


@dataclass(frozen=True)
class CoverageResult:
    p_cov: float
    method: str
    stderr: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not 0.0 <= self.p_cov <= 1.0:
            raise ValueError(f"p_cov must be a probability, got {self.p_cov}")


def _clumping(cfg: NetworkConfig) -> ClumpingParams:
    return ClumpingParams(cfg.u, cfg.k, 2, cfg.cell_domain, cfg.v, cfg.metric_scaling, cfg.l)


def interferer_density(cfg: NetworkConfig) -> tuple[float, float, float]:
    """``(psi0, retention, density)`` with ``density`` in interferers per m^2.

    ``psi0`` is already normalized (per m^2 under ``"per_area"``). A config
    with an explicit ``density`` bypasses the EC pipeline and reports
    ``psi0 = density``, ``retention = 1``.
    """
    if cfg.density is not None:
        return float(cfg.density), 1.0, float(cfg.density)
    dom = cfg.cell_domain
    psi0 = float(expected_ec(cfg.u, cfg.k, dom, cfg.metric_scaling, cfg.l))
    if psi0 <= 0:
        # exp(-u/2) underflow at extreme thresholds: nothing survives
        return 0.0, 0.0, 0.0
    params = _clumping(cfg)
    if cfg.retention == "g_pcp":
        ret = float(g_pcp(cfg.r, params))
    elif cfg.retention == "extent":
        ret = float(extent_probability(cfg.r, params))
    else:
        # 1 - exp(-beta r) with beta = 1 / eta in the plane
        ret = -math.expm1(-cfg.r / expected_cluster_volume(params))
    if cfg.normalization == "per_area":
        psi0 = psi0 / dom.volume
    return psi0, ret, cfg.tdd_factor * psi0 * ret


def path_integral_constant(alpha: float) -> float:
    """``int_0^inf u / (1 + u^alpha) du = pi / (alpha sin(2 pi / alpha))``."""
    if not alpha > 2:
        raise ValueError(f"integral diverges for alpha <= 2, got {alpha}")
    return math.pi / (alpha * math.sin(2 * math.pi / alpha))


def path_integral_quadrature(alpha: float, tol: float = 1e-12) -> float:
    """Same constant by adaptive quadrature, split at 1 for the slowly decaying tail."""
    if not alpha > 2:
        raise ValueError(f"integral diverges for alpha <= 2, got {alpha}")
    f = lambda t: t / (1.0 + t**alpha)
    a, _ = integrate.quad(f, 0.0, 1.0, epsabs=tol, epsrel=tol, limit=200)
    # t -> 1/s maps the tail onto (0, 1]: s^(alpha-3) / (s^alpha + 1)
    b, _ = integrate.quad(lambda s: s ** (alpha - 3) / (s**alpha + 1.0), 0.0, 1.0, epsabs=tol, epsrel=tol, limit=200)
    return a + b


def _exponent_coeff(cfg: NetworkConfig, density: float) -> float:
    """``c`` in ``exp(-c r_c^2)``."""
    a = cfg.alpha
    return (
        2.0 * math.pi * density * path_integral_constant(a)
        * (cfg.gamma / cfg.p_c) ** (2 / a) * cfg.p_i ** (2 / a)
    )


def coverage_integral(cfg: NetworkConfig, tol: float = QUAD_TOL) -> CoverageResult:
    psi0, ret, dens = interferer_density(cfg)
    c = _exponent_coeff(cfg, dens)
    R, R0 = cfg.R, cfg.R0
    val, err = integrate.quad(
        lambda rc: math.exp(-c * rc * rc) * 2.0 * rc / R**2, R0, R, epsabs=tol, epsrel=tol, limit=200
    )
    if not err <= max(tol, 1e-6 * abs(val)):
        raise QuadratureError(f"coverage quadrature did not converge (error estimate {err:g})")
    return CoverageResult(min(max(val, 0.0), 1.0), "integral", None, {"density": dens, "psi0": psi0, "retention": ret})


def coverage_closed_alpha4(cfg: NetworkConfig) -> CoverageResult:
    """``(1 - e^-A) / A``, ``A = (pi^2 R^2 lambda_I / 2) sqrt(gamma p_i / p_c)``; ignores ``R0``."""
    if cfg.alpha != 4:
        raise ValueError("closed form needs alpha = 4")
    psi0, ret, dens = interferer_density(cfg)
    A = 0.5 * math.pi**2 * cfg.R**2 * dens * math.sqrt(cfg.gamma * cfg.p_i / cfg.p_c)
    p = 1.0 if A == 0 else -math.expm1(-A) / A
    return CoverageResult(p, "closed_form_alpha4", None, {"density": dens, "psi0": psi0, "retention": ret, "A": A})


def _mc_chunk(rng: np.random.Generator, n: int, cfg: NetworkConfig, dens: float, disk: float) -> int:
    R, R0, a = cfg.R, cfg.R0, cfg.alpha
    rc = np.sqrt(R0**2 + rng.random(n) * (R**2 - R0**2))
    signal = cfg.p_c * rng.exponential(1.0, n) * rc**-a
    counts = rng.poisson(dens * math.pi * disk**2, n)
    m = int(counts.sum())
    ri = disk * np.sqrt(rng.random(m))
    fades = rng.exponential(1.0, m)
    owner = np.repeat(np.arange(n), counts)
    with np.errstate(divide="ignore"):
        contrib = cfg.p_i * fades * ri**-a
    interference = np.bincount(owner, weights=contrib, minlength=n)
    # gamma * I <= S written without dividing so that I = 0 always succeeds
    return int(np.count_nonzero(cfg.gamma * interference <= signal))


def simulate_coverage_mc(cfg: NetworkConfig, n_trials: int, seed, disk_factor: float = 10.0) -> CoverageResult:
    """Monte Carlo SIR coverage.

    Interferers are a Poisson field on the disk of radius ``disk_factor * R``
    around the base station. Trials run in fixed chunks, each with its own
    child seed, so the estimate depends only on ``(cfg, n_trials, seed)``.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if not disk_factor >= 1:
        raise ValueError("disk_factor must be >= 1")
    psi0, ret, dens = interferer_density(cfg)
    disk = disk_factor * cfg.R
    mean_count = dens * math.pi * disk**2
    # chunk size depends only on the config, which keeps the result seed-deterministic
    chunk = max(1, min(MC_CHUNK, int(MC_POINTS_PER_CHUNK / max(mean_count, 1.0))))
    n_chunks = -(-n_trials // chunk)
    hits = 0
    for i, ss in enumerate(child_sequences(seed, n_chunks)):
        n = min(chunk, n_trials - i * chunk)
        hits += _mc_chunk(make_rng(ss), n, cfg, dens, disk)
    p = hits / n_trials
    se = math.sqrt(p * (1 - p) / n_trials)
    meta = {"density": dens, "psi0": psi0, "retention": ret, "disk_radius": disk, "n_trials": n_trials,
            "mean_interferers": mean_count}
    return CoverageResult(p, "monte_carlo", se, meta)


def coverage(cfg: NetworkConfig, method: str = "integral", n_trials: int = 100_000, seed=0) -> CoverageResult:
    if method == "integral":
        return coverage_integral(cfg)
    if method == "closed_form_alpha4":
        return coverage_closed_alpha4(cfg)
    if method == "monte_carlo":
        return simulate_coverage_mc(cfg, n_trials, seed)
    raise ValueError(f"method must be one of {METHODS}")
