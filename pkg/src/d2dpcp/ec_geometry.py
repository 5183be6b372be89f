"""Lipschitz-Killing curvatures, chi-square EC densities and expected Euler characteristic.

The expected EC of the excursion set ``{chi2_k >= u}`` over a domain follows
the Gaussian kinematic formula ``psi0 = sum_j rho_j(u) L_j``. Curvatures are
in physical units unless a domain is rescaled to the metric induced by the
component fields (``metric_scaling="spectral"``), which multiplies ``L_j`` by
``lambda2^(j/2)`` with ``lambda2 = 1/l^2`` for the squared-exponential kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc, gammaln

from d2dpcp.random_field import FieldRealization

METRIC_SCALINGS = ("none", "spectral")


def unit_ball_volume(n: int) -> float:
    """Volume of the unit ball in R^n, ``pi^(n/2) / Gamma(n/2 + 1)``."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def _flag_factorial(n: int) -> float:
    return math.factorial(n) * unit_ball_volume(n)


def flag_coefficient(a: int, b: int) -> float:
    """``[a]! / ([b]! [a-b]!)`` with ``[n]! = n! * omega_n``."""
    if int(a) != a or int(b) != b or a < 0 or b < 0 or b > a:
        raise ValueError(f"need integers 0 <= b <= a, got a={a}, b={b}")
    a, b = int(a), int(b)
    return _flag_factorial(a) / (_flag_factorial(b) * _flag_factorial(a - b))


def lk_ball(N: int, radius: float) -> list[float]:
    """Curvatures ``L_j = binom(N, j) R^j omega_N / omega_(N-j)`` of the N-ball."""
    if N not in (1, 2, 3):
        raise ValueError(f"ball curvatures implemented for N in (1, 2, 3), got {N}")
    if radius < 0:
        raise ValueError("radius must be non-negative")
    wN = unit_ball_volume(N)
    return [math.comb(N, j) * radius**j * wN / unit_ball_volume(N - j) for j in range(N + 1)]


def lk_disk_gamma_form(radius: float) -> list[float]:
    """Planar-disk curvatures written through Gamma functions; equals ``lk_ball(2, radius)``."""
    return [
        1.0,
        2 * math.sqrt(math.pi) * radius * math.gamma(1.5) / math.gamma(2.0),
        math.pi * radius**2 * math.gamma(1.0) / math.gamma(2.0),
    ]


def lk_rectangle(w: float, h: float) -> list[float]:
    """``[1, w + h, w h]``: EC, half the perimeter, area."""
    if w < 0 or h < 0 or (w == 0 and h == 0):
        raise ValueError("rectangle sides must be non-negative and not both zero")
    return [1.0, float(w + h), float(w * h)]


@dataclass(frozen=True)
class DomainGeometry:
    shape: str
    size: tuple
    lk: tuple

    @classmethod
    def ball(cls, N: int, radius: float) -> "DomainGeometry":
        return cls("ball", (int(N), float(radius)), tuple(lk_ball(N, radius)))

    @classmethod
    def rectangle(cls, w: float, h: float) -> "DomainGeometry":
        return cls("rectangle", (float(w), float(h)), tuple(lk_rectangle(w, h)))

    @classmethod
    def point(cls, N: int = 2) -> "DomainGeometry":
        return cls("point", (int(N),), tuple([1.0] + [0.0] * N))

    @property
    def N(self) -> int:
        return len(self.lk) - 1

    @property
    def volume(self) -> float:
        return self.lk[-1]

    def scaled(self, length_scale: float) -> "DomainGeometry":
        """Curvatures in the metric induced by fields with ``lambda2 = 1/length_scale^2``."""
        if not length_scale > 0:
            raise ValueError("length scale must be positive")
        lk = tuple(L / length_scale**j for j, L in enumerate(self.lk))
        return DomainGeometry(self.shape, self.size, lk)


def _poly_coefficients(j: int, k: int) -> np.ndarray:
    """Coefficients (by ascending power of u) of the double sum in rho_j."""
    coef = np.zeros(j)
    for l in range((j - 1) // 2 + 1):
        for m in range(j - 1 - 2 * l + 1):
            if k < j - m - 2 * l:
                continue
            c = math.comb(k - 1, j - 1 - m - 2 * l)
            sign = -1 if (j - 1 + m + l) % 2 else 1
            coef[m + l] += sign * c * math.factorial(j - 1) / (math.factorial(m) * math.factorial(l) * 2**l)
    return coef


def _check_jk(j, k):
    if int(j) != j or j < 1:
        raise ValueError(f"j must be an integer >= 1, got {j}")
    if int(k) != k or k < 1:
        raise ValueError(f"k must be an integer >= 1, got {k}")


def ec_density_chi2(j: int, u, k: int):
    """EC density ``rho_j(u)``, ``j >= 1``, of a chi-square field with ``k`` df.

    Evaluated term by term so that ``u = 0`` gives the finite limit whenever
    the combined power of ``u`` is non-negative.
    """
    _check_jk(j, k)
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("threshold must be non-negative")
    log_pref = -0.5 * j * math.log(2 * math.pi) - gammaln(k / 2) - 0.5 * (k - 2) * math.log(2)
    coef = _poly_coefficients(j, k)
    total = np.zeros_like(u)
    with np.errstate(divide="ignore", invalid="ignore"):
        for p, c in enumerate(coef):
            if c == 0:
                continue
            power = 0.5 * (k - j) + p
            total = total + c * np.power(u, power)
    out = math.exp(log_pref) * np.exp(-0.5 * u) * total
    return out if out.ndim else float(out)


def ec_density_chi2_j0(u, k: int):
    """``rho_0(u) = P(chi2_k >= u)``."""
    if int(k) != k or k < 1:
        raise ValueError(f"k must be an integer >= 1, got {k}")
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("threshold must be non-negative")
    out = gammaincc(0.5 * k, 0.5 * u)
    return out if out.ndim else float(out)


def ec_densities(u, k: int, N: int) -> np.ndarray:
    """Stack ``[rho_0(u), ..., rho_N(u)]``."""
    return np.array([ec_density_chi2_j0(u, k)] + [ec_density_chi2(j, u, k) for j in range(1, N + 1)])


def validity_floor(k: int, N: int = 2) -> float:
    """Largest real root of the polynomial parts of ``rho_1 .. rho_N`` (0 if none).

    Above this level every EC density is non-negative, so expected EC and the
    quantities built on it (cluster volume, clumping G) are well defined.
    """
    floor = 0.0
    for j in range(1, N + 1):
        coef = _poly_coefficients(j, k)
        nz = np.flatnonzero(coef)
        if nz.size == 0 or nz[-1] == 0:
            continue
        roots = np.roots(coef[: nz[-1] + 1][::-1])
        real = roots[np.abs(roots.imag) < 1e-9].real
        if real.size:
            floor = max(floor, float(real.max()))
    return floor


def resolve_domain(domain: DomainGeometry, metric_scaling: str = "none", length_scale=None) -> DomainGeometry:
    if metric_scaling not in METRIC_SCALINGS:
        raise ValueError(f"metric_scaling must be one of {METRIC_SCALINGS}")
    if metric_scaling == "spectral":
        if length_scale is None:
            raise ValueError("spectral metric scaling needs the kernel length scale")
        return domain.scaled(length_scale)
    return domain


def expected_ec(u, k: int, domain: DomainGeometry, metric_scaling: str = "none", length_scale=None):
    """``psi0 = sum_j rho_j(u) L_j(domain)``."""
    dom = resolve_domain(domain, metric_scaling, length_scale)
    rho = ec_densities(u, k, dom.N)
    lk = np.asarray(dom.lk).reshape((-1,) + (1,) * (rho.ndim - 1))
    out = np.sum(rho * lk, axis=0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ExcursionSummary:
    u: float
    k: int
    domain: DomainGeometry
    rho: tuple
    psi0: float
    eta: float
    beta: float
    metric_scaling: str = "none"

    def as_row(self) -> dict:
        row = {"u": self.u}
        row.update({f"rho{j}": r for j, r in enumerate(self.rho)})
        row.update({"psi0": self.psi0, "eta": self.eta, "beta": self.beta})
        return row


def empirical_ec(field, u):
    """Euler characteristic of ``{cell: value >= u}`` as a union of closed squares.

    ``chi = V - E + F`` over the vertices, edges and faces touched by occupied
    cells. Accepts a :class:`FieldRealization`, a 2-D array (returns an int) or
    a stack of 2-D arrays (returns one int per slice).
    """
    vals = field.values if isinstance(field, FieldRealization) else np.asarray(field)
    single = vals.ndim == 2
    occ = (vals >= u)[None] if single else vals >= u
    b = np.pad(occ, ((0, 0), (1, 1), (1, 1)))
    faces = occ.sum(axis=(1, 2))
    edges_h = (b[:, :-1, 1:-1] | b[:, 1:, 1:-1]).sum(axis=(1, 2))
    edges_v = (b[:, 1:-1, :-1] | b[:, 1:-1, 1:]).sum(axis=(1, 2))
    verts = (b[:, :-1, :-1] | b[:, :-1, 1:] | b[:, 1:, :-1] | b[:, 1:, 1:]).sum(axis=(1, 2))
    chi = (verts - edges_h - edges_v + faces).astype(int)
    return int(chi[0]) if single else chi
