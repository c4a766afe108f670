"""Geometry of the unit ball B of C^n.

Points are complex numpy arrays whose last axis has length n; every
operation broadcasts over leading axes.  The Mobius automorphism uses the
projection form

    phi_a(z) = (a - P_a z - s_a Q_a z) / (1 - <z, a>),   s_a = sqrt(1 - |a|^2),

rewritten as ``(a - s z - <z,a> a / (1 + s)) / (1 - <z,a>)`` which needs no
division by |a|^2 and is therefore smooth at a = 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb, pi

import numpy as np
from scipy.integrate import quad

from .errors import DomainError, PoleError, ResolutionError

BALL_TOL = 1e-12


def as_point(coords, closed: bool = True) -> np.ndarray:
    """Validate and convert ``coords`` to a complex point (or batch of points).

    Accepts complex sequences or a list of ``[re, im]`` pairs.
    """
    z = np.asarray(coords)
    if z.dtype.kind not in "c" and z.ndim >= 2 and z.shape[-1] == 2 and z.dtype.kind in "fiu":
        z = z[..., 0] + 1j * z[..., 1]
    z = np.asarray(z, dtype=complex)
    if z.ndim == 0:
        raise DomainError("a point needs at least one coordinate")
    r2 = norm2(z)
    if closed:
        if np.any(r2 > (1.0 + BALL_TOL) ** 2):
            raise DomainError("point lies outside the closed unit ball")
    elif np.any(r2 >= 1.0):
        raise DomainError("point must lie in the open unit ball")
    return z


def as_unit(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=complex)
    if abs(np.sqrt(norm2(xi)) - 1.0) > BALL_TOL:
        raise DomainError(f"expected a unit vector, got |xi| = {np.sqrt(norm2(xi))!r}")
    return xi


def point_to_json(z) -> list:
    return [[float(c.real), float(c.imag)] for c in np.asarray(z, dtype=complex)]


def point_from_json(pairs) -> np.ndarray:
    return np.array([complex(re, im) for re, im in pairs])


def inner(z, w) -> np.ndarray:
    """Hermitian product <z, w> = sum z_j conj(w_j)."""
    return np.sum(np.asarray(z) * np.conj(w), axis=-1)


def norm2(z) -> np.ndarray:
    z = np.asarray(z)
    return np.sum(z.real**2 + z.imag**2, axis=-1)


def mobius(a, z) -> np.ndarray:
    """phi_a(z), broadcasting over leading axes of ``a`` and ``z``."""
    a = np.asarray(a, dtype=complex)
    z = np.asarray(z, dtype=complex)
    aa = norm2(a)
    if np.any(aa >= 1.0):
        raise DomainError("Mobius parameter must satisfy |a| < 1")
    s = np.sqrt(1.0 - aa)[..., None]
    za = inner(z, a)[..., None]
    denom = 1.0 - za
    if np.any(denom == 0):
        raise PoleError("1 - <z, a> vanishes")
    return (a - s * z - za * a / (1.0 + s)) / denom


def mobius_jacobian_at_origin(a) -> np.ndarray:
    """Complex Jacobian D phi_a(0) = -s (I - a a^* / (1 + s)), shape (n, n)."""
    a = np.asarray(a, dtype=complex)
    aa = float(norm2(a))
    if aa >= 1.0:
        raise DomainError("Mobius parameter must satisfy |a| < 1")
    s = np.sqrt(1.0 - aa)
    return -s * (np.eye(a.shape[-1]) - np.outer(a, np.conj(a)) / (1.0 + s))


def pseudo_hyperbolic_dist(z, w) -> np.ndarray:
    """|phi_z(w)| for points of the open ball."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if np.any(norm2(z) >= 1.0) or np.any(norm2(w) >= 1.0):
        raise DomainError("pseudo-hyperbolic distance needs |z|, |w| < 1")
    return np.sqrt(norm2(mobius(z, w)))


def noniso_gauge(z, xi) -> np.ndarray:
    """|1 - <z, xi>|; a box Q_delta(xi) is the set where this is below delta."""
    xi = as_unit(xi)
    return np.abs(1.0 - inner(z, xi))


@dataclass(frozen=True, eq=False)
class CarlesonBox:
    """Non-isotropic box Q_delta(xi) = {z in B : |1 - <z, xi>| < delta}.

    The same fields describe the sphere cap Q'_delta(xi) and the collar
    Qhat_delta(xi) = {z : z/|z| in Q'_delta(xi), 1 - delta < |z| < 1}.
    """

    center: np.ndarray
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_unit(self.center))
        if not self.delta > 0:
            raise DomainError("box radius delta must be positive")

    @property
    def n(self) -> int:
        return self.center.shape[-1]

    def contains(self, z) -> np.ndarray:
        return np.abs(1.0 - inner(z, self.center)) < self.delta

    def cap_contains(self, eta) -> np.ndarray:
        return self.contains(eta)

    def collar_contains(self, z) -> np.ndarray:
        r = np.sqrt(norm2(z))
        with np.errstate(invalid="ignore", divide="ignore"):
            eta = np.asarray(z) / np.where(r > 0, r, 1.0)[..., None]
        return (r > 1.0 - self.delta) & (r < 1.0) & self.contains(eta)

    def volume(self) -> float:
        return box_volume(self.delta, self.n)

    def to_json(self) -> dict:
        return {"center": point_to_json(self.center), "delta": float(self.delta)}

    def __repr__(self):
        return f"CarlesonBox(center={np.round(self.center, 6).tolist()}, delta={self.delta:g})"


@dataclass(frozen=True, eq=False)
class PseudoHyperbolicBall:
    """E(z, r) = {w : |phi_z(w)| < r}."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center, closed=False))
        if not 0.0 < self.radius < 1.0:
            raise DomainError("pseudo-hyperbolic radius must lie in (0, 1)")

    def contains(self, w) -> np.ndarray:
        return norm2(mobius(self.center, w)) < self.radius**2


# -- lune of the slice variable lambda = <z, xi> ---------------------------
#
# For z uniform in B the slice variable lambda = <z, xi> has density
# (n/pi)(1 - |lambda|^2)^(n-1) on the disc; for eta uniform on S it has
# density ((n-1)/pi)(1 - |lambda|^2)^(n-2).  Box membership depends on lambda
# only, so boxes, caps and the dyadic annuli between them reduce to the lune
# {lambda in D : rho_lo <= |1 - lambda| < rho_hi}.  Writing
# lambda = 1 - rho e^{i theta}, the disc condition is rho < 2 cos(theta).


def _lune_moment(k: int, rho_lo: float, rho_hi: float) -> float:
    """Integral of (1 - |lambda|^2)^k dA over the lune."""
    if rho_hi <= rho_lo:
        return 0.0
    coeffs = [comb(k, j) * (-1) ** j for j in range(k + 1)]

    def radial(theta):
        c = np.cos(theta)
        top = min(rho_hi, 2.0 * c)
        if top <= rho_lo:
            return 0.0
        total = 0.0
        for j, cj in enumerate(coeffs):
            e = k + j + 2
            total += cj * (2.0 * c) ** (k - j) * (top**e - rho_lo**e) / e
        return total

    kinks = [np.arccos(x / 2.0) for x in (rho_lo, rho_hi) if 0.0 < x < 2.0]
    points = sorted({t for x in kinks for t in (x, -x)}) or None
    val, _ = quad(radial, -pi / 2, pi / 2, points=points, epsabs=0.0, epsrel=1e-13, limit=400)
    return val


def box_volume(delta: float, n: int) -> float:
    """Exact normalized volume v(Q_delta(xi)) (independent of xi)."""
    return n / pi * _lune_moment(n - 1, 0.0, min(delta, 2.0))


def annulus_volume(rho_lo: float, rho_hi: float, n: int) -> float:
    return n / pi * _lune_moment(n - 1, rho_lo, min(rho_hi, 2.0))


def cap_measure(delta: float, n: int) -> float:
    """Exact sigma(Q'_delta(xi))."""
    return (n - 1) / pi * _lune_moment(n - 2, 0.0, min(delta, 2.0))


def sample_lune(k: int, rho_lo: float, rho_hi: float, count: int, rng) -> np.ndarray:
    """Draw lambda with density proportional to (1-|lambda|^2)^k on the lune."""
    rho_hi = min(rho_hi, 2.0)
    if rho_hi <= rho_lo:
        raise DomainError("empty lune")
    peak = 1.0 if rho_hi >= 1.0 else 1.0 - (1.0 - rho_hi) ** 2
    out = []
    have = drawn = 0
    while have < count:
        m = max(2 * (count - have), 1024)
        rho = np.sqrt(rho_lo**2 + rng.random(m) * (rho_hi**2 - rho_lo**2))
        theta = (rng.random(m) - 0.5) * pi
        c = np.cos(theta)
        weight = 2.0 * rho * c - rho * rho
        keep = weight > 0
        if k:
            keep &= rng.random(m) * peak**k < np.clip(weight, 0.0, None) ** k
        drawn += m
        lam = 1.0 - rho[keep] * np.exp(1j * theta[keep])
        out.append(lam)
        have += lam.size
        if drawn > 1e6 and have / drawn < 1e-4:
            raise ResolutionError("lune sampler acceptance below 1e-4")
    return np.concatenate(out)[:count]


def frame(xi) -> np.ndarray:
    """Unitary matrix U with U e_1 = xi."""
    xi = as_unit(xi)
    n = xi.shape[0]
    m = np.eye(n, dtype=complex)
    j = int(np.argmax(np.abs(xi)))
    m[:, j] = m[:, 0]
    m[:, 0] = xi
    q, _ = np.linalg.qr(m)
    q[:, 0] *= xi[j] / q[j, 0]
    return q


def _unit_sphere(count: int, dim: int, rng) -> np.ndarray:
    g = rng.standard_normal((count, 2 * dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g[:, :dim] + 1j * g[:, dim:]


def lift_slice(lam: np.ndarray, n: int, rng, solid: bool) -> np.ndarray:
    """Points with first coordinate ``lam``, the rest uniform in the fibre.

    The fibre is the sphere (``solid=False``) or ball (``solid=True``) of
    radius sqrt(1 - |lam|^2) in C^(n-1).
    """
    lam = np.asarray(lam, dtype=complex)
    rad = np.sqrt(np.clip(1.0 - np.abs(lam) ** 2, 0.0, None))
    if solid:
        rad = rad * rng.random(lam.size) ** (1.0 / (2 * n - 2))
    zeta = _unit_sphere(lam.size, n - 1, rng)
    return np.concatenate([lam[:, None], rad[:, None] * zeta], axis=1)


def sample_cap(xi, delta: float, count: int, rng) -> np.ndarray:
    """Points uniformly distributed (w.r.t. sigma) in the cap Q'_delta(xi)."""
    xi = as_unit(xi)
    n = xi.shape[0]
    lam = sample_lune(n - 2, 0.0, delta, count, rng)
    return lift_slice(lam, n, rng, solid=False) @ frame(xi).T


def cover_box(xi, delta: float, m: int, candidates: int | None = None, seed: int = 0) -> list[CarlesonBox]:
    """Cover the cap Q'_delta(xi) by caps Q'_{delta/m}(xi'_k).

    The centres form a greedy maximal delta/(2m)-separated net of a dense
    random candidate set of the cap, starting from ``xi`` itself.
    """
    xi = as_unit(xi)
    if m < 1:
        raise DomainError("cover_box needs m >= 1")
    if not 0.0 < delta <= 2.0:
        raise DomainError("cover_box needs 0 < delta <= 2")
    if m == 1:
        return [CarlesonBox(xi, delta)]
    n = xi.shape[0]
    if candidates is None:
        candidates = min(1500 * m**n, 400_000)
    rng = np.random.default_rng(seed)
    pts = np.concatenate([xi[None, :], sample_cap(xi, delta, candidates, rng)])
    sep = delta / (2 * m)
    uncovered = np.ones(len(pts), dtype=bool)
    centres = []
    i = 0
    while True:
        idx = np.flatnonzero(uncovered[i:])
        if idx.size == 0:
            break
        i += int(idx[0])
        c = pts[i]
        centres.append(c)
        uncovered &= np.abs(1.0 - pts @ np.conj(c)) >= sep
    return [CarlesonBox(c / np.sqrt(norm2(c)), delta / m) for c in centres]


def cover_check(xi, delta: float, boxes, count: int = 10_000, seed: int = 1) -> dict:
    """Sampled coverage of Q'_delta(xi) by ``boxes`` and the minimal centre separation."""
    pts = sample_cap(xi, delta, count, np.random.default_rng(seed))
    centres = np.array([b.center for b in boxes])
    radii = np.array([b.delta for b in boxes])
    covered = np.zeros(count, dtype=bool)
    for c, r in zip(centres, radii):
        covered |= np.abs(1.0 - pts @ np.conj(c)) < r
    if len(centres) > 1:
        gauge = np.abs(1.0 - centres @ np.conj(centres).T)
        np.fill_diagonal(gauge, np.inf)
        sep = float(gauge.min())
    else:
        sep = float("inf")
    inside = bool(np.all(np.abs(1.0 - centres @ np.conj(as_unit(xi))) < delta + 1e-12))
    return {"count": len(boxes), "coverage": float(covered.mean()), "min_separation": sep,
            "centres_in_cap": inside}


# -- Green-type function ----------------------------------------------------


def green_g(r: float, n: int, epsrel: float = 1e-12) -> float:
    """g(r) = (n+1)/(2n) * int_r^1 (1-t^2)^(n-1) t^(1-2n) dt by adaptive quadrature."""
    if not 0.0 < r <= 1.0:
        raise PoleError("g has a pole at r = 0") if r == 0 else DomainError("g needs 0 < r <= 1")
    if r == 1.0:
        return 0.0
    val, _ = quad(lambda t: (1 - t * t) ** (n - 1) * t ** (1 - 2 * n), r, 1.0,
                  epsabs=0.0, epsrel=epsrel, limit=200)
    return (n + 1) / (2 * n) * val


def green_g_closed(r, n: int) -> np.ndarray:
    """Vectorised closed form of g via the binomial expansion of (1-t^2)^(n-1)."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        total = np.zeros_like(r)
        for k in range(n):
            e = 2 * k + 2 - 2 * n
            ck = comb(n - 1, k) * (-1) ** k
            if e == 0:
                total = total - ck * np.log(r)
            else:
                total = total + ck * (1.0 - r**e) / e
    return (n + 1) / (2 * n) * total


POLE_RADIUS = 1e-12  # |phi_a(z)| below this is treated as z = a (rounding of phi_a(a))


def green_G(z, a) -> float:
    """G(z, a) = g(|phi_a(z)|)."""
    z = np.asarray(z, dtype=complex)
    r = float(np.sqrt(norm2(mobius(a, z))))
    if r < POLE_RADIUS:
        raise PoleError("G(z, a) has a pole at z = a")
    return green_g(min(r, 1.0), z.shape[-1])
