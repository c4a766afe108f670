"""Sampling and Monte-Carlo integration over B, S, boxes and pseudo-balls.

All clouds are deterministic functions of their seed.  Ball clouds use
scrambled Sobol points with radial-angular factorisation and a boundary
shell 1 - r < 0.1 sampled at twice its natural density; box and annulus
clouds sample the slice variable lambda = <z, xi> exactly (see
:func:`qpball.geometry.sample_lune`), so thin boxes need no rejection from
the whole ball.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad_vec

from . import geometry as geo
from ._qmc import sobol, sphere_from_uniform
from .errors import ContractError, IntegrationError
from .holo import HoloFunction, PowerSeries
from .report import EstimateReport, converged_flag

SHELL_RADIUS = 0.9
CHUNK = 1 << 16
MAX_EXCLUDED = 1e-3


@dataclass(frozen=True, eq=False)
class SampleCloud:
    points: np.ndarray
    weights: np.ndarray
    target_measure: str
    seed: int
    strata: np.ndarray

    @property
    def n(self) -> int:
        return self.points.shape[-1]

    def __len__(self):
        return self.points.shape[0]


def _ball_radii(count: int, n: int, u: np.ndarray):
    """Radii for a dv cloud with a doubled-density boundary shell."""
    shell = 1.0 - SHELL_RADIUS ** (2 * n)
    if count < 4:
        return u ** (1.0 / (2 * n)), np.full(count, 1.0 / count), np.zeros(count, dtype=int)
    n_shell = min(max(int(round(2 * shell * count)), 1), count - 1)
    n_in = count - n_shell
    inner_mass = SHELL_RADIUS ** (2 * n)
    r = np.empty(count)
    r[:n_in] = (u[:n_in] * inner_mass) ** (1.0 / (2 * n))
    r[n_in:] = (inner_mass + u[n_in:] * shell) ** (1.0 / (2 * n))
    w = np.empty(count)
    w[:n_in] = inner_mass / n_in
    w[n_in:] = shell / n_shell
    strata = np.zeros(count, dtype=int)
    strata[n_in:] = 1
    return r, w, strata


def sample_ball(n: int, count: int, seed: int, measure: str = "dv") -> SampleCloud:
    """Quasi-random cloud over B for dv, or dv with the dlambda weight folded in."""
    if count < 1:
        raise ContractError("sample_ball needs count >= 1")
    if measure not in ("dv", "dlambda"):
        raise ContractError(f"unknown ball measure {measure!r}")
    u = sobol(count, 2 * n + 1, seed)
    r, w, strata = _ball_radii(count, n, u[:, 0])
    pts = r[:, None] * sphere_from_uniform(u[:, 1:], n)
    if measure == "dlambda":
        w = w * (1.0 - r * r) ** (-n - 1.0)
    return SampleCloud(pts, w, measure, seed, strata)


def sample_sphere(n: int, count: int, seed: int) -> SampleCloud:
    u = sobol(count, 2 * n, seed)
    return SampleCloud(sphere_from_uniform(u, n), np.full(count, 1.0 / count), "dsigma", seed,
                       np.zeros(count, dtype=int))


def sample_box_canonical(delta: float, n: int, count: int, seed: int,
                         rho_lo: float = 0.0) -> tuple[np.ndarray, float]:
    """dv-uniform points of Q_delta(e_1) (minus Q_rho_lo(e_1)) and the region's volume."""
    rng = np.random.default_rng(seed)
    lam = geo.sample_lune(n - 1, rho_lo, delta, count, rng)
    pts = geo.lift_slice(lam, n, rng, solid=True)
    return pts, geo.annulus_volume(rho_lo, delta, n)


def sample_box(box: geo.CarlesonBox, count: int, seed: int) -> SampleCloud:
    """Points uniform w.r.t. dv restricted to the box, weights summing to v(box)."""
    pts, vol = sample_box_canonical(box.delta, box.n, count, seed)
    pts = pts @ geo.frame(box.center).T
    return SampleCloud(pts, np.full(count, vol / count), "box(dv)", seed, np.zeros(count, dtype=int))


def sample_pseudo_ball(ball: geo.PseudoHyperbolicBall, count: int, seed: int) -> SampleCloud:
    """dv-weighted cloud over E(a, r) obtained by pushing |u| < r through phi_a."""
    n = ball.center.shape[-1]
    u = sobol(count, 2 * n + 1, seed)
    r = ball.radius * u[:, 0] ** (1.0 / (2 * n))
    pts_u = r[:, None] * sphere_from_uniform(u[:, 1:], n)
    a = ball.center
    jac = ((1.0 - geo.norm2(a)) / np.abs(1.0 - geo.inner(pts_u, a)) ** 2) ** (n + 1)
    w = ball.radius ** (2 * n) * jac / count
    return SampleCloud(geo.mobius(a, pts_u), w, "pseudo-ball(dv)", seed, np.zeros(count, dtype=int))


def evaluate_chunked(fn, points: np.ndarray, workers: int = 1) -> np.ndarray:
    """Apply a vectorised ``fn`` in fixed-size chunks (order independent of workers)."""
    chunks = [points[i:i + CHUNK] for i in range(0, len(points), CHUNK)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(fn, chunks))
    else:
        parts = [fn(c) for c in chunks]
    return np.concatenate([np.asarray(p) for p in parts]) if parts else np.zeros(0)


def weighted_estimate(values: np.ndarray, cloud: SampleCloud, rel_tol: float = 0.05) -> EstimateReport:
    """Stratified estimate and standard error of sum(w * values)."""
    finite = np.isfinite(values)
    excluded = int(values.size - finite.sum())
    if excluded > MAX_EXCLUDED * values.size:
        raise IntegrationError(f"{excluded} of {values.size} sample points hit a pole")
    total = 0.0
    var = 0.0
    for h in np.unique(cloud.strata):
        sel = cloud.strata == h
        n_h = int(sel.sum())
        ok = sel & finite
        y = n_h * cloud.weights[ok] * values[ok]
        if y.size == 0:
            continue
        mean = np.sum(y) / y.size
        total = total + mean
        if y.size > 1:
            dev = y - mean
            var += float(np.sum(dev.real**2 + dev.imag**2)) / (y.size - 1) / y.size
    value = total if np.iscomplexobj(total) and np.imag(total) != 0 else float(np.real(total))
    stderr = float(np.sqrt(var))
    return EstimateReport(value, stderr, int(values.size), converged=converged_flag(abs(value), stderr, rel_tol),
                          excluded=excluded)


def integrate(fn, cloud: SampleCloud, workers: int = 1) -> EstimateReport:
    """Integrate a vectorised integrand against the cloud's measure."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        values = evaluate_chunked(fn, cloud.points, workers)
    values = np.broadcast_to(values, (len(cloud),)).astype(np.result_type(values, float), copy=False)
    return weighted_estimate(values, cloud)


def ray_integral(h: HoloFunction, z, epsrel: float = 1e-12) -> np.ndarray:
    """int_0^1 h(tz) dt/t; exact term-wise for polynomials, adaptive quadrature otherwise."""
    z = np.asarray(z, dtype=complex)
    if isinstance(h, PowerSeries):
        return h.ray_integral_series().eval(z)
    if abs(h.value_at_origin) > 1e-14:
        raise ContractError("ray integral diverges: h(0) != 0")
    batch = np.atleast_2d(z)

    def integrand(t):
        return h.eval(t * batch) / t

    val, _ = quad_vec(integrand, 0.0, 1.0, epsabs=0.0, epsrel=epsrel, norm="max", limit=2000)
    return val.reshape(z.shape[:-1])


def kernel_transform(h, s: float, z, cloud: SampleCloud) -> EstimateReport:
    """int_B h(w)(1-|w|^2)^s / |1-<z,w>|^(n+1+s) dv(w) over a dv cloud."""
    if s <= -1:
        raise ContractError("kernel transform needs s > -1")
    if cloud.target_measure != "dv":
        raise ContractError("kernel transform integrates against a dv cloud")
    z = np.asarray(z, dtype=complex)
    n = cloud.n

    def integrand(w):
        return (h(w) * (1.0 - geo.norm2(w)) ** s
                / np.abs(1.0 - geo.inner(w, z)) ** (n + 1 + s))

    return integrate(integrand, cloud)
