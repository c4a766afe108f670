"""Estimators for the Q_p seminorm, Bloch norm and tent-space norm.

The two integral forms are evaluated after the Mobius substitution z = phi_a(u),
under which dlambda is invariant and the weight attached to the parameter a
moves to the origin:

    radial form     int |Rf(z)|^2 (1-|z|^2)^2 (1-|u|^2)^(np-n-1) dv(u)
    invariant form  int |grad~ f(z)|^2 g(|u|)^p (1-|u|^2)^(-n-1) dv(u)

One dv cloud in u is shared by every a of the sup search.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from . import geometry as geo
from ._qmc import sobol, sphere_from_uniform
from .carleson import BoxSearch, MeasureDensity, box_sup, direction_net
from .errors import DomainError
from .holo import HoloFunction, invariant_gradient
from .integrate import SampleCloud, sample_ball, weighted_estimate
from .report import converged_flag, to_jsonable


def p_range(n: int) -> tuple[float, float]:
    """Open interval of p for which Q_p on the ball of C^n is non-trivial."""
    return (n - 1) / n, n / (n - 1)


def check_p(n: int, p: float, name: str = "p") -> None:
    lo, hi = p_range(n)
    if not lo < p < hi:
        raise DomainError(
            f"{name} = {p:g} outside ({lo:g}, {hi:g}): Q_{name} on the ball of C^{n} "
            "contains only the constant functions there"
        )


@dataclass(frozen=True)
class QpParams:
    n: int
    p: float
    samples: int = 200_000
    seed: int = 7
    radii: tuple = (0.0, 0.3, 0.6, 0.8, 0.9, 0.95)
    net_m: int = 4
    refine_rounds: int = 2
    refine_step: float = 0.4
    max_climb: int = 8
    a_max: float = 0.999
    exclusion: float = 0.05
    exclusion_tol: float = 0.25
    rel_tol: float = 0.05
    box: BoxSearch = field(default_factory=lambda: BoxSearch(
        deltas=tuple(np.geomspace(2.0, 0.005, 12)), net_m=4, samples=20000))
    workers: int = 1

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("the ball dimension n must be at least 2")
        check_p(self.n, self.p)


@dataclass
class NormReport:
    seminorm: float
    full_norm: float
    stderr: float
    converged: bool
    form: str
    achieving_a: np.ndarray | None = None
    achieving_box: geo.CarlesonBox | None = None
    profile: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "form": self.form,
            "seminorm": self.seminorm,
            "full_norm": self.full_norm,
            "stderr": self.stderr,
            "converged": self.converged,
            "achieving_a": to_jsonable(self.achieving_a),
            "achieving_box": to_jsonable(self.achieving_box),
            "profile": to_jsonable(self.profile),
        }
        if self.extra:
            out["extra"] = to_jsonable(self.extra)
        return out


@lru_cache(maxsize=8)
def _u_cloud(n: int, samples: int, seed: int) -> SampleCloud:
    return sample_ball(n, samples, seed, "dv")


@dataclass
class _Cell:
    a: np.ndarray
    value: float
    stderr: float

    @property
    def radius(self) -> float:
        return float(np.sqrt(geo.norm2(self.a)))


def sup_over_a(cell_fn, params: QpParams) -> tuple[_Cell, list[_Cell]]:
    """Coarse (|a| x direction-net) grid, then pseudo-hyperbolic hill climbing.

    Each refinement round climbs with moves a -> phi_a(h e) for the 4n unit
    directions e in C^n, then halves h.  Ties go to the smaller |a|.
    """
    n = params.n
    net = direction_net(n, params.net_m)
    grid = []
    for r in params.radii:
        if r == 0.0:
            grid.append(np.zeros(n, dtype=complex))
        else:
            grid.extend(r * xi for xi in net)
    cells: list[_Cell] = []

    def run(points):
        if params.workers > 1 and len(points) > 1:
            with ThreadPoolExecutor(params.workers) as ex:
                out = list(ex.map(cell_fn, points))
        else:
            out = [cell_fn(a) for a in points]
        res = [_Cell(a, v, s) for a, (v, s) in zip(points, out)]
        cells.extend(res)
        return res

    def better(c, best):
        return c.value > best.value or (c.value == best.value and c.radius < best.radius)

    best = None
    for c in run(grid):
        if best is None or better(c, best):
            best = c

    moves = []
    for k in range(n):
        for ph in (1, -1, 1j, -1j):
            e = np.zeros(n, dtype=complex)
            e[k] = ph
            moves.append(e)
    h = params.refine_step
    for _ in range(params.refine_rounds):
        for _ in range(params.max_climb):
            cand = [geo.mobius(best.a, h * e) for e in moves]
            cand = [a for a in cand if geo.norm2(a) <= params.a_max**2]
            improved = False
            for c in run(cand):
                if better(c, best):
                    best, improved = c, True
            if not improved:
                break
        h /= 2
    return best, cells


def _finish(best: _Cell, cells, f: HoloFunction, form: str, params: QpParams, extra=None) -> NormReport:
    val = max(best.value, 0.0)
    semi = float(np.sqrt(val))
    se = 0.5 * best.stderr / semi if semi > 0 else float(np.sqrt(best.stderr))
    profile = [{"a": c.a, "value": c.value, "stderr": c.stderr} for c in cells]
    conv = converged_flag(val, best.stderr, params.rel_tol)
    if extra and extra.pop("_unconverged", False):
        conv = False
    return NormReport(semi, abs(f.value_at_origin) + semi, se, conv, form,
                      achieving_a=best.a, profile=profile, extra=extra or {})


def _radial_integrand(f: HoloFunction, n: int, p: float):
    """(u-cloud, a) -> integrand values of the radial form after substitution."""
    def values(cloud: SampleCloud, a):
        u = cloud.points
        one_u = 1.0 - geo.norm2(u)
        z = geo.mobius(a, u)
        one_z = (1.0 - geo.norm2(a)) * one_u / np.abs(1.0 - geo.inner(u, a)) ** 2
        rf = f.radial(z)
        return (rf.real**2 + rf.imag**2) * one_z**2 * one_u ** (n * p - n - 1.0)
    return values


def radial_form_integral(f: HoloFunction, a, params: QpParams):
    """int |Rf|^2 (1-|z|^2)^2 (1-|phi_a(z)|^2)^(np) dlambda as an EstimateReport."""
    cloud = _u_cloud(params.n, params.samples, params.seed)
    vals = _radial_integrand(f, params.n, params.p)(cloud, np.asarray(a, dtype=complex))
    return weighted_estimate(vals, cloud, params.rel_tol)


def qp_radial(f: HoloFunction, params: QpParams) -> NormReport:
    """Q_p seminorm from the radial-derivative form, sup over the a-grid."""
    _check_dim(f, params)
    cloud = _u_cloud(params.n, params.samples, params.seed)
    integrand = _radial_integrand(f, params.n, params.p)

    def cell(a):
        est = weighted_estimate(integrand(cloud, a), cloud, params.rel_tol)
        return est.value, est.stderr

    best, cells = sup_over_a(cell, params)
    return _finish(best, cells, f, "radial", params)


@lru_cache(maxsize=64)
def exclusion_weight(n: int, p: float, eps: float) -> float:
    """int_{|u|<eps} g(|u|)^p (1-|u|^2)^(-n-1) dv(u) (radial quadrature)."""
    def integrand(r):
        return 2 * n * geo.green_g_closed(r, n) ** p * (1 - r * r) ** (-n - 1.0) * r ** (2 * n - 1)
    val, _ = quad(integrand, 0.0, eps, epsabs=0.0, epsrel=1e-10, limit=200)
    return val


def qp_invariant(f: HoloFunction, params: QpParams) -> NormReport:
    """Q_p seminorm from the invariant-gradient / Green-function form.

    The pole of G at z = a becomes the pole of g at u = 0; the ball
    |u| < exclusion is removed from the cloud and replaced by the first-order
    correction |grad~ f(a)|^2 * exclusion_weight.  A correction larger than
    ``exclusion_tol`` of the value marks the estimate unconverged.
    """
    _check_dim(f, params)
    n, p = params.n, params.p
    cloud = _u_cloud(n, params.samples, params.seed)
    u = cloud.points
    r = np.sqrt(geo.norm2(u))
    inside = r < params.exclusion
    base = np.where(inside, 0.0, geo.green_g_closed(np.where(inside, 1.0, r), n) ** p
                    * (1.0 - r * r) ** (-n - 1.0))
    kexcl = exclusion_weight(n, p, params.exclusion)
    corrections = {}

    def cell(a):
        z = geo.mobius(a, u)
        ig = invariant_gradient(f, z)
        vals = np.sum(ig.real**2 + ig.imag**2, axis=-1) * base
        est = weighted_estimate(vals, cloud, params.rel_tol)
        ga = invariant_gradient(f, np.asarray(a, dtype=complex))
        corr = float(np.sum(np.abs(ga) ** 2)) * kexcl
        corrections[tuple(np.round(a, 12))] = corr
        return est.value + corr, est.stderr

    best, cells = sup_over_a(cell, params)
    corr = corrections[tuple(np.round(best.a, 12))]
    extra = {"excluded_mass": corr, "exclusion_radius": params.exclusion}
    if best.value > 0 and corr > params.exclusion_tol * best.value:
        extra["_unconverged"] = True
    return _finish(best, cells, f, "invariant", params, extra)


def rf_measure(f: HoloFunction, p: float) -> MeasureDensity:
    """|Rf(z)|^2 (1-|z|^2)^(n(p-1)+1) dv, the measure behind the box form."""
    n = f.n
    expo = n * (p - 1) + 1

    def density(z):
        rf = f.radial(z)
        return (rf.real**2 + rf.imag**2) * (1.0 - geo.norm2(z)) ** expo

    return MeasureDensity(density, n, "rf")


def qp_box(f: HoloFunction, params: QpParams) -> NormReport:
    """sqrt of sup_boxes delta^(-np) int_{Q_delta(xi)} |Rf|^2 (1-|z|^2)^(n(p-1)+1) dv."""
    _check_dim(f, params)
    search = replace(params.box, workers=params.workers)
    best, profile, cells = box_sup(rf_measure(f, params.p), params.n * params.p, False, search)
    val = max(best.ratio, 0.0)
    semi = float(np.sqrt(val))
    se = 0.5 * best.stderr / semi if semi > 0 else 0.0
    box = geo.CarlesonBox(best.xi, best.delta) if val > 0 else None
    return NormReport(semi, abs(f.value_at_origin) + semi, se, converged_flag(val, best.stderr, params.rel_tol),
                      "box", achieving_box=box,
                      profile=[{"delta": d, "value": v, "stderr": s, "xi": x} for d, v, s, x in profile])


def bloch_norm(f: HoloFunction, samples: int = 1 << 15, seed: int = 0) -> float:
    """|f(0)| + sampled sup of |grad f(z)| (1-|z|^2)."""
    u = sobol(samples, 2 * f.n + 1, seed)
    half = samples // 2
    r = np.concatenate([u[:half, 0], 1.0 - 10.0 ** (-6.0 * u[half:, 0])])
    pts = r[:, None] * sphere_from_uniform(u[:, 1:], f.n)
    pts = np.concatenate([np.zeros((1, f.n), dtype=complex), pts])
    grad = f.gradient(pts)
    vals = np.sqrt(np.sum(np.abs(grad) ** 2, axis=-1)) * (1.0 - geo.norm2(pts))
    return abs(f.value_at_origin) + float(np.max(vals))


def tent_norm(f: HoloFunction, mu: MeasureDensity, q: float, search: BoxSearch = BoxSearch(net_m=4)) -> NormReport:
    """T_q^infty(mu) norm: sqrt of sup delta^(-nq) int_{Q_delta(xi)} |f|^2 d mu."""
    def density(z):
        v = f.eval(z)
        return (v.real**2 + v.imag**2) * mu(z)

    best, profile, _ = box_sup(MeasureDensity(density, mu.n, "tent"), mu.n * q, False, search)
    val = max(best.ratio, 0.0)
    semi = float(np.sqrt(val))
    box = geo.CarlesonBox(best.xi, best.delta) if val > 0 else None
    return NormReport(semi, semi, 0.5 * best.stderr / semi if semi > 0 else 0.0,
                      converged_flag(val, best.stderr), "tent", achieving_box=box,
                      profile=[{"delta": d, "value": v, "stderr": s} for d, v, s, _ in profile])


def _check_dim(f: HoloFunction, params: QpParams):
    if f.n != params.n:
        raise DomainError(f"function dimension {f.n} does not match params.n = {params.n}")
