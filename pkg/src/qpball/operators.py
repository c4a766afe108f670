"""Riemann-Stieltjes operators T_g, L_g and the multiplier M_g.

    T_g f(z) = int_0^1 f(tz) Rg(tz) dt/t      R(T_g f) = f Rg
    L_g f(z) = int_0^1 g(tz) Rf(tz) dt/t      R(L_g f) = g Rf
    M_g f    = g f = g(0) f(0) + T_g f + L_g f

Polynomial inputs go through exact coefficient algebra.  Anything else
becomes a :class:`RayIntegral`, evaluated by quadrature along the ray but
with the radial derivative given exactly by the identities above, so the
Q_q norm of an operator image never differentiates a quadrature result.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry as geo
from .carleson import BoxSearch, lcm_constant, mu_qg
from .errors import ContractError, DomainError
from .holo import HoloFunction, NormalizedSquaredLog, PowerSeries, Product, hinf_norm_estimate, random_polynomial
from .integrate import ray_integral, sample_box_canonical
from .qpnorm import QpParams, check_p, qp_radial
from .report import to_jsonable

KINDS = ("Tg", "Lg", "Mg")

BLOWUP_FACTOR = 4.0
HINF_CAP = 4.0
DEFAULT_DELTAS = (0.4, 0.2, 0.1, 0.05, 0.025)


@dataclass(frozen=True)
class ProbePolicy:
    """Verdict thresholds of the compactness probe.

    A compact operator sends the bounded, weakly null test sequence f_j to a
    null sequence; 20% of the first value is the decay we require before
    calling the data consistent with compactness.  The f_j are uniformly
    bounded in Q_p, which we accept up to a factor 4.
    """

    decay_fraction: float = 0.20
    bracket_factor: float = 4.0
    floor_sigmas: float = 3.0
    unresolved_rel: float = 0.5


class _RadialProduct(HoloFunction):
    """z -> left(z) * R right(z); only ``eval`` is needed by the ray integral."""

    def __init__(self, left: HoloFunction, right: HoloFunction):
        if left.n != right.n:
            raise DomainError("dimension mismatch")
        self.n = left.n
        self.left, self.right = left, right

    def eval(self, z):
        return self.left.eval(z) * self.right.radial(z)

    @property
    def value_at_origin(self) -> complex:
        return 0j


class RayIntegral(HoloFunction):
    """int_0^1 left(tz) R right(tz) dt/t with the exact radial derivative left * R right."""

    def __init__(self, left: HoloFunction, right: HoloFunction, label: str = ""):
        self.integrand = _RadialProduct(left, right)
        self.n = left.n
        self.left, self.right = left, right
        self.label = label

    def eval(self, z):
        z = np.asarray(z, dtype=complex)
        if z.ndim == 1:
            return ray_integral(self.integrand, z[None, :])[0]
        return ray_integral(self.integrand, z)

    def radial(self, z):
        return self.integrand.eval(z)

    @property
    def value_at_origin(self) -> complex:
        return 0j

    def to_json(self):
        return {"kind": "ray_integral", "op": self.label,
                "left": _json(self.left), "right": _json(self.right)}


def _json(f):
    return f.to_json() if hasattr(f, "to_json") else repr(f)


def _exact(*fs) -> bool:
    return all(isinstance(f, PowerSeries) for f in fs)


def tg_apply(g: HoloFunction, f: HoloFunction, path: str = "auto") -> HoloFunction:
    """T_g f; exact polynomial when f and g are polynomials (unless path='quadrature')."""
    if path not in ("auto", "exact", "quadrature"):
        raise ContractError(f"unknown path {path!r}")
    if path != "quadrature" and _exact(f, g):
        return (f * g.radial_series()).ray_integral_series()
    if path == "exact":
        raise ContractError("exact path needs polynomial f and g")
    return RayIntegral(f, g, "Tg")


def lg_apply(g: HoloFunction, f: HoloFunction, path: str = "auto") -> HoloFunction:
    """L_g f; exact polynomial when f and g are polynomials (unless path='quadrature')."""
    if path not in ("auto", "exact", "quadrature"):
        raise ContractError(f"unknown path {path!r}")
    if path != "quadrature" and _exact(f, g):
        return (g * f.radial_series()).ray_integral_series()
    if path == "exact":
        raise ContractError("exact path needs polynomial f and g")
    return RayIntegral(g, f, "Lg")


def mg_apply(g: HoloFunction, f: HoloFunction) -> HoloFunction:
    """The pointwise product g f."""
    if _exact(f, g):
        return g * f
    return Product(g, f)


def mg_decomposition(g: HoloFunction, f: HoloFunction, path: str = "auto") -> HoloFunction:
    """g(0) f(0) + T_g f + L_g f, which equals g f."""
    c = g.value_at_origin * f.value_at_origin
    tg, lg = tg_apply(g, f, path), lg_apply(g, f, path)
    if isinstance(tg, PowerSeries) and isinstance(lg, PowerSeries):
        return PowerSeries.constant(g.n, c) + tg + lg
    return tg + lg + c


@dataclass(frozen=True)
class OperatorSpec:
    kind: str
    g: HoloFunction
    p: float
    q: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"operator kind must be one of {KINDS}")
        check_p(self.g.n, self.p, "p")
        check_p(self.g.n, self.q, "q")
        if self.p > self.q:
            raise DomainError(f"need p <= q, got p = {self.p:g} > q = {self.q:g}")

    @property
    def n(self) -> int:
        return self.g.n

    def apply(self, f: HoloFunction) -> HoloFunction:
        if self.kind == "Tg":
            return tg_apply(self.g, f)
        if self.kind == "Lg":
            return lg_apply(self.g, f)
        return mg_apply(self.g, f)

    @property
    def open_case(self) -> bool:
        """T_g compactness is unresolved for p <= q < 1."""
        return self.kind == "Tg" and self.q < 1.0

    def to_json(self):
        return {"kind": self.kind, "g": _json(self.g), "p": self.p, "q": self.q}


@dataclass
class ProbeReport:
    spec: OperatorSpec
    mode: str
    rows: list = field(default_factory=list)
    verdict: str | None = None
    measure_side: dict = field(default_factory=dict)
    annotations: list = field(default_factory=list)
    converged: bool = True
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "operator": self.spec.to_json(),
            "verdict": self.verdict,
            "measure_side": to_jsonable(self.measure_side),
            "rows": to_jsonable(self.rows),
            "annotations": list(self.annotations),
            "converged": self.converged,
            **({"extra": to_jsonable(self.extra)} if self.extra else {}),
        }

    def csv_rows(self):
        if self.mode == "probe":
            header = ["j", "delta", "qp_norm_fj", "qq_norm_opfj", "stderr"]
            body = [[r["j"], r["delta"], r["qp_norm_fj"], r["qq_norm_opfj"], r["stderr"]] for r in self.rows]
        else:
            header = ["index", "qp_norm_f", "qq_norm_opf", "ratio", "stderr"]
            body = [[r["index"], r["qp_norm_f"], r["qq_norm_opf"], r["ratio"], r["stderr"]] for r in self.rows]
        return header, body


def _params(base: QpParams | None, n: int, p: float) -> QpParams:
    return QpParams(n=n, p=p) if base is None else replace(base, n=n, p=p)


def boundedness_certificate(spec: OperatorSpec, suite, params: QpParams | None = None,
                            search: BoxSearch = BoxSearch(net_m=4), hinf_cap: float = HINF_CAP) -> ProbeReport:
    """Pair the measure-side criterion with operator-side ratios over a suite.

    ``suite`` should list its boundary-concentrated members last: a ratio
    growing by more than BLOWUP_FACTOR from the first to the last member is
    reported as blow-up.
    """
    n = spec.n
    pp, pq = _params(params, n, spec.p), _params(params, n, spec.q)
    measure: dict = {}
    bounded_by_measure = True
    if spec.kind in ("Tg", "Mg"):
        rep = lcm_constant(mu_qg(spec.g, spec.q), spec.q, search)
        measure["lcm_constant"] = rep.constant
        measure["lcm_converged"] = rep.converged
        bounded_by_measure &= bool(np.isfinite(rep.constant))
    if spec.kind in ("Lg", "Mg"):
        h = hinf_norm_estimate(spec.g, cap=hinf_cap)
        measure["hinf"] = h.value
        measure["hinf_cap"] = hinf_cap
        if not h.converged:
            measure["hinf_sampled_max"] = h.extra.get("sampled_max")
        bounded_by_measure &= bool(np.isfinite(h.value))

    rows = []
    converged = True
    for i, f in enumerate(suite):
        nf = qp_radial(f, pp)
        nop = qp_radial(spec.apply(f), pq)
        denom = nf.full_norm
        ratio = nop.full_norm / denom if denom > 0 else 0.0
        se = np.hypot(nop.stderr, ratio * nf.stderr) / denom if denom > 0 else 0.0
        ok = nf.converged and nop.converged
        converged &= ok
        rows.append({"index": i, "qp_norm_f": nf.full_norm, "qq_norm_opf": nop.full_norm,
                     "ratio": ratio, "stderr": float(se), "converged": ok})

    if not bounded_by_measure:
        verdict = "not-bounded"
    else:
        ratios = [r["ratio"] for r in rows]
        first = next((r for r in ratios if r > 0), 0.0)
        verdict = ("blow-up-detected" if first > 0 and ratios[-1] > BLOWUP_FACTOR * first
                   else "consistent-with-bounded")
    return ProbeReport(spec, "certify", rows, verdict, measure, converged=converged)


def probe_sequence(xi, deltas) -> list[NormalizedSquaredLog]:
    """f_j(z) = (log 2/delta_j)^-1 (log 2/(1 - <z, (1-delta_j) xi>))^2."""
    return [NormalizedSquaredLog.from_box(xi, d) for d in deltas]


def _box_quantity(spec: OperatorSpec, f: HoloFunction, xi, delta: float, samples: int, seed: int):
    """delta^-nq int_{Q_delta(xi)} |R(Op f)|^2 (1-|z|^2)^(n(q-1)+1) dv, a lower bound for ||Op f||^2 up to a constant."""
    n, q = spec.n, spec.q
    opf = spec.apply(f)
    pts, vol = sample_box_canonical(delta, n, samples, seed)
    z = pts @ geo.frame(xi).T
    rf = opf.radial(z)
    vals = (rf.real**2 + rf.imag**2) * (1.0 - geo.norm2(z)) ** (n * (q - 1) + 1)
    w = vol * delta ** (-n * q)
    return w * float(np.mean(vals)), w * float(np.std(vals, ddof=1) / np.sqrt(len(vals)))


def compactness_probe(spec: OperatorSpec, xi, deltas=DEFAULT_DELTAS, params: QpParams | None = None,
                      fj_norms=None, box_samples: int = 20000,
                      policy: ProbePolicy = ProbePolicy()) -> ProbeReport:
    """Run Op over the test sequence f_j and report j -> ||Op f_j||_{Q_q}.

    ``fj_norms`` may supply precomputed Q_p reports for the f_j (same p,
    xi and deltas) so several probes share them.
    """
    deltas = [float(d) for d in deltas]
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ContractError("deltas must be strictly decreasing")
    xi = geo.as_unit(xi)
    n = spec.n
    pp, pq = _params(params, n, spec.p), _params(params, n, spec.q)
    fjs = probe_sequence(xi, deltas)
    if fj_norms is None:
        fj_norms = [qp_radial(f, pp) for f in fjs]

    rows, truncated_at, converged = [], None, True
    for j, (d, f, nf) in enumerate(zip(deltas, fjs, fj_norms)):
        nop = qp_radial(spec.apply(f), pq)
        if nop.full_norm > 0 and nop.stderr > policy.unresolved_rel * nop.full_norm:
            truncated_at = j
            break
        converged &= nf.converged and nop.converged
        row = {"j": j, "delta": d, "qp_norm_fj": nf.full_norm, "qp_stderr_fj": nf.stderr,
               "qq_norm_opfj": nop.full_norm, "stderr": nop.stderr, "achieving_a": nop.achieving_a}
        bq, bse = _box_quantity(spec, f, xi, d, box_samples, pp.seed + j)
        row["box_lower_bound"] = float(np.sqrt(max(bq, 0.0)))
        row["box_lower_bound_stderr"] = 0.5 * bse / row["box_lower_bound"] if bq > 0 else 0.0
        if spec.kind == "Mg":
            row["g_at_wj"] = float(abs(spec.g.eval((1.0 - d) * xi)))
        rows.append(row)

    notes = []
    if truncated_at is not None:
        notes.append(f"sequence truncated at j = {truncated_at}: relative stderr above {policy.unresolved_rel}")
    fj = [r["qp_norm_fj"] for r in rows]
    bracket = max(fj) / min(fj) if fj and min(fj) > 0 else float("inf")
    extra = {"fj_bracket": bracket, "fj_bracket_ok": bracket <= policy.bracket_factor}
    seq = [r["qq_norm_opfj"] for r in rows]
    floor = min((r["qq_norm_opfj"] - policy.floor_sigmas * r["stderr"] for r in rows), default=0.0)
    extra["floor"] = floor
    extra["decay_ratio"] = seq[-1] / seq[0] if seq and seq[0] > 0 else 0.0

    if spec.open_case:
        notes.append("open-case: compactness of T_g for p <= q < 1 is unresolved; data only")
        verdict = None
    elif len(seq) < 2:
        verdict = "inconclusive"
    elif seq[0] == 0.0 or seq[-1] < policy.decay_fraction * seq[0]:
        verdict = "consistent-with-compact"
    elif floor > 0 and seq[-1] >= seq[0] - policy.floor_sigmas * np.hypot(rows[0]["stderr"], rows[-1]["stderr"]):
        # bounded below and no net decay; a slowly decaying sequence stays inconclusive
        verdict = "non-compact-witness"
    else:
        verdict = "inconclusive"
    if spec.kind == "Mg" and verdict == "non-compact-witness":
        extra["mg_witness"] = "g(w_j) stays away from 0 along w_j = (1 - delta_j) xi"
    return ProbeReport(spec, "probe", rows, verdict, annotations=notes, converged=converged, extra=extra)


def _residual(a: PowerSeries, b: PowerSeries) -> float:
    """Largest coefficient modulus of a - b (exact difference, 0 means identical)."""
    return max((abs(c) for c in (a - b).terms.values()), default=0.0)


def identity_suite(pairs: int = 100, max_degree: int = 6, dims=(2, 3), seed: int = 0) -> dict:
    """Check the exact operator identities on random polynomial pairs.

    Returns the maximal coefficient residual of each identity; all are 0
    when the algebra is right.
    """
    rng = np.random.default_rng(seed)
    worst = {"R(Tg f) = f Rg": 0.0, "R(Lg f) = g Rf": 0.0, "Tg f = Lf g": 0.0,
             "Mg f = g(0)f(0) + Tg f + Lg f": 0.0, "Tg f(0) = 0": 0.0}
    for k in range(pairs):
        n = dims[k % len(dims)]
        f = random_polynomial(n, max_degree, rng)
        g = random_polynomial(n, max_degree, rng)
        tgf, lgf = tg_apply(g, f), lg_apply(g, f)
        checks = {
            "R(Tg f) = f Rg": _residual(tgf.radial_series(), f * g.radial_series()),
            "R(Lg f) = g Rf": _residual(lgf.radial_series(), g * f.radial_series()),
            "Tg f = Lf g": _residual(tgf, lg_apply(f, g)),
            "Mg f = g(0)f(0) + Tg f + Lg f": _residual(mg_apply(g, f), mg_decomposition(g, f)),
            "Tg f(0) = 0": abs(tgf.value_at_origin),
        }
        for key, v in checks.items():
            worst[key] = max(worst[key], v)
    return {"pairs": pairs, "max_degree": max_degree, "dims": list(dims), "seed": seed,
            "max_residual": worst, "exact": all(v == 0.0 for v in worst.values())}
