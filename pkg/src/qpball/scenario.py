"""Scenario configs: validation, execution and report/manifest output.

A scenario is a single JSON document.  Paths inside it are resolved
relative to the config file.  Every numeric policy has a default here so a
config only states what it changes.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import geometry as geo
from .carleson import (BoxSearch, MeasureDensity, cm_constant, lcm_constant, lcm_integral_form,
                       mu_qg, vanishing_profile)
from .errors import ContractError, DomainError, IntegrationError, PoleError, QpballError
from .holo import HoloFunction, LogKernel, PowerSeries, function_from_json
from .operators import (ProbePolicy, OperatorSpec, boundedness_certificate, compactness_probe,
                        identity_suite)
from .qpnorm import QpParams, p_range, qp_box, qp_invariant, qp_radial
from .report import to_jsonable

CONFIG_SCHEMA = 1
SCENARIOS = ("qpnorm", "carleson", "op-certify", "op-probe", "cover-demo", "identity-suite")
FORMS = ("radial", "invariant", "box")
CARLESON_MODES = ("lcm", "cm", "integral", "vanishing")
OP_KINDS = {"tg": "Tg", "lg": "Lg", "mg": "Mg", "Tg": "Tg", "Lg": "Lg", "Mg": "Mg"}

EXIT_OK, EXIT_INVALID, EXIT_UNCONVERGED, EXIT_CONTRACT = 0, 2, 3, 4


class ConfigError(QpballError):
    """Config file could not be parsed; carries the line and column."""

    def __init__(self, path, line: int, col: int, msg: str):
        super().__init__(f"{path}:{line}:{col}: {msg}")
        self.path, self.line, self.col, self.msg = str(path), line, col, msg

    def to_json(self):
        return {"error": "parse", "path": self.path, "line": self.line, "column": self.col, "message": self.msg}


def load_config(path) -> dict:
    path = Path(path)
    text = path.read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(path, exc.lineno, exc.colno, exc.msg) from None
    if not isinstance(cfg, dict):
        raise ConfigError(path, 1, 1, "top level must be a JSON object")
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


# -- loading referenced objects ---------------------------------------------


def load_function(ref, base: Path) -> HoloFunction:
    if isinstance(ref, str):
        ref = json.loads((base / ref).read_text())
    return function_from_json(ref)


def load_measure(ref, base: Path, n: int | None = None) -> MeasureDensity:
    """Measure from {"kind": "mu_qg" | "volume" | "zero" | "sum" | "scaled", ...}, optional "cutoff"."""
    if isinstance(ref, str):
        ref = json.loads((base / ref).read_text())
    kind = ref.get("kind")
    if kind == "mu_qg":
        mu = mu_qg(load_function(ref["g"], base), float(ref["q"]))
    elif kind in ("volume", "dv"):
        mu = MeasureDensity.volume(int(ref.get("n", n or 2)))
    elif kind == "zero":
        mu = MeasureDensity.zero(int(ref.get("n", n or 2)))
    elif kind == "sum":
        parts = [load_measure(t, base, n) for t in ref["terms"]]
        mu = parts[0]
        for part in parts[1:]:
            mu = mu + part
    elif kind == "scaled":
        mu = load_measure(ref["mu"], base, n).scaled(float(ref["c"]))
    else:
        raise DomainError(f"unknown measure kind {kind!r}")
    if ref.get("cutoff") is not None:
        mu = mu.cut(float(ref["cutoff"]))
    return mu


# -- validation -------------------------------------------------------------


def _range_violation(name: str, value, n: int) -> str | None:
    lo, hi = p_range(n)
    if not isinstance(value, (int, float)):
        return f"{name} must be a number"
    if value <= lo:
        return (f"{name} = {value:g} <= (n-1)/n = {lo:g}: Q_{name} on the ball of C^{n} "
                "contains only the constant functions")
    if value >= hi:
        return (f"{name} = {value:g} >= n/(n-1) = {hi:g}: Q_{name} on the ball of C^{n} "
                "contains only the constant functions")
    return None


def _infer_n(cfg: dict, base: Path, problems: list) -> int | None:
    if "n" in cfg:
        n = cfg["n"]
        if not isinstance(n, int) or n < 2:
            problems.append("n must be an integer >= 2")
            return None
        return n
    for key in ("function", "symbol"):
        if key in cfg:
            try:
                return load_function(cfg[key], base).n
            except (OSError, ValueError, KeyError, QpballError) as exc:
                problems.append(f"{key}: cannot load ({exc})")
                return None
    return None


def validate(cfg: dict, base: Path = Path(".")) -> list[str]:
    """All violations of a parsed config, without running anything."""
    problems: list[str] = []
    scen = cfg.get("scenario")
    if scen not in SCENARIOS:
        problems.append(f"scenario must be one of {', '.join(SCENARIOS)}")
    seed = cfg.get("seed")
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        problems.append("seed is mandatory and must be a non-negative integer")
    samples = cfg.get("samples", 1)
    if not isinstance(samples, (int, float)) or samples < 1 or int(samples) != samples:
        problems.append("samples must be a positive integer")
    n = _infer_n(cfg, base, problems)
    if n is not None and n > 4:
        problems.append("n must be at most 4")

    for key in ("function", "symbol"):
        if isinstance(cfg.get(key), str) and not (base / cfg[key]).exists():
            problems.append(f"{key}: file {cfg[key]} not found")

    if scen == "qpnorm":
        if "function" not in cfg:
            problems.append("qpnorm needs 'function'")
        if cfg.get("form", "radial") not in FORMS:
            problems.append(f"form must be one of {', '.join(FORMS)}")
        if n is not None:
            v = _range_violation("p", cfg.get("p", 1.0), n)
            if v:
                problems.append(v)
    elif scen == "carleson":
        if "measure" not in cfg:
            problems.append("carleson needs 'measure'")
        if cfg.get("mode", "lcm") not in CARLESON_MODES:
            problems.append(f"mode must be one of {', '.join(CARLESON_MODES)}")
        q = cfg.get("q", 1.0)
        if not isinstance(q, (int, float)) or q <= 0:
            problems.append("q must be positive")
    elif scen in ("op-certify", "op-probe"):
        if cfg.get("kind") not in OP_KINDS:
            problems.append("kind must be one of tg, lg, mg")
        if "symbol" not in cfg:
            problems.append(f"{scen} needs 'symbol'")
        p, q = cfg.get("p", 1.0), cfg.get("q", cfg.get("p", 1.0))
        if n is not None:
            for name, v in (("p", p), ("q", q)):
                msg = _range_violation(name, v, n)
                if msg:
                    problems.append(msg)
        if isinstance(p, (int, float)) and isinstance(q, (int, float)) and p > q:
            problems.append(f"p <= q required, got p = {p:g} > q = {q:g}")
        deltas = cfg.get("deltas")
        if deltas is not None and (len(deltas) < 2 or any(b >= a for a, b in zip(deltas, deltas[1:]))
                                   or min(deltas) <= 0):
            problems.append("deltas must be positive and strictly decreasing")
    elif scen == "cover-demo":
        d, m = cfg.get("delta", 0.5), cfg.get("m", 2)
        if not isinstance(d, (int, float)) or not 0 < d <= 2:
            problems.append("delta must lie in (0, 2]")
        if not isinstance(m, int) or m < 1:
            problems.append("m must be an integer >= 1")
    return problems


def validate_config(path) -> list[str]:
    """Diagnostics for a config file; raises ConfigError on parse failure."""
    path = Path(path)
    return validate(load_config(path), path.parent)


# -- execution ---------------------------------------------------------------


@dataclass
class Outcome:
    result: dict
    csv: tuple | None
    convergence: dict
    contract_ok: bool = True


def _qp_params(cfg: dict, n: int, p: float) -> QpParams:
    grids = cfg.get("grids", {})
    base = QpParams(n=n, p=p, samples=int(cfg.get("samples", 200_000)), seed=int(cfg["seed"]),
                    workers=int(cfg.get("workers", 1)))
    kw = {}
    for key in ("radii", "net_m", "refine_rounds", "refine_step", "max_climb", "a_max",
                "exclusion", "exclusion_tol", "rel_tol"):
        if key in grids:
            kw[key] = tuple(grids[key]) if key == "radii" else grids[key]
    box = replace(base.box, seed=int(cfg["seed"]))
    if "box_deltas" in grids:
        box = replace(box, deltas=tuple(grids["box_deltas"]))
    if "box_samples" in grids:
        box = replace(box, samples=int(grids["box_samples"]))
    if "box_net_m" in grids:
        box = replace(box, net_m=int(grids["box_net_m"]))
    return replace(base, box=box, **kw)


def _box_search(cfg: dict) -> BoxSearch:
    grids = cfg.get("grids", {})
    s = BoxSearch(seed=int(cfg["seed"]), workers=int(cfg.get("workers", 1)))
    if "box_deltas" in grids:
        s = replace(s, deltas=tuple(grids["box_deltas"]))
    if "box_samples" in grids:
        s = replace(s, samples=int(grids["box_samples"]))
    if "box_net_m" in grids:
        s = replace(s, net_m=int(grids["box_net_m"]))
    if "refine_rounds" in grids:
        s = replace(s, refine_rounds=int(grids["refine_rounds"]))
    return s


def _xi(cfg: dict, n: int) -> np.ndarray:
    if "xi" in cfg:
        return geo.as_unit(geo.point_from_json(cfg["xi"]))
    e = np.zeros(n, dtype=complex)
    e[0] = 1.0
    return e


def _run_qpnorm(cfg, base) -> Outcome:
    f = load_function(cfg["function"], base)
    params = _qp_params(cfg, f.n, float(cfg.get("p", 1.0)))
    form = cfg.get("form", "radial")
    rep = {"radial": qp_radial, "invariant": qp_invariant, "box": qp_box}[form](f, params)
    if form == "box":
        header = ["delta", "value", "stderr"]
        rows = [[r["delta"], r["value"], r["stderr"]] for r in rep.profile]
    else:
        header = ["abs_a", "value", "stderr", "a"]
        rows = [[float(np.sqrt(geo.norm2(r["a"]))), r["value"], r["stderr"], json.dumps(to_jsonable(r["a"]))]
                for r in rep.profile]
    return Outcome(rep.to_json(), (header, rows), {"qpnorm": rep.converged})


def _run_carleson(cfg, base) -> Outcome:
    mu = load_measure(cfg["measure"], base, cfg.get("n"))
    q = float(cfg.get("q", 1.0))
    mode = cfg.get("mode", "lcm")
    search = _box_search(cfg)
    if mode == "integral":
        s = float(cfg.get("s", 1.0))
        rep = lcm_integral_form(mu, q, s, seed=int(cfg["seed"]),
                                samples=int(cfg.get("grids", {}).get("box_samples", 8000)))
        prof = rep.extra["profile"]
        csvdata = (["radius", "value", "stderr"], [[r["radius"], r["value"], r["stderr"]] for r in prof])
        return Outcome(rep.to_json(), csvdata, {"integral": rep.converged})
    if mode == "cm":
        rep = cm_constant(mu, q, search)
    elif mode == "lcm":
        rep = lcm_constant(mu, q, search)
    else:
        rep = vanishing_profile(mu, q, search, **cfg.get("policy", {}).get("vanishing", {}))
    csvdata = (["delta", "sup_ratio", "stderr"], [[d, v, s] for d, v, s, _ in rep.delta_profile])
    return Outcome(rep.to_json(), csvdata, {mode: rep.converged})


def _default_suite(n: int) -> list[HoloFunction]:
    e = np.zeros(n, dtype=complex)
    e[0] = 1.0
    return [PowerSeries.coordinate(n, 0)] + [LogKernel(r * e) for r in (0.5, 0.9, 0.99)]


def _run_op(cfg, base, mode: str) -> Outcome:
    g = load_function(cfg["symbol"], base)
    p = float(cfg.get("p", 1.0))
    q = float(cfg.get("q", p))
    spec = OperatorSpec(OP_KINDS[cfg["kind"]], g, p, q)
    params = _qp_params(cfg, g.n, p)
    policy = cfg.get("policy", {})
    if mode == "certify":
        suite = ([load_function(s, base) for s in cfg["suite"]] if "suite" in cfg else _default_suite(g.n))
        rep = boundedness_certificate(spec, suite, params, _box_search(cfg),
                                      hinf_cap=float(policy.get("hinf_cap", 4.0)))
    else:
        probe_policy = ProbePolicy(**policy.get("probe", {}))
        kw = {"deltas": tuple(cfg["deltas"])} if "deltas" in cfg else {}
        rep = compactness_probe(spec, _xi(cfg, g.n), params=params, policy=probe_policy, **kw)
    return Outcome(rep.to_json(), rep.csv_rows(), {f"op-{mode}": rep.converged})


def _run_cover(cfg, base) -> Outcome:
    n = int(cfg.get("n", 2))
    xi = _xi(cfg, n)
    delta, m = float(cfg.get("delta", 0.5)), int(cfg.get("m", 2))
    boxes = geo.cover_box(xi, delta, m, seed=int(cfg["seed"]))
    check = geo.cover_check(xi, delta, boxes, int(cfg.get("test_points", 10_000)), int(cfg["seed"]) + 1)
    sep_ok = m == 1 or check["min_separation"] >= delta / (2 * m) - 1e-12
    result = {**check, "n": n, "delta": delta, "m": m, "N_over_m_to_n": len(boxes) / m**n,
              "separation_ok": sep_ok, "boxes": [b.to_json() for b in boxes]}
    rows = [[k, json.dumps(b.to_json()["center"])] for k, b in enumerate(boxes)]
    ok = check["coverage"] == 1.0 and sep_ok and check["centres_in_cap"]
    return Outcome(result, (["k", "center"], rows), {"cover": True}, contract_ok=ok)


def _run_identities(cfg, base) -> Outcome:
    res = identity_suite(int(cfg.get("pairs", 100)), int(cfg.get("max_degree", 6)),
                         tuple(cfg.get("dims", (2, 3))), int(cfg["seed"]))
    rows = [[k, v] for k, v in res["max_residual"].items()]
    return Outcome(res, (["identity", "max_residual"], rows), {"identities": True}, contract_ok=res["exact"])


def execute(cfg: dict, base: Path = Path(".")) -> Outcome:
    scen = cfg["scenario"]
    if scen == "qpnorm":
        return _run_qpnorm(cfg, base)
    if scen == "carleson":
        return _run_carleson(cfg, base)
    if scen == "op-certify":
        return _run_op(cfg, base, "certify")
    if scen == "op-probe":
        return _run_op(cfg, base, "probe")
    if scen == "cover-demo":
        return _run_cover(cfg, base)
    return _run_identities(cfg, base)


def _csv_text(header, rows, manifest_ref: str) -> str:
    buf = io.StringIO()
    buf.write(f"# {manifest_ref}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


def dump_json(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def run_scenario(cfg: dict, base: Path = Path("."), out: Path | None = None, stream=None) -> int:
    """Validate, execute and write outputs; returns the process exit code.

    With ``out`` set, writes ``<scenario>.json``, ``<scenario>_profile.csv``
    and ``manifest.json`` there; otherwise prints the report to ``stream``.
    """
    import sys

    stream = stream or sys.stdout
    problems = validate(cfg, base)
    if problems:
        for msg in problems:
            print(f"invalid config: {msg}", file=sys.stderr)
        return EXIT_INVALID
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    chash = config_hash(cfg)
    try:
        outcome = execute(cfg, base)
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ContractError, PoleError, IntegrationError) as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT

    if not outcome.contract_ok:
        code = EXIT_CONTRACT
    elif not all(outcome.convergence.values()):
        code = EXIT_UNCONVERGED
    else:
        code = EXIT_OK

    scen = cfg["scenario"]
    report = {"scenario": scen, "config": cfg, "config_hash": chash, "manifest": "manifest.json",
              "artifact_version": __version__, "result": outcome.result}
    if out is None:
        stream.write(dump_json(report))
        return code
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    files = [f"{scen}.json"]
    (out / files[0]).write_text(dump_json(report))
    if outcome.csv is not None:
        files.append(f"{scen}_profile.csv")
        (out / files[1]).write_text(_csv_text(*outcome.csv, f"manifest=manifest.json config_hash={chash}"))
    manifest = {
        "config_hash": chash,
        "artifact_version": __version__,
        "config_schema": CONFIG_SCHEMA,
        "started_at": started.isoformat(),
        "wall_clock_seconds": round(time.perf_counter() - t0, 3),
        "convergence": outcome.convergence,
        "contract_ok": outcome.contract_ok,
        "exit_code": code,
        "outputs": files,
    }
    (out / "manifest.json").write_text(dump_json(manifest))
    print(f"wrote {', '.join(files)} and manifest.json to {out} (exit {code})", file=sys.stderr)
    return code
