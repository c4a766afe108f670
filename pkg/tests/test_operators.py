import numpy as np
import pytest

from qpball.errors import ContractError, DomainError
from qpball.holo import LogKernel, PowerSeries, random_polynomial
from qpball.operators import (OperatorSpec, ProbePolicy, RayIntegral, boundedness_certificate,
                              compactness_probe, identity_suite, lg_apply, mg_apply, mg_decomposition,
                              tg_apply)
from qpball.qpnorm import QpParams
from conftest import random_ball_points

Z1 = PowerSeries.coordinate(2, 0)
ONE = PowerSeries.constant(2, 1)
SMALL = QpParams(n=2, p=1.0, samples=8000, radii=(0.0, 0.6, 0.9), net_m=2, refine_rounds=1)


def test_tg_examples():
    assert tg_apply(Z1, ONE) == Z1
    f = random_polynomial(2, 5, np.random.default_rng(0))
    assert tg_apply(Z1, f).value_at_origin == 0


def test_lg_examples(rng):
    f = random_polynomial(2, 5, rng)
    assert lg_apply(ONE, f) == f - f.value_at_origin
    assert lg_apply(random_polynomial(2, 3, rng), PowerSeries.constant(2, 4)) == PowerSeries(2)


def test_mg_examples(rng):
    f, g = random_polynomial(2, 5, rng), random_polynomial(2, 5, rng)
    assert mg_apply(ONE, f) == f
    assert mg_apply(g, ONE) == g
    assert mg_decomposition(g, ONE) == g
    z = random_ball_points(rng, 100, 2)
    assert np.max(np.abs(mg_apply(g, f).eval(z) - mg_decomposition(g, f).eval(z))) < 1e-12


def test_identity_suite_exact():
    res = identity_suite(pairs=40, seed=3)
    assert res["exact"]
    assert all(v == 0.0 for v in res["max_residual"].values())


def test_linearity(rng):
    g, f, h = (random_polynomial(3, 5, rng) for _ in range(3))
    a, b = 0.5 - 0.25j, 3
    assert tg_apply(g, f * a + h * b) == tg_apply(g, f) * a + tg_apply(g, h) * b


def test_quadrature_path_agrees(rng):
    g, f = random_polynomial(2, 5, rng), random_polynomial(2, 5, rng)
    z = random_ball_points(rng, 20, 2, 0.95)
    for op in (tg_apply, lg_apply):
        exact, quad = op(g, f), op(g, f, path="quadrature")
        assert isinstance(quad, RayIntegral)
        a, b = exact.eval(z), quad.eval(z)
        assert np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300)) < 1e-9
        assert np.allclose(quad.radial(z), exact.radial(z), rtol=1e-12, atol=1e-14)


def test_kernel_symbol_ray_integral():
    # T_g 1 = g - g(0) for any g
    g = LogKernel([0.6, 0.3j])
    t = tg_apply(g, ONE)
    z = np.array([0.5, -0.2j])
    assert t.eval(z) == pytest.approx(g.eval(z), abs=1e-11)
    mg = mg_decomposition(g, Z1 + 1)
    assert mg.eval(z) == pytest.approx(g.eval(z) * (z[0] + 1), abs=1e-9)
    with pytest.raises(ContractError):
        tg_apply(g, ONE, path="exact")


def test_operator_spec_validation():
    with pytest.raises(DomainError):
        OperatorSpec("Tg", Z1, 1.2, 1.0)
    with pytest.raises(DomainError):
        OperatorSpec("Tg", Z1, 0.4, 1.0)
    with pytest.raises(ContractError):
        OperatorSpec("Xg", Z1, 1.0, 1.0)
    assert OperatorSpec("Tg", Z1, 0.8, 0.9).open_case
    assert not OperatorSpec("Lg", Z1, 0.8, 0.9).open_case


def test_certificate_constant_symbol():
    spec = OperatorSpec("Tg", PowerSeries.constant(2, 2), 1.0, 1.0)
    rep = boundedness_certificate(spec, [Z1, LogKernel([0.5, 0])], SMALL)
    assert rep.measure_side["lcm_constant"] == 0
    assert all(r["ratio"] == 0 for r in rep.rows)
    assert rep.verdict == "consistent-with-bounded"
    lg = boundedness_certificate(OperatorSpec("Lg", PowerSeries.constant(2, 2), 1.0, 1.0),
                                 [Z1, LogKernel([0.5, 0])], SMALL)
    assert lg.measure_side["hinf"] == pytest.approx(2.0)
    assert all(r["ratio"] == pytest.approx(2.0, rel=1e-9) for r in lg.rows)


def test_certificate_polynomial_symbol():
    spec = OperatorSpec("Tg", Z1, 1.0, 1.0)
    rep = boundedness_certificate(spec, [Z1, LogKernel([0.5, 0]), LogKernel([0.9, 0])], SMALL)
    assert np.isfinite(rep.measure_side["lcm_constant"])
    assert rep.verdict == "consistent-with-bounded"
    assert all(np.isfinite(r["ratio"]) for r in rep.rows)


def test_certificate_unbounded_symbol():
    spec = OperatorSpec("Lg", LogKernel([0.99, 0]), 1.0, 1.0)
    rep = boundedness_certificate(spec, [Z1], SMALL)
    assert rep.measure_side["hinf"] == np.inf
    assert rep.verdict == "not-bounded"


def test_probe_open_case_has_no_verdict():
    spec = OperatorSpec("Tg", Z1, 0.8, 0.9)
    rep = compactness_probe(spec, [1, 0], deltas=(0.4, 0.2), params=SMALL)
    assert rep.verdict is None
    assert any(a.startswith("open-case") for a in rep.annotations)


def test_probe_mg_reports_symbol_values():
    spec = OperatorSpec("Mg", ONE + Z1, 1.0, 1.0)
    rep = compactness_probe(spec, [1, 0], deltas=(0.4, 0.2, 0.1), params=SMALL)
    assert [r["g_at_wj"] for r in rep.rows] == pytest.approx([1.6, 1.8, 1.9])
    assert rep.verdict == "non-compact-witness"
    header, rows = rep.csv_rows()
    assert header == ["j", "delta", "qp_norm_fj", "qq_norm_opfj", "stderr"] and len(rows) == 3


def test_probe_policy_controls_verdict():
    spec = OperatorSpec("Lg", ONE, 1.0, 1.0)
    rep = compactness_probe(spec, [1, 0], deltas=(0.4, 0.2), params=SMALL,
                            policy=ProbePolicy(decay_fraction=10.0))
    assert rep.verdict == "consistent-with-compact"


def test_probe_rejects_increasing_deltas():
    with pytest.raises(ContractError):
        compactness_probe(OperatorSpec("Lg", ONE, 1.0, 1.0), [1, 0], deltas=(0.1, 0.2), params=SMALL)
