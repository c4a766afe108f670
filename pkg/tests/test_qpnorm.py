import numpy as np
import pytest
from scipy.stats import spearmanr

from qpball.carleson import BoxSearch, MeasureDensity, mu_qg
from qpball.errors import DomainError
from qpball.holo import LogKernel, PowerSeries
from qpball.qpnorm import (QpParams, bloch_norm, check_p, p_range, qp_box, qp_invariant, qp_radial,
                           tent_norm)

Z1 = PowerSeries.coordinate(2, 0)
Z2 = PowerSeries.coordinate(2, 1)
BOX = BoxSearch(deltas=tuple(np.geomspace(2.0, 0.005, 12)), net_m=4, samples=10000)


def params(p=1.0, **kw):
    base = dict(n=2, p=p, samples=40000, radii=(0.0, 0.5, 0.8, 0.9, 0.95), net_m=2, refine_rounds=2, box=BOX)
    base.update(kw)
    return QpParams(**base)


SUITE = {
    "z1": Z1,
    "z1^2": Z1 * Z1,
    "z1z2": Z1 * Z2,
    "(z1+z2)/2": (Z1 + Z2) * 0.5,
    "f_0.5": LogKernel([0.5, 0]),
    "f_0.9diag": LogKernel(0.9 * np.array([1, 1]) / np.sqrt(2)),
}

# regression baselines, measured once on SUITE with the params above
BOX_RADIAL_K = 2.0
TENT_K = 1.0
P_PROFILE_MULTIPLE = 1.5


@pytest.fixture(scope="module")
def suite_norms():
    out = {}
    for name, f in SUITE.items():
        out[name] = {
            "radial": qp_radial(f, params()),
            "box": qp_box(f, params()),
            "box_p12": qp_box(f, params(1.2)),
        }
    return out


def test_p_range_and_rejection():
    assert p_range(2) == (0.5, 2.0)
    assert p_range(3) == pytest.approx((2 / 3, 1.5))
    with pytest.raises(DomainError, match="constant"):
        QpParams(n=2, p=0.4)
    with pytest.raises(DomainError):
        QpParams(n=3, p=1.5)
    with pytest.raises(DomainError):
        QpParams(n=1, p=1.0)
    check_p(2, 1.99)


def test_constants_vanish_exactly():
    c = PowerSeries.constant(2, 3 - 4j)
    for est in (qp_radial, qp_invariant, qp_box):
        rep = est(c, params(samples=5000))
        assert rep.seminorm == 0.0
        assert rep.full_norm == pytest.approx(5.0)
    assert bloch_norm(c) == pytest.approx(5.0)
    assert tent_norm(PowerSeries(2), mu_qg(Z1, 1.0), 1.0, BOX).seminorm == 0
    assert tent_norm(Z1, MeasureDensity.zero(2), 1.0, BOX).seminorm == 0


def test_report_invariants():
    rep = qp_radial(Z1 + 2, params())
    assert rep.full_norm >= rep.seminorm >= 0
    assert rep.full_norm == pytest.approx(2 + rep.seminorm)
    assert np.sqrt(max(r["value"] for r in rep.profile)) == pytest.approx(rep.seminorm)
    assert rep.achieving_a is not None
    js = rep.to_json()
    assert set(js) >= {"seminorm", "full_norm", "achieving_a", "profile", "converged"}


def test_invariant_profile_of_z1_is_interior():
    rep = qp_invariant(Z1, params())
    assert rep.converged and np.isfinite(rep.seminorm) and rep.seminorm > 0
    assert np.sqrt(np.sum(np.abs(rep.achieving_a) ** 2)) <= 0.9 + 1e-9
    assert rep.extra["excluded_mass"] >= 0


def test_invariant_matches_radial_scale():
    a = qp_invariant(Z1, params()).seminorm
    b = qp_radial(Z1, params()).seminorm
    assert 1 / 3 < a / b < 3


def test_homogeneity():
    for est in (qp_radial, qp_invariant):
        one = est(Z1, params())
        two = est(Z1 * 2, params())
        assert two.seminorm == pytest.approx(2 * one.seminorm, rel=1e-9)


def test_radial_examples_finite_and_reproducible():
    a = qp_radial(Z1, params())
    b = qp_radial(Z1 * Z1, params())
    assert np.isfinite(a.seminorm) and np.isfinite(b.seminorm)
    assert b.achieving_a is not None
    assert qp_radial(Z1, params()).seminorm == a.seminorm


def test_seed_stability():
    a = qp_radial(Z1 * Z2, params(seed=1))
    b = qp_radial(Z1 * Z2, params(seed=2))
    assert abs(a.seminorm - b.seminorm) <= 5 * np.hypot(a.stderr, b.stderr)


def test_log_kernels_share_a_bracket():
    vals = [qp_radial(LogKernel([r, 0]), params()).seminorm for r in (0.5, 0.9, 0.99)]
    assert all(v > 0 for v in vals)
    assert max(vals) / min(vals) < 10


def test_dimension_mismatch():
    with pytest.raises(DomainError):
        qp_radial(PowerSeries.coordinate(3, 0), params())


def test_bloch_examples():
    assert bloch_norm(Z1) == pytest.approx(1.0)
    assert bloch_norm(Z1 + 1) == pytest.approx(2.0)


def test_box_radial_bracket(suite_norms):
    for name, rep in suite_norms.items():
        ratio = rep["box"].seminorm / rep["radial"].seminorm
        assert 1 / BOX_RADIAL_K <= ratio <= BOX_RADIAL_K, name


def test_box_radial_rank_correlation(suite_norms):
    box = [r["box"].seminorm for r in suite_norms.values()]
    rad = [r["radial"].seminorm for r in suite_norms.values()]
    assert spearmanr(box, rad).statistic >= 0.8


def test_bloch_finite_with_qp(suite_norms):
    for name, f in SUITE.items():
        assert np.isfinite(suite_norms[name]["radial"].seminorm)
        assert np.isfinite(bloch_norm(f))


def test_p_monotone_profiles(suite_norms):
    for name, rep in suite_norms.items():
        assert np.isfinite(rep["box_p12"].seminorm)
        assert rep["box_p12"].seminorm <= P_PROFILE_MULTIPLE * rep["box"].seminorm, name


def test_tent_embedding(suite_norms):
    mu = mu_qg(Z1, 1.0)
    for name, f in SUITE.items():
        t = tent_norm(f, mu, 1.0, BoxSearch(net_m=4, samples=10000))
        assert t.seminorm <= TENT_K * suite_norms[name]["radial"].full_norm, name
