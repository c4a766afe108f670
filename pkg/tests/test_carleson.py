import numpy as np
import pytest

from qpball import geometry as geo
from qpball.carleson import (BoxSearch, MeasureDensity, annuli_edges, box_mass, cm_constant,
                             lcm_constant, lcm_integral_form, mu_qg, vanishing_profile,
                             vanishing_verdict)
from qpball.holo import PowerSeries

Z1 = PowerSeries.coordinate(2, 0)
FAST = BoxSearch(deltas=(2.0, 1.0, 0.5, 0.25, 0.125, 0.0625), net_m=2, samples=4000, refine_rounds=1)


def test_mu_qg_density(rng):
    assert np.all(mu_qg(PowerSeries.constant(2, 3), 1.0)(np.array([[0.3, 0.2j]])) == 0)
    z = np.array([[0.3 + 0.1j, 0.2j]])
    assert mu_qg(Z1, 1.0)(z) == pytest.approx(abs(z[0, 0]) ** 2 * (1 - geo.norm2(z)))


def test_mu_qg_total_mass(e1):
    # |z1|^2 (1-|z|^2) dv: polar reduction gives (1/2) * 4 int r^5 (1-r^2) dr = 1/12
    est = box_mass(mu_qg(Z1, 1.0), geo.CarlesonBox(e1, 2.0), 40_000)
    assert abs(est.value - 1 / 12) <= 3 * est.stderr


def test_box_mass_examples(e1):
    box = geo.CarlesonBox(e1, 0.3)
    assert box_mass(MeasureDensity.zero(2), box).value == 0
    mu = mu_qg(Z1, 1.0)
    small = box_mass(mu, geo.CarlesonBox(e1, 0.1))
    big = box_mass(mu, geo.CarlesonBox(e1, 0.4))
    assert small.value <= big.value + 3 * np.hypot(small.stderr, big.stderr)


def test_cut_off_monotone(e1):
    mu = MeasureDensity.volume(2)
    prev = np.inf
    for r in (0.5, 0.9, 0.95, 0.99):
        m = box_mass(mu.cut(r), geo.CarlesonBox(e1, 0.5)).value
        assert m <= prev
        prev = m


def test_zero_measure_constants():
    zero = MeasureDensity.zero(2)
    assert lcm_constant(zero, 1.0, FAST).constant == 0
    assert cm_constant(zero, 1.0, FAST).constant == 0
    assert vanishing_profile(zero, 1.0, FAST).vanishing_verdict == "vanishing"
    assert lcm_integral_form(zero, 1.0, 1.0, w_radii=(0.0, 0.9), net_m=2, samples=1000).value == 0


def test_cm_profile_of_volume_decreases():
    rep = cm_constant(MeasureDensity.volume(2), 1.0, FAST)
    tail = [v for d, v, _, _ in rep.delta_profile if d <= 1.0]
    assert all(a > b for a, b in zip(tail, tail[1:]))
    # the ratio v(Q_delta)/delta^2 peaks at delta = 1, not at the whole ball
    assert rep.achieving_box.delta < 2.0


def test_lcm_and_cm_differ_by_log2_at_delta_one():
    mu = mu_qg(Z1, 1.0)
    a = cm_constant(mu, 1.0, FAST).delta_profile
    b = lcm_constant(mu, 1.0, FAST).delta_profile
    va = dict((d, v) for d, v, _, _ in a)[1.0]
    vb = dict((d, v) for d, v, _, _ in b)[1.0]
    assert vb == pytest.approx(va * np.log(2) ** 2, rel=1e-12)


def test_scaling_and_subadditivity():
    mu = mu_qg(Z1, 1.0)
    nu = MeasureDensity.volume(2)
    base = lcm_constant(mu, 1.0, FAST)
    scaled = lcm_constant(mu.scaled(3.0), 1.0, FAST)
    assert scaled.constant_sq == pytest.approx(3 * base.constant_sq, rel=1e-12)
    both = lcm_constant(mu + nu, 1.0, FAST)
    other = lcm_constant(nu, 1.0, FAST)
    slack = 3 * (both.stderr_sq + base.stderr_sq + other.stderr_sq)
    assert both.constant_sq <= base.constant_sq + other.constant_sq + slack


def test_integral_form_origin_term():
    mu = mu_qg(Z1, 1.0)
    rep = lcm_integral_form(mu, 1.0, 1.0, w_radii=(0.0,), samples=20_000)
    assert rep.value == pytest.approx(np.log(2) ** 2 / 12, rel=0.05)


def test_annuli_cover_ball():
    edges = annuli_edges(0.01)
    assert edges[0] == (0.0, 0.04) and edges[-1][1] == 2.0
    assert all(a[1] == b[0] for a, b in zip(edges, edges[1:]))


def test_vanishing_verdict_rules():
    dec = [(2.0 ** -k, 10 * 0.5**k, 0.001, None) for k in range(8)]
    assert vanishing_verdict(dec) == "vanishing"
    flat = [(2.0 ** -k, 1.0, 0.001, None) for k in range(8)]
    assert vanishing_verdict(flat) == "non-vanishing"
    noisy = [(1.0, 1.0, 0.01, None), (0.5, 0.09, 0.02, None), (0.25, 0.08, 0.02, None),
             (0.125, 0.07, 0.02, None)]
    assert vanishing_verdict(noisy) == "inconclusive"
    truncated = [(1.0, 1.0, 0.01, None), (0.5, 0.5, 0.01, None), (0.25, 0.01, 0.2, None)]
    assert vanishing_verdict(truncated) == "inconclusive"
    assert vanishing_verdict([(1.0, 0.0, 0.0, None)]) == "vanishing"


def test_cutoff_lcm_decreases():
    mu = mu_qg(Z1, 1.0)
    vals = [lcm_constant(mu.cut(r), 1.0, FAST).constant_sq for r in (0.9, 0.95, 0.99)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] < 0.2 * lcm_constant(mu, 1.0, FAST).constant_sq
