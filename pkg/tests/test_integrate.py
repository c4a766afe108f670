import numpy as np
import pytest

from qpball import geometry as geo
from qpball.errors import ContractError, IntegrationError
from qpball.holo import LogKernel, PowerSeries, random_polynomial
from qpball.integrate import (integrate, kernel_transform, ray_integral, sample_ball, sample_box,
                              sample_pseudo_ball, sample_sphere, weighted_estimate)

Z1 = PowerSeries.coordinate(2, 0)


def ones(z):
    return np.ones(z.shape[0])


def test_ball_and_sphere_normalization():
    est = integrate(ones, sample_ball(2, 50_000, 3))
    assert abs(est.value - 1) <= 3 * est.stderr + 1e-12
    est = integrate(ones, sample_sphere(3, 10_000, 3))
    assert est.value == pytest.approx(1.0)


def test_first_moment_vanishes_and_radial_moment():
    cloud = sample_ball(2, 100_000, 5)
    est = integrate(lambda z: z[:, 0].real, cloud)
    assert abs(est.value) <= 3 * est.stderr
    est = integrate(lambda z: geo.norm2(z), cloud)
    assert abs(est.value - 2 / 3) <= 3 * est.stderr


def test_zero_integrand_is_exactly_zero():
    est = integrate(lambda z: np.zeros(len(z)), sample_ball(2, 1000, 0))
    assert est.value == 0.0 and est.stderr == 0.0


def test_dlambda_invariance(rng):
    n = 2

    def f(z):
        return (1 - geo.norm2(z)) ** (n + 2)

    cloud = sample_ball(n, 100_000, 11, "dlambda")
    base = integrate(f, cloud)
    a = np.array([0.4 + 0.3j, -0.2j])
    moved = integrate(lambda z: f(geo.mobius(a, z)), cloud)
    assert abs(base.value - moved.value) <= 3 * np.hypot(base.stderr, moved.stderr)
    # exact value: int (1-|z|^2) dv = 1/(n+1)
    assert abs(base.value - 1 / 3) <= 3 * base.stderr


def test_determinism():
    a = integrate(lambda z: geo.norm2(z), sample_ball(2, 20_000, 9))
    b = integrate(lambda z: geo.norm2(z), sample_ball(2, 20_000, 9))
    assert a == b
    c = integrate(lambda z: geo.norm2(z), sample_ball(2, 20_000, 9), workers=3)
    assert c.value == a.value


def test_excluded_points():
    cloud = sample_ball(2, 10_000, 0)
    vals = np.ones(len(cloud))
    vals[:5] = np.inf
    est = weighted_estimate(vals, cloud)
    assert est.excluded == 5
    vals[:50] = np.nan
    with pytest.raises(IntegrationError):
        weighted_estimate(vals, cloud)


def test_box_sampling(e1):
    box = geo.CarlesonBox(e1, 0.1)
    cloud = sample_box(box, 5000, 2)
    assert np.all(box.contains(cloud.points))
    assert cloud.weights.sum() == pytest.approx(geo.box_volume(0.1, 2))
    full = sample_box(geo.CarlesonBox(e1, 2.0), 20_000, 2)
    assert full.weights.sum() == pytest.approx(1.0, abs=1e-9)
    ratios = [geo.box_volume(d, 2) / d**3 for d in (0.5, 0.25, 0.1, 0.05)]
    assert 0.4 < min(ratios) and max(ratios) < 1.0


def test_box_sampling_is_uniform(e1):
    # the mean of |z|^2 over Q_1(e1) by the box sampler vs. rejection from the ball
    cloud = sample_box(geo.CarlesonBox(e1, 1.0), 100_000, 4)
    ball = sample_ball(2, 400_000, 4)
    inside = geo.noniso_gauge(ball.points, e1) < 1.0
    a = np.mean(geo.norm2(cloud.points))
    b = np.average(geo.norm2(ball.points[inside]), weights=ball.weights[inside])
    assert a == pytest.approx(b, abs=5e-3)


def test_pseudo_ball_volume():
    ball = geo.PseudoHyperbolicBall(np.array([0.5, 0.2j]), 0.3)
    cloud = sample_pseudo_ball(ball, 20_000, 1)
    assert np.all(ball.contains(cloud.points))
    ref = sample_ball(2, 400_000, 8)
    frac = ref.weights[ball.contains(ref.points)].sum()
    assert cloud.weights.sum() == pytest.approx(frac, rel=0.05)


def test_ray_integral_examples(rng):
    z = np.array([0.3 + 0.2j, -0.1j])
    assert ray_integral(Z1, z) == pytest.approx(z[0])
    mono = PowerSeries.monomial(2, (2, 1))
    assert ray_integral(mono, z) == pytest.approx(mono.eval(z) / 3)
    w0 = np.array([0.7, 0.3j])

    class RadialOfLog(LogKernel):
        def eval(self, zz):
            return LogKernel.radial(self, zz)

    h = RadialOfLog(w0)
    assert ray_integral(h, z) == pytest.approx(np.log(1 / (1 - geo.inner(z, w0))), abs=1e-9)
    with pytest.raises(ContractError):
        ray_integral(PowerSeries.constant(2, 1), z)


def test_ray_integral_paths_agree(rng):
    for _ in range(10):
        p = random_polynomial(2, 8, rng)
        p = p - p.value_at_origin
        if not p.terms:
            continue

        class Opaque(type(Z1).__mro__[1]):
            n = 2

            def eval(self, zz, p=p):
                return p.eval(zz)

        z = np.array([0.4 - 0.1j, 0.2 + 0.5j])
        assert ray_integral(Opaque(), z) == pytest.approx(ray_integral(p, z), rel=1e-9, abs=1e-12)


def test_kernel_transform_examples():
    cloud = sample_ball(2, 100_000, 6)
    zero = kernel_transform(lambda w: np.zeros(len(w)), 1.0, np.zeros(2), cloud)
    assert zero.value == 0
    at0 = kernel_transform(ones, 1.0, np.zeros(2), cloud)
    assert abs(at0.value - 1 / 3) <= 3 * at0.stderr
    near = kernel_transform(ones, 1.0, np.array([0.9, 0]), cloud)
    assert near.value >= at0.value
    with pytest.raises(ContractError):
        kernel_transform(ones, -1.0, np.zeros(2), cloud)
