"""
Tests the cap and band samplers against rejection sampling and the analytic polar angle distribution
"""

from __future__ import annotations

from math import cos, pi, radians

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import betainc
from scipy.stats import beta, ks_2samp, kstest

from src.core.core import NumericalError, RngStream
from src.core.sphere import (BandSpec, CapSpec, _lower_inv_cdf, angle_between, beta_cdf, beta_inv_cdf, beta_pdf,
                             canonical_pole, cap_mean_cosine, great_circle_interpolate, max_cap_distance,
                             polar_angle_cdf, project_to_cap, uniform_sphere)


def rejection_cap(rng: RngStream, spec: CapSpec, size: int) -> np.ndarray:
    points = uniform_sphere(rng, spec.dim, size, spec.radius)
    return points[angle_between(points, spec.pole) <= spec.half_angle]


def rejection_angles(rng: RngStream, dim: int, lower: float, upper: float, size: int,
                     chunk: int = 10 ** 6) -> np.ndarray:
    """Angles to the pole of uniform sphere points kept when between the lower and upper angle"""
    angles = []
    while sum(len(chunk_angles) for chunk_angles in angles) < size:
        chunk_angles = angle_between(uniform_sphere(rng, dim, chunk), canonical_pole(dim))
        angles.append(chunk_angles[(lower <= chunk_angles) & (chunk_angles <= upper)])
    return np.concatenate(angles)[:size]


@pytest.mark.parametrize('dim, half_angle', [(2, 60), (3, 60), (5, 90), (10, 120)])
def test_cap_matches_rejection(dim, half_angle):
    spec = CapSpec(dim, radians(half_angle))
    reference = rejection_cap(RngStream(0, 1), spec, 40000)
    samples = spec.sample(RngStream(0, 2), len(reference))

    angles = angle_between(samples, spec.pole)
    assert np.all(angles <= spec.half_angle + 1e-9)
    assert np.allclose(np.linalg.norm(samples, axis=1), 1)

    print(f'\nd={dim}, phi={half_angle}: {len(reference)} rejection samples')
    assert ks_2samp(angles, angle_between(reference, spec.pole)).pvalue > 1e-3
    # The direction around the pole is uniform as well
    assert ks_2samp(samples[:, 1], reference[:, 1]).pvalue > 1e-3


def test_cap_custom_pole_and_radius():
    rng = RngStream(3)
    pole = rng.normal(size=4)
    pole /= np.linalg.norm(pole)
    spec = CapSpec(4, radians(30), pole, radius=2.5)

    samples = spec.sample(rng, 5000)
    assert np.allclose(np.linalg.norm(samples, axis=1), 2.5)
    assert np.all(angle_between(samples, pole) <= radians(30) + 1e-9)
    assert spec.sample(rng).shape == (4,)


def test_band_bounds():
    spec = BandSpec(3, radians(150), radians(5))
    samples = spec.sample(RngStream(4), 5000)
    angles = np.degrees(angle_between(samples, spec.pole))
    assert np.all(angles >= 150 - 1e-7) and np.all(angles <= 155 + 1e-7)

    # On S^2 the cosine of the angle is uniform so the band splits in equal halves of cosine
    midpoint = (cos(radians(150)) + cos(radians(155))) / 2
    assert abs(np.mean(np.cos(np.radians(angles)) > midpoint) - 0.5) < 0.03


def test_full_sphere_cap():
    spec = CapSpec(3, pi)
    assert spec.cdf_bounds() == (0.0, 1.0)
    samples = spec.sample(RngStream(5), 20000)
    assert np.allclose(np.mean(samples, axis=0), 0, atol=0.03)


def test_samples_deterministic():
    spec = CapSpec(6, radians(45))
    assert np.array_equal(spec.sample(RngStream(7, 3), 100), spec.sample(RngStream(7, 3), 100))
    assert not np.array_equal(spec.sample(RngStream(7, 3), 100), spec.sample(RngStream(7, 4), 100))


def test_polar_angle_cdf():
    for angle in (0.1, 1.0, 2.0, 3.0):
        # Uniform on the circle and uniform cosine on S^2
        assert abs(polar_angle_cdf(angle, 2) - angle / pi) < 1e-12
        assert abs(polar_angle_cdf(angle, 3) - (1 - cos(angle)) / 2) < 1e-12


def test_beta_cdf_matches_quadrature():
    for a, b in ((0.5, 0.5), (1, 1), (2.5, 2.5), (4.5, 4.5), (2, 5)):
        for x in (0.01, 0.2, 0.5, 0.9):
            integral, _ = quad(lambda u: float(beta_pdf(np.asarray(u), a, b)), 0, x, epsabs=1e-13, limit=200)
            assert abs(beta_cdf(x, a, b) - integral) < 1e-7


def test_beta_inv_cdf():
    ts = np.array([0.0, 1e-12, 1e-6, 0.01, 0.3, 0.5, 0.77, 0.999, 1 - 1e-9, 1.0])
    for a in (0.5, 1.5, 4.5, 49.5):
        xs = beta_inv_cdf(ts, a, a)
        assert xs[0] == 0.0 and xs[-1] == 1.0
        assert np.allclose(xs[1:-1], beta.ppf(ts[1:-1], a, a), rtol=1e-6, atol=1e-12)
        # Tail probabilities are matched relative to their size
        assert abs(beta_cdf(xs[1], a, a) - 1e-12) < 1e-16

    assert isinstance(beta_inv_cdf(0.5, 2, 2), float)
    assert abs(beta_inv_cdf(0.5, 2, 2) - 0.5) < 1e-12


def test_beta_invalid_arguments():
    with pytest.raises(ValueError):
        beta_cdf(1.5, 1, 1)
    with pytest.raises(ValueError):
        beta_cdf(0.5, 0, 1)
    with pytest.raises(ValueError):
        beta_inv_cdf(-0.1, 1, 1)
    with pytest.raises(NumericalError):
        beta_inv_cdf(0.3, 2.5, 2.5, tolerance=0, max_iterations=1)


def test_spec_validation():
    with pytest.raises(ValueError):
        CapSpec(3, 0)
    with pytest.raises(ValueError):
        CapSpec(3, 4.0)
    with pytest.raises(ValueError):
        CapSpec(3, 1.0, radius=-1)
    with pytest.raises(ValueError):
        CapSpec(3, 1.0, np.array([1.0, 1.0, 0.0]))
    with pytest.raises(ValueError):
        CapSpec(1, 1.0)
    with pytest.raises(ValueError):
        BandSpec(3, radians(170), radians(20))


def test_spec_save_load():
    cap = CapSpec(3, radians(60), radius=1.5)
    loaded = CapSpec.load(cap.save())
    assert abs(loaded.half_angle - cap.half_angle) < 1e-12 and loaded.radius == 1.5
    assert np.array_equal(loaded.pole, cap.pole)

    band = BandSpec(3, radians(30), radians(5))
    loaded = BandSpec.load(band.save())
    assert abs(loaded.start_angle - band.start_angle) < 1e-12 and abs(loaded.width - band.width) < 1e-12


def test_angle_between():
    assert abs(angle_between(np.array([1.0, 0]), np.array([0, 2.0])) - pi / 2) < 1e-12
    assert angle_between(np.array([1.0, 1.0]), np.array([2.0, 2.0])) < 1e-7
    assert abs(angle_between(np.array([1.0, 0]), np.array([-1.0, 0])) - pi) < 1e-12
    assert angle_between(np.eye(3), np.array([1.0, 0, 0])).shape == (3,)
    with pytest.raises(ValueError):
        angle_between(np.zeros(3), np.ones(3))


def test_great_circle_interpolate():
    w_a, w_b = np.array([1.0, 0, 0]), np.array([0, 1.0, 0])
    assert np.allclose(great_circle_interpolate(w_a, w_b, 0), w_a)
    assert np.allclose(great_circle_interpolate(w_a, w_b, 1), w_b)

    middle = great_circle_interpolate(w_a, w_b, 0.5)
    assert abs(np.linalg.norm(middle) - 1) < 1e-12
    assert abs(angle_between(middle, w_a) - angle_between(middle, w_b)) < 1e-12
    assert abs(angle_between(great_circle_interpolate(w_a, w_b, 0.25), w_a) - pi / 8) < 1e-12

    with pytest.raises(ValueError):
        great_circle_interpolate(w_a, -w_a, 0.5)
    with pytest.raises(ValueError):
        great_circle_interpolate(w_a, w_b, 1.5)


def test_project_to_cap():
    spec = CapSpec(3, radians(60))
    inside = np.array([cos(radians(30)), 0.5, 0])
    projected, degenerate = project_to_cap(inside, spec)
    assert np.allclose(projected, inside) and not degenerate

    outside = np.array([0, 0, 1.0])
    projected, degenerate = project_to_cap(outside, spec)
    assert not degenerate
    assert abs(angle_between(projected, spec.pole) - radians(60)) < 1e-12
    assert abs(angle_between(projected, outside) - radians(30)) < 1e-12

    projected, degenerate = project_to_cap(-spec.pole, spec)
    assert degenerate
    assert abs(angle_between(projected, spec.pole) - radians(60)) < 1e-12
    assert abs(np.linalg.norm(projected) - 1) < 1e-12


def test_cap_distances():
    assert abs(max_cap_distance(radians(30)) - 1) < 1e-12
    assert max_cap_distance(pi / 2) == 4
    assert max_cap_distance(pi) == 4

    # On S^2 the cosine is uniform on [cos phi, 1]
    for half_angle in (radians(20), radians(90), radians(150)):
        assert abs(cap_mean_cosine(half_angle, 3) - (1 + cos(half_angle)) / 2) < 1e-8
    assert abs(cap_mean_cosine(pi, 7)) < 1e-8


@pytest.mark.parametrize('half_angle', [30, 60, 120])
def test_cap_ks_statistic(half_angle):
    spec = CapSpec(3, radians(half_angle))
    samples = angle_between(spec.sample(RngStream(10, 1), 10 ** 5), spec.pole)
    reference = rejection_angles(RngStream(10, 2), 3, 0, spec.half_angle, 10 ** 5)
    statistic = ks_2samp(samples, reference).statistic
    print(f'\nphi={half_angle}: KS statistic {statistic:.5f}')
    assert statistic < 0.01


@pytest.mark.parametrize('start, width', [(30, 30), (170, 5)])
def test_band_ks_statistic(start, width):
    spec = BandSpec(3, radians(start), radians(width))
    samples = angle_between(spec.sample(RngStream(11, 1), 10 ** 5), spec.pole)
    assert np.all(samples >= spec.lower_angle - 1e-9) and np.all(samples <= spec.upper_angle + 1e-9)

    reference = rejection_angles(RngStream(11, 2), 3, spec.lower_angle, spec.upper_angle, 10 ** 5)
    statistic = ks_2samp(samples, reference).statistic
    print(f'\nband ({start}, {width}): KS statistic {statistic:.5f}')
    assert statistic < 0.01


@pytest.mark.parametrize('dim', [2, 3, 10])
def test_full_sphere_polar_marginal(dim):
    # The polar variable (1 - cos angle) / 2 of a uniform sphere point is Beta((d - 1) / 2, (d - 1) / 2)
    spec = CapSpec(dim, pi)
    u = (1 - np.cos(angle_between(spec.sample(RngStream(12, dim), 20000), spec.pole))) / 2
    shape = (dim - 1) / 2
    assert kstest(u, beta(shape, shape).cdf).pvalue > 1e-3


def test_full_sphere_mean_high_dim():
    size = 10 ** 5
    samples = CapSpec(10, pi).sample(RngStream(13), size)
    assert np.all(np.abs(np.linalg.norm(samples, axis=1) - 1) <= 1e-9)
    assert np.all(np.abs(samples.mean(axis=0)) < 4 / np.sqrt(size))


@pytest.mark.parametrize('dim, half_angle', [(3, 45), (7, 120)])
def test_band_from_pole_matches_cap(dim, half_angle):
    cap = CapSpec(dim, radians(half_angle))
    band = BandSpec(dim, 0, radians(half_angle))
    assert band.cdf_bounds() == cap.cdf_bounds()
    assert np.array_equal(band.sample(RngStream(14, dim), 500), cap.sample(RngStream(14, dim), 500))


def test_project_to_cap_is_nearest():
    rng = RngStream(15)
    spec = CapSpec(4, radians(50))
    candidates = spec.sample(rng, 20000)
    for target in uniform_sphere(rng, 4, 20):
        projected, _ = project_to_cap(target, spec)
        assert angle_between(projected, spec.pole) <= spec.half_angle + 1e-9
        nearest = np.min(np.sum((candidates - target) ** 2, axis=1))
        assert np.sum((projected - target) ** 2) <= nearest + 1e-12


@pytest.mark.parametrize('a', [1, 1.5, 5, 32])
def test_lower_inv_cdf_round_trip(a):
    targets = np.concatenate(([1e-10, 1e-6], np.linspace(0.001, 0.5, 200)))
    xs = _lower_inv_cdf(targets, a, a, 1e-12, 200)
    assert np.all((0 <= xs) & (xs <= 0.5 + 1e-12))
    assert np.all(np.abs(betainc(a, a, xs) - targets) <= 1e-10)
    assert np.all(np.diff(xs) >= 0)
