"""
Hyperspherical caps and bands: exact sampling through the Beta distribution of the polar coordinate and spherical
    utility functions (angles, great circle interpolation and projection onto a cap)
"""

from __future__ import annotations

from math import cos, degrees, pi, radians
from typing import TYPE_CHECKING

import numpy as np
from scipy.integrate import quad
from scipy.special import betainc, betaln, xlog1py, xlogy

from src.core.core import NumericalError

if TYPE_CHECKING:
    from typing import Any, Dict, Optional, Tuple, Union

    from src.core.core import RngStream


def canonical_pole(dim: int) -> np.ndarray:
    """
    The default pole of a cap, the first canonical axis

    :param dim: The ambient dimension
    :return: The unit vector e_1
    """
    pole = np.zeros(dim)
    pole[0] = 1.0
    return pole


def _check_pole(dim: int, pole: Optional[np.ndarray]) -> np.ndarray:
    if dim < 2:
        raise ValueError(f'Sphere dimension must be at least 2, got {dim}')
    if pole is None:
        return canonical_pole(dim)

    pole = np.asarray(pole, dtype=np.float64)
    if pole.shape != (dim,):
        raise ValueError(f'Pole shape {pole.shape} does not match dimension {dim}')
    if abs(np.linalg.norm(pole) - 1) > 1e-12:
        raise ValueError(f'Pole must be a unit vector, norm is {np.linalg.norm(pole)}')
    return pole


class CapSpec:
    """
    Hyperspherical cap of points on the sphere of a radius within the half angle of the pole
    """

    def __init__(self, dim: int, half_angle: float, pole: Optional[np.ndarray] = None, radius: float = 1.0):
        self.dim = dim
        self.pole = _check_pole(dim, pole)

        if not 0 < half_angle <= pi + 1e-12:
            raise ValueError(f'Cap half angle must be in (0, pi], got {half_angle}')
        if radius <= 0:
            raise ValueError(f'Cap radius must be positive, got {radius}')
        self.half_angle = min(half_angle, pi)
        self.radius = radius

        self._cdf_bounds: Optional[Tuple[float, float]] = None

    @property
    def lower_angle(self) -> float:
        return 0.0

    @property
    def upper_angle(self) -> float:
        return self.half_angle

    def cdf_bounds(self) -> Tuple[float, float]:
        """
        The polar Beta cdf interval sampled by the cap, cached as it is the same for every draw

        :return: Tuple of the lower and upper cdf values
        """
        if self._cdf_bounds is None:
            self._cdf_bounds = polar_cdf_bounds(self.dim, self.lower_angle, self.upper_angle)
        return self._cdf_bounds

    def sample(self, rng: RngStream, size: Optional[int] = None) -> np.ndarray:
        return sample_cap(rng, self, size)

    def with_radius(self, radius: float) -> CapSpec:
        return CapSpec(self.dim, self.half_angle, self.pole, radius)

    def save(self) -> Dict[str, Any]:
        """
        Saves the cap attributes to a dictionary, angles are in degrees

        :return: Dictionary representing the cap
        """
        return {'dim': self.dim, 'half angle': degrees(self.half_angle), 'pole': self.pole.tolist(),
                'radius': self.radius}

    @staticmethod
    def load(cap_spec: Dict[str, Any]) -> CapSpec:
        """
        Loads a cap from its saved attributes

        :param cap_spec: Dictionary of the cap attributes
        :return: A new cap
        """
        return CapSpec(cap_spec['dim'], radians(cap_spec['half angle']),
                       np.asarray(cap_spec['pole']) if 'pole' in cap_spec else None, cap_spec.get('radius', 1.0))

    def __str__(self) -> str:
        return f'Cap - dim: {self.dim}, half angle: {degrees(self.half_angle):.1f} deg, radius: {self.radius}'


class BandSpec:
    """
    Hyperspherical band of points whose angle to the pole is between the start angle and start angle plus width
    """

    def __init__(self, dim: int, start_angle: float, width: float, pole: Optional[np.ndarray] = None,
                 radius: float = 1.0):
        self.dim = dim
        self.pole = _check_pole(dim, pole)

        if start_angle < 0 or width <= 0 or start_angle + width > pi + 1e-12:
            raise ValueError(f'Band start angle {start_angle} and width {width} must satisfy 0 <= start, 0 < width '
                             f'and start + width <= pi')
        if radius <= 0:
            raise ValueError(f'Band radius must be positive, got {radius}')
        self.start_angle = start_angle
        self.width = width
        self.radius = radius

        self._cdf_bounds: Optional[Tuple[float, float]] = None

    @property
    def lower_angle(self) -> float:
        return self.start_angle

    @property
    def upper_angle(self) -> float:
        return min(self.start_angle + self.width, pi)

    def cdf_bounds(self) -> Tuple[float, float]:
        if self._cdf_bounds is None:
            self._cdf_bounds = polar_cdf_bounds(self.dim, self.lower_angle, self.upper_angle)
        return self._cdf_bounds

    def sample(self, rng: RngStream, size: Optional[int] = None) -> np.ndarray:
        return sample_band(rng, self, size)

    def with_radius(self, radius: float) -> BandSpec:
        return BandSpec(self.dim, self.start_angle, self.width, self.pole, radius)

    def save(self) -> Dict[str, Any]:
        return {'dim': self.dim, 'start angle': degrees(self.start_angle), 'width': degrees(self.width),
                'pole': self.pole.tolist(), 'radius': self.radius}

    @staticmethod
    def load(band_spec: Dict[str, Any]) -> BandSpec:
        return BandSpec(band_spec['dim'], radians(band_spec['start angle']), radians(band_spec['width']),
                        np.asarray(band_spec['pole']) if 'pole' in band_spec else None, band_spec.get('radius', 1.0))

    def __str__(self) -> str:
        return f'Band - dim: {self.dim}, start angle: {degrees(self.start_angle):.1f} deg, ' \
               f'width: {degrees(self.width):.1f} deg, radius: {self.radius}'


def beta_cdf(x, a: float, b: float):
    """
    Cumulative distribution function of the Beta distribution (the regularised incomplete beta function)

    :param x: Value or array of values in [0, 1]
    :param a: First shape parameter
    :param b: Second shape parameter
    :return: I_x(a, b)
    """
    if a <= 0 or b <= 0:
        raise ValueError(f'Beta parameters must be positive, got a={a}, b={b}')
    x_array = np.asarray(x, dtype=np.float64)
    if np.any((x_array < 0) | (x_array > 1)) or np.any(np.isnan(x_array)):
        raise ValueError(f'Beta cdf argument must be in [0, 1]')
    return betainc(a, b, x_array) if x_array.ndim else float(betainc(a, b, x_array))


def beta_pdf(x: np.ndarray, a: float, b: float) -> np.ndarray:
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.exp(xlogy(a - 1, x) + xlog1py(b - 1, -x) - betaln(a, b))


def _lower_inv_cdf(targets: np.ndarray, a: float, b: float, tolerance: float, max_iterations: int) -> np.ndarray:
    """Bracketed Newton inverse for probabilities in [0, 1/2], the tolerance is relative to the tail mass"""
    lower, upper = np.zeros_like(targets), np.ones_like(targets)
    x = np.full_like(targets, 0.5)
    tail_tolerance = tolerance * np.minimum(1.0, 2 * targets)

    for _ in range(max_iterations):
        error = betainc(a, b, x) - targets
        converged = (np.abs(error) <= tail_tolerance) | (upper - lower <= 4 * np.finfo(np.float64).eps * x)
        converged |= targets == 0
        if np.all(converged):
            break

        lower = np.where(error < 0, x, lower)
        upper = np.where(error > 0, x, upper)
        with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
            newton = x - error / beta_pdf(x, a, b)
        inside = np.isfinite(newton) & (lower < newton) & (newton < upper)
        x = np.where(converged, x, np.where(inside, newton, 0.5 * (lower + upper)))
    else:
        raise NumericalError(f'Beta inverse cdf did not converge after {max_iterations} iterations '
                             f'(a={a}, b={b})')

    return np.where(targets == 0, 0.0, x)


def beta_inv_cdf(t, a: float, b: float, tolerance: float = 1e-12, max_iterations: int = 200):
    """
    Inverse of the Beta cdf using a bracketed bisection refined by Newton steps, the tolerance is absolute in the
        body of the distribution and relative to the tail mass in the tails

    Probabilities above 1/2 are inverted through the complementary distribution, 1 - I_x(a, b) = I_{1-x}(b, a), so
        the upper tail keeps its relative accuracy

    :param t: Probability or array of probabilities in [0, 1]
    :param a: First shape parameter
    :param b: Second shape parameter
    :param tolerance: The cdf tolerance
    :param max_iterations: The iteration cap
    :return: x with beta_cdf(x, a, b) = t
    """
    if a <= 0 or b <= 0:
        raise ValueError(f'Beta parameters must be positive, got a={a}, b={b}')
    t_array = np.asarray(t, dtype=np.float64)
    if np.any((t_array < 0) | (t_array > 1)) or np.any(np.isnan(t_array)):
        raise ValueError(f'Beta inverse cdf argument must be in [0, 1]')

    targets = np.atleast_1d(t_array)
    upper_tail = targets > 0.5
    x = np.empty_like(targets)
    x[~upper_tail] = _lower_inv_cdf(targets[~upper_tail], a, b, tolerance, max_iterations)
    x[upper_tail] = 1 - _lower_inv_cdf(1 - targets[upper_tail], b, a, tolerance, max_iterations)
    return x.reshape(t_array.shape) if t_array.ndim else float(x[0])


def polar_cdf_bounds(dim: int, lower_angle: float, upper_angle: float) -> Tuple[float, float]:
    """
    Beta cdf values bounding the polar coordinate for angles between the lower and upper angle from the pole

    With r^2 = 2R^2(1 - cos angle), the constraint on U is U <= r^2 / 4R^2 = (1 - cos angle) / 2

    :param dim: The ambient dimension
    :param lower_angle: Minimum angle to the pole
    :param upper_angle: Maximum angle to the pole
    :return: Tuple of F((1 - cos lower) / 2) and F((1 - cos upper) / 2)
    """
    shape = (dim - 1) / 2
    lower_u = min(max((1 - cos(lower_angle)) / 2, 0.0), 1.0)
    upper_u = min(max((1 - cos(upper_angle)) / 2, 0.0), 1.0)
    return beta_cdf(lower_u, shape, shape), beta_cdf(upper_u, shape, shape)


def householder_to_pole(points: np.ndarray, pole: np.ndarray) -> np.ndarray:
    """
    Reflects points from the canonical frame (pole e_1) to the frame with the given pole

    :param points: Array of points (size x dim)
    :param pole: The unit pole
    :return: The reflected points
    """
    direction = canonical_pole(len(pole)) - pole
    norm = np.linalg.norm(direction)
    if norm < 1e-15:
        return points
    direction /= norm
    return points - 2 * np.outer(points @ direction, direction)


def _sample_polar_region(rng: RngStream, dim: int, radius: float, pole: np.ndarray, cdf_bounds: Tuple[float, float],
                         size: Optional[int]) -> np.ndarray:
    """
    Samples uniformly on the sphere region whose polar cdf lies between the bounds

    The polar coordinate Z = R(2U - 1) with U ~ Beta((d-1)/2, (d-1)/2) restricted to U below the upper bound is
        concentrated near -R so it is negated to place the samples around the pole
    """
    num_samples = 1 if size is None else size
    shape = (dim - 1) / 2

    lower_cdf, upper_cdf = cdf_bounds
    u = beta_inv_cdf(rng.uniform(lower_cdf, upper_cdf, num_samples), shape, shape)
    z = radius * (2 * u - 1)

    orthogonal = rng.normal(size=(num_samples, dim - 1))
    orthogonal /= np.linalg.norm(orthogonal, axis=1, keepdims=True)
    orthogonal *= np.sqrt(np.clip(radius ** 2 - z ** 2, 0, None))[:, np.newaxis]

    points = householder_to_pole(np.column_stack((-z, orthogonal)), pole)
    return points[0] if size is None else points


def sample_cap(rng: RngStream, spec: CapSpec, size: Optional[int] = None) -> np.ndarray:
    """
    Samples uniformly from a hyperspherical cap

    :param rng: The random number stream
    :param spec: The cap
    :param size: Number of samples, if None then a single vector is returned
    :return: Vector or array of vectors on the cap
    """
    return _sample_polar_region(rng, spec.dim, spec.radius, spec.pole, spec.cdf_bounds(), size)


def sample_band(rng: RngStream, spec: BandSpec, size: Optional[int] = None) -> np.ndarray:
    """
    Samples uniformly from a hyperspherical band

    :param rng: The random number stream
    :param spec: The band
    :param size: Number of samples, if None then a single vector is returned
    :return: Vector or array of vectors on the band
    """
    return _sample_polar_region(rng, spec.dim, spec.radius, spec.pole, spec.cdf_bounds(), size)


def angle_between(u: np.ndarray, w: np.ndarray) -> Union[float, np.ndarray]:
    """
    Angle between two vectors (or between the rows of an array and a vector)

    :param u: Vector or array of row vectors
    :param w: Vector
    :return: The angle in radians in [0, pi]
    """
    u, w = np.asarray(u, dtype=np.float64), np.asarray(w, dtype=np.float64)
    u_norm, w_norm = np.linalg.norm(u, axis=-1), np.linalg.norm(w, axis=-1)
    if np.any(u_norm == 0) or np.any(w_norm == 0):
        raise ValueError('Angle is undefined for a zero vector')

    cosine = np.clip(np.sum(u * w, axis=-1) / (u_norm * w_norm), -1.0, 1.0)
    angle = np.arccos(cosine)
    return float(angle) if np.ndim(angle) == 0 else angle


def great_circle_interpolate(w_a: np.ndarray, w_b: np.ndarray, alpha: float) -> np.ndarray:
    """
    Spherical linear interpolation between two unit vectors

    :param w_a: The start unit vector
    :param w_b: The end unit vector
    :param alpha: Fraction of the great circle arc in [0, 1]
    :return: The unit vector at the fraction alpha of the arc
    """
    if not 0 <= alpha <= 1:
        raise ValueError(f'Interpolation fraction must be in [0, 1], got {alpha}')
    omega = angle_between(w_a, w_b)
    if pi - omega < 1e-9:
        raise ValueError('Great circle between antipodal vectors is not unique')
    if omega < 1e-15:
        return np.array(w_a, dtype=np.float64)

    interpolant = (np.sin((1 - alpha) * omega) * w_a + np.sin(alpha * omega) * w_b) / np.sin(omega)
    return interpolant / np.linalg.norm(interpolant)


def project_to_cap(w_star: np.ndarray, spec: CapSpec) -> Tuple[np.ndarray, bool]:
    """
    Nearest point of the cap to the target vector

    :param w_star: The target unit vector
    :param spec: The cap
    :return: Tuple of the nearest cap point and if the target was antipodal to the pole (the nearest point is then
        any point on the boundary circle and a canonical one is returned)
    """
    w_star = np.asarray(w_star, dtype=np.float64)
    direction = w_star / np.linalg.norm(w_star)
    if angle_between(direction, spec.pole) <= spec.half_angle:
        return spec.radius * direction, False

    perpendicular = direction - (direction @ spec.pole) * spec.pole
    degenerate = np.linalg.norm(perpendicular) < 1e-12
    if degenerate:
        # First canonical axis that is not parallel to the pole
        for axis in np.eye(spec.dim):
            perpendicular = axis - (axis @ spec.pole) * spec.pole
            if np.linalg.norm(perpendicular) > 1e-6:
                break
    perpendicular /= np.linalg.norm(perpendicular)

    return spec.radius * (cos(spec.half_angle) * spec.pole + np.sin(spec.half_angle) * perpendicular), degenerate


def max_cap_distance(half_angle: float) -> float:
    """
    Maximum squared distance between two unit vectors of a cap, 2 - 2cos(min(2 phi, pi))

    :param half_angle: The cap half angle
    :return: The squared cap diameter
    """
    return 2 - 2 * cos(min(2 * half_angle, pi))


def polar_angle_cdf(angle: float, dim: int) -> float:
    """
    Analytic cdf of the angle to the pole for a uniform point on the full sphere

    :param angle: The angle
    :param dim: The ambient dimension
    :return: Probability that the angle is at most the given angle
    """
    shape = (dim - 1) / 2
    return beta_cdf(min(max((1 - cos(angle)) / 2, 0.0), 1.0), shape, shape)


def cap_mean_cosine(half_angle: float, dim: int) -> float:
    """
    Expected cosine of the angle to the pole for a uniform point on a cap, the centroid of the unit cap is this value
        times the pole

    :param half_angle: The cap half angle
    :param dim: The ambient dimension
    :return: E[cos angle]
    """
    shape = (dim - 1) / 2
    upper_u = (1 - cos(half_angle)) / 2
    mass = beta_cdf(upper_u, shape, shape)
    # cos angle = 1 - 2U with U the polar Beta variable restricted below upper_u
    moment, _ = quad(lambda u: (1 - 2 * u) * float(beta_pdf(np.asarray(u), shape, shape)), 0, upper_u, limit=200)
    return moment / mass


def uniform_sphere(rng: RngStream, dim: int, size: int, radius: float = 1.0) -> np.ndarray:
    """
    Uniform samples on the full sphere from normalised Gaussian vectors, used as the rejection sampling reference

    :param rng: The random number stream
    :param dim: The ambient dimension
    :param size: The number of samples
    :param radius: The sphere radius
    :return: Array of samples (size x dim)
    """
    points = rng.normal(size=(size, dim))
    return radius * points / np.linalg.norm(points, axis=1, keepdims=True)
