"""Geometry of the unit hypersphere.

Probability distributions are carried to the sphere by the square-root
parametrization; geodesics, tangent projection and the exp/log maps use
the standard round-metric closed forms. Points and tangents are plain
1-D float64 arrays; tangents are always relative to an explicit pole.
"""

import numpy as np

from .exceptions import AntipodalPoint, DimensionMismatch, TangencyViolated

UNIT_TOL = 1e-12
TANGENT_TOL = 1e-10
_SMALL_ANGLE = 1e-14
_CUT_LOCUS_MARGIN = 1e-6


def _as_vector(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch("expected a 1-D vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite entries")
    return x


def check_unit(x, tol=UNIT_TOL):
    x = _as_vector(x)
    if abs(np.linalg.norm(x) - 1.0) > tol:
        raise ValueError("vector is not unit-norm")
    return x


def check_pdf(p, tol=UNIT_TOL):
    p = _as_vector(p)
    if np.any(p < 0) or abs(p.sum() - 1.0) > tol:
        raise ValueError("not a probability distribution")
    return p


def uniform_pole(c):
    """Sphere point corresponding to the uniform distribution over c classes."""
    return np.full(c, 1.0 / np.sqrt(c))


def sqrt_param(p):
    """Map a probability distribution to the nonnegative orthant of the sphere."""
    return np.sqrt(check_pdf(p))


def sphere_to_pdf(x):
    """Inverse of sqrt_param: square the coordinates."""
    return check_unit(x) ** 2


def sphere_distance(x, y):
    """Geodesic distance acos<x, y>.

    Evaluated through asin of the chord for nearby (or nearly antipodal)
    points: identical function, but accurate down to machine precision
    where the plain arccos flattens out near +-1.
    """
    x, y = _as_vector(x), _as_vector(y)
    if x.shape != y.shape:
        raise DimensionMismatch("dimension mismatch")
    dot = np.clip(x @ y, -1.0, 1.0)
    if dot >= 0.0:
        return float(2.0 * np.arcsin(min(1.0, np.linalg.norm(x - y) / 2.0)))
    return float(np.pi - 2.0 * np.arcsin(min(1.0, np.linalg.norm(x + y) / 2.0)))


def project_to_tangent(pole, v):
    """Project v onto the tangent space at the pole: (I - pp^T) v."""
    pole, v = _as_vector(pole), _as_vector(v)
    if pole.shape != v.shape:
        raise DimensionMismatch("dimension mismatch")
    return v - (pole @ v) * pole


def sphere_exp(pole, xi):
    """Exponential map: cos(||xi||) p + sin(||xi||) xi/||xi||."""
    pole = check_unit(pole)
    xi = _as_vector(xi)
    if pole.shape != xi.shape:
        raise DimensionMismatch("dimension mismatch")
    if abs(pole @ xi) > 1e-8:
        raise TangencyViolated("tangent not orthogonal to pole")
    norm = np.linalg.norm(xi)
    if norm < _SMALL_ANGLE:
        return pole.copy()
    y = np.cos(norm) * pole + np.sin(norm) * (xi / norm)
    return y / np.linalg.norm(y)


def sphere_log(pole, y):
    """Logarithm map; undefined within _CUT_LOCUS_MARGIN of the antipode."""
    pole = check_unit(pole)
    y = check_unit(y)
    if pole.shape != y.shape:
        raise DimensionMismatch("dimension mismatch")
    dist = sphere_distance(pole, y)
    if dist >= np.pi - _CUT_LOCUS_MARGIN:
        raise AntipodalPoint("log undefined near the cut locus")
    if dist < _SMALL_ANGLE:
        return np.zeros_like(pole)
    proj = project_to_tangent(pole, y - pole)
    return dist / np.linalg.norm(proj) * proj
