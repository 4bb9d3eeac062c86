"""Geometry of the Grassmann manifold of d-dimensional subspaces of R^n.

A subspace is carried as an orthonormal n x d basis (any right-orthogonal
factor represents the same point). Tangents at a pole are coordinate
matrices a of shape (n-d) x d in the chart of the pole's frozen
orthonormal complement: the horizontal vector is delta = complement @ a.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import CutLocus, DimensionMismatch, NoConvergence, NotOrthonormal
from .linalg import check_finite, orthonormal_complement, qr_thin, svd_thin

BASIS_TOL = 1e-8
_CHART_SINGULAR_TOL = 1e-10


def check_subspace(basis, tol=BASIS_TOL):
    basis = check_finite(basis)
    n, d = basis.shape
    if d >= n:
        raise DimensionMismatch("subspace dimension must be below ambient")
    if np.max(np.abs(basis.T @ basis - np.eye(d))) > tol:
        raise NotOrthonormal("basis columns are not orthonormal")
    return basis


@dataclass(frozen=True)
class GrassPole:
    """A subspace basis together with its frozen orthonormal complement.

    The complement fixes the tangent chart; rebuilding it later would
    silently change every tangent coordinate computed against this pole.
    """

    basis: np.ndarray
    complement: np.ndarray

    @classmethod
    def from_basis(cls, basis):
        basis = check_subspace(basis)
        return cls(basis=basis, complement=orthonormal_complement(basis))

    @property
    def n(self):
        return self.basis.shape[0]

    @property
    def d(self):
        return self.basis.shape[1]


def subspace_from_span(m):
    """Orthonormalize an n x d spanning set (raises RankDeficient)."""
    q, _ = qr_thin(m)
    return q


def principal_angles(u1, u2):
    """Principal angles between two subspaces, sorted nondecreasing.

    Cosines come from the SVD of u1^T u2; angles below 45 degrees are
    recomputed from the sines (SVD of the residual u2 - u1 u1^T u2),
    which keeps small angles accurate instead of flooring at the acos
    resolution near 1.
    """
    u1, u2 = check_subspace(u1), check_subspace(u2)
    if u1.shape != u2.shape:
        raise DimensionMismatch("subspace shapes differ")
    m = u1.T @ u2
    cosines = np.clip(svd_thin(m).sigma, 0.0, 1.0)  # nonincreasing
    angles = np.arccos(cosines)
    small = cosines**2 > 0.5
    if np.any(small):
        sines = np.sort(np.clip(svd_thin(u2 - u1 @ m).sigma, 0.0, 1.0))
        angles[small] = np.arcsin(sines[small])
    return angles


def geodesic_distance(u1, u2):
    """Arc-length distance sqrt(sum of squared principal angles)."""
    return float(np.linalg.norm(principal_angles(u1, u2)))


def max_distance(d):
    """Largest achievable geodesic distance on G(n, d)."""
    return np.pi * np.sqrt(d) / 2.0


def projection_matrix(u):
    u = check_subspace(u)
    return u @ u.T


def grassmann_log(pole: GrassPole, target) -> np.ndarray:
    """Tangent coordinates a with exp(pole, a) spanning the target."""
    target = check_subspace(target)
    up = pole.basis
    if target.shape != up.shape:
        raise DimensionMismatch("subspace shapes differ")
    m = up.T @ target
    if svd_thin(m).sigma[-1] < _CHART_SINGULAR_TOL:
        raise CutLocus("target at or beyond the chart boundary")
    b = (target - up @ m) @ np.linalg.inv(m)
    res = svd_thin(b)
    delta = (res.u * np.arctan(res.sigma)) @ res.vt
    return pole.complement.T @ delta


def grassmann_exp(pole: GrassPole, a) -> np.ndarray:
    """Subspace reached from the pole along tangent coordinates a."""
    a = check_finite(a)
    n, d = pole.basis.shape
    if a.shape != (n - d, d):
        raise DimensionMismatch(f"tangent must be {(n - d, d)}, got {a.shape}")
    if not np.any(a):
        return pole.basis.copy()
    delta = pole.complement @ a
    res = svd_thin(delta)
    basis = (pole.basis @ res.vt.T * np.cos(res.sigma)) @ res.vt + (
        res.u * np.sin(res.sigma)
    ) @ res.vt
    return subspace_from_span(basis)


def frechet_mean(samples, max_iter=200, tol=1e-9) -> GrassPole:
    """Karcher mean by iterating log-average-exp with full steps."""
    if len(samples) == 0:
        raise ValueError("need at least one sample")
    samples = [check_subspace(s) for s in samples]
    mu = GrassPole.from_basis(samples[0])
    if len(samples) == 1:
        return mu
    for _ in range(max_iter):
        vbar = sum(grassmann_log(mu, s) for s in samples) / len(samples)
        if np.linalg.norm(vbar) < tol:
            return mu
        mu = GrassPole.from_basis(grassmann_exp(mu, vbar))
    if np.linalg.norm(vbar) > 1e-6:
        raise NoConvergence("Karcher iteration did not settle")
    return mu


def procrustes_align(r, reference):
    """Rotate the basis r to best match the reference basis in Frobenius norm."""
    r, reference = check_subspace(r), check_subspace(reference)
    if r.shape != reference.shape:
        raise DimensionMismatch("subspace shapes differ")
    res = svd_thin(r.T @ reference)
    return r @ (res.u @ res.vt)
