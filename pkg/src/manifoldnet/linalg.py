"""Dense linear-algebra kernels for small matrices.

Householder QR, one-sided Jacobi SVD and an orthonormal-complement
builder, sized for tall-thin problems (n up to ~1024, a handful of
columns). Everything works on float64 numpy arrays and is pure.
"""

import numpy as np

from .exceptions import DimensionMismatch, NoConvergence, NotOrthonormal, RankDeficient

# Central tolerances; property tests refer to these.
ORTHO_TOL = 1e-10
RECON_TOL = 1e-9
RANK_TOL = 1e-12

_JACOBI_MAX_SWEEPS = 100
_JACOBI_TOL = 1e-12


def check_finite(a):
    a = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite entries in matrix")
    return a


def _householder_vectors(a):
    """Reduce a (m x k) to upper-triangular R, returning the reflector list."""
    r = a.copy()
    m, k = r.shape
    reflectors = []
    for j in range(k):
        x = r[j:, j].copy()
        normx = np.linalg.norm(x)
        if normx == 0.0:
            reflectors.append(None)
            continue
        alpha = -np.sign(x[0]) * normx if x[0] != 0.0 else -normx
        v = x.copy()
        v[0] -= alpha
        vnorm = np.linalg.norm(v)
        if vnorm < RANK_TOL * max(1.0, normx):
            reflectors.append(None)
            continue
        v /= vnorm
        r[j:, j:] -= 2.0 * np.outer(v, v @ r[j:, j:])
        reflectors.append(v)
    return r, reflectors


def _apply_reflectors(reflectors, b):
    """Compute Q @ b where Q is the product of the stored reflectors."""
    q = b.copy()
    for j in range(len(reflectors) - 1, -1, -1):
        v = reflectors[j]
        if v is None:
            continue
        q[j:, :] -= 2.0 * np.outer(v, v @ q[j:, :])
    return q


def qr_thin(a):
    """Thin QR of a tall matrix, R forced to a nonnegative diagonal.

    Raises RankDeficient if any pivot of R drops below RANK_TOL.
    """
    a = check_finite(a)
    m, k = a.shape
    if m < k:
        raise DimensionMismatch(f"qr_thin needs m >= k, got {m}x{k}")
    r_full, reflectors = _householder_vectors(a)
    r = r_full[:k, :k].copy()
    scale = max(1.0, np.max(np.abs(a)))
    if np.any(np.abs(np.diag(r)) < RANK_TOL * scale):
        raise RankDeficient("diagonal pivot below rank tolerance")
    q = _apply_reflectors(reflectors, np.eye(m, k))
    # flip signs so diag(R) >= 0
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    q *= signs
    r = (r.T * signs).T
    r = np.triu(r)
    return q, r


def qr_full_q(a):
    """Full m x m orthogonal factor of the Householder QR of a (m x k)."""
    a = check_finite(a)
    m, k = a.shape
    if m < k:
        raise DimensionMismatch(f"need m >= k, got {m}x{k}")
    _, reflectors = _householder_vectors(a)
    return _apply_reflectors(reflectors, np.eye(m))


class SvdResult:
    """Thin SVD A = U diag(sigma) Vt with sigma sorted nonincreasing."""

    def __init__(self, u, sigma, vt):
        self.u = u
        self.sigma = sigma
        self.vt = vt

    def reconstruct(self):
        return (self.u * self.sigma) @ self.vt


def svd_thin(a):
    """Thin SVD of a (m x k, m >= k) via one-sided Jacobi on the columns."""
    a = check_finite(a)
    m, k = a.shape
    if m < k:
        raise DimensionMismatch(f"svd_thin needs m >= k, got {m}x{k}")
    w = a.copy()
    v = np.eye(k)
    for _ in range(_JACOBI_MAX_SWEEPS):
        off = 0.0
        for p in range(k - 1):
            for q in range(p + 1, k):
                alpha = w[:, p] @ w[:, p]
                beta = w[:, q] @ w[:, q]
                gamma = w[:, p] @ w[:, q]
                if alpha * beta == 0.0:
                    continue
                rel = abs(gamma) / np.sqrt(alpha * beta)
                off = max(off, rel)
                if rel <= _JACOBI_TOL:
                    continue
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                wp = w[:, p].copy()
                w[:, p] = c * wp - s * w[:, q]
                w[:, q] = s * wp + c * w[:, q]
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
        if off <= _JACOBI_TOL:
            break
    else:
        raise NoConvergence("Jacobi SVD did not converge in 100 sweeps")

    sigma = np.linalg.norm(w, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    w = w[:, order]
    v = v[:, order]

    scale = max(1.0, np.max(np.abs(a))) if a.size else 1.0
    u = np.zeros((m, k))
    null_cols = []
    for j in range(k):
        if sigma[j] > RANK_TOL * scale:
            u[:, j] = w[:, j] / sigma[j]
        else:
            sigma[j] = 0.0
            null_cols.append(j)
    if null_cols:
        _fill_null_columns(u, null_cols)
    return SvdResult(u, sigma, v.T)


def _fill_null_columns(u, null_cols):
    """Deterministically extend the nonzero left singular vectors to an
    orthonormal set, walking identity columns in order."""
    m = u.shape[0]
    have = [j for j in range(u.shape[1]) if j not in null_cols]
    basis = [u[:, j] for j in have]
    idx = 0
    for j in null_cols:
        while True:
            if idx >= m:
                raise RankDeficient("cannot complete orthonormal set")
            cand = np.zeros(m)
            cand[idx] = 1.0
            idx += 1
            for b in basis:
                cand -= (b @ cand) * b
            nrm = np.linalg.norm(cand)
            if nrm > 0.5:  # identity column mostly outside current span
                cand /= nrm
                u[:, j] = cand
                basis.append(cand)
                break


def orthonormal_complement(u):
    """Orthonormal basis of the complement of the column space of u.

    Deterministic: built from the full Householder Q of u, with each
    complement column sign-fixed on its first nonzero entry.
    """
    u = check_finite(u)
    n, d = u.shape
    if np.max(np.abs(u.T @ u - np.eye(d))) > 1e-8:
        raise NotOrthonormal("input columns are not orthonormal")
    qfull = qr_full_q(u)
    comp = qfull[:, d:].copy()
    for j in range(comp.shape[1]):
        col = comp[:, j]
        nz = np.nonzero(np.abs(col) > RANK_TOL)[0]
        if nz.size and col[nz[0]] < 0:
            comp[:, j] = -col
    return comp
