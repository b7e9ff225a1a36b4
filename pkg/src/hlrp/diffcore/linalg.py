"""Small dense linear algebra: one-sided Jacobi SVD and orthonormal draws."""
from __future__ import annotations

import numpy as np

from hlrp.errors import NumericError


def svd(A, tol=1e-15, max_sweeps=60):
    """Thin SVD ``A = U diag(s) V^T`` by one-sided (Hestenes) Jacobi rotations.

    Returns ``U (m, k)``, ``s (k,)`` sorted descending, ``V (n, k)`` with
    ``k = min(m, n)``.  Columns of ``U`` belonging to zero singular values are
    completed to an orthonormal set.
    """
    A = np.array(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError("svd expects a matrix")
    if not np.isfinite(A).all():
        raise NumericError("svd input")
    m, n = A.shape
    if m < n:
        V, s, U = svd(A.T, tol=tol, max_sweeps=max_sweeps)
        return U, s, V

    G = A.copy()
    V = np.eye(n)
    for _ in range(max_sweeps):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                gi, gj = G[:, i], G[:, j]
                alpha = gi @ gi
                beta = gj @ gj
                gamma = gi @ gj
                if abs(gamma) <= tol * np.sqrt(alpha * beta) or gamma == 0.0:
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                sn = c * t
                G[:, i], G[:, j] = c * gi - sn * gj, sn * gi + c * gj
                vi, vj = V[:, i].copy(), V[:, j].copy()
                V[:, i], V[:, j] = c * vi - sn * vj, sn * vi + c * vj
        if not rotated:
            break

    s = np.sqrt((G * G).sum(axis=0))
    order = np.argsort(-s, kind="stable")
    s, G, V = s[order], G[:, order], V[:, order]
    cutoff = (s[0] if n else 0.0) * max(m, n) * np.finfo(float).eps
    U = np.zeros((m, n))
    good = s > cutoff
    U[:, good] = G[:, good] / s[good]
    s = np.where(good, s, 0.0)
    if not good.all():
        U = _complete_columns(U, good)
    return U, s, V


def _complete_columns(U, good):
    """Fill the columns not flagged ``good`` so that all columns are orthonormal."""
    m = U.shape[0]
    basis = [U[:, k] for k in np.flatnonzero(good)]
    fill = []
    for e in np.eye(m):
        if len(fill) == (~good).sum():
            break
        w = e.copy()
        for _ in range(2):
            for q in basis + fill:
                w -= (q @ w) * q
        nrm = np.linalg.norm(w)
        if nrm > 1e-8:
            fill.append(w / nrm)
    U = U.copy()
    U[:, ~good] = np.array(fill).T
    return U


def orthonormal_columns(rng, rows, cols):
    """``rows x cols`` matrix with orthonormal columns from the QR of a Gaussian draw."""
    g = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diag(r))
    return q if rows >= cols else q.T
