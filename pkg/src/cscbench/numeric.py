"""Thresholding operators and spectral routines.

Everything here works on plain numpy arrays. Matrices are dense,
row-major, and assumed finite; sparse storage is out of scope.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    ConvergenceError,
    InvalidThresholdError,
    MatrixSizeError,
    ShapeError,
)

JACOBI_MAX_DIM = 512


def _check_threshold(b, shape):
    b = np.asarray(b, dtype=float)
    if b.ndim > 0:
        try:
            b = np.broadcast_to(b, shape)
        except ValueError as exc:
            raise ShapeError(
                f"threshold of shape {np.asarray(b).shape} does not broadcast "
                f"against values of shape {shape}"
            ) from exc
    if np.any(b < 0):
        raise InvalidThresholdError("soft threshold must be nonnegative")
    return b


def soft_threshold(z, b):
    """S_b(z): shrink toward zero by b, clipping |z| <= b to exactly 0."""
    z = np.asarray(z, dtype=float)
    b = _check_threshold(b, z.shape)
    return np.sign(z) * np.maximum(np.abs(z) - b, 0.0)


def soft_threshold_nonneg(z, b):
    """S_b^+(z) = max(z - b, 0), i.e. ReLU(z - b)."""
    z = np.asarray(z, dtype=float)
    b = _check_threshold(b, z.shape)
    return np.maximum(z - b, 0.0)


def relu(z):
    return np.maximum(np.asarray(z, dtype=float), 0.0)


def _power_start(dim, seed):
    # All-ones direction plus a small seeded perturbation so a start vector
    # orthogonal to the top eigenvector cannot stall the iteration.
    rng = np.random.default_rng(seed)
    v = np.ones(dim) + 1e-3 * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def spectral_lmax(op, dim, tol=1e-10, max_iter=10_000, seed=0):
    """Largest eigenvalue of a symmetric PSD operator via power iteration.

    ``op`` may be a callable v -> Mv, an object exposing ``apply``, or a
    dense square ndarray. Symmetry/PSD-ness is the caller's contract.
    """
    if dim < 1:
        raise ShapeError("operator dimension must be >= 1")
    if callable(op):
        matvec = op
    elif hasattr(op, "apply"):
        matvec = op.apply
    else:
        mat = np.asarray(op, dtype=float)
        if mat.shape != (dim, dim):
            raise ShapeError(f"expected a {dim}x{dim} matrix, got {mat.shape}")
        matvec = mat.dot

    v = _power_start(dim, seed)
    lam = 0.0
    for _ in range(max_iter):
        w = np.asarray(matvec(v), dtype=float)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0  # v is in the kernel; PSD input means lambda_max >= 0
        lam_new = float(v @ w)
        v = w / norm
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return lam_new
        lam = lam_new
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations",
        last_iterate=v,
    )


def symmetric_eigs(mat, tol=1e-10):
    """All eigenvalues of a small symmetric matrix via cyclic Jacobi sweeps.

    Reserved for verification-scale matrices (<= {JACOBI_MAX_DIM} rows);
    larger requests are rejected rather than silently slow.
    """
    a = np.array(mat, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n > JACOBI_MAX_DIM:
        raise MatrixSizeError(
            f"Jacobi eigensolver is limited to {JACOBI_MAX_DIM}x{JACOBI_MAX_DIM}"
        )
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > tol * scale:
        raise ShapeError("matrix is not symmetric within tolerance")
    a = 0.5 * (a + a.T)

    target = 1e-15 * scale * n
    for _ in range(100):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2) * 2.0)
        if off <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-18 * scale:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.array([[c, s], [-s, c]])
                rows = a[[p, q], :]
                a[[p, q], :] = rot.T @ rows
                cols = a[:, [p, q]]
                a[:, [p, q]] = cols @ rot
                a[p, q] = a[q, p] = 0.0
    return np.sort(np.diag(a))
