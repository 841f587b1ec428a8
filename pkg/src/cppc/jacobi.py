"""Cyclic Jacobi eigendecomposition for dense symmetric matrices.

Self-contained spectral routine used by the membership tests and certificate
checks, where we want an eigensolver whose convergence can be certified
directly (off-diagonal norm below threshold) instead of trusting an opaque
backend.  Intended for desk-scale orders (up to a few dozen); the iterative
solver uses LAPACK internally for speed, this one is the verification path.
"""

from __future__ import annotations

import math

import numpy as np


class EigenSolverError(RuntimeError):
    """Raised when the rotation sweep fails to drive the off-diagonal to zero."""


def jacobi_eigh(a: np.ndarray, tol: float = 1e-13, max_sweeps: int = 60):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    a : (n, n) array_like, symmetric
    tol : relative off-diagonal threshold; sweeps stop once
        ``off(A) <= tol * ||A||_F``.
    max_sweeps : sweep budget before giving up.

    Returns
    -------
    w : (n,) eigenvalues in ascending order
    v : (n, n) orthonormal eigenvectors, column ``v[:, k]`` belongs to ``w[k]``.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("matrix contains non-finite entries")
    n = a.shape[0]
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    if n == 1:
        return a[0].copy(), v

    norm = np.linalg.norm(a)
    if norm == 0.0:
        return np.zeros(n), v
    threshold = tol * norm

    def _off() -> float:
        strict = a - np.diag(np.diag(a))
        return float(np.linalg.norm(strict))

    converged = False
    for _ in range(max_sweeps):
        if _off() <= threshold:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-3 * threshold / (n * n):
                    continue
                app, aqq = a[p, p], a[q, q]
                tau = (aqq - app) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c

                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                a[p, q] = 0.0
                a[q, p] = 0.0

                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
        norm = np.linalg.norm(a)
    if not converged and _off() > threshold:
        raise EigenSolverError(
            f"Jacobi sweep did not converge within {max_sweeps} sweeps "
            f"(residual off-diagonal {_off():.3e}, threshold {threshold:.3e})"
        )

    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def eigvals_jacobi(a: np.ndarray, tol: float = 1e-13, max_sweeps: int = 60) -> np.ndarray:
    """Eigenvalues only, ascending."""
    w, _ = jacobi_eigh(a, tol=tol, max_sweeps=max_sweeps)
    return w
