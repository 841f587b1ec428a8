"""Exhaustive small-scale oracles: basic-solution LP enumeration and
active-set QP enumeration.

These are deliberately naive and exact (up to linear algebra roundoff) so
they can serve both as internal decision procedures for tiny subproblems and
as independent references in tests.  Complexity is combinatorial; callers
keep dimensions in the single digits.
"""

from __future__ import annotations

from itertools import combinations
from typing import Optional

import numpy as np

_FEAS_TOL = 1e-9


def lp_minimize_standard(c, A, b, tol: float = _FEAS_TOL):
    """Minimize ``c . v`` over ``{v >= 0 : A v = b}`` by basic-solution
    enumeration.

    Assumes the optimum, when the problem is feasible, is attained (true for
    any LP over a pointed polyhedron that is bounded below).  Returns
    ``(value, v)`` or ``(None, None)`` when no basic feasible solution exists.
    """
    c = np.asarray(c, dtype=float).reshape(-1)
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError("A must be 2-d")
    m, n = A.shape
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.size != m or c.size != n:
        raise ValueError("inconsistent LP dimensions")
    if m == 0:
        v = np.zeros(n)
        return 0.0, v

    scale = max(1.0, float(np.abs(b).max()))
    r = int(np.linalg.matrix_rank(A, tol=1e-11 * max(1.0, np.abs(A).max())))
    best_val, best_v = None, None
    for cols in combinations(range(n), min(r, n)):
        B = A[:, cols]
        sol, *_ = np.linalg.lstsq(B, b, rcond=None)
        v = np.zeros(n)
        v[list(cols)] = sol
        if np.abs(A @ v - b).max() > tol * scale:
            continue
        if v.min() < -tol * scale:
            continue
        v = np.maximum(v, 0.0)
        val = float(c @ v)
        if best_val is None or val < best_val - 0.0:
            best_val, best_v = val, v
    return best_val, best_v


def lp_maximize_standard(c, A, b, tol: float = _FEAS_TOL):
    val, v = lp_minimize_standard(-np.asarray(c, dtype=float), A, b, tol)
    if val is None:
        return None, None
    return -val, v


def standard_form_feasible_point(A, b, tol: float = _FEAS_TOL) -> Optional[np.ndarray]:
    """A point of ``{v >= 0 : A v = b}`` via a phase-1 artificial LP, or None."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    m, n = A.shape
    if m == 0:
        return np.zeros(n)
    # Artificials with signs matching b keep the phase-1 start feasible.
    signs = np.where(b >= 0, 1.0, -1.0)
    A1 = np.hstack([A, np.diag(signs)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    val, v = lp_minimize_standard(c1, A1, b, tol)
    if val is None or val > tol * max(1.0, float(np.abs(b).max())):
        return None
    return v[:n]


def polyhedron_vertices(F, d, nonneg: bool = True, tol: float = _FEAS_TOL):
    """Vertices of ``{x : F x <= d}`` intersected with the nonnegative orthant
    when ``nonneg`` is set, by enumerating square active subsets."""
    F = np.asarray(F, dtype=float)
    d = np.asarray(d, dtype=float).reshape(-1)
    m, n = F.shape if F.size else (0, len(d))
    rows = [F[i] for i in range(m)]
    rhs = [d[i] for i in range(m)]
    if nonneg:
        for j in range(n):
            e = np.zeros(n)
            e[j] = -1.0
            rows.append(e)
            rhs.append(0.0)
    G = np.array(rows) if rows else np.zeros((0, n))
    h = np.array(rhs)
    scale = max(1.0, float(np.abs(h).max()) if h.size else 1.0)
    verts = []
    for idx in combinations(range(G.shape[0]), n):
        sub = G[list(idx)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        x = np.linalg.solve(sub, h[list(idx)])
        if (G @ x - h).max() <= tol * scale:
            if not any(np.allclose(x, v, atol=1e-9) for v in verts):
                verts.append(x)
    return verts


def qp_global_minimum(A, a, F, d, nonneg_coords, tol: float = 1e-9):
    """Global minimum of ``x^T A x + 2 a^T x`` over
    ``{x : F x <= d, x_j >= 0 for j in nonneg_coords}``.

    Enumerates every active subset of constraints, solves the stationarity
    system on the corresponding face and keeps feasible candidates.  Exact
    for nondegenerate instances with a bounded feasible set, where the
    minimizer satisfies first-order conditions on some face.

    Returns ``(value, x)`` or ``(None, None)`` if no feasible candidate was
    found (e.g. an empty polytope).
    """
    A = np.asarray(A, dtype=float)
    a = np.asarray(a, dtype=float).reshape(-1)
    F = np.asarray(F, dtype=float)
    d = np.asarray(d, dtype=float).reshape(-1)
    n = a.size
    rows = [F[i] for i in range(F.shape[0])] if F.size else []
    rhs = [d[i] for i in range(F.shape[0])] if F.size else []
    for j in nonneg_coords:
        e = np.zeros(n)
        e[j] = -1.0
        rows.append(e)
        rhs.append(0.0)
    G = np.array(rows) if rows else np.zeros((0, n))
    h = np.array(rhs)
    scale = max(1.0, float(np.abs(h).max()) if h.size else 1.0)

    def objective(x):
        return float(x @ A @ x + 2.0 * a @ x)

    best_val, best_x = None, None
    total = G.shape[0]
    for k in range(0, n + 1):
        for idx in combinations(range(total), k):
            GJ = G[list(idx)] if idx else np.zeros((0, n))
            hJ = h[list(idx)] if idx else np.zeros(0)
            kkt = np.zeros((n + k, n + k))
            kkt[:n, :n] = 2.0 * A
            if k:
                kkt[:n, n:] = GJ.T
                kkt[n:, :n] = GJ
            rhs_vec = np.concatenate([-2.0 * a, hJ])
            sol, *_ = np.linalg.lstsq(kkt, rhs_vec, rcond=None)
            x = sol[:n]
            if np.abs(kkt @ sol - rhs_vec).max() > 1e-7 * max(1.0, np.abs(rhs_vec).max()):
                continue
            if G.size and (G @ x - h).max() > tol * scale:
                continue
            val = objective(x)
            if best_val is None or val < best_val:
                best_val, best_x = val, x
    return best_val, best_x
