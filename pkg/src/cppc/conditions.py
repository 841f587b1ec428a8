"""Testable sufficient conditions for exactness of the block relaxation.

The data ``(f_i, g_i, d_i)`` defines one linear coupling constraint per arm,
``f_i^T x + g_i^T y_i = d_i`` over ``K0 x Ki``, plus an optional shared
constraint ``f_0^T x = d_0``.  Three conditions are checked:

  i.   every ``g_i`` lies in the interior of the dual of ``Ki``;
  ii.  the shared-part feasible region is bounded (decided through its
       recession cone when the cones are orthant-representable, or through a
       single provably bounded constraint set);
  iii. some constraint's x-projection is contained in all the others,
       certified by per-arm scalar multipliers.

All checks are conservative: a returned certificate re-verifies exactly,
while a failure only means "no certificate found", never a disproof.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import oracles
from .cones import (
    ORTHANT,
    ZERO,
    GroundCone,
    cone_contains,
    dual_cone,
    interior_dual_contains,
)

BOUNDED = "Bounded"
NOT_BOUNDED = "NotBounded"
INCONCLUSIVE = "Inconclusive"

_EXACT_TOL = 1e-12


@dataclass(frozen=True)
class ConstraintData:
    """Constraint data ``(f_i, g_i, d_i)``, index 0 for the shared constraint.

    ``f`` has S+1 vectors of dimension ``n_x`` (``f[0]`` is the shared one),
    ``g`` has S vectors of dimension ``n_y`` and ``d`` has S+1 scalars.
    """

    K0: GroundCone
    Ki: tuple
    f: tuple
    g: tuple
    d: tuple

    @staticmethod
    def build(K0, Ki, f, g, d) -> "ConstraintData":
        Ki = tuple(Ki)
        f = tuple(np.asarray(v, dtype=float).reshape(-1) for v in f)
        g = tuple(np.asarray(v, dtype=float).reshape(-1) for v in g)
        d = tuple(float(x) for x in d)
        S = len(Ki)
        if len(f) != S + 1 or len(g) != S or len(d) != S + 1:
            raise ValueError(
                f"inconsistent lengths: S={S}, |f|={len(f)}, |g|={len(g)}, |d|={len(d)}"
            )
        nx = K0.dim
        for k, v in enumerate(f):
            if v.size != nx:
                raise ValueError(f"f[{k}] has dim {v.size}, shared cone has {nx}")
        for k, (cone, v) in enumerate(zip(Ki, g)):
            if v.size != cone.dim:
                raise ValueError(f"g[{k}] has dim {v.size}, arm cone has {cone.dim}")
        if not np.any(f[0]) and d[0] != 0.0:
            raise ValueError("a zero shared vector requires a zero right-hand side")
        return ConstraintData(K0, Ki, f, g, d)

    @property
    def S(self) -> int:
        return len(self.Ki)

    @property
    def nx(self) -> int:
        return self.K0.dim


@dataclass
class BoundednessVerdict:
    status: str
    reason: str

    def __bool__(self):
        return self.status == BOUNDED


@dataclass
class ConditionReport:
    """Outcome of all three condition checks on one data set."""

    cond_i: list
    boundedness: BoundednessVerdict
    cond_iii: Optional[tuple]
    cond_iii_reason: str = ""

    @property
    def all_passed(self) -> bool:
        return (
            all(self.cond_i)
            and self.boundedness.status == BOUNDED
            and self.cond_iii is not None
        )


def check_cond_i(data: ConstraintData, tol: float = 1e-9):
    """Per-arm test ``g_i in int(Ki*)``."""
    return [
        interior_dual_contains(cone, gi, tol) for cone, gi in zip(data.Ki, data.g)
    ]


def check_Fi_bounded_sufficient(data: ConstraintData, i: int) -> bool:
    """Sufficient test for boundedness of the i-th constraint set:
    ``f_i in int(K0*)`` and ``d_i >= 0``.  False means inconclusive."""
    if not 0 <= i <= data.S:
        raise IndexError(f"constraint index {i} out of range 0..{data.S}")
    return interior_dual_contains(data.K0, data.f[i]) and data.d[i] >= 0.0


def _kept_coords(K0: GroundCone):
    """Indices of non-zero-cone coordinates and their orthant flags."""
    kinds = K0.coordinate_kinds()
    keep = [j for j, k in enumerate(kinds) if k != ZERO]
    is_orth = np.array([kinds[j] == ORTHANT for j in keep], dtype=bool)
    return keep, is_orth


def _recession_norm_max(data: ConstraintData):
    """Maximum of an l1-type norm over the recession cone of the shared-part
    region intersected with a normalizing box; zero iff that cone is {0}.

    The box is ``sum of orthant coordinates <= 1`` plus ``[-1, 1]`` bounds on
    free coordinates, so the program is a convex maximization over a bounded
    polytope and the maximum sits at a vertex.
    """
    keep, is_orth = _kept_coords(data.K0)
    n = len(keep)
    if n == 0:
        return 0.0
    rows, rhs = [], []
    f0 = data.f[0][keep]
    if np.any(f0):
        rows.append(f0)
        rhs.append(0.0)
        rows.append(-f0)
        rhs.append(0.0)
    for i in range(1, data.S + 1):
        fi = data.f[i][keep]
        if np.any(fi):
            rows.append(fi)
            rhs.append(0.0)
    for j in range(n):
        e = np.zeros(n)
        e[j] = -1.0 if is_orth[j] else 1.0
        if is_orth[j]:
            rows.append(e)
            rhs.append(0.0)
        else:
            rows.append(e)
            rhs.append(1.0)
            rows.append(-e)
            rhs.append(1.0)
    budget = np.where(is_orth, 1.0, 0.0)
    if budget.any():
        rows.append(budget)
        rhs.append(1.0)
    verts = oracles.polyhedron_vertices(np.array(rows), np.array(rhs), nonneg=False)
    best = 0.0
    for x in verts:
        val = float(np.sum(x[is_orth])) + float(np.sum(np.abs(x[~is_orth])))
        best = max(best, val)
    return best


def _shared_region_nonempty(data: ConstraintData) -> bool:
    """Phase-1 feasibility of ``{x in K0 : f_0^T x = d_0, f_i^T x <= d_i}``."""
    keep, is_orth = _kept_coords(data.K0)
    n = len(keep)
    if n == 0:
        ok0 = abs(data.d[0]) <= _EXACT_TOL or not np.any(data.f[0])
        return ok0 and all(data.d[i] >= -_EXACT_TOL for i in range(1, data.S + 1))
    n_free = int((~is_orth).sum())
    # Columns: orthant coords, then split free coords (p - q), then slacks.
    rows, rhs = [], []
    arm_rows = []
    f0 = data.f[0][keep]
    if np.any(f0):
        rows.append((f0, None))
        rhs.append(data.d[0])
    for i in range(1, data.S + 1):
        rows.append((data.f[i][keep], len(arm_rows)))
        arm_rows.append(i)
        rhs.append(data.d[i])
    m = len(rows)
    n_slack = len(arm_rows)
    width = int(is_orth.sum()) + 2 * n_free + n_slack
    A = np.zeros((m, width))
    orth_idx = np.where(is_orth)[0]
    free_idx = np.where(~is_orth)[0]
    for r, (frow, slack) in enumerate(rows):
        A[r, : orth_idx.size] = frow[orth_idx]
        A[r, orth_idx.size : orth_idx.size + n_free] = frow[free_idx]
        A[r, orth_idx.size + n_free : orth_idx.size + 2 * n_free] = -frow[free_idx]
        if slack is not None:
            A[r, orth_idx.size + 2 * n_free + slack] = 1.0
    point = oracles.standard_form_feasible_point(A, np.array(rhs))
    return point is not None


def check_boundedness(data: ConstraintData) -> BoundednessVerdict:
    """Decide boundedness of the shared-part region (and with it the lifted
    shared set) or return Inconclusive.

    A single constraint set that the interior test proves bounded settles the
    question immediately.  Otherwise, when the cones are orthant-representable
    on at least one side and every ``g_i`` passes the interior test, the
    recession cone of the x-projection is evaluated exactly by vertex
    enumeration.
    """
    cond_i = check_cond_i(data)
    if check_Fi_bounded_sufficient(data, 0):
        return BoundednessVerdict(BOUNDED, "shared constraint set is bounded")
    for i in range(1, data.S + 1):
        if cond_i[i - 1] and check_Fi_bounded_sufficient(data, i):
            return BoundednessVerdict(BOUNDED, f"constraint set {i} is bounded")

    orth_ok = data.K0.is_orthant_like() or all(c.is_orthant_like() for c in data.Ki)
    if not all(cond_i):
        return BoundednessVerdict(
            INCONCLUSIVE, "interior test fails for some arm coefficient"
        )
    if not orth_ok:
        return BoundednessVerdict(
            INCONCLUSIVE,
            "cones are not orthant-representable on either side; no decision "
            "procedure applies",
        )
    try:
        ray_max = _recession_norm_max(data)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        return BoundednessVerdict(INCONCLUSIVE, f"recession solve failed: {exc}")
    if ray_max <= 1e-9:
        return BoundednessVerdict(BOUNDED, "recession cone of the x-projection is {0}")
    if _shared_region_nonempty(data):
        return BoundednessVerdict(
            NOT_BOUNDED, f"recession direction with norm {ray_max:.3g} exists"
        )
    return BoundednessVerdict(BOUNDED, "x-projection region is empty")


def scalar_lambda_feasible(
    f_ref, d_ref: float, f, d: float, K0: GroundCone, lam_sign: str = "free"
) -> Optional[float]:
    """Scalar multiplier placing the reference set inside
    ``{x in K0 : f^T x <= d}``: find lam with ``lam * d_ref <= d`` and
    ``lam * f_ref - f in K0*``, by exact interval intersection.

    With ``lam_sign = "free"`` the reference set is the hyperplane slice
    ``{x in K0 : f_ref^T x = d_ref}``; with ``"nonneg"`` it is the half-space
    slice ``{x in K0 : f_ref^T x <= d_ref}``.  Returns None when the interval
    is empty; any returned value re-verifies exactly.
    """
    f_ref = np.asarray(f_ref, dtype=float).reshape(-1)
    f = np.asarray(f, dtype=float).reshape(-1)
    if f_ref.size != K0.dim or f.size != K0.dim:
        raise ValueError("vector dimension does not match the cone")
    kinds = K0.coordinate_kinds()
    lo, hi = -np.inf, np.inf
    pins = []
    for j in range(K0.dim):
        kind = kinds[j]
        if kind == ZERO:
            continue
        if kind == ORTHANT:
            if f_ref[j] > 0.0:
                lo = max(lo, f[j] / f_ref[j])
            elif f_ref[j] < 0.0:
                hi = min(hi, f[j] / f_ref[j])
            elif f[j] > 0.0:
                return None
        else:  # free coordinate: dual is zero, equality required
            if f_ref[j] != 0.0:
                pins.append(f[j] / f_ref[j])
            elif abs(f[j]) > _EXACT_TOL:
                return None
    if d_ref > 0.0:
        hi = min(hi, d / d_ref)
    elif d_ref < 0.0:
        lo = max(lo, d / d_ref)
    elif d < 0.0:
        return None
    if lam_sign == "nonneg":
        lo = max(lo, 0.0)
    elif lam_sign != "free":
        raise ValueError(f"unknown lam_sign {lam_sign!r}")

    slack_interval = _EXACT_TOL * max(
        1.0, abs(lo) if np.isfinite(lo) else 0.0, abs(hi) if np.isfinite(hi) else 0.0
    )
    if pins:
        lam = pins[0]
        if any(abs(pin - lam) > _EXACT_TOL for pin in pins[1:]):
            return None
        if not (lo - _EXACT_TOL <= lam <= hi + _EXACT_TOL):
            return None
    elif lo > hi + slack_interval:
        return None
    elif lo <= 1.0 <= hi:
        lam = 1.0
    elif np.isfinite(lo):
        # An interval empty only at roundoff level clamps to its upper end;
        # the re-verification below still gates the choice.
        lam = min(lo, hi) if np.isfinite(hi) else lo
    elif np.isfinite(hi):
        lam = hi
    else:
        lam = 0.0

    slack = _EXACT_TOL * max(1.0, abs(lam), float(np.abs(f).max(initial=0.0)))
    if lam * d_ref > d + slack:
        return None
    if not cone_contains(dual_cone(K0), lam * f_ref - f, slack):
        return None
    return float(lam)


def check_cond_iii(data: ConstraintData) -> Optional[tuple]:
    """Search for ``(i_star, lambdas)`` certifying that constraint set
    ``i_star``'s x-projection is contained in every other one.

    Assumes the interior condition on the ``g_i`` has been verified.  Branch
    one takes the shared constraint as the reference (free multipliers);
    branch two takes an arm (nonnegative multipliers) and requires the shared
    constraint to be vacuous.  Reference arms are tried in order of
    decreasing right-hand side, then index.
    """
    result, _ = cond_iii_details(data)
    return result


def cond_iii_details(data: ConstraintData):
    reasons = []
    lams = []
    ok = True
    for i in range(1, data.S + 1):
        lam = scalar_lambda_feasible(
            data.f[0], data.d[0], data.f[i], data.d[i], data.K0, "free"
        )
        if lam is None:
            ok = False
            reasons.append(f"reference 0: no multiplier for arm {i}")
            break
        lams.append(lam)
    if ok:
        return (0, lams), ""

    if np.any(data.f[0]) or data.d[0] != 0.0:
        reasons.append(
            "arm references need a vacuous shared constraint (f0 = 0, d0 = 0)"
        )
        return None, "; ".join(reasons)

    order = sorted(range(1, data.S + 1), key=lambda i: (-data.d[i], i))
    for i_star in order:
        lams = []
        ok = True
        for i in range(1, data.S + 1):
            lam = scalar_lambda_feasible(
                data.f[i_star], data.d[i_star], data.f[i], data.d[i], data.K0, "nonneg"
            )
            if lam is None:
                ok = False
                reasons.append(f"reference {i_star}: no multiplier for arm {i}")
                break
            lams.append(lam)
        if ok:
            return (i_star, lams), ""
    return None, "; ".join(reasons)


def build_condition_report(data: ConstraintData) -> ConditionReport:
    cond_i = check_cond_i(data)
    bounded = check_boundedness(data)
    if all(cond_i):
        cert, reason = cond_iii_details(data)
    else:
        cert, reason = None, "skipped: interior condition failed"
    return ConditionReport(cond_i, bounded, cert, reason)


def projection_halfspace(data: ConstraintData, i: int):
    """The i-th constraint set's x-projection as ``(mode, f, d)``.

    For arms (under the interior condition) the slack can take any
    nonnegative value, so the projection is the half-space ``f_i^T x <= d_i``
    within ``K0``; the shared constraint projects to the hyperplane itself.
    """
    if i == 0:
        return "hyperplane", data.f[0], data.d[0]
    return "halfspace", data.f[i], data.d[i]


def sample_projection_points(
    data: ConstraintData, i_star: int, count: int, rng, ray_scale: float = 10.0
):
    """Random points of the ``i_star``-th x-projection, for soundness probing.

    Rays are drawn into ``K0`` and scaled onto the hyperplane or into the
    half-space.  Rays that cannot be scaled feasibly are skipped, so fewer
    than ``count`` points may come back.
    """
    kinds = data.K0.coordinate_kinds()
    n = data.nx
    mode, fvec, dval = projection_halfspace(data, i_star)
    points = []
    attempts = 0
    while len(points) < count and attempts < 20 * count + 100:
        attempts += 1
        r = rng.standard_normal(n)
        for j in range(n):
            if kinds[j] == ORTHANT:
                r[j] = abs(r[j])
            elif kinds[j] == ZERO:
                r[j] = 0.0
        a = float(fvec @ r)
        if mode == "hyperplane":
            if not np.any(fvec):
                points.append(r * rng.uniform(0.0, ray_scale))
                continue
            if abs(a) < 1e-12:
                if dval == 0.0:
                    points.append(r * rng.uniform(0.0, ray_scale))
                continue
            t = dval / a
            if t >= 0.0:
                points.append(r * t)
            continue
        # half-space f^T x <= d
        if a > 1e-12:
            if dval >= 0.0:
                points.append(r * rng.uniform(0.0, dval / a))
        elif a < -1e-12:
            t_min = dval / a if dval < 0.0 else 0.0
            points.append(r * (t_min + rng.uniform(0.0, ray_scale)))
        else:
            if dval >= 0.0:
                points.append(r * rng.uniform(0.0, ray_scale))
    return np.array(points) if points else np.zeros((0, n))


def point_in_projection(data: ConstraintData, i: int, x, tol: float = 1e-9) -> bool:
    """Membership of ``x`` in the i-th x-projection."""
    if not cone_contains(data.K0, x, tol):
        return False
    mode, fvec, dval = projection_halfspace(data, i)
    val = float(fvec @ np.asarray(x, dtype=float))
    if mode == "hyperplane":
        return abs(val - dval) <= tol * max(1.0, abs(dval))
    return val <= dval + tol * max(1.0, abs(dval))
