"""Sparse DNN relaxations of inequality-constrained QPs with ex-post
exactness certificates.

The quadratic program ``inf { x^T A x + 2 a^T x : F x <= d, x in K }`` is
lifted, after one slack per row, into one coupled DNN block of order n+2 per
inequality, sharing the ``(1, x, X)`` corner.  Solving the relaxation gives
a lower bound; the x-part of the solution, when feasible, gives an upper
bound.  Exactness can be certified ex post by rank-one blocks, by matching
bounds, or by a kernel vector of the northwest block together with row
multipliers, checked here entirely from the returned data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import cones
from .conditions import (
    BOUNDED,
    ConstraintData,
    check_boundedness,
)
from .cones import GroundCone, cone_contains, dual_cone, interior_dual_contains, orthant
from .conic_solver import (
    OPTIMAL,
    ConicProgram,
    SolveOptions,
    SolveResult,
    solve,
)
from .jacobi import jacobi_eigh
from .matrix_core import SymMatrix

PROVEN_EXACT = "ProvenExact"
UNKNOWN = "Unknown"

#: Relative eigenvalue threshold below which a block direction counts as kernel.
KERNEL_TOL = 1e-6


@dataclass(frozen=True)
class QPInstance:
    """Data of ``inf { x^T A x + 2 a^T x : F x <= d, x in K }``."""

    A: SymMatrix
    a: np.ndarray
    F: np.ndarray
    d: np.ndarray
    K: GroundCone

    @staticmethod
    def build(A, a, F, d, K: Optional[GroundCone] = None) -> "QPInstance":
        A = A if isinstance(A, SymMatrix) else SymMatrix(A)
        a = np.asarray(a, dtype=float).reshape(-1)
        F = np.asarray(F, dtype=float)
        if F.size == 0:
            F = F.reshape(0, A.order)
        d = np.asarray(d, dtype=float).reshape(-1)
        n = A.order
        if a.size != n or F.shape[1] != n or F.shape[0] != d.size:
            raise ValueError("inconsistent QP dimensions")
        if K is None:
            K = orthant(n)
        if K.dim != n:
            raise ValueError(f"ground cone has dim {K.dim}, expected {n}")
        if any(kind == cones.ZERO and dim > 0 for kind, dim in K.factors):
            raise ValueError("zero cone factors are not supported here")
        return QPInstance(A, a, F, d, K)

    @property
    def n(self) -> int:
        return self.A.order

    @property
    def m(self) -> int:
        return self.F.shape[0]

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.A.array @ x + 2.0 * self.a @ x)

    def feasible(self, x, tol: float = 1e-7) -> bool:
        x = np.asarray(x, dtype=float)
        if not cone_contains(self.K, x, tol):
            return False
        if self.m and (self.F @ x - self.d).max() > tol * max(1.0, float(np.abs(self.d).max())):
            return False
        return True

    def to_json_dict(self) -> dict:
        return {
            "A": self.A.to_lists(),
            "a": self.a.tolist(),
            "F": self.F.tolist(),
            "d": self.d.tolist(),
            "K": self.K.to_json_dict(),
        }

    @staticmethod
    def from_json_dict(obj: dict) -> "QPInstance":
        required = {"A", "a", "F", "d"}
        missing = required - obj.keys()
        if missing:
            raise ValueError(f"QP JSON is missing keys {sorted(missing)}")
        unknown = obj.keys() - (required | {"K"})
        if unknown:
            raise ValueError(f"QP JSON has unknown keys {sorted(unknown)}")
        K = GroundCone.from_json_dict(obj["K"]) if "K" in obj else None
        return QPInstance.build(obj["A"], obj["a"], obj["F"], obj["d"], K)


@dataclass(frozen=True)
class GeneralInstance:
    """Coupled-objective generalization: per-arm terms ``x^T B_i y_i +
    y_i^T C_i y_i + c_i^T y_i`` with ``B_i = b_i g_i^T`` and ``c_i = beta_i
    g_i`` enforced by construction, over constraint data ``(f_i, g_i,
    d_i)``.

    The linear objective coefficient is the raw one (``a^T x``, not
    ``2 a^T x``).
    """

    A: SymMatrix
    a: np.ndarray
    b: tuple  # per-arm vectors b_i (dim n_x)
    beta: tuple  # per-arm scalars
    C: tuple  # per-arm SymMatrix (order n_y)
    data: ConstraintData

    @staticmethod
    def build(A, a, b, beta, C, data: ConstraintData) -> "GeneralInstance":
        A = A if isinstance(A, SymMatrix) else SymMatrix(A)
        a = np.asarray(a, dtype=float).reshape(-1)
        S = data.S
        b = tuple(np.asarray(v, dtype=float).reshape(-1) for v in b)
        beta = tuple(float(v) for v in beta)
        C = tuple(c if isinstance(c, SymMatrix) else SymMatrix(c) for c in C)
        if A.order != data.nx or a.size != data.nx:
            raise ValueError("objective dimensions do not match the shared cone")
        if not (len(b) == len(beta) == len(C) == S):
            raise ValueError("per-arm objective lengths do not match S")
        ny = data.Ki[0].dim
        for v in b:
            if v.size != data.nx:
                raise ValueError("coupling vector dimension mismatch")
        for c in C:
            if c.order != ny:
                raise ValueError("arm quadratic order mismatch")
        return GeneralInstance(A, a, b, beta, C, data)


@dataclass
class RelaxationSolution:
    """Lifted solution: shared ``(x, X)`` plus per-arm ``(z_i, y_i, Y_i)``."""

    X: SymMatrix
    x: np.ndarray
    arms: list  # per arm: dict(z=..., y=..., Y=...)
    blocks: list  # per-arm full DNN blocks of order n+2
    objective: float
    solver: SolveResult


@dataclass
class ExactnessReport:
    lower: float
    upper: Optional[float]
    rank_one: bool
    certificate_a: Optional[dict]
    certificate_b: Optional[dict]
    overall: str
    proven_by: list = field(default_factory=list)
    diagnostics: str = ""
    solution: Optional[RelaxationSolution] = None


def _entry(order, r, c):
    m = np.zeros((order, order))
    if r == c:
        m[r, c] = 1.0
    else:
        m[r, c] = m[c, r] = 0.5
    return m


def _block_nonneg_mask(K: GroundCone, extra_leading=1, extra_trailing=1):
    kinds = K.coordinate_kinds()
    nn = np.array(
        [True] * extra_leading
        + [kind == cones.ORTHANT for kind in kinds]
        + [True] * extra_trailing
    )
    return np.outer(nn, nn)


def build_sparse_relaxation(qp: QPInstance) -> ConicProgram:
    """One DNN block of order n+2 per inequality row, sharing ``(1, x, X)``.

    Each block carries the pair ``f_i^T x + y_i = d_i`` and ``f_i f_i^T . X
    + 2 f_i^T z_i + Y_i = d_i^2``; the pair forces ``(-d_i, f_i, 1)`` into
    the block kernel, which is declared to the solver.  The lifted objective
    is ``A . X + 2 a^T x`` on the first block.
    """
    n, m = qp.n, qp.m
    order = n + 2
    prog = ConicProgram()
    if m == 0:
        # Degenerate: no inequalities, a single lifted corner block.
        prog.notes.append("no inequality rows; northwest block only")
        mask = _block_nonneg_mask(qp.K, 1, 0)
        bidx = prog.add_block(n + 1, nonneg_mask=mask, name="M0")
        prog.add_equality(1.0, blocks={bidx: _entry(n + 1, 0, 0)})
        obj = np.zeros((n + 1, n + 1))
        obj[1:, 1:] = qp.A.array
        obj[0, 1:] = qp.a
        obj[1:, 0] = qp.a
        prog.set_objective(blocks={bidx: obj})
        return prog

    mask = _block_nonneg_mask(qp.K, 1, 1)
    blocks = []
    for i in range(m):
        kern = np.concatenate([[-qp.d[i]], qp.F[i], [1.0]])
        blocks.append(
            prog.add_block(order, nonneg_mask=mask, name=f"M{i+1}", forced_kernel=kern)
        )
    for i, bidx in enumerate(blocks):
        f = qp.F[i]
        prog.add_equality(1.0, blocks={bidx: _entry(order, 0, 0)})
        lin = np.zeros((order, order))
        lin[0, 1 : n + 1] = f / 2.0
        lin[1 : n + 1, 0] = f / 2.0
        lin[0, n + 1] = lin[n + 1, 0] = 0.5
        prog.add_equality(float(qp.d[i]), blocks={bidx: lin})
        quad = np.zeros((order, order))
        quad[1 : n + 1, 1 : n + 1] = np.outer(f, f)
        quad[1 : n + 1, n + 1] = f
        quad[n + 1, 1 : n + 1] = f
        quad[n + 1, n + 1] = 1.0
        prog.add_equality(float(qp.d[i]) ** 2, blocks={bidx: quad})
    # Share the (1, x, X) corner across blocks.
    for r in range(n + 1):
        for c in range(r, n + 1):
            if (r, c) == (0, 0):
                continue
            for i in range(1, m):
                prog.add_equality(
                    0.0,
                    blocks={
                        blocks[i]: _entry(order, r, c),
                        blocks[0]: -_entry(order, r, c),
                    },
                )
    obj = np.zeros((order, order))
    obj[1 : n + 1, 1 : n + 1] = qp.A.array
    obj[0, 1 : n + 1] = qp.a
    obj[1 : n + 1, 0] = qp.a
    prog.set_objective(blocks={blocks[0]: obj})
    return prog


def build_general_relaxation(gi: GeneralInstance) -> ConicProgram:
    """Block relaxation with per-arm coupled objective terms and the shared
    constraint pair; blocks live on ``R_+ x K0 x Ki``."""
    data = gi.data
    n = data.nx
    ny = data.Ki[0].dim
    S = data.S
    order = 1 + n + ny
    prog = ConicProgram()
    for cone in data.Ki:
        if cone.dim != ny:
            raise ValueError("all arm cones must share one dimension")

    kinds0 = data.K0.coordinate_kinds()
    blocks = []
    for i in range(S):
        kindsi = data.Ki[i].coordinate_kinds()
        nn = np.array(
            [True]
            + [k == cones.ORTHANT for k in kinds0]
            + [k == cones.ORTHANT for k in kindsi]
        )
        mask = np.outer(nn, nn)
        kerns = [np.concatenate([[-data.d[i + 1]], data.f[i + 1], data.g[i]])]
        if np.any(data.f[0]):
            kerns.append(np.concatenate([[-data.d[0]], data.f[0], np.zeros(ny)]))
        blocks.append(
            prog.add_block(
                order,
                nonneg_mask=mask,
                name=f"M{i+1}",
                forced_kernel=np.column_stack(kerns),
            )
        )
    xs = slice(1, n + 1)
    ys = slice(n + 1, order)
    for i, bidx in enumerate(blocks):
        f = data.f[i + 1]
        g = data.g[i]
        d = data.d[i + 1]
        prog.add_equality(1.0, blocks={bidx: _entry(order, 0, 0)})
        lin = np.zeros((order, order))
        lin[0, xs] = f / 2.0
        lin[xs, 0] = f / 2.0
        lin[0, ys] = g / 2.0
        lin[ys, 0] = g / 2.0
        prog.add_equality(float(d), blocks={bidx: lin})
        quad = np.zeros((order, order))
        quad[xs, xs] = np.outer(f, f)
        quad[xs, ys] = np.outer(f, g)
        quad[ys, xs] = np.outer(g, f)
        quad[ys, ys] = np.outer(g, g)
        prog.add_equality(float(d) ** 2, blocks={bidx: quad})
    # Shared-constraint pair on the first block's corner.
    if np.any(data.f[0]):
        f0, d0 = data.f[0], data.d[0]
        lin0 = np.zeros((order, order))
        lin0[0, xs] = f0 / 2.0
        lin0[xs, 0] = f0 / 2.0
        prog.add_equality(float(d0), blocks={blocks[0]: lin0})
        quad0 = np.zeros((order, order))
        quad0[xs, xs] = np.outer(f0, f0)
        prog.add_equality(float(d0) ** 2, blocks={blocks[0]: quad0})
    for r in range(n + 1):
        for c in range(r, n + 1):
            if (r, c) == (0, 0):
                continue
            for i in range(1, S):
                prog.add_equality(
                    0.0,
                    blocks={
                        blocks[i]: _entry(order, r, c),
                        blocks[0]: -_entry(order, r, c),
                    },
                )
    obj = {}
    for i, bidx in enumerate(blocks):
        per = np.zeros((order, order))
        B = np.outer(gi.b[i], data.g[i])
        per[xs, ys] += B / 2.0
        per[ys, xs] += B.T / 2.0
        per[ys, ys] += gi.C[i].array
        cvec = gi.beta[i] * data.g[i]
        per[0, ys] += cvec / 2.0
        per[ys, 0] += cvec / 2.0
        obj[bidx] = per
    first = obj[blocks[0]]
    first[xs, xs] += gi.A.array
    first[0, xs] += gi.a / 2.0
    first[xs, 0] += gi.a / 2.0
    prog.set_objective(blocks=obj)
    return prog


def build_dense_reformulation(qp: QPInstance) -> ConicProgram:
    """Single DNN block of order n+m+1 over ``(1, x, y)`` with all slack
    coordinates lifted jointly.

    Reference path for tiny instances only: it is what the sparse relaxation
    avoids building, and the tests compare the two.  Both are lower bounds on
    the instance; neither dominates the other in general, since the sparse
    blocks are smaller but drop the cross-arm couplings.
    """
    n, m = qp.n, qp.m
    order = 1 + n + m
    prog = ConicProgram()
    kinds = qp.K.coordinate_kinds()
    nn = np.array([True] + [k == cones.ORTHANT for k in kinds] + [True] * m)
    kerns = [
        np.concatenate([[-qp.d[i]], qp.F[i], np.eye(m)[i]]) for i in range(m)
    ]
    bidx = prog.add_block(
        order,
        nonneg_mask=np.outer(nn, nn),
        name="dense",
        forced_kernel=np.column_stack(kerns) if kerns else None,
    )
    prog.add_equality(1.0, blocks={bidx: _entry(order, 0, 0)})
    for i in range(m):
        lin = np.zeros((order, order))
        lin[0, 1 : n + 1] = qp.F[i] / 2.0
        lin[1 : n + 1, 0] = qp.F[i] / 2.0
        lin[0, n + 1 + i] = lin[n + 1 + i, 0] = 0.5
        prog.add_equality(float(qp.d[i]), blocks={bidx: lin})
        row = np.concatenate([qp.F[i], np.eye(m)[i]])
        quad = np.zeros((order, order))
        quad[1:, 1:] = np.outer(row, row)
        prog.add_equality(float(qp.d[i]) ** 2, blocks={bidx: quad})
    obj = np.zeros((order, order))
    obj[1 : n + 1, 1 : n + 1] = qp.A.array
    obj[0, 1 : n + 1] = qp.a
    obj[1 : n + 1, 0] = qp.a
    prog.set_objective(blocks={bidx: obj})
    return prog


def extract_solution(qp: QPInstance, res: SolveResult) -> RelaxationSolution:
    n = qp.n
    first = 0.5 * (res.block_values[0] + res.block_values[0].T)
    x = first[0, 1 : n + 1].copy()
    X = SymMatrix(first[1 : n + 1, 1 : n + 1])
    arms = []
    blocks = []
    for i in range(qp.m):
        blk = 0.5 * (res.block_values[i] + res.block_values[i].T)
        blocks.append(SymMatrix(blk))
        arms.append(
            {
                "z": blk[1 : n + 1, n + 1].copy(),
                "y": float(blk[0, n + 1]),
                "Y": float(blk[n + 1, n + 1]),
            }
        )
    return RelaxationSolution(X, x, arms, blocks, res.objective, res)


def solve_bounds(qp: QPInstance, solver_opts: Optional[SolveOptions] = None):
    """Solve the sparse relaxation; return ``(lower, solution, upper)``.

    ``upper`` is the objective at the x-part whenever that point is
    feasible for the instance within tolerance, absent otherwise.
    """
    prog = build_sparse_relaxation(qp)
    res = solve(prog, solver_opts or SolveOptions())
    if res.status != OPTIMAL:
        raise SolverFailure(
            f"relaxation solve returned {res.status}: {res.diagnostics}", res
        )
    sol = extract_solution(qp, res)
    upper = qp.objective(sol.x) if qp.feasible(sol.x) else None
    return res.objective, sol, upper


class SolverFailure(RuntimeError):
    def __init__(self, message, result: SolveResult):
        super().__init__(message)
        self.result = result


def rank_one_certificate(sol: RelaxationSolution, tol: float = KERNEL_TOL) -> bool:
    """True iff every block's second eigenvalue is below ``tol`` times its
    largest."""
    for blk in sol.blocks:
        w, _ = jacobi_eigh(blk.array)
        if blk.order >= 2 and w[-2] > tol * max(w[-1], 0.0):
            return False
    return True


def kernel_vectors(M: SymMatrix, tol: float = KERNEL_TOL):
    """Orthonormal eigenvectors with eigenvalues below ``tol`` times the
    spectral scale."""
    w, v = jacobi_eigh(M.array if isinstance(M, SymMatrix) else np.asarray(M, float))
    scale = max(float(np.abs(w).max()), 1e-12)
    return [v[:, k].copy() for k in range(w.size) if abs(w[k]) <= tol * scale]


def _kernel_candidates(kernel):
    """Kernel basis vectors plus pairwise combinations, the search set for a
    direction with nonzero leading coordinate."""
    cands = list(kernel)
    for i in range(len(kernel)):
        for j in range(i + 1, len(kernel)):
            cands.append(kernel[i] + kernel[j])
            cands.append(kernel[i] - kernel[j])
    return cands


def _gamma_interval(u, row, dval, K: GroundCone, tol: float = 1e-9):
    """Smallest admissible multiplier for one inequality row, or None.

    Needs ``gamma * u - row`` in the dual cone with ``0 <= gamma <= dval``;
    orthant coordinates produce lower bounds, free coordinates exact pins.
    """
    kinds = K.coordinate_kinds()
    lo, hi = 0.0, float(dval)
    pins = []
    for j in range(K.dim):
        if kinds[j] == cones.ORTHANT:
            if u[j] <= 0.0:
                return None
            lo = max(lo, row[j] / u[j])
        elif kinds[j] == cones.FREE:
            if abs(u[j]) < 1e-12:
                if abs(row[j]) > tol:
                    return None
            else:
                pins.append(row[j] / u[j])
    if pins:
        gamma = pins[0]
        if any(abs(pin - gamma) > 1e-9 for pin in pins[1:]):
            return None
        if not (lo - 1e-9 <= gamma <= hi + 1e-9):
            return None
        return float(min(max(gamma, lo), hi))
    if lo > hi + tol:
        return None
    return float(lo)


def certificate_b(qp: QPInstance, sol: RelaxationSolution, tol: float = KERNEL_TOL):
    """Kernel-vector certificate on the northwest block.

    For each candidate kernel direction normalized to leading coordinate -1,
    check that the rest lies in the dual-cone interior and that every row
    admits a multiplier; all returned evidence re-verifies against the data.
    Also reports whether the feasible polytope was verified bounded (the
    test is one-directional otherwise).
    """
    n = qp.n
    nw = np.zeros((n + 1, n + 1))
    nw[0, 0] = 1.0
    nw[0, 1:] = sol.x
    nw[1:, 0] = sol.x
    nw[1:, 1:] = sol.X.array
    kern = kernel_vectors(SymMatrix(nw), tol)
    scale = max(1.0, float(np.abs(nw).max()))
    for cand in _kernel_candidates(kern):
        if abs(cand[0]) < 1e-8:
            continue
        vec = cand / (-cand[0])
        u = vec[1:]
        if not interior_dual_contains(qp.K, u):
            continue
        if np.abs(nw @ vec).max() > 10.0 * tol * scale * max(1.0, float(np.abs(vec).max())):
            continue
        gammas = []
        ok = True
        for i in range(qp.m):
            gamma = _gamma_interval(u, qp.F[i], qp.d[i], qp.K)
            if gamma is None:
                ok = False
                break
            gammas.append(gamma)
        if not ok:
            continue
        gammas = np.array(gammas)
        # Exact re-verification of the evidence.
        dual = dual_cone(qp.K)
        if not all(
            cone_contains(dual, gammas[i] * u - qp.F[i], 1e-9) for i in range(qp.m)
        ):
            continue
        if np.any(gammas < -1e-12) or np.any(gammas > qp.d + 1e-9):
            continue
        bounded = _polytope_bounded(qp)
        return {
            "u": u,
            "gamma": gammas,
            "kernel_vector": vec,
            "kernel_residual": float(np.abs(nw @ vec).max()),
            "polytope_bounded": bounded,
        }
    return None


def _polytope_bounded(qp: QPInstance) -> bool:
    data = ConstraintData.build(
        qp.K,
        [orthant(1)] * qp.m,
        [np.zeros(qp.n)] + [qp.F[i] for i in range(qp.m)],
        [np.ones(1)] * qp.m,
        [0.0] + [float(v) for v in qp.d],
    )
    return check_boundedness(data).status == BOUNDED


def certificate_a(qp: QPInstance, sol: RelaxationSolution, tol: float = KERNEL_TOL):
    """Per-block kernel certificate: vectors ``(-1, alpha_i u, w_i)`` with a
    shared direction ``u`` in the dual-cone interior, positive ``alpha_i,
    w_i``, annihilated by their blocks.

    Blocks with one-dimensional kernels fix their vectors directly; otherwise
    a least-squares collinearity fit across blocks is tried.  All evidence is
    re-verified by evaluating ``M_i v_i``.
    """
    n = qp.n
    if qp.m == 0:
        return None
    parts = []
    for blk in sol.blocks:
        kern = kernel_vectors(blk, tol)
        if len(kern) == 1 and abs(kern[0][0]) > 1e-8:
            vec = kern[0] / (-kern[0][0])
            parts.append(("fixed", vec))
        else:
            parts.append(("fit", kern))

    dirs = []
    for kind, payload in parts:
        if kind == "fixed":
            p = payload[1 : n + 1]
            if np.linalg.norm(p) < 1e-10:
                return None
            dirs.append(p / np.linalg.norm(p))
    if not dirs:
        # No block pins the direction; fall back to the x-part.
        if np.linalg.norm(sol.x) < 1e-10:
            return None
        dirs.append(sol.x / np.linalg.norm(sol.x))
    u_dir = _principal_direction(dirs)
    if u_dir is None:
        return None
    if u_dir[np.argmax(np.abs(u_dir))] < 0:
        u_dir = -u_dir

    alphas, ws, vecs = [], [], []
    for blk, (kind, payload) in zip(sol.blocks, parts):
        if kind == "fixed":
            vec = payload
            p = vec[1 : n + 1]
            alpha = float(np.linalg.norm(p))
            if alpha < 1e-10 or np.abs(p - alpha * u_dir).max() > 1e-6 * max(1.0, alpha):
                return None
            w = float(vec[n + 1])
        else:
            # Fit alpha and w by least squares: M (-1, alpha*u, w) = 0.
            Mb = blk.array
            rhs = Mb[:, 0]
            basis = np.column_stack([Mb[:, 1 : n + 1] @ u_dir, Mb[:, n + 1]])
            coef, *_ = np.linalg.lstsq(basis, rhs, rcond=None)
            alpha, w = float(coef[0]), float(coef[1])
            vec = np.concatenate([[-1.0], alpha * u_dir, [w]])
        scale = max(1.0, float(np.abs(blk.array).max()))
        if np.abs(blk.array @ vec).max() > 10.0 * tol * scale:
            return None
        if alpha <= 1e-10 or w <= 1e-10:
            return None
        alphas.append(alpha)
        ws.append(w)
        vecs.append(vec)
    if not interior_dual_contains(qp.K, u_dir):
        return None
    return {"u": u_dir, "alpha": np.array(alphas), "w": np.array(ws), "vectors": vecs}


def _principal_direction(dirs):
    stack = np.array(dirs)
    # Align signs with the first vector before averaging.
    for k in range(1, stack.shape[0]):
        if stack[k] @ stack[0] < 0:
            stack[k] = -stack[k]
    u, s, vt = np.linalg.svd(stack, full_matrices=False)
    if s.size == 0 or s[0] < 1e-12:
        return None
    return vt[0]


def lemma_equivalence_check(M: SymMatrix, a, b, r: float, nx: Optional[int] = None,
                            tol: float = 1e-9):
    """Evaluate both forms of the lifted linear-constraint condition on a PSD
    matrix ``[[1, x^T, y^T], [x, X, Z^T], [y, Z, Y]]``.

    Returns ``(pair_holds, aggregate_holds)``; on PSD inputs the two agree.
    The matrix must be PSD within tolerance (the equivalence needs it).
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    mat = M.array if isinstance(M, SymMatrix) else np.asarray(M, dtype=float)
    order = mat.shape[0]
    if nx is None:
        nx = a.size
    ny = order - 1 - nx
    if ny != b.size:
        raise ValueError("partition does not match the vector dimensions")
    w, _ = jacobi_eigh(mat)
    scale = max(1.0, float(np.abs(w).max()))
    if w[0] < -tol * scale:
        raise ValueError("matrix is not PSD within tolerance")
    # The aggregate form assumes a unit leading entry; with r = 0 the
    # mismatch term drops out, so only r^2 (M00 - 1) needs to vanish.
    if r * r * abs(mat[0, 0] - 1.0) > 1e-9:
        raise ValueError("leading entry must be one when r is nonzero")
    x = mat[0, 1 : 1 + nx]
    y = mat[0, 1 + nx :]
    X = mat[1 : 1 + nx, 1 : 1 + nx]
    Z = mat[1 + nx :, 1 : 1 + nx]
    Y = mat[1 + nx :, 1 + nx :]
    lin = float(a @ x + b @ y - r)
    quad = float(a @ X @ a + 2.0 * a @ Z.T @ b + b @ Y @ b - r * r)
    agg = float(
        a @ X @ a
        + 2.0 * a @ Z.T @ b
        + b @ Y @ b
        - 2.0 * r * (a @ x)
        - 2.0 * r * (b @ y)
        + r * r
    )
    pair = abs(lin) <= tol * max(1.0, abs(r)) and abs(quad) <= tol * max(1.0, r * r, 1.0)
    aggregate = abs(agg) <= tol * max(1.0, r * r, 1.0)
    return pair, aggregate


def exactness_report(qp: QPInstance, solver_opts: Optional[SolveOptions] = None,
                     bound_tol: float = 1e-6) -> ExactnessReport:
    """Solve the relaxation and run every ex-post exactness check.

    ``ProvenExact`` when rank-one blocks, matching bounds, or either kernel
    certificate verifies; otherwise ``Unknown`` (the checks are sound, not
    complete).
    """
    try:
        lower, sol, upper = solve_bounds(qp, solver_opts)
    except SolverFailure as exc:
        return ExactnessReport(
            float("nan"), None, False, None, None, UNKNOWN,
            diagnostics=f"solver failure: {exc}",
        )
    proven = []
    rank_one = rank_one_certificate(sol)
    if rank_one:
        proven.append("rank_one")
    if upper is not None and abs(upper - lower) <= bound_tol * max(1.0, abs(lower)):
        proven.append("bound_match")
    cert_a = certificate_a(qp, sol)
    if cert_a is not None:
        proven.append("certificate_a")
    cert_b = certificate_b(qp, sol)
    if cert_b is not None:
        proven.append("certificate_b")
    overall = PROVEN_EXACT if proven else UNKNOWN
    return ExactnessReport(
        lower, upper, rank_one, cert_a, cert_b, overall, proven, solution=sol
    )
