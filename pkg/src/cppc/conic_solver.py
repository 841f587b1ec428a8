"""First-order splitting solver for linear programs over coupled DNN blocks.

Programs consist of symmetric matrix blocks, each optionally constrained to
the PSD cone and/or to entrywise nonnegativity, plus sign-constrained scalar
variables, all tied together by affine equality constraints and a linear
objective.

The solver is consensus ADMM: the global iterate is projected onto the
affine equality subspace (cached pseudoinverse of the constraint Gram
matrix), while two consensus copies are projected onto the PSD side and the
nonnegativity side of each block.  Ruiz-style diagonal scaling (uniform per
matrix block, so cone membership is preserved) and over-relaxation are on by
default.  Final residuals are always re-evaluated on the original, unscaled
data before a result is declared Optimal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .jacobi import jacobi_eigh

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
MAX_ITERS = "MaxIters"


@dataclass
class BlockSpec:
    """Matrix block variable: symmetric of given order, with cone flags.

    ``nonneg_mask`` optionally restricts the entrywise nonnegativity to a
    symmetric boolean mask (used when some coordinates of the underlying
    ground cone are free).

    ``forced_kernel`` lists vectors (columns) that every feasible value of
    the block is known to annihilate; such vectors arise when an equality
    pair pins both a linear functional and its squared lift, which forces
    the whole feasible set onto the boundary of the PSD cone.  The solver
    deflates the block onto the orthogonal complement, which restores
    strict feasibility and with it dual attainment.  Supplying a vector
    without this property restricts the program.
    """

    order: int
    psd: bool = True
    nonneg: bool = True
    nonneg_mask: Optional[np.ndarray] = None
    name: str = ""
    forced_kernel: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("block order must be >= 1")
        if self.nonneg_mask is not None:
            m = np.asarray(self.nonneg_mask, dtype=bool)
            if m.shape != (self.order, self.order):
                raise ValueError("nonneg_mask shape mismatch")
            if not np.array_equal(m, m.T):
                raise ValueError("nonneg_mask must be symmetric")
            self.nonneg_mask = m
        if self.forced_kernel is not None:
            k = np.asarray(self.forced_kernel, dtype=float)
            if k.ndim == 1:
                k = k[:, None]
            if k.shape[0] != self.order:
                raise ValueError("forced_kernel dimension mismatch")
            if not self.psd:
                raise ValueError("forced_kernel requires a PSD block")
            self.forced_kernel = k


@dataclass
class ScalarSpec:
    nonneg: bool = True
    name: str = ""


class ConicProgram:
    """Container for blocks, scalars, a linear objective and affine equalities."""

    def __init__(self):
        self.blocks: list[BlockSpec] = []
        self.scalars: list[ScalarSpec] = []
        self.equalities: list[tuple[dict, dict, float]] = []
        self._obj_blocks: dict[int, np.ndarray] = {}
        self._obj_scalars: dict[int, float] = {}
        self.obj_constant: float = 0.0
        self.notes: list[str] = []

    # -- construction ---------------------------------------------------

    def add_block(
        self, order, psd=True, nonneg=True, nonneg_mask=None, name="", forced_kernel=None
    ) -> int:
        self.blocks.append(
            BlockSpec(order, psd, nonneg, nonneg_mask, name, forced_kernel)
        )
        return len(self.blocks) - 1

    def add_scalar(self, nonneg=True, name="") -> int:
        self.scalars.append(ScalarSpec(nonneg, name))
        return len(self.scalars) - 1

    def _coeff_matrix(self, b: int, mat) -> np.ndarray:
        if not 0 <= b < len(self.blocks):
            raise ValueError(f"block index {b} not declared")
        m = np.asarray(mat, dtype=float)
        order = self.blocks[b].order
        if m.shape != (order, order):
            raise ValueError(
                f"coefficient for block {b} has shape {m.shape}, expected "
                f"({order}, {order})"
            )
        if not np.isfinite(m).all():
            raise ValueError("coefficient contains non-finite entries")
        return 0.5 * (m + m.T)

    def add_equality(self, rhs: float, blocks=None, scalars=None) -> None:
        """Append the constraint ``sum_b C_b . M_b + sum_j a_j s_j = rhs``."""
        rhs = float(rhs)
        if not np.isfinite(rhs):
            raise ValueError("right-hand side must be finite")
        bc = {b: self._coeff_matrix(b, m) for b, m in (blocks or {}).items()}
        sc = {}
        for j, a in (scalars or {}).items():
            if not 0 <= j < len(self.scalars):
                raise ValueError(f"scalar index {j} not declared")
            a = float(a)
            if not np.isfinite(a):
                raise ValueError("coefficient contains non-finite entries")
            sc[j] = a
        self.equalities.append((bc, sc, rhs))

    def set_objective(self, blocks=None, scalars=None, constant=0.0) -> None:
        self._obj_blocks = {b: self._coeff_matrix(b, m) for b, m in (blocks or {}).items()}
        self._obj_scalars = {}
        for j, a in (scalars or {}).items():
            if not 0 <= j < len(self.scalars):
                raise ValueError(f"scalar index {j} not declared")
            self._obj_scalars[j] = float(a)
        self.obj_constant = float(constant)

    # -- vectorization ---------------------------------------------------

    @property
    def num_vars(self) -> int:
        return sum(b.order**2 for b in self.blocks) + len(self.scalars)

    def block_offsets(self):
        offs = []
        pos = 0
        for b in self.blocks:
            offs.append(pos)
            pos += b.order**2
        return offs, pos

    def _functional_vector(self, blocks: dict, scalars: dict) -> np.ndarray:
        offs, scal0 = self.block_offsets()
        vec = np.zeros(self.num_vars)
        for b, m in blocks.items():
            o = self.blocks[b].order
            vec[offs[b] : offs[b] + o * o] = m.reshape(-1)
        for j, a in scalars.items():
            vec[scal0 + j] = a
        return vec

    def constraint_matrix(self):
        """Dense ``(A, b)`` of the equality system in the vectorized variables."""
        n = self.num_vars
        m = len(self.equalities)
        A = np.zeros((m, n))
        b = np.zeros(m)
        for i, (bc, sc, rhs) in enumerate(self.equalities):
            A[i] = self._functional_vector(bc, sc)
            b[i] = rhs
        return A, b

    def objective_vector(self) -> np.ndarray:
        return self._functional_vector(self._obj_blocks, self._obj_scalars)

    def vectorize_point(self, block_values, scalar_values) -> np.ndarray:
        offs, scal0 = self.block_offsets()
        v = np.zeros(self.num_vars)
        for b, val in enumerate(block_values):
            val = np.asarray(val, dtype=float)
            o = self.blocks[b].order
            if val.shape != (o, o):
                raise ValueError(f"block {b} value has shape {val.shape}")
            v[offs[b] : offs[b] + o * o] = (0.5 * (val + val.T)).reshape(-1)
        sv = np.asarray(scalar_values, dtype=float).reshape(-1)
        if sv.size != len(self.scalars):
            raise ValueError("scalar value count mismatch")
        v[scal0:] = sv
        return v

    def split_vector(self, v: np.ndarray):
        offs, scal0 = self.block_offsets()
        blocks = []
        for b, off in zip(self.blocks, offs):
            blocks.append(v[off : off + b.order**2].reshape(b.order, b.order).copy())
        return blocks, v[scal0:].copy()

    def validate(self) -> None:
        if self.num_vars == 0:
            raise ValueError("program has no variables")


@dataclass
class SolveOptions:
    tol_primal: float = 1e-7
    tol_dual: float = 1e-7
    tol_gap: float = 1e-6
    max_iters: int = 100000
    scaling: bool = True
    over_relaxation: float = 1.6
    rho: float = 1.0
    adaptive_rho: bool = True
    check_every: int = 25
    stall_window: int = 4000
    stall_threshold: float = 1e-4
    polish: bool = True
    polish_every: int = 500
    #: Tiny quadratic centering term; selects the minimum-norm point of a
    #: flat optimal face.  The bias it introduces is removed by the polish
    #: step and allowed for in the gap acceptance threshold.
    tikhonov: float = 1e-6


@dataclass
class SolveResult:
    status: str
    block_values: list
    scalar_values: np.ndarray
    objective: float
    residuals: dict
    iterations: int
    eq_multipliers: np.ndarray
    diagnostics: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _psd_project(vec, blocks, offs):
    out = vec.copy()
    for spec, off in zip(blocks, offs):
        if not spec.psd:
            continue
        o = spec.order
        m = vec[off : off + o * o].reshape(o, o)
        m = 0.5 * (m + m.T)
        w, q = np.linalg.eigh(m)
        if w[0] >= 0.0:
            out[off : off + o * o] = m.reshape(-1)
            continue
        pos = w > 0.0
        mp = (q[:, pos] * w[pos]) @ q[:, pos].T
        out[off : off + o * o] = (0.5 * (mp + mp.T)).reshape(-1)
    return out


def _psd_violation(vec, blocks, offs, eig=None):
    worst = 0.0
    for spec, off in zip(blocks, offs):
        if not spec.psd:
            continue
        o = spec.order
        m = vec[off : off + o * o].reshape(o, o)
        m = 0.5 * (m + m.T)
        if eig is None:
            w = np.linalg.eigvalsh(m)
        else:
            w, _ = eig(m)
        worst = max(worst, max(0.0, -float(w[0])))
    return worst


def _nonneg_index(p: ConicProgram) -> np.ndarray:
    offs, scal0 = p.block_offsets()
    mask = np.zeros(p.num_vars, dtype=bool)
    for spec, off in zip(p.blocks, offs):
        if not spec.nonneg:
            continue
        o = spec.order
        if spec.nonneg_mask is None:
            mask[off : off + o * o] = True
        else:
            mask[off : off + o * o] = spec.nonneg_mask.reshape(-1)
    for j, s in enumerate(p.scalars):
        if s.nonneg:
            mask[scal0 + j] = True
    return mask


def _ruiz_scale(A, p: ConicProgram, iters: int = 10):
    """Row/column equilibration with per-block-uniform column factors."""
    m, n = A.shape
    offs, scal0 = p.block_offsets()
    groups = []
    for spec, off in zip(p.blocks, offs):
        groups.append(np.arange(off, off + spec.order**2))
    for j in range(len(p.scalars)):
        groups.append(np.array([scal0 + j]))

    D = np.ones(n)
    E = np.ones(m)
    if m == 0:
        return D, E
    for _ in range(iters):
        As = (E[:, None] * A) * D[None, :]
        rn = np.abs(As).max(axis=1)
        rn[rn == 0.0] = 1.0
        E /= np.sqrt(rn)
        cn = np.abs(As).max(axis=0)
        cn[cn == 0.0] = 1.0
        for g in groups:
            gm = np.exp(np.mean(np.log(cn[g])))
            cn[g] = gm
        D /= np.sqrt(cn)
    return D, E


def solve(p: ConicProgram, opts: Optional[SolveOptions] = None) -> SolveResult:
    """Solve the program; see module docstring for the method.

    A result with status ``Optimal`` satisfies the equalities, the cone
    constraints and the duality-gap bound within the configured tolerances,
    re-checked on the unscaled data.  ``MaxIters`` returns the best iterate
    with a residual report and never claims infeasibility; ``Infeasible`` is
    only reported when the equality system alone is provably inconsistent.
    """
    opts = opts or SolveOptions()
    p.validate()
    if any(blk.forced_kernel is not None for blk in p.blocks):
        return _solve_deflated(p, opts)
    A, b = p.constraint_matrix()
    c = p.objective_vector()
    if not (np.isfinite(A).all() and np.isfinite(b).all() and np.isfinite(c).all()):
        raise ValueError("program data contains non-finite values")

    n = p.num_vars
    m = A.shape[0]
    offs, _ = p.block_offsets()
    nn_mask = _nonneg_index(p)

    # Equality system consistency: a positive least-squares residual is a
    # certificate of infeasibility regardless of the cones.
    if m:
        v_ls, *_ = np.linalg.lstsq(A, b, rcond=None)
        ls_res = np.abs(A @ v_ls - b).max()
        if ls_res > 1e-6 * max(1.0, np.abs(b).max()):
            return SolveResult(
                INFEASIBLE,
                *_zero_point(p),
                objective=float("nan"),
                residuals={"equality": float(ls_res)},
                iterations=0,
                eq_multipliers=np.zeros(m),
                diagnostics="equality system is inconsistent",
            )

    if opts.scaling and m:
        D, E = _ruiz_scale(A, p)
    else:
        D, E = np.ones(n), np.ones(m)
    As = (E[:, None] * A) * D[None, :] if m else A.copy()
    bs = E * b
    cs = D * c
    sigma = 1.0 / max(1.0, np.abs(cs).max())
    cs = cs * sigma
    Ginv = np.linalg.pinv(As @ As.T) if m else None
    AsT = As.T

    rho = opts.rho
    alpha = opts.over_relaxation
    eps = opts.tikhonov
    v = np.zeros(n)
    z1 = np.zeros(n)
    z2 = np.zeros(n)
    u1 = np.zeros(n)
    u2 = np.zeros(n)
    mu = np.zeros(m)

    b_scale = 1.0 + (np.abs(bs).max() if m else 0.0)
    best_res = np.inf
    best_res_at = 0
    stalled = False
    it = 0
    tighten = 1.0

    def affine_project(w):
        nonlocal mu
        if m == 0:
            mu = np.zeros(0)
            return w
        q = Ginv @ (As @ w - bs)
        mu = (2.0 * rho + 2.0 * eps) * q
        return w - AsT @ q

    while it < opts.max_iters:
        it += 1
        w = (rho * ((z1 - u1) + (z2 - u2)) - cs) / (2.0 * rho + 2.0 * eps)
        v = affine_project(w)
        v1h = alpha * v + (1.0 - alpha) * z1
        v2h = alpha * v + (1.0 - alpha) * z2
        z1_prev, z2_prev = z1, z2
        z1 = _psd_project(v1h + u1, p.blocks, offs)
        z2 = v2h + u2
        z2 = np.where(nn_mask, np.maximum(z2, 0.0), z2)
        u1 = u1 + v1h - z1
        u2 = u2 + v2h - z2

        if it % opts.check_every == 0 or it == opts.max_iters:
            rp = max(
                float(np.abs(As @ v - bs).max()) if m else 0.0,
                float(np.abs(v - z1).max()),
                float(np.abs(v - z2).max()),
            )
            rd = rho * max(
                float(np.abs(z1 - z1_prev).max()), float(np.abs(z2 - z2_prev).max())
            )
            combined = max(rp, rd)
            if combined < 0.95 * best_res:
                best_res = combined
                best_res_at = it
            elif (
                it - best_res_at >= opts.stall_window
                and combined > opts.stall_threshold
            ):
                stalled = True
                break

            if opts.adaptive_rho and it % 100 == 0:
                if rp > 10.0 * rd and rho < 1e6:
                    rho *= 2.0
                    u1 *= 0.5
                    u2 *= 0.5
                elif rd > 10.0 * rp and rho > 1e-6:
                    rho *= 0.5
                    u1 *= 2.0
                    u2 *= 2.0

            converged_scaled = (
                rp <= tighten * opts.tol_primal * b_scale
                and rd <= tighten * opts.tol_dual * b_scale
            )
            attempt_polish = opts.polish and (
                converged_scaled or it % opts.polish_every == 0
            )
            if attempt_polish:
                polished = _face_polish(p, A, b, c, D * v, opts, it)
                if polished is not None:
                    return polished
            if converged_scaled:
                status, result = _finalize(
                    p, A, b, c, v, mu, D, E, sigma, opts, it
                )
                if status:
                    return result
                # Not acceptable on the original data yet: request more
                # accuracy from the scaled loop and keep iterating (polish
                # keeps retrying as the iterate improves).
                tighten = max(0.2 * tighten, 1e-9)

    if opts.polish:
        polished = _face_polish(p, A, b, c, D * v, opts, it)
        if polished is not None:
            return polished
    # Unconverged: report the best effort with exact residuals.
    _, result = _finalize(p, A, b, c, v, mu, D, E, sigma, opts, it)
    result.status = MAX_ITERS
    result.diagnostics = (
        "stalled: residuals stopped improving (possibly infeasible or "
        "requires more iterations)"
        if stalled
        else "iteration budget exhausted"
    )
    return result


def _zero_point(p: ConicProgram):
    blocks = [np.zeros((b.order, b.order)) for b in p.blocks]
    return [blocks, np.zeros(len(p.scalars))]


def _entry_functional(order: int, r: int, c: int) -> np.ndarray:
    """Symmetric coefficient matrix whose Frobenius pairing reads entry (r, c)."""
    m = np.zeros((order, order))
    if r == c:
        m[r, c] = 1.0
    else:
        m[r, c] = m[c, r] = 0.5
    return m


def _kernel_complement(kernel: np.ndarray, order: int) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of the kernel columns."""
    u, s, _ = np.linalg.svd(kernel, full_matrices=True)
    rank = int(np.sum(s > 1e-12 * max(1.0, s.max(initial=0.0))))
    return u[:, rank:]


def _solve_deflated(p: ConicProgram, opts: SolveOptions) -> SolveResult:
    """Deflate blocks with known kernels onto their complements and solve.

    Entrywise nonnegativity of a deflated block is expressed through slack
    scalars tied to the lifted entries by equality rows, appended after the
    original equalities so multipliers map back positionally.
    """
    red = ConicProgram()
    lifts = []
    for spec in p.blocks:
        if spec.forced_kernel is None:
            red.blocks.append(
                BlockSpec(spec.order, spec.psd, spec.nonneg, spec.nonneg_mask, spec.name)
            )
            lifts.append(None)
            continue
        U = _kernel_complement(spec.forced_kernel, spec.order)
        if U.shape[1] == 0:
            lifts.append(("zero",))
            continue
        red.blocks.append(BlockSpec(U.shape[1], psd=True, nonneg=False, name=spec.name))
        lifts.append(("deflate", U, len(red.blocks) - 1))
    for s in p.scalars:
        red.scalars.append(ScalarSpec(s.nonneg, s.name))

    def translate(block_coeffs, scalar_coeffs):
        bc = {}
        for bidx, C in block_coeffs.items():
            lift = lifts[bidx]
            if lift is None:
                # Index shift: blocks before bidx that were dropped.
                new_idx = sum(
                    1
                    for j in range(bidx)
                    if lifts[j] is None or lifts[j][0] == "deflate"
                )
                bc[new_idx] = C
            elif lift[0] == "deflate":
                U = lift[1]
                bc[lift[2]] = U.T @ C @ U
            # dropped (identically zero) blocks contribute nothing
        return bc, dict(scalar_coeffs)

    for bc, sc, rhs in p.equalities:
        nbc, nsc = translate(bc, sc)
        red.add_equality(rhs, nbc, nsc)
    obj_bc, obj_sc = translate(p._obj_blocks, p._obj_scalars)
    red.set_objective(obj_bc, obj_sc, p.obj_constant)

    # Slack rows for the entrywise nonnegativity of deflated blocks.
    for spec, lift in zip(p.blocks, lifts):
        if lift is None or lift[0] == "zero" or not spec.nonneg:
            continue
        U, new_idx = lift[1], lift[2]
        mask = (
            spec.nonneg_mask
            if spec.nonneg_mask is not None
            else np.ones((spec.order, spec.order), bool)
        )
        for r in range(spec.order):
            for c in range(r, spec.order):
                if not mask[r, c]:
                    continue
                s = red.add_scalar(nonneg=True, name=f"{spec.name}[{r},{c}]")
                red.add_equality(
                    0.0,
                    blocks={new_idx: U.T @ _entry_functional(spec.order, r, c) @ U},
                    scalars={s: -1.0},
                )

    res = solve(red, opts)
    m_orig = len(p.equalities)
    blocks_out = []
    pos = 0
    for spec, lift in zip(p.blocks, lifts):
        if lift is None:
            blocks_out.append(res.block_values[pos])
            pos += 1
        elif lift[0] == "zero":
            blocks_out.append(np.zeros((spec.order, spec.order)))
        else:
            U = lift[1]
            G = res.block_values[pos]
            pos += 1
            blocks_out.append(U @ G @ U.T)
    scalars_out = res.scalar_values[: len(p.scalars)]
    lifted = SolveResult(
        res.status,
        blocks_out,
        np.asarray(scalars_out),
        res.objective,
        dict(res.residuals),
        res.iterations,
        res.eq_multipliers[:m_orig] if res.eq_multipliers.size else res.eq_multipliers,
        res.diagnostics,
    )
    # Re-evaluate the primal residuals on the original program.
    check = kkt_residuals(p, blocks_out, scalars_out)
    lifted.residuals["equality"] = check["equality"]
    lifted.residuals["cone"] = check["cone"]
    return lifted


def _finalize(p, A, b, c, v_scaled, mu, D, E, sigma, opts, it):
    """Unscale the iterate and evaluate exact residuals on the original data."""
    m = A.shape[0]
    v = D * v_scaled
    nu = (E * mu) / sigma if m else np.zeros(0)
    offs, _ = p.block_offsets()
    nn_mask = _nonneg_index(p)

    eq_res = float(np.abs(A @ v - b).max()) if m else 0.0
    psd_viol = _psd_violation(v, p.blocks, offs)
    nn_viol = float(max(0.0, -(v[nn_mask].min() if nn_mask.any() else 0.0)))
    cone_viol = max(psd_viol, nn_viol)
    obj = float(c @ v) + p.obj_constant
    dual_obj = float(-(b @ nu)) + p.obj_constant if m else p.obj_constant
    gap = abs(obj - dual_obj)
    gap_rel = gap / max(1.0, abs(obj), abs(dual_obj))

    residuals = {
        "equality": eq_res,
        "cone": cone_viol,
        "gap": gap,
        "gap_relative": gap_rel,
        "dual_objective": dual_obj,
    }
    scale = 1.0 + (np.abs(b).max() if m else 0.0)
    # The centering term shifts the stationarity system by 2*eps*v_scaled,
    # which biases the measured gap by about that much times the iterate
    # norm; allow for the known bias when accepting.
    bias = 2.0 * opts.tikhonov * float(v_scaled @ v_scaled) / sigma
    ok = (
        eq_res <= opts.tol_primal * scale
        and cone_viol <= opts.tol_primal * scale
        and gap <= opts.tol_gap * max(1.0, abs(obj), abs(dual_obj)) + 4.0 * bias
    )
    blocks, scalars = p.split_vector(v)
    result = SolveResult(
        OPTIMAL if ok else MAX_ITERS,
        blocks,
        scalars,
        obj,
        residuals,
        it,
        nu,
    )
    return ok, result


# -- active-face polishing -------------------------------------------------
#
# From an approximate iterate, guess the optimal face (numerical rank of each
# PSD block, near-zero nonnegativity-constrained coordinates), then solve the
# face-restricted KKT system: a Gauss-Newton pass on the primal factors
# ``M_i = R_i R_i^T`` followed by one on the dual, whose reduced costs are
# parametrized as ``W_i L_i L_i^T W_i^T`` on the detected kernels so positive
# semidefiniteness is structural.  Sign-violated multipliers flip their
# constraint between active and inactive and the solve repeats.  A candidate
# pair is accepted only after an exact KKT verification, so acceptance never
# depends on the face guess being right; by convexity a verified pair is
# optimal.

_POLISH_THRESHOLDS = (1e-3, 1e-4, 1e-2, 3e-4, 1e-5, 3e-2)


def _face_polish(p, A, b, c, v, opts, it):
    for theta in _POLISH_THRESHOLDS:
        faces = _detect_faces(p, v, theta)
        out = _kkt_refine(p, A, b, c, v, faces)
        if out is None:
            continue
        vp, nu, dual_res = out
        obj = float(c @ vp) + p.obj_constant
        m = A.shape[0]
        dual_obj = float(-(b @ nu)) + p.obj_constant if m else p.obj_constant
        gap = abs(obj - dual_obj)
        offs, _ = p.block_offsets()
        nn_mask = _nonneg_index(p)
        residuals = {
            "equality": float(np.abs(A @ vp - b).max()) if m else 0.0,
            "cone": max(
                _psd_violation(vp, p.blocks, offs),
                float(max(0.0, -(vp[nn_mask].min() if nn_mask.any() else 0.0))),
            ),
            "dual": dual_res,
            "gap": gap,
            "gap_relative": gap / max(1.0, abs(obj), abs(dual_obj)),
            "dual_objective": dual_obj,
        }
        blocks, scalars = p.split_vector(vp)
        return SolveResult(
            OPTIMAL,
            blocks,
            scalars,
            obj,
            residuals,
            it,
            nu,
            diagnostics=f"face polish accepted at threshold {theta:g}",
        )
    return None


def _detect_faces(p, v, theta):
    """Per-PSD-block numerical rank and per-coordinate activity guesses."""
    offs, scal0 = p.block_offsets()
    scale_v = max(1.0, float(np.abs(v).max()))
    faces = []
    for spec, off in zip(p.blocks, offs):
        o = spec.order
        mblk = v[off : off + o * o].reshape(o, o)
        mblk = 0.5 * (mblk + mblk.T)
        if spec.psd:
            w, q = np.linalg.eigh(mblk)
            thr = theta * max(float(w.max(initial=0.0)), 1e-3)
            keep = w > thr
            faces.append(
                {
                    "kind": "psd",
                    "rank": int(keep.sum()),
                    "R0": q[:, keep] * np.sqrt(np.maximum(w[keep], 0.0)),
                    "active": _active_entries(spec, mblk, theta * scale_v),
                }
            )
        else:
            faces.append(
                {"kind": "nn", "active": _active_entries(spec, mblk, theta * scale_v)}
            )
    active_scalars = np.zeros(len(p.scalars), dtype=bool)
    for j, s in enumerate(p.scalars):
        if s.nonneg and v[scal0 + j] <= theta * scale_v:
            active_scalars[j] = True
    return faces, active_scalars


def _active_entries(spec, mblk, thr):
    """Symmetric mask of nonnegativity-constrained entries near zero."""
    o = spec.order
    if not spec.nonneg:
        return np.zeros((o, o), dtype=bool)
    mask = spec.nonneg_mask if spec.nonneg_mask is not None else np.ones((o, o), bool)
    return mask & (mblk <= thr)


def _gauss_newton(residual, jacobian, x, scale, max_iter=20, tol=1e-12):
    F = residual(x)
    fnorm = float(np.abs(F).max()) if F.size else 0.0
    for _ in range(max_iter):
        if fnorm <= tol * scale:
            break
        J = jacobian(x)
        step, *_ = np.linalg.lstsq(J, -F, rcond=None)
        improved = False
        alpha = 1.0
        for _ls in range(8):
            xt = x + alpha * step
            Ft = residual(xt)
            ft = float(np.abs(Ft).max()) if Ft.size else 0.0
            if ft < fnorm:
                x, F, fnorm = xt, Ft, ft
                improved = True
                break
            alpha *= 0.5
        if not improved:
            break
    return x, fnorm


class _PrimalFace:
    """Primal face parametrization: PSD blocks as ``R R^T`` at fixed rank,
    inactive coordinates of other blocks and of scalars as free values,
    active ones pinned to zero."""

    def __init__(self, p, A, b, faces_info):
        self.p, self.A, self.b = p, A, b
        self.faces, self.active_scalars = faces_info
        self.offs, self.scal0 = p.block_offsets()
        self.m = A.shape[0]
        self.segments = []
        pos = 0
        for bidx, (spec, face) in enumerate(zip(p.blocks, self.faces)):
            if face["kind"] == "psd":
                r = face["rank"]
                self.segments.append(("R", bidx, slice(pos, pos + spec.order * r), r))
                pos += spec.order * r
        self.coords = []
        for bidx, (spec, face) in enumerate(zip(p.blocks, self.faces)):
            if face["kind"] != "nn":
                continue
            for r in range(spec.order):
                for ccol in range(r, spec.order):
                    if not face["active"][r, ccol]:
                        self.coords.append((bidx, r, ccol))
        self.scalar_idx = [
            j for j in range(len(p.scalars)) if not self.active_scalars[j]
        ]
        self.coord_slice = slice(pos, pos + len(self.coords) + len(self.scalar_idx))
        pos += len(self.coords) + len(self.scalar_idx)
        self.num_params = pos
        self.comp_entries = []
        for bidx, (spec, face) in enumerate(zip(p.blocks, self.faces)):
            if face["kind"] != "psd":
                continue
            for r in range(spec.order):
                for ccol in range(r, spec.order):
                    if face["active"][r, ccol]:
                        self.comp_entries.append((bidx, r, ccol))

    def init(self, v):
        x = np.zeros(self.num_params)
        for kind, bidx, sl, r in self.segments:
            x[sl] = self.faces[bidx]["R0"].reshape(-1)
        vals = []
        for (bidx, r, ccol) in self.coords:
            o = self.p.blocks[bidx].order
            vals.append(v[self.offs[bidx] + r * o + ccol])
        for j in self.scalar_idx:
            vals.append(v[self.scal0 + j])
        x[self.coord_slice] = vals
        return x

    def vector(self, x):
        v = np.zeros(self.p.num_vars)
        for kind, bidx, sl, r in self.segments:
            o = self.p.blocks[bidx].order
            R = x[sl].reshape(o, r)
            v[self.offs[bidx] : self.offs[bidx] + o * o] = (R @ R.T).reshape(-1)
        vals = x[self.coord_slice]
        k = 0
        for (bidx, r, ccol) in self.coords:
            o = self.p.blocks[bidx].order
            v[self.offs[bidx] + r * o + ccol] = vals[k]
            v[self.offs[bidx] + ccol * o + r] = vals[k]
            k += 1
        for j in self.scalar_idx:
            v[self.scal0 + j] = vals[k]
            k += 1
        return v

    def residual(self, x):
        v = self.vector(x)
        parts = [self.A @ v - self.b if self.m else np.zeros(0)]
        comp = []
        for (bidx, r, ccol) in self.comp_entries:
            o = self.p.blocks[bidx].order
            comp.append(v[self.offs[bidx] + r * o + ccol])
        parts.append(np.array(comp))
        return np.concatenate(parts)

    def jacobian(self, x):
        rows = self.m + len(self.comp_entries)
        J = np.zeros((rows, self.num_params))
        for kind, bidx, sl, r in self.segments:
            o = self.p.blocks[bidx].order
            R = x[sl].reshape(o, r)
            off = self.offs[bidx]
            Ablk = self.A[:, off : off + o * o] if self.m else None
            for a in range(o):
                for j in range(r):
                    dM = np.zeros((o, o))
                    dM[a, :] += R[:, j]
                    dM[:, a] += R[:, j]
                    col = sl.start + a * r + j
                    if self.m:
                        J[: self.m, col] = Ablk @ dM.reshape(-1)
                    for kc, (bb, rr, cc) in enumerate(self.comp_entries):
                        if bb == bidx:
                            J[self.m + kc, col] = dM[rr, cc]
        tpos = self.coord_slice.start
        for k, (bidx, r, ccol) in enumerate(self.coords):
            o = self.p.blocks[bidx].order
            off = self.offs[bidx]
            if self.m:
                col = self.A[:, off + r * o + ccol].copy()
                if ccol != r:
                    col = col + self.A[:, off + ccol * o + r]
                J[: self.m, tpos + k] = col
        base = len(self.coords)
        for k, j in enumerate(self.scalar_idx):
            if self.m:
                J[: self.m, tpos + base + k] = self.A[:, self.scal0 + j]
        return J


class _JointFace:
    """Joint face-restricted KKT system for Gauss-Newton.

    Unknowns: PSD-block factors ``R_i`` (fixed rank), inactive non-PSD
    coordinates, equality multipliers ``nu`` and nonnegativity multipliers
    ``N`` on active PSD-block entries.  Rows: equality feasibility,
    per-block ``S_i R_i = 0`` with ``S_i = c_i + (A^T nu)_i - N_i``,
    complementarity of active entries, and stationarity of non-active flat
    coordinates.  Sign constraints are not part of the system; the dual is
    re-derived afterwards, the joint solve only pins the primal optimizer.
    """

    def __init__(self, p, A, b, c, faces_info):
        self.primal = _PrimalFace(p, A, b, faces_info)
        self.p, self.A, self.b, self.c = p, A, b, c
        self.faces, self.active_scalars = faces_info
        self.offs, self.scal0 = p.block_offsets()
        self.m = A.shape[0]
        pos = self.primal.num_params
        self.nu_slice = slice(pos, pos + self.m)
        pos += self.m
        self.nn_entries = list(self.primal.comp_entries)
        self.nn_slice = slice(pos, pos + len(self.nn_entries))
        pos += len(self.nn_entries)
        self.num_params = pos
        self.flat_rows = []
        for bidx, (spec, face) in enumerate(zip(p.blocks, self.faces)):
            if face["kind"] != "nn":
                continue
            mask = (
                spec.nonneg_mask
                if spec.nonneg_mask is not None
                else np.ones((spec.order, spec.order), bool)
            )
            for r in range(spec.order):
                for ccol in range(r, spec.order):
                    if spec.nonneg and mask[r, ccol] and face["active"][r, ccol]:
                        continue
                    self.flat_rows.append(("block", bidx, r, ccol))
        for j, s in enumerate(p.scalars):
            if s.nonneg and self.active_scalars[j]:
                continue
            self.flat_rows.append(("scalar", j))

    def init(self, v, nu0=None):
        x = np.zeros(self.num_params)
        x[: self.primal.num_params] = self.primal.init(v)
        if nu0 is not None and nu0.size == self.m:
            x[self.nu_slice] = nu0
        return x

    def _s_blocks(self, x):
        nu = x[self.nu_slice]
        s_full = self.c + (self.A.T @ nu if self.m else 0.0)
        S = {}
        for kind, bidx, sl, r in self.primal.segments:
            o = self.p.blocks[bidx].order
            off = self.offs[bidx]
            blk = s_full[off : off + o * o].reshape(o, o)
            S[bidx] = 0.5 * (blk + blk.T)
        for val, (bidx, r, ccol) in zip(x[self.nn_slice], self.nn_entries):
            S[bidx][r, ccol] -= val
            S[bidx][ccol, r] -= val
        return s_full, S

    def residual(self, x):
        xp = x[: self.primal.num_params]
        v = self.primal.vector(xp)
        parts = [self.A @ v - self.b if self.m else np.zeros(0)]
        s_full, S = self._s_blocks(x)
        for kind, bidx, sl, r in self.primal.segments:
            o = self.p.blocks[bidx].order
            R = xp[sl].reshape(o, r)
            parts.append((S[bidx] @ R).reshape(-1))
        comp = []
        for (bidx, r, ccol) in self.primal.comp_entries:
            o = self.p.blocks[bidx].order
            comp.append(v[self.offs[bidx] + r * o + ccol])
        parts.append(np.array(comp))
        stat = []
        for row in self.flat_rows:
            if row[0] == "block":
                _, bidx, r, ccol = row
                o = self.p.blocks[bidx].order
                stat.append(s_full[self.offs[bidx] + r * o + ccol])
            else:
                stat.append(s_full[self.scal0 + row[1]])
        parts.append(np.array(stat))
        return np.concatenate(parts)

    def jacobian(self, x):
        xp = x[: self.primal.num_params]
        Jp = self.primal.jacobian(xp)  # rows: equality + comp
        m = self.m
        n_comp = len(self.primal.comp_entries)
        n_sr = sum(
            self.p.blocks[bidx].order * r
            for kind, bidx, sl, r in self.primal.segments
        )
        n_stat = len(self.flat_rows)
        total_rows = m + n_sr + n_comp + n_stat
        J = np.zeros((total_rows, self.num_params))
        J[:m, : self.primal.num_params] = Jp[:m]
        J[m + n_sr : m + n_sr + n_comp, : self.primal.num_params] = Jp[m:]

        s_full, S = self._s_blocks(x)
        row = m
        for kind, bidx, sl, r in self.primal.segments:
            o = self.p.blocks[bidx].order
            off = self.offs[bidx]
            R = xp[sl].reshape(o, r)
            nrows = o * r
            Sb = S[bidx]
            for a in range(o):
                for j in range(r):
                    dSR = np.zeros((o, r))
                    dSR[:, j] = Sb[:, a]
                    J[row : row + nrows, sl.start + a * r + j] = dSR.reshape(-1)
            if m:
                for kcon in range(m):
                    Ak = self.A[kcon, off : off + o * o].reshape(o, o)
                    Ak = 0.5 * (Ak + Ak.T)
                    J[row : row + nrows, self.nu_slice.start + kcon] = (Ak @ R).reshape(-1)
            for knn, (bb, rr, cc) in enumerate(self.nn_entries):
                if bb != bidx:
                    continue
                dS = np.zeros((o, o))
                dS[rr, cc] -= 1.0
                dS[cc, rr] -= 1.0
                J[row : row + nrows, self.nn_slice.start + knn] = (dS @ R).reshape(-1)
            row += nrows
        row += n_comp
        for i, frow in enumerate(self.flat_rows):
            if frow[0] == "block":
                _, bidx, r, ccol = frow
                o = self.p.blocks[bidx].order
                idx = self.offs[bidx] + r * o + ccol
            else:
                idx = self.scal0 + frow[1]
            if m:
                J[row + i, self.nu_slice] = self.A[:, idx]
        return J


class _DualLinear:
    """Linear dual system at a fixed primal face.

    With the kernel blocks kept as unfactored symmetric matrices the
    stationarity system is linear: ``c + A^T nu = W Theta W^T + N`` on PSD
    blocks and ``c + A^T nu = n`` (or ``= 0``) elsewhere.  Unknowns are
    ``nu`` (free), the ``Theta`` blocks (required PSD), the multipliers
    ``N`` on active PSD-block entries and ``n`` on active flat coordinates
    (required nonnegative).  A sign-feasible solution is found by
    alternating projections between the affine solution space and the cone
    product.
    """

    def __init__(self, p, A, c, faces_info, kernels):
        self.p, self.A, self.c = p, A, c
        faces, active_scalars = faces_info
        self.offs, self.scal0 = p.block_offsets()
        m = A.shape[0]
        self.m = m

        rows = []  # (coordinate index in v-space, kind)
        for bidx, (spec, face) in enumerate(zip(p.blocks, faces)):
            o = spec.order
            if face["kind"] == "psd":
                for r in range(o):
                    for ccol in range(r, o):
                        rows.append(("psd", bidx, r, ccol))
            else:
                mask = (
                    spec.nonneg_mask
                    if spec.nonneg_mask is not None
                    else np.ones((o, o), bool)
                )
                for r in range(o):
                    for ccol in range(r, o):
                        active = spec.nonneg and mask[r, ccol] and face["active"][r, ccol]
                        rows.append(("flat", bidx, r, ccol, active))
        for j, s in enumerate(p.scalars):
            active = s.nonneg and active_scalars[j]
            rows.append(("scalar", j, active))
        self.rows = rows
        nrows = len(rows)

        # Parameter layout.
        pos = m
        self.theta_slices = {}
        for bidx, W in kernels.items():
            k = W.shape[1]
            self.theta_slices[bidx] = (slice(pos, pos + k * (k + 1) // 2), k)
            pos += k * (k + 1) // 2
        self.nn_entries = []
        for bidx, (spec, face) in enumerate(zip(p.blocks, faces)):
            if face["kind"] != "psd":
                continue
            for r in range(spec.order):
                for ccol in range(r, spec.order):
                    if face["active"][r, ccol]:
                        self.nn_entries.append((bidx, r, ccol))
        self.nn_slice = slice(pos, pos + len(self.nn_entries))
        pos += len(self.nn_entries)
        self.flat_duals = []
        for i, row in enumerate(rows):
            if row[0] == "flat" and row[4]:
                self.flat_duals.append(i)
            elif row[0] == "scalar" and row[2]:
                self.flat_duals.append(i)
        self.flat_slice = slice(pos, pos + len(self.flat_duals))
        pos += len(self.flat_duals)
        self.num_params = pos
        self.kernels = kernels

        D = np.zeros((nrows, pos))
        r_vec = np.zeros(nrows)
        for i, row in enumerate(rows):
            if row[0] == "psd" or row[0] == "flat":
                bidx, r, ccol = row[1], row[2], row[3]
                o = p.blocks[bidx].order
                idx = self.offs[bidx] + r * o + ccol
            else:
                idx = self.scal0 + row[1]
            if m:
                D[i, :m] = A[:, idx]
            r_vec[i] = -c[idx]
        for bidx, (sl, k) in self.theta_slices.items():
            W = kernels[bidx]
            t = 0
            for a in range(k):
                for bb in range(a, k):
                    dS = np.outer(W[:, a], W[:, bb])
                    dS = dS + dS.T if a != bb else dS
                    for i, row in enumerate(rows):
                        if row[0] == "psd" and row[1] == bidx:
                            D[i, sl.start + t] = -dS[row[2], row[3]]
                    t += 1
        for knn, (bidx, r, ccol) in enumerate(self.nn_entries):
            for i, row in enumerate(rows):
                if row[0] == "psd" and (row[1], row[2], row[3]) == (bidx, r, ccol):
                    D[i, self.nn_slice.start + knn] = -1.0
        for kfl, i in enumerate(self.flat_duals):
            D[i, self.flat_slice.start + kfl] = -1.0
        self.D = D
        self.r = r_vec
        self.Ginv = np.linalg.pinv(D @ D.T)

    def affine_project(self, y):
        return y - self.D.T @ (self.Ginv @ (self.D @ y - self.r))

    def cone_project(self, y):
        out = y.copy()
        for bidx, (sl, k) in self.theta_slices.items():
            theta = _sym_from_upper(y[sl], k)
            w, q = np.linalg.eigh(theta)
            wpos = np.maximum(w, 0.0)
            theta = (q * wpos) @ q.T
            out[sl] = _upper_from_sym(theta)
        out[self.nn_slice] = np.maximum(y[self.nn_slice], 0.0)
        out[self.flat_slice] = np.maximum(y[self.flat_slice], 0.0)
        return out

    def cone_violation(self, y):
        worst = 0.0
        for bidx, (sl, k) in self.theta_slices.items():
            if k == 0:
                continue
            theta = _sym_from_upper(y[sl], k)
            worst = max(worst, max(0.0, -float(np.linalg.eigvalsh(theta).min())))
        if self.nn_entries:
            worst = max(worst, max(0.0, -float(y[self.nn_slice].min())))
        if self.flat_duals:
            worst = max(worst, max(0.0, -float(y[self.flat_slice].min())))
        return worst

    def solve(self, tol, max_iters=25000):
        """Alternating projections; returns a sign-feasible ``y`` with small
        equation residual, or None.

        Convergence is linear when the intersection is nonempty; progress is
        monitored over 500-iteration windows and the solve gives up early
        when the residual stops shrinking geometrically.
        """
        y, *_ = np.linalg.lstsq(self.D, self.r, rcond=None)
        window_res = None
        for it in range(max_iters):
            y = self.cone_project(y)
            res = float(np.abs(self.D @ y - self.r).max()) if self.r.size else 0.0
            if res <= tol:
                return y, res
            if it % 500 == 0:
                if window_res is not None and res > 0.6 * window_res and res > 50 * tol:
                    break
                window_res = res
            y = self.affine_project(y)
        return None


def _sym_from_upper(vals, k):
    theta = np.zeros((k, k))
    t = 0
    for a in range(k):
        for bb in range(a, k):
            theta[a, bb] = theta[bb, a] = vals[t]
            t += 1
    return theta


def _upper_from_sym(theta):
    k = theta.shape[0]
    vals = np.zeros(k * (k + 1) // 2)
    t = 0
    for a in range(k):
        for bb in range(a, k):
            vals[t] = theta[a, bb]
            t += 1
    return vals


def _kkt_refine(p, A, b, c, v, faces_info, max_refine: int = 8):
    """Joint face KKT Gauss-Newton to pin the primal optimizer, then a
    sign-feasible dual by alternating projections, then full verification.

    Primal coordinates that come out negative are pinned to zero and the
    solve repeats; dual sign constraints are enforced inside the projection
    solve, so the joint stage may ignore them.
    """
    m = A.shape[0]
    scale_b = 1.0 + (float(np.abs(b).max()) if m else 0.0)
    scale_c = 1.0 + float(np.abs(c).max())
    scale = max(scale_b, scale_c)
    current_v = v
    nu_warm = None
    for _ in range(max_refine):
        faces, active_scalars = faces_info
        joint = _JointFace(p, A, b, c, faces_info)
        x0 = joint.init(current_v, nu_warm)
        # The residual is linear in (nu, N); one least-squares solve gives
        # the best dual start for the initial factors.
        F0 = joint.residual(x0)
        J0 = joint.jacobian(x0)
        dual_cols = np.r_[
            np.arange(joint.nu_slice.start, joint.nu_slice.stop),
            np.arange(joint.nn_slice.start, joint.nn_slice.stop),
        ]
        if dual_cols.size:
            dstep, *_ = np.linalg.lstsq(J0[:, dual_cols], -F0, rcond=None)
            x0[dual_cols] += dstep
        x, fnorm = _gauss_newton(joint.residual, joint.jacobian, x0, scale)
        if fnorm > 1e-10 * scale:
            return None
        vp = joint.primal.vector(x[: joint.primal.num_params])
        nu_warm = x[joint.nu_slice].copy()

        # Primal sign violations: pin the offending coordinate to zero.
        flips = 0
        tol_v = 1e-9 * max(1.0, float(np.abs(vp).max()))
        offs, scal0 = p.block_offsets()
        for bidx, (spec, face) in enumerate(zip(p.blocks, faces)):
            if not spec.nonneg:
                continue
            o = spec.order
            mask = (
                spec.nonneg_mask
                if spec.nonneg_mask is not None
                else np.ones((o, o), bool)
            )
            blkv = vp[offs[bidx] : offs[bidx] + o * o].reshape(o, o)
            for r in range(o):
                for ccol in range(r, o):
                    if mask[r, ccol] and not face["active"][r, ccol]:
                        if blkv[r, ccol] < -tol_v:
                            face["active"][r, ccol] = True
                            face["active"][ccol, r] = True
                            flips += 1
        for j, s in enumerate(p.scalars):
            if s.nonneg and not active_scalars[j] and vp[scal0 + j] < -tol_v:
                active_scalars[j] = True
                flips += 1
        if flips:
            current_v = vp
            _refresh_factors(p, faces_info, vp)
            continue

        # Sign-feasible dual on the kernels of the polished blocks.
        kernels = {}
        for bidx, (spec, face) in enumerate(zip(p.blocks, faces)):
            if face["kind"] != "psd":
                continue
            o = spec.order
            blkv = vp[offs[bidx] : offs[bidx] + o * o].reshape(o, o)
            w, q = np.linalg.eigh(0.5 * (blkv + blkv.T))
            order_idx = np.argsort(w)[::-1]
            kernels[bidx] = q[:, order_idx[face["rank"] :]]
        dual = _DualLinear(p, A, c, faces_info, kernels)
        out = dual.solve(tol=1e-9 * scale_c)
        if out is None:
            return None
        y, dual_res = out
        nu = y[:m]

        # Full verification on the original data.
        if m and np.abs(A @ vp - b).max() > 1e-9 * scale_b:
            return None
        nn_mask = _nonneg_index(p)
        if nn_mask.any() and vp[nn_mask].min() < -tol_v:
            return None
        if _psd_violation(vp, p.blocks, offs) > tol_v:
            return None
        obj = float(c @ vp)
        dual_obj = float(-(b @ nu)) if m else 0.0
        if abs(obj - dual_obj) > 1e-7 * max(1.0, abs(obj), abs(dual_obj)):
            return None
        return vp, nu, dual_res
    return None


def _refresh_factors(p, faces_info, v):
    """Recompute PSD factor guesses from ``v`` keeping the detected ranks."""
    faces, _ = faces_info
    offs, _ = p.block_offsets()
    for spec, off, face in zip(p.blocks, offs, faces):
        if face["kind"] != "psd":
            continue
        o = spec.order
        mblk = v[off : off + o * o].reshape(o, o)
        mblk = 0.5 * (mblk + mblk.T)
        w, q = np.linalg.eigh(mblk)
        keep = np.argsort(w)[::-1][: face["rank"]]
        face["R0"] = q[:, keep] * np.sqrt(np.maximum(w[keep], 0.0))


def _dual_init(dual: "_DualFace"):
    """Linear initialization: solve for (nu, Theta, N) with unstructured
    symmetric kernel blocks, then factor the PSD part of each Theta."""
    p, A, c = dual.p, dual.A, dual.c
    nrows = len(dual.psd_rows) + len(dual.flat_rows)
    cols = []
    theta_pairs = {}
    for bidx, W in dual.kernels.items():
        k = W.shape[1]
        pairs = [(a, bb) for a in range(k) for bb in range(a, k)]
        theta_pairs[bidx] = (len(cols), pairs)
        for (a, bb) in pairs:
            dS = np.outer(W[:, a], W[:, bb])
            dS = dS + dS.T if a != bb else np.outer(W[:, a], W[:, a])
            col = np.zeros(nrows)
            for i, (bj, r, ccol) in enumerate(dual.psd_rows):
                if bj == bidx:
                    col[i] = -dS[r, ccol]
            cols.append(col)
    nn_col0 = len(cols)
    for (bidx, r, ccol) in dual.nn_entries:
        col = np.zeros(nrows)
        for i, (bj, rr, cc) in enumerate(dual.psd_rows):
            if (bj, rr, cc) == (bidx, r, ccol):
                col[i] = -1.0
        cols.append(col)
    # nu columns
    nu_cols = np.zeros((nrows, dual.m))
    for i, (bidx, r, ccol) in enumerate(dual.psd_rows):
        o = p.blocks[bidx].order
        if dual.m:
            nu_cols[i] = A[:, dual.offs[bidx] + r * o + ccol]
    for i, row in enumerate(dual.flat_rows):
        if row[0] == "block":
            _, bidx, r, ccol = row
            o = p.blocks[bidx].order
            idx = dual.offs[bidx] + r * o + ccol
        else:
            idx = dual.scal0 + row[1]
        if dual.m:
            nu_cols[len(dual.psd_rows) + i] = A[:, idx]
    rhs = np.zeros(nrows)
    for i, (bidx, r, ccol) in enumerate(dual.psd_rows):
        o = p.blocks[bidx].order
        rhs[i] = -c[dual.offs[bidx] + r * o + ccol]
    for i, row in enumerate(dual.flat_rows):
        if row[0] == "block":
            _, bidx, r, ccol = row
            o = p.blocks[bidx].order
            idx = dual.offs[bidx] + r * o + ccol
        else:
            idx = dual.scal0 + row[1]
        rhs[len(dual.psd_rows) + i] = -c[idx]
    D = np.hstack([nu_cols] + ([np.array(cols).T] if cols else []))
    sol, *_ = np.linalg.lstsq(D, rhs, rcond=None)
    y = np.zeros(dual.num_params)
    y[dual.nu_slice] = sol[: dual.m]
    for bidx, W in dual.kernels.items():
        k = W.shape[1]
        start, pairs = theta_pairs[bidx]
        theta = np.zeros((k, k))
        for offset, (a, bb) in enumerate(pairs):
            val = sol[dual.m + start + offset]
            theta[a, bb] = theta[bb, a] = val
        w, q = np.linalg.eigh(theta)
        L = q[:, w > 0] * np.sqrt(w[w > 0])
        Lfull = np.zeros((k, k))
        Lfull[:, : L.shape[1]] = L
        y[dual.l_slices[bidx]] = Lfull.reshape(-1)
    if dual.nn_entries:
        y[dual.nn_slice] = sol[dual.m + nn_col0 : dual.m + nn_col0 + len(dual.nn_entries)]
    return y


def kkt_residuals(p: ConicProgram, block_values, scalar_values=()):
    """Exact residual evaluation at a given point; no iteration.

    Returns the equality residual (infinity norm), the cone violation (worst
    negative eigenvalue over PSD blocks and worst negative entry over
    nonnegativity-constrained coordinates) and the objective value.  The
    spectral part uses the Jacobi eigensolver.
    """
    v = p.vectorize_point(block_values, scalar_values)
    A, b = p.constraint_matrix()
    c = p.objective_vector()
    offs, _ = p.block_offsets()
    eq = float(np.abs(A @ v - b).max()) if A.shape[0] else 0.0
    psd_viol = _psd_violation(v, p.blocks, offs, eig=jacobi_eigh)
    nn_mask = _nonneg_index(p)
    nn_viol = float(max(0.0, -(v[nn_mask].min() if nn_mask.any() else 0.0)))
    return {
        "equality": eq,
        "cone": max(psd_viol, nn_viol),
        "objective": float(c @ v) + p.obj_constant,
    }
