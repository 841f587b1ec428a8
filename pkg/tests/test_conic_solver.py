import numpy as np
import pytest

from cppc.conic_solver import (
    INFEASIBLE,
    MAX_ITERS,
    OPTIMAL,
    ConicProgram,
    SolveOptions,
    kkt_residuals,
    solve,
)
from cppc.oracles import lp_maximize_standard, lp_minimize_standard
from cppc.qp_relax import build_sparse_relaxation

ONE = np.array([[1.0]])


def triangle_lp():
    # max x1 + x2 s.t. x >= 0, x1 + 2 x2 <= 1, 2 x1 + x2 <= 1
    p = ConicProgram()
    x1 = p.add_block(1)
    x2 = p.add_block(1)
    s1 = p.add_scalar()
    s2 = p.add_scalar()
    p.add_equality(1.0, blocks={x1: ONE, x2: 2 * ONE}, scalars={s1: 1.0})
    p.add_equality(1.0, blocks={x1: 2 * ONE, x2: ONE}, scalars={s2: 1.0})
    p.set_objective(blocks={x1: -ONE, x2: -ONE})
    return p


def random_bounded_lp(rng, nvars=3, ncons=3):
    """Standard-form LP with a simplex-style budget row; always bounded."""
    p = ConicProgram()
    xs = [p.add_block(1) for _ in range(nvars)]
    slack = p.add_scalar()
    budget = {x: ONE for x in xs}
    p.add_equality(float(rng.uniform(1.0, 3.0)), blocks=budget, scalars={slack: 1.0})
    for _ in range(ncons - 1):
        coeffs = rng.uniform(-1.0, 1.5, nvars)
        s = p.add_scalar()
        p.add_equality(
            float(rng.uniform(0.5, 2.0)),
            blocks={x: c * ONE for x, c in zip(xs, coeffs)},
            scalars={s: 1.0},
        )
    cost = rng.standard_normal(nvars)
    p.set_objective(blocks={x: c * ONE for x, c in zip(xs, cost)})
    return p


def solve_lp_by_enumeration(p: ConicProgram):
    """Independent reference: vectorize the all-order-1 program to standard
    form (splitting free coordinates) and enumerate basic solutions."""
    assert all(b.order == 1 for b in p.blocks)
    A, b = p.constraint_matrix()
    c = p.objective_vector()
    offs, scal0 = p.block_offsets()
    nonneg = np.zeros(p.num_vars, dtype=bool)
    for spec, off in zip(p.blocks, offs):
        nonneg[off] = spec.psd or spec.nonneg
    for j, s in enumerate(p.scalars):
        nonneg[scal0 + j] = s.nonneg
    cols = []
    cost = []
    back = []
    for j in range(p.num_vars):
        cols.append(A[:, j])
        cost.append(c[j])
        back.append((j, 1.0))
        if not nonneg[j]:
            cols.append(-A[:, j])
            cost.append(-c[j])
            back.append((j, -1.0))
    val, v = lp_minimize_standard(np.array(cost), np.array(cols).T, b)
    return val


class TestSolveBasics:
    def test_trivial_feasibility(self):
        p = ConicProgram()
        bx = p.add_block(2)
        coeff = np.zeros((2, 2))
        coeff[0, 0] = 1.0
        p.add_equality(1.0, blocks={bx: coeff})
        res = solve(p)
        assert res.status == OPTIMAL
        assert res.objective == pytest.approx(0.0, abs=1e-9)
        assert res.block_values[0][0, 0] == pytest.approx(1.0, abs=1e-7)

    def test_triangle_lp(self):
        res = solve(triangle_lp())
        assert res.status == OPTIMAL
        assert res.objective == pytest.approx(-2.0 / 3.0, abs=1e-9)

    def test_relaxation_value(self, qp_two_constraints):
        res = solve(build_sparse_relaxation(qp_two_constraints))
        assert res.status == OPTIMAL
        assert res.objective == pytest.approx(-0.25, abs=1e-7)

    def test_rejects_empty_program(self):
        with pytest.raises(ValueError):
            solve(ConicProgram())

    def test_rejects_nan(self):
        p = ConicProgram()
        bx = p.add_block(1)
        with pytest.raises(ValueError):
            p.add_equality(float("nan"), blocks={bx: ONE})

    def test_inconsistent_equalities(self):
        p = ConicProgram()
        bx = p.add_block(1)
        p.add_equality(1.0, blocks={bx: ONE})
        p.add_equality(2.0, blocks={bx: ONE})
        res = solve(p)
        assert res.status == INFEASIBLE

    def test_cone_infeasible_never_claims_infeasible(self, pm_noncompletable):
        # Fixed entries admit no PSD completion; the solver must stop at
        # MaxIters with diagnostics rather than claim infeasibility.
        full = pm_noncompletable.zero_filled().array
        mask = pm_noncompletable.specified_mask()
        p = ConicProgram()
        bx = p.add_block(4)
        for r in range(4):
            for c in range(r, 4):
                if not mask[r, c]:
                    continue
                coeff = np.zeros((4, 4))
                if r == c:
                    coeff[r, c] = 1.0
                else:
                    coeff[r, c] = coeff[c, r] = 0.5
                p.add_equality(float(full[r, c]), blocks={bx: coeff})
        res = solve(p, SolveOptions(max_iters=20000))
        assert res.status == MAX_ITERS
        assert "stall" in res.diagnostics or "budget" in res.diagnostics


class TestKktResiduals:
    def test_optimal_results_reverify(self, qp_two_constraints):
        p = build_sparse_relaxation(qp_two_constraints)
        res = solve(p)
        out = kkt_residuals(p, res.block_values, res.scalar_values)
        assert out["equality"] <= 1e-7
        assert out["cone"] <= 1e-7
        assert out["objective"] == pytest.approx(res.objective, abs=1e-9)

    def test_hand_built_point(self, qp_two_constraints):
        p = build_sparse_relaxation(qp_two_constraints)
        x = np.array([0.25, 0.25])
        X = np.diag([0.125, 0.125])
        blocks = []
        for z, y in (
            (np.array([0.125, 0.0]), 0.25),
            (np.array([0.0, 0.125]), 0.25),
        ):
            blk = np.zeros((4, 4))
            blk[0, 0] = 1.0
            blk[0, 1:3] = x
            blk[1:3, 0] = x
            blk[1:3, 1:3] = X
            blk[0, 3] = blk[3, 0] = y
            blk[1:3, 3] = z
            blk[3, 1:3] = z
            blk[3, 3] = 0.125
            blocks.append(blk)
        out = kkt_residuals(p, blocks, [])
        assert out["equality"] <= 1e-12
        assert out["objective"] == pytest.approx(-0.25, abs=1e-12)

    def test_perturbed_point_detected(self, qp_two_constraints):
        p = build_sparse_relaxation(qp_two_constraints)
        res = solve(p)
        bad = [blk.copy() for blk in res.block_values]
        bad[0][0, 0] += 0.1  # violates the unit-corner equality by 0.1
        out = kkt_residuals(p, bad, res.scalar_values)
        assert out["equality"] >= 0.1 - 1e-9


class TestAgainstVertexEnumeration:
    def test_random_lps(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            p = random_bounded_lp(
                rng, nvars=int(rng.integers(2, 4)), ncons=int(rng.integers(1, 6))
            )
            res = solve(p)
            ref = solve_lp_by_enumeration(p)
            assert res.status == OPTIMAL
            assert ref is not None
            assert res.objective == pytest.approx(ref, abs=1e-6)


class TestScalingAndDeflation:
    def test_scaling_invariance(self, qp_two_constraints):
        p1 = build_sparse_relaxation(qp_two_constraints)
        p2 = build_sparse_relaxation(qp_two_constraints)
        r_on = solve(p1, SolveOptions(scaling=True))
        r_off = solve(p2, SolveOptions(scaling=False))
        assert r_on.status == r_off.status == OPTIMAL
        assert abs(r_on.objective - r_off.objective) <= 10 * SolveOptions().tol_gap

    def test_deflation_matches_plain_solve(self):
        # On a program where both paths converge, declaring the forced kernel
        # must not change the optimum.
        rng = np.random.default_rng(1)
        f = rng.uniform(0.3, 1.2, 2)
        d = 1.0
        values = {}
        for use_kernel in (True, False):
            p = ConicProgram()
            kern = np.concatenate([[-d], f, [1.0]]) if use_kernel else None
            bx = p.add_block(4, forced_kernel=kern)
            coeff = np.zeros((4, 4))
            coeff[0, 0] = 1.0
            p.add_equality(1.0, blocks={bx: coeff})
            lin = np.zeros((4, 4))
            lin[0, 1:3] = f / 2
            lin[1:3, 0] = f / 2
            lin[0, 3] = lin[3, 0] = 0.5
            p.add_equality(d, blocks={bx: lin})
            quad = np.zeros((4, 4))
            quad[1:3, 1:3] = np.outer(f, f)
            quad[1:3, 3] = f
            quad[3, 1:3] = f
            quad[3, 3] = 1.0
            p.add_equality(d * d, blocks={bx: quad})
            obj = np.zeros((4, 4))
            obj[1:3, 1:3] = np.eye(2)
            obj[0, 1:3] = obj[1:3, 0] = -np.ones(2)
            p.set_objective(blocks={bx: obj})
            res = solve(p)
            assert res.status == OPTIMAL
            values[use_kernel] = res.objective
        assert values[True] == pytest.approx(values[False], abs=1e-6)


def test_lp_enumeration_oracle_self_check():
    # max x1 + x2 over the triangle, solved directly in standard form.
    A = np.array([[1.0, 2.0, 1.0, 0.0], [2.0, 1.0, 0.0, 1.0]])
    b = np.array([1.0, 1.0])
    val, v = lp_maximize_standard(np.array([1.0, 1.0, 0.0, 0.0]), A, b)
    assert val == pytest.approx(2.0 / 3.0)
    assert np.allclose(v[:2], [1.0 / 3.0, 1.0 / 3.0], atol=1e-9)
