"""Completely positive completion of arrowhead partial matrices and sparse
DNN relaxations of inequality-constrained quadratic programs, with ex-post
exactness certificates."""

from .matrix_core import (
    ArrowheadPattern,
    Completion,
    PartialMatrix,
    SymMatrix,
    agrees,
    assemble_completion,
    extract_block,
    partial_frobenius,
)
from .cones import (
    GroundCone,
    MembershipVerdict,
    cone_contains,
    cp_factorize,
    dual_cone,
    free,
    interior_dual_contains,
    is_cp,
    is_dnn,
    is_psd,
    orthant,
    product,
    zero,
)
from .conic_solver import ConicProgram, SolveOptions, SolveResult, kkt_residuals, solve
from .conditions import (
    ConditionReport,
    ConstraintData,
    build_condition_report,
    check_boundedness,
    check_cond_i,
    check_cond_iii,
    check_Fi_bounded_sufficient,
    scalar_lambda_feasible,
)
from .completion import (
    CompletabilityCertificate,
    CompletionProblem,
    brute_force_completion_oracle,
    certify_completable,
    complete_numeric,
    complete_rank_one,
    find_data,
    verify_block_constraints,
)
from .qp_relax import (
    ExactnessReport,
    GeneralInstance,
    QPInstance,
    RelaxationSolution,
    build_general_relaxation,
    build_sparse_relaxation,
    certificate_a,
    certificate_b,
    exactness_report,
    kernel_vectors,
    lemma_equivalence_check,
    rank_one_certificate,
    solve_bounds,
)

__version__ = "0.1.0"
