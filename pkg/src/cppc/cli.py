"""Command-line interface: parse problem files, run the completion or QP
pipelines, emit machine-readable JSON on stdout and a human summary on
stderr.

Commands
--------
check     completability certification of a width-one arrowhead partial matrix
complete  numeric completion search (with the grid oracle as fallback evidence)
solve-qp  sparse relaxation bounds and exactness report for a QP instance
oracle    brute-force reference outputs (completion grid search or QP optimum)

Exit codes: 0 computed (including NoCertificate/Unknown outcomes), 1 input
error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import completion as completion_mod
from . import oracles, qp_relax
from .conditions import ConstraintData
from .cones import GroundCone, orthant
from .conic_solver import SolveOptions
from .jacobi import EigenSolverError
from .matrix_core import PartialMatrix

_COMPLETION_KEYS = {"n1", "n2", "S", "X", "Z", "Y", "f", "g", "d", "f0", "d0", "K"}
_QP_KEYS = {"A", "a", "F", "d", "K"}


@dataclass
class RunConfig:
    command: str
    input_path: str
    out_path: Optional[str] = None
    tol: Optional[float] = None
    max_iters: Optional[int] = None
    seed: int = 0
    quiet: bool = False
    threads: Optional[int] = None


def dumps_json(obj, indent: int = 2) -> str:
    """Deterministic JSON with floats at 17 significant digits."""

    def render(node, depth):
        pad = " " * (indent * depth)
        pad_in = " " * (indent * (depth + 1))
        if node is None:
            return "null"
        if node is True:
            return "true"
        if node is False:
            return "false"
        if isinstance(node, str):
            return json.dumps(node)
        if isinstance(node, (int, np.integer)):
            return str(int(node))
        if isinstance(node, (float, np.floating)):
            val = float(node)
            if val != val:
                return '"nan"'
            if val in (float("inf"), float("-inf")):
                return f'"{val}"'
            return format(val, ".17g")
        if isinstance(node, np.ndarray):
            node = node.tolist()
        if isinstance(node, (list, tuple)):
            if not node:
                return "[]"
            inner = ",\n".join(pad_in + render(x, depth + 1) for x in node)
            return "[\n" + inner + "\n" + pad + "]"
        if isinstance(node, dict):
            if not node:
                return "{}"
            inner = ",\n".join(
                f"{pad_in}{json.dumps(str(k))}: {render(v, depth + 1)}"
                for k, v in node.items()
            )
            return "{\n" + inner + "\n" + pad + "}"
        raise TypeError(f"cannot serialize {type(node)!r}")

    return render(obj, 0) + "\n"


class InputError(ValueError):
    pass


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise InputError(f"input file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(
            f"malformed JSON in {path} at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}"
        ) from exc


def parse_completion_problem(obj: dict) -> completion_mod.CompletionProblem:
    unknown = obj.keys() - _COMPLETION_KEYS
    if unknown:
        raise InputError(f"unknown keys in completion problem: {sorted(unknown)}")
    pm = PartialMatrix.from_json_dict(obj)
    K = GroundCone.from_json_dict(obj["K"]) if "K" in obj else None
    problem = completion_mod.CompletionProblem.from_partial_matrix(pm, K)
    data_keys = {"f", "g", "d"} & obj.keys()
    if data_keys and data_keys != {"f", "g", "d"}:
        raise InputError("constraint data requires all of f, g, d")
    if data_keys:
        f = [np.asarray(v, dtype=float) for v in obj["f"]]
        g = [float(v) for v in obj["g"]]
        d = [float(v) for v in obj["d"]]
        f0 = np.asarray(obj.get("f0", np.zeros(problem.n)), dtype=float)
        d0 = float(obj.get("d0", 0.0))
        data = ConstraintData.build(
            problem.K,
            [orthant(1)] * problem.S,
            [f0] + f,
            [np.atleast_1d(v) for v in g],
            [d0] + d,
        )
        problem.data = data
    return problem


def _solver_opts(config: RunConfig) -> SolveOptions:
    opts = SolveOptions()
    if config.tol is not None:
        opts.tol_primal = config.tol
        opts.tol_dual = config.tol
        opts.tol_gap = max(config.tol, 1e-9)
    if config.max_iters is not None:
        opts.max_iters = config.max_iters
    return opts


def _verdict_dict(v) -> Optional[dict]:
    if v is None:
        return None
    return {
        "verdict": v.verdict,
        "detail": v.detail,
        "witness_factor": None if v.witness is None else v.witness.tolist(),
    }


def _data_dict(data: Optional[ConstraintData]) -> Optional[dict]:
    if data is None:
        return None
    return {
        "f0": data.f[0].tolist(),
        "d0": data.d[0],
        "f": [v.tolist() for v in data.f[1:]],
        "g": [float(v[0]) for v in data.g],
        "d": list(data.d[1:]),
    }


def run_check(config: RunConfig, obj: dict) -> dict:
    problem = parse_completion_problem(obj)
    opts = completion_mod.FindDataOptions(seed=config.seed)
    if config.tol is not None:
        opts.tol = config.tol
    cert = completion_mod.certify_completable(problem, opts)
    report = cert.report
    return {
        "verdict": cert.verdict,
        "reasons": cert.reasons,
        "data": _data_dict(cert.data),
        "block_residuals": [list(pair) for pair in cert.block_residuals],
        "f0_residuals": list(cert.f0_residuals),
        "block_cp": [_verdict_dict(v) for v in cert.block_verdicts],
        "conditions": None
        if report is None
        else {
            "cond_i": list(report.cond_i),
            "boundedness": {
                "status": report.boundedness.status,
                "reason": report.boundedness.reason,
            },
            "cond_iii": None
            if report.cond_iii is None
            else {"i_star": report.cond_iii[0], "lambdas": list(report.cond_iii[1])},
            "cond_iii_reason": report.cond_iii_reason,
        },
        "tolerance": cert.tol,
    }


def run_complete(config: RunConfig, obj: dict) -> dict:
    problem = parse_completion_problem(obj)
    res = completion_mod.complete_numeric(problem, _solver_opts(config))
    out = {
        "found": res.completion is not None,
        "diagnostics": res.diagnostics,
        "completion": None,
        "cp": _verdict_dict(res.cp_verdict),
        "oracle": None,
    }
    if res.completion is not None:
        out["completion"] = {
            "full": res.completion.full.to_lists(),
            "unspecified_entries": {
                f"{r},{c}": val
                for (r, c), val in sorted(res.completion.unspecified_entries().items())
            },
        }
        return out
    pairs = problem.S * (problem.S - 1) // 2
    if pairs <= 3:
        orc = completion_mod.brute_force_completion_oracle(problem.original)
        out["oracle"] = {
            "best_min_eigenvalue": orc.best_min_eigenvalue,
            "entries": orc.entries,
            "found": orc.completion is not None,
        }
        if orc.completion is not None:
            out["found"] = True
            out["diagnostics"] += "; grid oracle found a completion"
            out["completion"] = {
                "full": orc.completion.full.to_lists(),
                "unspecified_entries": {
                    f"{r},{c}": val
                    for (r, c), val in sorted(
                        orc.completion.unspecified_entries().items()
                    )
                },
            }
    return out


def run_solve_qp(config: RunConfig, obj: dict) -> dict:
    unknown = obj.keys() - _QP_KEYS
    if unknown:
        raise InputError(f"unknown keys in QP instance: {sorted(unknown)}")
    qp = qp_relax.QPInstance.from_json_dict(obj)
    report = qp_relax.exactness_report(qp, _solver_opts(config))
    if report.lower != report.lower:  # NaN: solver breakdown
        raise NumericalFailure(report.diagnostics or "relaxation solve failed")
    cert_a = report.certificate_a
    cert_b = report.certificate_b
    return {
        "lower": report.lower,
        "upper": report.upper,
        "rank_one": report.rank_one,
        "certificate_a": None
        if cert_a is None
        else {
            "u": cert_a["u"].tolist(),
            "alpha": cert_a["alpha"].tolist(),
            "w": cert_a["w"].tolist(),
        },
        "certificate_b": None
        if cert_b is None
        else {
            "u": cert_b["u"].tolist(),
            "gamma": cert_b["gamma"].tolist(),
            "kernel_residual": cert_b["kernel_residual"],
            "polytope_bounded": cert_b["polytope_bounded"],
        },
        "overall": report.overall,
        "proven_by": report.proven_by,
        "x_part": None if report.solution is None else report.solution.x.tolist(),
        "diagnostics": report.diagnostics,
    }


def run_oracle(config: RunConfig, obj: dict) -> dict:
    if "n1" in obj:
        problem = parse_completion_problem(obj)
        orc = completion_mod.brute_force_completion_oracle(problem.original)
        return {
            "kind": "completion",
            "found": orc.completion is not None,
            "best_min_eigenvalue": orc.best_min_eigenvalue,
            "entries": orc.entries,
        }
    if "A" in obj and "F" in obj:
        qp = qp_relax.QPInstance.from_json_dict(obj)
        kinds = qp.K.coordinate_kinds()
        nonneg = [j for j in range(qp.n) if kinds[j] == "orthant"]
        val, x = oracles.qp_global_minimum(qp.A.array, qp.a, qp.F, qp.d, nonneg)
        return {
            "kind": "qp",
            "optimum": None if val is None else val,
            "argmin": None if x is None else x.tolist(),
        }
    raise InputError("oracle input is neither a partial matrix nor a QP instance")


class NumericalFailure(RuntimeError):
    pass


_COMMANDS = {
    "check": run_check,
    "complete": run_complete,
    "solve-qp": run_solve_qp,
    "oracle": run_oracle,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # Usage problems are input errors (exit 1); 2 is reserved for
        # numerical failures.
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="cppc",
        description="Completely positive completion of arrowhead partial "
        "matrices and sparse DNN relaxations of QPs.",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("input", help="path to the JSON problem file")
    parser.add_argument("--tol", type=float, default=None, help="tolerance override")
    parser.add_argument("--max-iters", type=int, default=None, help="solver iteration cap")
    parser.add_argument("--seed", type=int, default=0, help="seed for randomized search")
    parser.add_argument("--out", default=None, help="output path (default stdout)")
    parser.add_argument("--quiet", action="store_true", help="suppress the stderr summary")
    return parser


def _summary(command: str, report: dict) -> str:
    if command == "check":
        msg = f"check: {report['verdict']}"
        if report["reasons"]:
            msg += " (" + "; ".join(report["reasons"]) + ")"
        return msg
    if command == "complete":
        if report["found"]:
            return "complete: completion found"
        extra = ""
        if report.get("oracle"):
            extra = (
                f" (oracle max smallest eigenvalue "
                f"{report['oracle']['best_min_eigenvalue']:.6g})"
            )
        return "complete: no completion found" + extra
    if command == "solve-qp":
        upper = report["upper"]
        return (
            f"solve-qp: lower {report['lower']:.9g}, upper "
            f"{'n/a' if upper is None else format(upper, '.9g')}, "
            f"overall {report['overall']}"
            + (f" via {', '.join(report['proven_by'])}" if report["proven_by"] else "")
        )
    return f"oracle: {report}"


def run(config: RunConfig) -> int:
    """Execute one command; returns the process exit code."""
    try:
        obj = _load_json(config.input_path)
        if not isinstance(obj, dict):
            raise InputError("top-level JSON value must be an object")
        report = _COMMANDS[config.command](config, obj)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, TypeError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return 1
    except (NumericalFailure, EigenSolverError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 2
    text = dumps_json(report)
    if config.out_path:
        with open(config.out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if not config.quiet:
        print(_summary(config.command, report), file=sys.stderr)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = os.environ.get("CPPC_THREADS")
    config = RunConfig(
        command=args.command,
        input_path=args.input,
        out_path=args.out,
        tol=args.tol,
        max_iters=args.max_iters,
        seed=args.seed,
        quiet=args.quiet,
        threads=int(threads) if threads else None,
    )
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
