"""Command-line frontend: data ingestion, solver dispatch, JSON reports.

Tensor files are JSON objects {"dims": [...], "values": [...], "targets":
[[...], ...]} with values flat in row-major order (last index fastest) and
exact zeros marking the support pattern. Matrices may instead be CSV with
targets passed as flags. Reports are JSON on stdout or --output.

Exit codes: 0 success, 1 I/O or validation error, 2 not scalable (witness in
the report), 3 numerical failure (overflow, divergence, iteration budget).
"""

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import blockmin, scaler
from .blockmin import (BlockVector, ConvergenceBound, NumericalOverflowError,
                       QuadraticBlockProblem)
from .bridge import BridgeProblem, solve_bridge
from .feasibility import InfeasibleScalingError, check_scalable
from .objective import ScalingProblem
from .tensor import DenseTensor, ScalingOverflowError, SliceTargets

logger = logging.getLogger("slicescale")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INFEASIBLE = 2
EXIT_NUMERICAL = 3


@dataclass
class RunConfig:
    command: str
    input_path: str = None
    targets_path: str = None
    csv: bool = False
    row_targets: str = None
    col_targets: str = None
    tol: float = 1e-10
    max_iters: int = 10000
    seed: int = 0
    force: bool = False
    random_start: bool = False
    guard: float = None
    output: str = None
    record_iterates: bool = True
    stochastic: bool = False
    dim: int = 4
    diagonal: bool = False

    def validate(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


def _setup_logging():
    level_name = os.environ.get("SLICESCALE_LOG", "warning").upper()
    level = getattr(logging, level_name, logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    logger.setLevel(level)


def _parse_vector(text):
    return np.asarray([float(tok) for tok in text.replace(",", " ").split()])


def load_tensor_file(path):
    """Read a tensor JSON file; returns (DenseTensor, targets list or None)."""
    with open(path) as fh:
        data = json.load(fh)
    if "dims" not in data or "values" not in data:
        raise ValueError("tensor file needs 'dims' and 'values'")
    tensor = DenseTensor.from_flat(data["dims"], data["values"])
    targets = data.get("targets")
    return tensor, targets


def save_tensor_file(path, tensor, targets=None):
    data = {"dims": list(tensor.dims), "values": [float(v) for v in tensor.values]}
    if targets is not None:
        data["targets"] = [[float(v) for v in vec] for vec in targets.vectors]
    with open(path, "w") as fh:
        json.dump(data, fh)


def load_problem(config):
    """Tensor plus targets from the configured input flags."""
    if config.csv:
        matrix = np.loadtxt(config.input_path, delimiter=",", ndmin=2)
        tensor = DenseTensor(matrix)
        if not (config.row_targets and config.col_targets):
            raise ValueError("CSV input needs --row-targets and --col-targets")
        targets = SliceTargets(
            [_parse_vector(config.row_targets), _parse_vector(config.col_targets)]
        )
        return tensor, targets
    tensor, inline_targets = load_tensor_file(config.input_path)
    if config.targets_path:
        with open(config.targets_path) as fh:
            data = json.load(fh)
        vectors = data["targets"] if isinstance(data, dict) else data
        return tensor, SliceTargets(vectors)
    if inline_targets is None:
        raise ValueError("no targets: embed them in the tensor file or pass --targets")
    return tensor, SliceTargets(inline_targets)


def bound_certificate(working_problem, trace, seed):
    """Sampled rate certificate for a converged trace with recorded iterates.

    Hessian extremes are sampled at every iterate, the final point, and 16
    random pairwise convex combinations; the resulting per-step bound curve
    is reported next to the observed objective gaps.
    """
    if not trace.iterates or trace.n_steps == 0:
        return None
    rng = np.random.default_rng(seed)
    points = list(trace.iterates)
    points += blockmin.sample_convex_combinations(points, 16, rng)
    alpha, beta = blockmin.estimate_alpha_beta(working_problem, points)
    bound = ConvergenceBound(
        d=working_problem.d,
        alpha=alpha,
        beta=beta,
        grad0_norm=trace.full_grad_norms[0],
    )
    curve = [blockmin.theoretical_bound(bound, k) for k in range(1, trace.n_steps + 1)]
    gaps = trace.gaps()
    return {
        "sampled_alpha": alpha,
        "sampled_beta": beta,
        "sampled_kappa": bound.kappa,
        "bound_curve": curve,
        "observed_gaps": gaps[1:],
    }


def _witness_payload(report):
    return {
        "verdict": report.verdict,
        "witness": None if report.witness is None else
        [list(map(float, b)) for b in report.witness.blocks],
        "lp_stats": report.lp_stats,
    }


def emit(report, config):
    report["timestamp"] = time.time()
    text = json.dumps(report, indent=2)
    if config.output:
        with open(config.output, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _trace_payload(trace):
    return {
        "objectives": trace.objectives,
        "full_grad_norms": trace.full_grad_norms,
        "block_choices": trace.chosen_blocks,
        "post_step_block_norms": trace.post_step_block_norms,
    }


def cmd_scale(config):
    tensor, targets = load_problem(config)
    problem = ScalingProblem(tensor, targets)
    report = {
        "command": "scale",
        "config": {"tol": config.tol, "max_iters": config.max_iters,
                   "seed": config.seed, "force": config.force},
    }
    if not config.force:
        feas = check_scalable(tensor, targets)
        report["feasibility"] = _witness_payload(feas)
        if not feas.scalable:
            report["status"] = "not_scalable"
            emit(report, config)
            return EXIT_INFEASIBLE
    x0 = None
    if config.random_start:
        rng = np.random.default_rng(config.seed)
        x0 = scaler.random_reduced_point(problem.frame, rng)
    solution = scaler.solve(problem, x0=x0, tol=config.tol,
                            max_iters=config.max_iters,
                            divergence_guard=config.guard,
                            record_iterates=config.record_iterates)
    report["status"] = solution.status
    report["method"] = solution.method
    report["iterations"] = solution.trace.n_steps
    report["trace"] = _trace_payload(solution.trace)
    if solution.status == blockmin.CONVERGED:
        report["proportionality"] = solution.proportionality
        report["residuals"] = solution.residuals
        report["scaled"] = {
            "dims": list(solution.scaled.dims),
            "values": [float(v) for v in solution.scaled.values],
        }
        certificate = bound_certificate(solution.working_problem,
                                        solution.trace, config.seed)
        if certificate is not None:
            report["certificate"] = certificate
        emit(report, config)
        return EXIT_OK
    emit(report, config)
    return EXIT_NUMERICAL


def cmd_feasible(config):
    tensor, targets = load_problem(config)
    feas = check_scalable(tensor, targets)
    report = {"command": "feasible"}
    report.update(_witness_payload(feas))
    emit(report, config)
    return EXIT_OK if feas.scalable else EXIT_INFEASIBLE


def load_bridge_file(path, stochastic):
    with open(path) as fh:
        data = json.load(fh)
    A = np.asarray(data["matrix"], dtype=float)
    a = np.asarray(data["source"], dtype=float)
    b = np.asarray(data["target"], dtype=float)
    if stochastic or "column_sums" not in data:
        c = np.ones(A.shape[1])
    else:
        c = np.asarray(data["column_sums"], dtype=float)
    return BridgeProblem(A, a, b, c)


def cmd_bridge(config):
    problem = load_bridge_file(config.input_path, config.stochastic)
    report = {"command": "bridge",
              "config": {"tol": config.tol, "max_iters": config.max_iters,
                         "stochastic": config.stochastic}}
    try:
        result = solve_bridge(problem, tol=config.tol, max_iters=config.max_iters)
    except InfeasibleScalingError as err:
        report["status"] = "not_scalable"
        report["feasibility"] = _witness_payload(err.report)
        emit(report, config)
        return EXIT_INFEASIBLE
    report["status"] = result.status
    report["iterations"] = result.trace.n_steps
    if result.matrix is not None:
        report["matrix"] = [[float(v) for v in row] for row in result.matrix]
        report["source_residual"] = result.source_residual
        report["column_residual"] = result.column_residual
        emit(report, config)
        return EXIT_OK
    emit(report, config)
    return EXIT_NUMERICAL


def cmd_demo_quadratic(config):
    """Greedy coordinate minimization on a seeded random SPD quadratic."""
    if config.dim < 2:
        raise ValueError("--dim must be at least 2")
    rng = np.random.default_rng(config.seed)
    n = config.dim
    if config.diagonal:
        A = np.diag(rng.uniform(0.5, 4.0, n))
    else:
        M = rng.standard_normal((n, n))
        A = M.T @ M + 0.5 * np.eye(n)
    b = rng.standard_normal(n)
    problem = QuadraticBlockProblem(A, b)
    x0 = BlockVector([[v] for v in rng.uniform(-2.0, 2.0, n)])
    x, trace, status = blockmin.run(problem, x0, config.tol, config.max_iters,
                                    divergence_guard=None, record_iterates=True)
    alpha, beta = blockmin.estimate_alpha_beta(problem, [x0])
    bound = ConvergenceBound(d=n, alpha=alpha, beta=beta,
                             grad0_norm=trace.full_grad_norms[0])
    curve = [blockmin.theoretical_bound(bound, k)
             for k in range(1, trace.n_steps + 1)]
    report = {
        "command": "demo-quadratic",
        "config": {"dim": n, "seed": config.seed, "diagonal": config.diagonal,
                   "tol": config.tol},
        "status": status,
        "iterations": trace.n_steps,
        "alpha": alpha,
        "beta": beta,
        "kappa": bound.kappa,
        "bound_curve": curve,
        "observed_gaps": trace.gaps()[1:],
        "solution": [float(v) for v in x.concat()],
        "trace": _trace_payload(trace),
    }
    emit(report, config)
    return EXIT_OK if status == blockmin.CONVERGED else EXIT_NUMERICAL


def build_parser():
    parser = argparse.ArgumentParser(
        prog="slicescale",
        description="Slice-sum scaling of nonnegative matrices and tensors",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_input=True):
        if with_input:
            p.add_argument("input", help="input file (JSON, or CSV with --csv)")
        p.add_argument("--tol", type=float, default=1e-10)
        p.add_argument("--max-iters", type=int, default=10000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--output", help="write the JSON report here instead of stdout")

    p_scale = sub.add_parser("scale", help="rescale a tensor to its targets")
    common(p_scale)
    p_scale.add_argument("--targets", dest="targets_path",
                         help="JSON file with the target vectors")
    p_scale.add_argument("--csv", action="store_true",
                         help="input is a CSV matrix")
    p_scale.add_argument("--row-targets", help="comma-separated row targets (CSV input)")
    p_scale.add_argument("--col-targets", help="comma-separated column targets (CSV input)")
    p_scale.add_argument("--force", action="store_true",
                         help="skip the scalability check and rely on the divergence guard")
    p_scale.add_argument("--random-start", action="store_true",
                         help="start from a seeded random point instead of zero")
    p_scale.add_argument("--guard", type=float,
                         help="divergence guard on the iterate sup norm")
    p_scale.add_argument("--no-trace-iterates", dest="record_iterates",
                         action="store_false",
                         help="do not keep iterate snapshots (disables the certificate)")

    p_feas = sub.add_parser("feasible", help="test scalability without solving")
    common(p_feas)
    p_feas.add_argument("--targets", dest="targets_path")
    p_feas.add_argument("--csv", action="store_true")
    p_feas.add_argument("--row-targets")
    p_feas.add_argument("--col-targets")

    p_bridge = sub.add_parser("bridge", help="matrix rescaling with source/target marginals")
    common(p_bridge)
    p_bridge.add_argument("--stochastic", action="store_true",
                          help="force unit column sums (column-stochastic output)")

    p_demo = sub.add_parser("demo-quadratic",
                            help="greedy coordinate descent demo on an SPD quadratic")
    common(p_demo, with_input=False)
    p_demo.add_argument("--dim", type=int, default=4)
    p_demo.add_argument("--diagonal", action="store_true")
    return parser


def _config_from_args(args):
    fields = RunConfig.__dataclass_fields__
    values = {k: v for k, v in vars(args).items() if k in fields}
    values["command"] = args.command
    if getattr(args, "input", None) is not None:
        values["input_path"] = args.input
    return RunConfig(**values)


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    config = _config_from_args(args)
    dispatch = {
        "scale": cmd_scale,
        "feasible": cmd_feasible,
        "bridge": cmd_bridge,
        "demo-quadratic": cmd_demo_quadratic,
    }
    try:
        config.validate()
        return dispatch[config.command](config)
    except InfeasibleScalingError as err:
        report = {"command": config.command, "status": "not_scalable"}
        report["feasibility"] = _witness_payload(err.report)
        emit(report, config)
        return EXIT_INFEASIBLE
    except (ScalingOverflowError, NumericalOverflowError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
