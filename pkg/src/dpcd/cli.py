"""Command-line entry points.

Subcommands: generate, solve-reference, estimate-smoothness, tune, run.
Errors leave exit code 1 and a machine-readable JSON object on stderr.
"""

import argparse
import json
import os
import sys

import numpy as np

from .data import feature_bounds, generate_sparse_lasso, load_csv, save_csv, standardize
from .estimation import default_bounds, private_smoothness
from .harness import ExperimentSpec, HyperGrid, build_problem, default_grid, \
    emit_report, run_experiment, tune
from .objective import LossKind, Problem, Regularizer
from .solvers import reference_solve


def _problem_from_args(args):
    dataset = load_csv(args.data, _label(args.label_column))
    if getattr(args, "standardize", False):
        dataset, _ = standardize(dataset)
    return Problem(dataset, LossKind(args.loss), Regularizer(args.regularizer),
                   args.reg_strength)


def _label(value):
    try:
        return int(value)
    except ValueError:
        return value


def _cmd_generate(args):
    dataset, weights = generate_sparse_lasso(
        n=args.n, p=args.p, k_active=args.k_active,
        label_noise_std=args.label_noise_std, seed=args.seed,
        weight_scale=args.weight_scale)
    save_csv(dataset, args.out)
    if args.weights_out:
        with open(args.weights_out, "w", encoding="utf-8") as fh:
            json.dump({"true_weights": weights.tolist()}, fh)
            fh.write("\n")
    print(json.dumps({"written": args.out, "n": dataset.n, "p": dataset.p}))
    return 0


def _cmd_solve_reference(args):
    problem = _problem_from_args(args)
    ref = reference_solve(problem, tol=args.tol)
    payload = {"objective": ref.objective, "converged": ref.converged,
               "cycles": ref.cycles, "weights": ref.w.tolist()}
    _write_json(payload, args.out)
    return 0


def _cmd_estimate_smoothness(args):
    dataset = load_csv(args.data, _label(args.label_column))
    bounds = default_bounds(feature_bounds(dataset), args.loss)
    rng = np.random.default_rng(args.seed)
    M = private_smoothness(dataset, args.loss, bounds, args.epsilon, rng)
    payload = {"epsilon": args.epsilon, "bounds": bounds.tolist(),
               "private_smoothness": M.tolist(), "seed": args.seed}
    _write_json(payload, args.out)
    return 0


def _load_spec(args):
    with open(args.spec, "r", encoding="utf-8") as fh:
        spec = ExperimentSpec.from_dict(json.load(fh))
    if args.seed is not None:
        spec.base_seed = args.seed
    if args.epsilon is not None:
        spec.epsilon = args.epsilon
    if args.delta is not None:
        spec.delta = args.delta
    if args.passes:
        spec.grid = HyperGrid(
            cd_step_scales=spec.grid.cd_step_scales,
            sgd_step_scales=spec.grid.sgd_step_scales,
            clip_scales=spec.grid.clip_scales,
            passes=tuple(args.passes))
    return spec


def _cmd_tune(args):
    spec = _load_spec(args)
    problem, _ = build_problem(spec)
    result = tune(spec, args.algorithm, problem=problem, n_jobs=args.jobs)
    payload = {"algorithm": args.algorithm,
               "best": result.best.to_dict(),
               "best_mean_objective": result.best_mean_objective,
               "per_pass": result.per_pass}
    _write_json(payload, args.out)
    return 0


def _cmd_run(args):
    spec = _load_spec(args)
    report = run_experiment(spec, n_jobs=args.jobs)
    emit_report(report, args.out)
    print(json.dumps({"written": [os.path.join(args.out, f) for f in
                                  ("report.json", "curves.csv", "audit.json",
                                   "timings.json")]}))
    return 0


def _write_json(payload, out):
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _add_problem_args(p):
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--label-column", dest="label_column", required=True)
    p.add_argument("--loss", choices=["squared", "logistic"], default="squared")
    p.add_argument("--regularizer", choices=["none", "l1", "l2_squared"], default="l1")
    p.add_argument("--reg-strength", dest="reg_strength", type=float, default=1.0)
    p.add_argument("--standardize", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dpcd",
        description="Differentially private coordinate descent toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic sparse regression CSV")
    g.add_argument("--synthetic", choices=["sparse-lasso"], default="sparse-lasso")
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--p", type=int, default=1000)
    g.add_argument("--k-active", dest="k_active", type=int, default=10)
    g.add_argument("--label-noise-std", dest="label_noise_std", type=float, default=1.0)
    g.add_argument("--weight-scale", dest="weight_scale", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--weights-out", dest="weights_out")
    g.set_defaults(func=_cmd_generate)

    s = sub.add_parser("solve-reference", help="high-precision non-private optimum")
    _add_problem_args(s)
    s.add_argument("--tol", type=float, default=1e-12)
    s.add_argument("--out")
    s.set_defaults(func=_cmd_solve_reference)

    e = sub.add_parser("estimate-smoothness",
                       help="Laplace-mechanism smoothness constants")
    e.add_argument("--data", required=True)
    e.add_argument("--label-column", dest="label_column", required=True)
    e.add_argument("--loss", choices=["squared", "logistic"], default="squared")
    e.add_argument("--epsilon", type=float, required=True)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out")
    e.set_defaults(func=_cmd_estimate_smoothness)

    t = sub.add_parser("tune", help="grid-search one algorithm for a JSON spec")
    t.add_argument("--spec", required=True, help="ExperimentSpec JSON file")
    t.add_argument("--algorithm", required=True,
                   choices=["dp_cd", "dp_cd_priv_cst", "dp_sgd"])
    t.add_argument("--seed", type=int)
    t.add_argument("--epsilon", type=float)
    t.add_argument("--delta", type=float)
    t.add_argument("--passes", type=int, nargs="*")
    t.add_argument("--jobs", type=int, default=1)
    t.add_argument("--out")
    t.set_defaults(func=_cmd_tune)

    r = sub.add_parser("run", help="full experiment: tune, evaluate, report")
    r.add_argument("--spec", required=True, help="ExperimentSpec JSON file")
    r.add_argument("--seed", type=int)
    r.add_argument("--epsilon", type=float)
    r.add_argument("--delta", type=float)
    r.add_argument("--passes", type=int, nargs="*")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--out", required=True, help="output directory")
    r.set_defaults(func=_cmd_run)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:                       # noqa: BLE001 - CLI boundary
        sys.stderr.write(json.dumps(
            {"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
