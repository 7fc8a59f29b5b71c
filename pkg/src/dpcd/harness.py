"""Experiment orchestration: grids, tuning, evaluation, reports, fixtures.

The tuning protocol sweeps (step scale, clip scale) jointly for each pass
count, averages the final objective over seeded repetitions, picks the
argmin, then re-evaluates the winner with fresh seeds and reports
relative errors against the non-private reference optimum.
"""

import concurrent.futures
import csv
import json
import math
import os
import platform
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, feature_bounds, generate_sparse_lasso, load_csv, standardize
from .estimation import default_bounds, private_smoothness
from .objective import LossKind, Problem, Regularizer, smoothness_constants
from .privacy import NoiseScales, PrivacyBudget, calibrate_dpcd_numeric, \
    calibrate_dpsgd_numeric
from .solvers import SolverConfig, coordinate_thresholds, dp_cd, dp_sgd, reference_solve

ALGORITHMS = ("dp_cd", "dp_cd_priv_cst", "dp_sgd")
_ALGO_CODE = {"dp_cd": 1, "dp_sgd": 2, "dp_cd_priv_cst": 3}
_TUNE_MARKER, _EVAL_MARKER = 5, 7


class TuningFailure(RuntimeError):
    """Every grid cell produced a non-finite objective."""


@dataclass(frozen=True)
class HyperGrid:
    """Search grids; step grids are per-algorithm, log-spaced inclusive."""

    cd_step_scales: tuple
    sgd_step_scales: tuple
    clip_scales: tuple
    passes: tuple

    def step_scales_for(self, algo):
        return self.sgd_step_scales if algo == "dp_sgd" else self.cd_step_scales

    def to_dict(self):
        return {"cd_step_scales": list(self.cd_step_scales),
                "sgd_step_scales": list(self.sgd_step_scales),
                "clip_scales": list(self.clip_scales),
                "passes": list(self.passes)}

    @classmethod
    def from_dict(cls, d):
        return cls(cd_step_scales=tuple(d["cd_step_scales"]),
                   sgd_step_scales=tuple(d["sgd_step_scales"]),
                   clip_scales=tuple(d["clip_scales"]),
                   passes=tuple(int(v) for v in d["passes"]))


def default_grid():
    """The full tuning grid: 10 step scales per algorithm (log-spaced,
    1e-2..10 for DP-CD, 1e-6..1 for DP-SGD), 100 clip scales spanning
    1e-3..1e6, and pass counts (2, 5, 10, 20, 50)."""
    return HyperGrid(
        cd_step_scales=tuple(np.logspace(-2, 1, 10)),
        sgd_step_scales=tuple(np.logspace(-6, 0, 10)),
        clip_scales=tuple(np.logspace(-3, 6, 100)),
        passes=(2, 5, 10, 20, 50))


@dataclass
class ExperimentSpec:
    """Everything needed to reproduce one experiment end to end."""

    dataset: dict                      # {"kind": ...} source description
    loss: str = "squared"
    regularizer: str = "l1"
    reg_strength: float = 1.0
    preprocessing: str = "raw"         # raw | standardized
    epsilon: float = 1.0
    delta: float | None = None         # None -> 1 / n^2
    algorithms: tuple = ("dp_cd", "dp_sgd")
    grid: HyperGrid = field(default_factory=default_grid)
    tuning_runs: int = 5
    eval_runs: int = 10
    base_seed: int = 0
    estimation_budget_fraction: float = 0.1
    batch_size: int | None = None      # DP-SGD; None -> max(1, round(sqrt(n)))

    def __post_init__(self):
        if self.eval_runs < 1 or self.tuning_runs < 1:
            raise ValueError("tuning_runs and eval_runs must be >= 1")
        if self.preprocessing not in ("raw", "standardized"):
            raise ValueError("preprocessing must be 'raw' or 'standardized'")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}")
        if not 0 < self.estimation_budget_fraction < 1:
            raise ValueError("estimation_budget_fraction must lie in (0, 1)")
        self.algorithms = tuple(self.algorithms)
        if isinstance(self.grid, dict):
            self.grid = HyperGrid.from_dict(self.grid)

    def to_dict(self):
        return {"dataset": self.dataset, "loss": self.loss,
                "regularizer": self.regularizer, "reg_strength": self.reg_strength,
                "preprocessing": self.preprocessing, "epsilon": self.epsilon,
                "delta": self.delta, "algorithms": list(self.algorithms),
                "grid": self.grid.to_dict(), "tuning_runs": self.tuning_runs,
                "eval_runs": self.eval_runs, "base_seed": self.base_seed,
                "estimation_budget_fraction": self.estimation_budget_fraction,
                "batch_size": self.batch_size}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["algorithms"] = tuple(d.get("algorithms", ("dp_cd", "dp_sgd")))
        if "grid" in d:
            d["grid"] = HyperGrid.from_dict(d["grid"])
        return cls(**d)


def build_dataset(source):
    """Materialize a dataset description; returns (Dataset, extras)."""
    kind = source["kind"]
    if kind == "csv":
        return load_csv(source["path"], source["label_column"]), {}
    if kind == "sparse_lasso":
        ds, w = generate_sparse_lasso(
            n=source["n"], p=source["p"], k_active=source["k_active"],
            label_noise_std=source.get("label_noise_std", 1.0),
            seed=source.get("seed", 0),
            weight_scale=source.get("weight_scale", 1.0),
            weight_dist=source.get("weight_dist", "normal"))
        return ds, {"true_weights": w}
    if kind == "regression":
        rng = np.random.default_rng(source.get("seed", 0))
        n, p = source["n"], source["p"]
        X = rng.standard_normal((n, p))
        scales = source.get("feature_scales")
        if scales is not None:
            X = X * np.asarray(scales, dtype=np.float64)
        w = source.get("weight_scale", 1.0) * rng.standard_normal(p)
        y = X @ w + source.get("label_noise_std", 1.0) * rng.standard_normal(n)
        return Dataset(X, y), {"true_weights": w}
    raise ValueError(f"unknown dataset kind {kind!r}")


def build_problem(spec):
    """Dataset pipeline for a spec: source, optional standardization, Problem."""
    dataset, extras = build_dataset(spec.dataset)
    if spec.preprocessing == "standardized":
        # preprocessing happens outside the privacy budget; reports flag it
        dataset, params = standardize(dataset)
        extras["standardization"] = {"means": params.means.tolist(),
                                     "stds": params.stds.tolist()}
    problem = Problem(dataset, LossKind(spec.loss),
                      Regularizer(spec.regularizer), spec.reg_strength)
    return problem, extras


def strongly_convex_fixture(mu, dataset):
    """Quadratic test problem whose exact minimizer is the row mean.

    Rows of `dataset.features` act as target points; the problem is
    realized with p pseudo-samples X = c*I, y = c*rowmean (c chosen so
    the curvature is exactly mu per coordinate) plus a box regularizer
    spanning the data's per-column range. For w inside the box,
    F(w) - F(w*) = (mu/2) * ||w - w*||^2 exactly.
    """
    if not mu > 0:
        raise ValueError("mu must be positive")
    pts = dataset.features
    p = pts.shape[1]
    center = pts.mean(axis=0)
    half_width = np.abs(pts).max(axis=0)
    c = math.sqrt(p * mu / 2.0)
    fixture_data = Dataset(c * np.eye(p), c * center)
    reg = Regularizer.box(-half_width, half_width)
    return Problem(fixture_data, LossKind.SQUARED, reg, reg_strength=1.0)


def relative_error(F, F_star):
    """(F - F*) / |F*|; falls back to the absolute gap when F* is ~0."""
    if F < F_star - 1e-9:
        raise ValueError(f"objective {F} is below the reference optimum {F_star}; "
                         "the reference solve looks unconverged")
    if absolute_gap_mode(F_star):
        return F - F_star
    return (F - F_star) / abs(F_star)


def absolute_gap_mode(F_star):
    """True when relative_error degrades to the absolute gap (|F*| < 1e-12)."""
    return abs(F_star) < 1e-12


# ---------------------------------------------------------------------------
# tuning and evaluation
# ---------------------------------------------------------------------------

def _run_seed(base_seed, algo, marker, pass_idx, cell_idx, rep):
    return np.random.SeedSequence(
        (base_seed, _ALGO_CODE[algo], marker, pass_idx, cell_idx, rep))


@dataclass
class _AlgoContext:
    """Per-algorithm precomputation shared by all runs of one experiment."""

    algo: str
    problem: Problem
    budget: PrivacyBudget
    batch_size: int
    smoothness: np.ndarray
    sigma_bars: dict                  # passes -> noise-to-sensitivity ratio
    audits: dict                      # passes -> audit (optimizer part)
    est_bounds: np.ndarray | None = None
    est_epsilon: float = 0.0

    def run(self, step, clip, passes, seed_seq):
        problem = self.problem
        n, p = problem.n, problem.p
        sigma_bar = self.sigma_bars[passes]
        audit = self.audits[passes]
        if self.algo == "dp_sgd":
            cfg = SolverConfig.sgd(step, clip, passes, n, batch_size=self.batch_size)
            return dp_sgd(problem, cfg, sigma_bar,
                          rng=np.random.default_rng(seed_seq), audit=audit)
        cfg = SolverConfig.cd(step, clip, passes, p)
        if self.algo == "dp_cd_priv_cst":
            est_ss, opt_ss = seed_seq.spawn(2)
            M = private_smoothness(problem.dataset, problem.loss, self.est_bounds,
                                   self.est_epsilon, np.random.default_rng(est_ss))
            rng = np.random.default_rng(opt_ss)
        else:
            M = self.smoothness
            rng = np.random.default_rng(seed_seq)
        sens = 2.0 * coordinate_thresholds(M, clip) / n
        noise = NoiseScales(sens * sigma_bar, audit)
        return dp_cd(problem, cfg, noise, rng=rng, smoothness=M)


def _make_context(spec, problem, budget, algo):
    n, p = problem.n, problem.p
    batch_size = spec.batch_size or max(1, round(math.sqrt(n)))
    eps_est = 0.0
    bounds = None
    opt_budget = budget
    if algo == "dp_cd_priv_cst":
        eps_est = spec.estimation_budget_fraction * budget.epsilon
        opt_budget = PrivacyBudget(budget.epsilon - eps_est, budget.delta)
        bounds = default_bounds(feature_bounds(problem.dataset), problem.loss)
    sigma_bars, audits = {}, {}
    for passes in spec.grid.passes:
        if algo == "dp_sgd":
            q = min(batch_size / n, 1.0)
            steps = passes * math.ceil(n / batch_size)
            sb, audit = calibrate_dpsgd_numeric(q, steps, opt_budget)
        else:
            # uniform ratio: sigma_j is proportional to the per-coordinate
            # sensitivity, so T*K identical Gaussian curves compose
            ns = calibrate_dpcd_numeric(np.ones(p), 1, passes * p, n, opt_budget)
            sb, audit = ns.audit.noise_to_sensitivity, ns.audit
        sigma_bars[passes] = sb
        audits[passes] = audit
    return _AlgoContext(algo=algo, problem=problem, budget=budget,
                        batch_size=batch_size, smoothness=smoothness_constants(problem),
                        sigma_bars=sigma_bars, audits=audits,
                        est_bounds=bounds, est_epsilon=eps_est)


_WORKER = {}


def _init_worker(spec_dict, problem, algo):
    spec = ExperimentSpec.from_dict(spec_dict)
    budget = _budget_for(spec, problem)
    _WORKER["ctx"] = _make_context(spec, problem, budget, algo)
    _WORKER["spec"] = spec


def _tune_task(task):
    """One chunk: all clip values x repetitions for one (pass, step) pair."""
    pass_idx, step, passes = task
    spec = _WORKER["spec"]
    ctx = _WORKER["ctx"]
    clips = spec.grid.clip_scales
    finals = np.empty((len(clips), spec.tuning_runs))
    times = 0.0
    for c_idx, clip in enumerate(clips):
        for rep in range(spec.tuning_runs):
            cell_idx = _cell_index(spec.grid, ctx.algo, step, clip)
            ss = _run_seed(spec.base_seed, ctx.algo, _TUNE_MARKER,
                           pass_idx, cell_idx, rep)
            sol = ctx.run(step, clip, passes, ss)
            finals[c_idx, rep] = sol.final_objective
            times += sol.wall_clock
    return pass_idx, step, finals, times


def _cell_index(grid, algo, step, clip):
    steps = grid.step_scales_for(algo)
    return steps.index(step) * len(grid.clip_scales) + grid.clip_scales.index(clip)


def _budget_for(spec, problem):
    delta = spec.delta if spec.delta is not None else 1.0 / problem.n ** 2
    return PrivacyBudget(spec.epsilon, delta)


@dataclass
class TuningResult:
    """Winner of a grid search plus the full per-cell mean-objective table."""

    algo: str
    best: SolverConfig
    best_mean_objective: float
    per_pass: list                     # dicts: passes, step, clip, mean objective
    table: np.ndarray                  # (n_passes, n_steps, n_clips) mean finals
    wall_clock: float = 0.0


def tune(spec, algo, problem=None, n_jobs=1):
    """Grid-search one algorithm; returns the TuningResult.

    Each cell is scored by the mean final objective over tuning_runs
    seeded repetitions; ties break toward smaller step, then smaller
    clip, then fewer passes. Seeds derive from (base_seed, algorithm,
    pass, cell, repetition), so results are independent of worker count
    and execution order.
    """
    if problem is None:
        problem, _ = build_problem(spec)
    budget = _budget_for(spec, problem)
    ctx = _make_context(spec, problem, budget, algo)
    steps = spec.grid.step_scales_for(algo)
    clips = spec.grid.clip_scales
    tasks = [(p_idx, step, passes)
             for p_idx, passes in enumerate(spec.grid.passes)
             for step in steps]
    table = np.full((len(spec.grid.passes), len(steps), len(clips)), np.nan)
    total_time = 0.0

    if n_jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(
                max_workers=n_jobs, initializer=_init_worker,
                initargs=(spec.to_dict(), problem, algo)) as pool:
            results = list(pool.map(_tune_task, tasks))
    else:
        _init_worker(spec.to_dict(), problem, algo)
        results = [_tune_task(t) for t in tasks]

    for pass_idx, step, finals, secs in results:
        s_idx = steps.index(step)
        with np.errstate(invalid="ignore"):
            means = finals.mean(axis=1)
        means = np.where(np.isfinite(means), means, np.inf)
        table[pass_idx, s_idx, :] = means
        total_time += secs

    per_pass = []
    best = None
    for p_idx, passes in enumerate(spec.grid.passes):
        flat = table[p_idx].ravel()          # step-major, clip-minor: tie-break order
        idx = int(np.argmin(flat))
        s_idx, c_idx = divmod(idx, len(clips))
        entry = {"passes": passes, "step_scale": steps[s_idx],
                 "clip_scale": clips[c_idx],
                 "tuning_mean_objective": float(flat[idx])}
        per_pass.append(entry)
        key = (flat[idx], steps[s_idx], clips[c_idx], passes)
        if best is None or key < best:
            best = key
    if not math.isfinite(best[0]):
        raise TuningFailure(
            f"{algo}: every grid cell diverged (non-finite mean objective); "
            f"grid: {len(steps)} steps x {len(clips)} clips x "
            f"{len(spec.grid.passes)} pass counts")

    mean_obj, step, clip, passes = best
    if algo == "dp_sgd":
        cfg = SolverConfig.sgd(step, clip, passes, problem.n, batch_size=ctx.batch_size)
    else:
        cfg = SolverConfig.cd(step, clip, passes, problem.p)
    return TuningResult(algo=algo, best=cfg, best_mean_objective=float(mean_obj),
                        per_pass=per_pass, table=table, wall_clock=total_time)


def _evaluate_config(spec, ctx, passes, pass_idx, step, clip, F_star):
    """eval_runs fresh-seed runs at one configuration; returns stats dict."""
    errors = []
    traces = []
    secs = 0.0
    cell_idx = _cell_index(spec.grid, ctx.algo, step, clip)
    for rep in range(spec.eval_runs):
        ss = _run_seed(spec.base_seed, ctx.algo, _EVAL_MARKER, pass_idx, cell_idx, rep)
        sol = ctx.run(step, clip, passes, ss)
        errors.append(relative_error(sol.final_objective, F_star))
        traces.append([relative_error(v, F_star) if math.isfinite(v) else math.inf
                       for v in sol.trace])
        secs += sol.wall_clock
    errors = np.asarray(errors)
    return {"errors": [float(e) for e in errors],
            "min": float(errors.min()), "mean": float(errors.mean()),
            "max": float(errors.max()), "traces": traces}, secs


@dataclass
class RunReport:
    """Self-contained record of one experiment."""

    spec: ExperimentSpec
    reference: dict
    algorithms: dict
    budget: dict
    environment: dict
    extras: dict
    timings: dict

    def to_dict(self, include_timings=False):
        d = {"spec": self.spec.to_dict(), "reference": self.reference,
             "algorithms": self.algorithms, "budget": self.budget,
             "environment": self.environment, "extras": self.extras}
        if include_timings:
            d["timings"] = self.timings
        return d

    def to_json(self, include_timings=False):
        return json.dumps(self.to_dict(include_timings), indent=2, sort_keys=True)


def _environment():
    import numba
    import scipy

    from . import __version__
    return {"package_version": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "platform": platform.platform()}


def run_experiment(spec, n_jobs=1, out_dir=None):
    """Tune, evaluate and report every algorithm in the spec.

    For each algorithm and pass count the grid winner is re-run with
    eval_runs fresh seeds; relative errors are measured against the
    reference optimum. Writes report.json, curves.csv, audit.json and
    timings.json when out_dir is given (timings are kept out of
    report.json so identical spec + seed reproduce identical bytes).
    """
    wall_start = time.perf_counter()
    problem, extras = build_problem(spec)
    budget = _budget_for(spec, problem)
    ref = reference_solve(problem)
    F_star = ref.objective
    reference = {"objective": F_star, "converged": ref.converged,
                 "cycles": ref.cycles,
                 "error_mode": "absolute" if absolute_gap_mode(F_star) else "relative",
                 "standardization_in_budget": False}

    algo_reports = {}
    timings = {}
    for algo in spec.algorithms:
        t0 = time.perf_counter()
        tuning = tune(spec, algo, problem=problem, n_jobs=n_jobs)
        ctx = _make_context(spec, problem, budget, algo)
        per_pass = []
        eval_secs = 0.0
        for p_idx, entry in enumerate(tuning.per_pass):
            stats, secs = _evaluate_config(
                spec, ctx, entry["passes"], p_idx, entry["step_scale"],
                entry["clip_scale"], F_star)
            eval_secs += secs
            audit = ctx.audits[entry["passes"]].to_dict()
            record = dict(entry)
            record["eval"] = {k: stats[k] for k in ("errors", "min", "mean", "max")}
            record["audit"] = _combined_audit(spec, budget, audit, algo)
            record["eval_traces"] = stats["traces"]
            per_pass.append(record)
        best_passes = tuning.best.passes
        best_entry = next(r for r in per_pass if r["passes"] == best_passes)
        algo_reports[algo] = {
            "best": {"passes": best_passes,
                     "step_scale": tuning.best.step_scale,
                     "clip_scale": tuning.best.clip_scale,
                     "batch_size": tuning.best.batch_size,
                     "tuning_mean_objective": tuning.best_mean_objective,
                     "eval": best_entry["eval"]},
            "per_pass": per_pass,
        }
        timings[algo] = {"tuning_seconds": time.perf_counter() - t0,
                         "solver_seconds_tuning": tuning.wall_clock,
                         "solver_seconds_eval": eval_secs}

    report = RunReport(
        spec=spec, reference=reference, algorithms=algo_reports,
        budget={"epsilon": budget.epsilon, "delta": budget.delta},
        environment=_environment(),
        extras={k: v for k, v in extras.items() if k != "true_weights"},
        timings={"total_seconds": time.perf_counter() - wall_start, **timings})
    if out_dir is not None:
        emit_report(report, out_dir)
    return report


def _combined_audit(spec, budget, optimizer_audit, algo):
    if algo != "dp_cd_priv_cst":
        return {"optimizer": optimizer_audit,
                "total_epsilon": optimizer_audit["epsilon"],
                "budget_epsilon": budget.epsilon,
                "budget_delta": budget.delta}
    eps_est = spec.estimation_budget_fraction * budget.epsilon
    total = eps_est + optimizer_audit["epsilon"]
    return {"estimation": {"mechanism": "laplace", "epsilon": eps_est, "delta": 0.0},
            "optimizer": optimizer_audit,
            "allocations": [eps_est, budget.epsilon - eps_est],
            "total_epsilon": total,
            "budget_epsilon": budget.epsilon,
            "budget_delta": budget.delta}


def emit_report(report, out_dir):
    """Write report.json, curves.csv, audit.json and timings.json."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    with open(os.path.join(out_dir, "curves.csv"), "w", encoding="utf-8",
              newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["algorithm", "passes", "err_min", "err_mean", "err_max"])
        for algo, rep in sorted(report.algorithms.items()):
            for entry in rep["per_pass"]:
                writer.writerow([algo, entry["passes"],
                                 repr(entry["eval"]["min"]),
                                 repr(entry["eval"]["mean"]),
                                 repr(entry["eval"]["max"])])
    audits = {algo: {"per_pass": [{"passes": e["passes"], "audit": e["audit"]}
                                  for e in rep["per_pass"]]}
              for algo, rep in report.algorithms.items()}
    audits["budget"] = report.budget
    with open(os.path.join(out_dir, "audit.json"), "w", encoding="utf-8") as fh:
        json.dump(audits, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "timings.json"), "w", encoding="utf-8") as fh:
        json.dump(report.timings, fh, indent=2, sort_keys=True)
        fh.write("\n")
