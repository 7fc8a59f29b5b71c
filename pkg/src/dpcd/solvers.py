"""DP-CD, the DP-SGD baseline, clipping rules, and the reference solver."""

import math
import time
import warnings
import weakref
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .objective import LossKind, evaluate, evaluate_many, per_sample_grad_coord, \
    residual_state, smoothness_constants
from .privacy import NONPRIVATE_AUDIT, AccountantAudit

MODE_CLIPPED = "clipped"
MODE_THEORY = "theory_lipschitz"

_LOSS_CODE = {LossKind.SQUARED: 0, LossKind.LOGISTIC: 1}
_REG_CODE = {"none": 0, "l1": 1, "l2_squared": 2, "box": 3}

_XT_CACHE = weakref.WeakKeyDictionary()
_ROWNORM_CACHE = weakref.WeakKeyDictionary()
_OPNORM_CACHE = weakref.WeakKeyDictionary()


@dataclass(frozen=True)
class SolverConfig:
    """Hyperparameters of one solver run.

    step_scale multiplies the per-coordinate step 1/M_j (DP-CD) or 1/beta
    (DP-SGD). clip_scale is the single clipping hyperparameter; inf
    disables clipping. For DP-CD, outer_iters * inner_iters must equal
    passes * p; for DP-SGD the step count is passes * ceil(n / batch_size).
    """

    step_scale: float
    clip_scale: float = math.inf
    passes: int = 1
    inner_iters: int = 1
    outer_iters: int = 1
    batch_size: int = 1
    seed: int = 0
    mode: str = MODE_CLIPPED

    def __post_init__(self):
        if not self.step_scale > 0:
            raise ValueError("step_scale must be positive")
        if not self.clip_scale > 0:
            raise ValueError("clip_scale must be positive")
        if self.mode not in (MODE_CLIPPED, MODE_THEORY):
            raise ValueError(f"unknown mode {self.mode!r}")
        if min(self.passes, self.inner_iters, self.outer_iters, self.batch_size) < 1:
            raise ValueError("iteration counts must be >= 1")

    @classmethod
    def cd(cls, step_scale, clip_scale, passes, p, seed=0, mode=MODE_CLIPPED,
           restarted=False):
        """DP-CD schedule: one averaging window (default) or per-pass restarts."""
        if restarted:
            T, K = passes, p
        else:
            T, K = 1, passes * p
        return cls(step_scale=step_scale, clip_scale=clip_scale, passes=passes,
                   inner_iters=K, outer_iters=T, seed=seed, mode=mode)

    @classmethod
    def sgd(cls, step_scale, clip_scale, passes, n, batch_size=None, seed=0):
        """DP-SGD schedule; batch_size None picks max(1, round(sqrt(n)))."""
        if batch_size is None:
            batch_size = max(1, round(math.sqrt(n)))
        return cls(step_scale=step_scale, clip_scale=clip_scale, passes=passes,
                   inner_iters=passes * math.ceil(n / batch_size), outer_iters=1,
                   batch_size=batch_size, seed=seed, mode=MODE_CLIPPED)

    def to_dict(self):
        return {
            "step_scale": self.step_scale,
            "clip_scale": self.clip_scale if math.isfinite(self.clip_scale) else "inf",
            "passes": self.passes, "inner_iters": self.inner_iters,
            "outer_iters": self.outer_iters, "batch_size": self.batch_size,
            "seed": self.seed, "mode": self.mode,
        }


class Solution:
    """Output of one solver run; cannot be built without a privacy audit.

    The per-pass objective trace (initial point included, so length
    passes + 1) is evaluated lazily from iterate snapshots: tuning loops
    read only final_objective.
    """

    def __init__(self, w_priv, noise_scales, audit, config, problem, w0,
                 snapshots, wall_clock=0.0):
        if not isinstance(audit, AccountantAudit):
            raise TypeError("a Solution requires an AccountantAudit")
        self.w_priv = w_priv
        self.noise_scales = noise_scales
        self.audit = audit
        self.config = config
        self.wall_clock = wall_clock
        self._problem = problem
        self._w0 = w0
        self._snapshots = snapshots
        self._trace = None
        self._final = None

    @property
    def final_objective(self):
        if self._final is None:
            self._final = evaluate(self._problem, self.w_priv)
        return self._final

    @property
    def trace(self):
        if self._trace is None:
            points = np.vstack([self._w0[None, :], self._snapshots])
            self._trace = evaluate_many(self._problem, points)
        return self._trace

    def to_dict(self):
        return {
            "weights": np.asarray(self.w_priv).tolist(),
            "trace": np.asarray(self.trace).tolist(),
            "noise_scales": np.asarray(self.noise_scales).tolist(),
            "audit": self.audit.to_dict(),
            "config": self.config.to_dict(),
            "wall_clock": self.wall_clock,
        }


@dataclass
class ReferenceSolution:
    """High-precision minimizer estimate; converged=False flags the cycle cap."""

    w: np.ndarray
    objective: float
    converged: bool
    cycles: int


def clip_scalar(g, c):
    """g scaled into [-c, c], preserving sign: g * min(1, c/|g|)."""
    if not c > 0:
        raise ValueError("clipping threshold must be positive")
    if g > c:
        return c
    if g < -c:
        return -c
    return g


def coordinate_thresholds(M, C):
    """Per-coordinate thresholds C_j = sqrt(M_j / sum(M)) * C.

    One hyperparameter C controls the whole vector; with clipped
    per-coordinate sensitivities 2*C_j this keeps the trace-normalized,
    inverse-smoothness-weighted total sensitivity at 2*C. Invariant to
    rescaling M.
    """
    if not C > 0:
        raise ValueError("clip scale must be positive")
    M = np.asarray(M, dtype=np.float64)
    return np.sqrt(M / M.sum()) * C


def clipped_grad_coord(problem, w, j, threshold):
    """Average over samples of the j-th gradient coordinate clipped to threshold."""
    state = residual_state(problem, w)
    g = per_sample_grad_coord(problem, state, j)
    return float(np.mean(np.clip(g, -threshold, threshold)))


def _transposed_features(dataset):
    XT = _XT_CACHE.get(dataset)
    if XT is None:
        XT = np.ascontiguousarray(dataset.features.T)
        XT.setflags(write=False)
        _XT_CACHE[dataset] = XT
    return XT


def _row_norms(dataset):
    norms = _ROWNORM_CACHE.get(dataset)
    if norms is None:
        norms = np.sqrt(np.einsum("ij,ij->i", dataset.features, dataset.features))
        norms.setflags(write=False)
        _ROWNORM_CACHE[dataset] = norms
    return norms


def global_smoothness(problem, power_iters=100):
    """Upper bound on the largest Hessian eigenvalue of the smooth part.

    Estimates ||X||_op^2 with power iteration; squared loss gives
    (2/n) * lambda_max(X^T X), logistic a quarter of that.
    """
    lam_max = _OPNORM_CACHE.get(problem.dataset)
    if lam_max is None:
        X = problem.dataset.features
        v = np.full(problem.p, 1.0 / math.sqrt(problem.p))
        for _ in range(power_iters):
            u = X.T @ (X @ v)
            nrm = np.linalg.norm(u)
            if nrm == 0:
                break
            v = u / nrm
        lam_max = float(v @ (X.T @ (X @ v)))
        _OPNORM_CACHE[problem.dataset] = lam_max
    beta = 2.0 * lam_max / problem.n
    if problem.loss is LossKind.LOGISTIC:
        beta *= 0.25
    return max(beta, 1e-12)


def _reg_arrays(problem):
    reg = problem.regularizer
    code = _REG_CODE[reg.kind]
    if code == 3:
        return code, reg.lo, reg.hi
    z = np.zeros(problem.p)
    return code, z, z


def _cd_inputs(problem, config, smoothness):
    M = np.asarray(smoothness, dtype=np.float64) if smoothness is not None \
        else smoothness_constants(problem)
    gamma = config.step_scale / M
    if config.mode == MODE_CLIPPED and math.isfinite(config.clip_scale):
        thresh = coordinate_thresholds(M, config.clip_scale)
    else:
        thresh = np.full(problem.p, np.inf)
    return gamma, thresh


def dp_cd(problem, config, noise, rng=None, w0=None, smoothness=None):
    """Differentially private proximal coordinate descent.

    Runs outer_iters windows of inner_iters noisy coordinate prox steps;
    each window returns the average of its iterates (the starting point
    excluded). Step sizes are step_scale / M_j; in clipped mode per-sample
    gradient coordinates are clipped to coordinate_thresholds(M, clip_scale)
    before averaging. `noise` must be calibrated for
    outer_iters * inner_iters releases; use NoiseScales.noiseless(p) for
    sigma = 0 runs. Bit-reproducible for a fixed seed.
    """
    p = problem.p
    sigma = np.asarray(noise.sigma, dtype=np.float64)
    if sigma.shape != (p,):
        raise ValueError(f"noise must have one scale per coordinate ({p})")
    gamma, thresh = _cd_inputs(problem, config, smoothness)
    if rng is None:
        rng = np.random.default_rng(config.seed)
    w0 = np.zeros(p) if w0 is None else np.asarray(w0, dtype=np.float64)
    T, K = config.outer_iters, config.inner_iters
    total = T * K
    stride = total // config.passes if total % config.passes == 0 else total
    reg_code, lo, hi = _reg_arrays(problem)

    t0 = time.perf_counter()
    w_priv, snaps = _kernels.dp_cd_kernel(
        _transposed_features(problem.dataset), problem.dataset.labels,
        _LOSS_CODE[problem.loss], reg_code, problem.reg_strength, lo, hi,
        gamma, sigma, thresh, T, K, w0, stride, 0, rng)
    elapsed = time.perf_counter() - t0
    return Solution(w_priv=w_priv, noise_scales=sigma, audit=noise.audit,
                    config=config, problem=problem, w0=w0, snapshots=snaps,
                    wall_clock=elapsed)


def dp_cd_iterates(problem, config, noise, rng=None, w0=None, smoothness=None):
    """Raw inner iterates theta^1..theta^TK of dp_cd (diagnostic helper)."""
    p = problem.p
    gamma, thresh = _cd_inputs(problem, config, smoothness)
    if rng is None:
        rng = np.random.default_rng(config.seed)
    w0 = np.zeros(p) if w0 is None else np.asarray(w0, dtype=np.float64)
    reg_code, lo, hi = _reg_arrays(problem)
    _, snaps = _kernels.dp_cd_kernel(
        _transposed_features(problem.dataset), problem.dataset.labels,
        _LOSS_CODE[problem.loss], reg_code, problem.reg_strength, lo, hi,
        gamma, np.asarray(noise.sigma, dtype=np.float64), thresh,
        config.outer_iters, config.inner_iters, w0, 1, 1, rng)
    return snaps


def dp_sgd(problem, config, sigma_bar, rng=None, w0=None, audit=None):
    """Proximal DP-SGD with l2 gradient clipping over Poisson batches.

    Each of passes * ceil(n / B) steps averages per-sample gradients
    clipped to clip_scale over a Poisson batch at rate q = B / n, adds
    N(0, (sigma_bar * 2 * clip_scale / B)^2 I) to the average, and takes
    a full-vector prox step of size step_scale / beta, beta being the
    global smoothness bound. sigma_bar must come from subsampled-Gaussian
    accounting at q for that many steps.
    """
    n, p = problem.n, problem.p
    B = config.batch_size
    q = min(B / n, 1.0)
    steps = config.passes * math.ceil(n / B)
    if sigma_bar > 0 and not math.isfinite(config.clip_scale):
        raise ValueError("private DP-SGD needs a finite clipping threshold")
    if sigma_bar > 0 and audit is None:
        raise ValueError("private DP-SGD needs the calibration audit")
    if audit is None:
        audit = NONPRIVATE_AUDIT
    noise_std = sigma_bar * 2.0 * config.clip_scale / B if sigma_bar > 0 else 0.0
    step = config.step_scale / global_smoothness(problem)
    if rng is None:
        rng = np.random.default_rng(config.seed)
    w0 = np.zeros(p) if w0 is None else np.asarray(w0, dtype=np.float64)
    reg_code, lo, hi = _reg_arrays(problem)
    stride = math.ceil(n / B)

    t0 = time.perf_counter()
    w, snaps = _kernels.dp_sgd_kernel(
        problem.dataset.features, problem.dataset.labels, _row_norms(problem.dataset),
        _LOSS_CODE[problem.loss], reg_code, problem.reg_strength, lo, hi,
        step, config.clip_scale, noise_std, float(B), q, steps, w0, stride, rng)
    elapsed = time.perf_counter() - t0
    return Solution(w_priv=w, noise_scales=np.full(p, noise_std), audit=audit,
                    config=config, problem=problem, w0=w0, snapshots=snaps,
                    wall_clock=elapsed)


def reference_solve(problem, tol=1e-12, max_cycles=100_000, w0=None):
    """Non-private optimum by cyclic exact proximal coordinate descent.

    Sweeps coordinates with step sizes 1/M_j until the objective decrease
    over a full cycle falls below tol (relative) or max_cycles is hit;
    the latter flags converged=False and warns.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    M = smoothness_constants(problem)
    w0 = np.zeros(problem.p) if w0 is None else np.asarray(w0, dtype=np.float64)
    reg_code, lo, hi = _reg_arrays(problem)
    w, obj, converged, cycles = _kernels.reference_cd_kernel(
        _transposed_features(problem.dataset), problem.dataset.labels,
        _LOSS_CODE[problem.loss], reg_code, problem.reg_strength, lo, hi,
        1.0 / M, tol, max_cycles, w0)
    if not converged:
        warnings.warn(f"reference solver hit the {max_cycles}-cycle cap; "
                      "returning best point found", RuntimeWarning)
    return ReferenceSolution(w=w, objective=float(obj), converged=bool(converged),
                             cycles=int(cycles))
