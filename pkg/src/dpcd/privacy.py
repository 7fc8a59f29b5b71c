"""Noise mechanisms, RDP accounting, (eps, delta) conversion and calibration.

Accounting works on RdpCurve objects: the Renyi privacy loss eps(alpha)
sampled on a grid of orders alpha > 1. Curves compose by pointwise
addition and convert to (eps, delta)-DP by minimizing
eps(alpha) + log(1/delta)/(alpha - 1) over the grid.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp


class InfinitePrivacyLoss(ValueError):
    """A zero-noise mechanism has unbounded Renyi divergence."""


class HypothesisViolation(ValueError):
    """Budget outside the closed-form calibration's validity region."""


class CalibrationFailure(RuntimeError):
    """No noise scale within the search range meets the budget."""


@dataclass(frozen=True)
class PrivacyBudget:
    """(epsilon, delta) target for a whole run."""

    epsilon: float
    delta: float

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError("epsilon must be positive and finite")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class RdpCurve:
    """eps(alpha) sampled on a strictly increasing grid of orders alpha > 1."""

    alphas: np.ndarray
    eps: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=np.float64)
        e = np.asarray(self.eps, dtype=np.float64)
        if a.shape != e.shape or a.ndim != 1 or a.size == 0:
            raise ValueError("alphas and eps must be equal-length 1-d arrays")
        if np.any(a <= 1):
            raise ValueError("orders must be > 1")
        if np.any(np.diff(a) <= 0):
            raise ValueError("orders must be strictly increasing")
        if np.any(e < 0):
            raise ValueError("eps values must be nonnegative")
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "eps", e)


@dataclass(frozen=True)
class AccountantAudit:
    """Record of what the accountant promised for one mechanism composition."""

    mechanism: str                 # "gaussian" | "subsampled_gaussian" | "laplace" | "none"
    steps: int
    sensitivity: float | list     # per-step sensitivity (scalar or per-coordinate)
    noise_to_sensitivity: float
    best_alpha: float
    epsilon: float                 # achieved at delta
    delta: float
    budget_epsilon: float
    subsampling_q: float | None = None
    alpha_grid: str = "int 2..256 + 64 log-spaced in (1, 2]"

    def __post_init__(self):
        if self.epsilon > self.budget_epsilon:
            raise ValueError(
                f"achieved epsilon {self.epsilon} exceeds budget {self.budget_epsilon}")

    def to_dict(self):
        d = dict(self.__dict__)
        if isinstance(d["sensitivity"], np.ndarray):
            d["sensitivity"] = d["sensitivity"].tolist()
        return d


NONPRIVATE_AUDIT = AccountantAudit(
    mechanism="none", steps=0, sensitivity=0.0, noise_to_sensitivity=math.inf,
    best_alpha=math.inf, epsilon=0.0, delta=0.0, budget_epsilon=math.inf,
)


@dataclass(frozen=True, eq=False)
class NoiseScales:
    """Per-coordinate Gaussian standard deviations plus their audit."""

    sigma: np.ndarray
    audit: AccountantAudit

    def __post_init__(self):
        s = np.asarray(self.sigma, dtype=np.float64)
        if np.any(s < 0):
            raise ValueError("noise scales must be nonnegative")
        object.__setattr__(self, "sigma", s)

    @classmethod
    def noiseless(cls, p):
        """All-zero scales with a non-private audit, for sigma = 0 runs."""
        return cls(np.zeros(p), NONPRIVATE_AUDIT)


def gaussian_sample(sigma, rng):
    """One draw from N(0, sigma^2); sigma = 0 returns exactly 0."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return 0.0
    return sigma * rng.standard_normal()


def laplace_sample(scale, rng):
    """One draw from Laplace(0, scale); scale = 0 returns exactly 0."""
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    if scale == 0:
        return 0.0
    return rng.laplace(0.0, scale)


def default_alpha_grid(low_orders=True):
    """Orders used by the accountant.

    Integers 2..256; with low_orders, 64 extra points 1 + logspace(-4, 0)
    covering (1, 2] for plain Gaussian curves in high-privacy regimes.
    """
    ints = np.arange(2.0, 257.0)
    if not low_orders:
        return ints
    low = 1.0 + np.logspace(-4, 0, 64)
    return np.unique(np.concatenate([low, ints]))


def rdp_gaussian(sensitivity, sigma, alphas=None):
    """RDP curve of the Gaussian mechanism: eps(alpha) = sens^2 alpha / (2 sigma^2)."""
    if sigma <= 0:
        raise InfinitePrivacyLoss("Gaussian mechanism needs sigma > 0")
    if alphas is None:
        alphas = default_alpha_grid()
    alphas = np.asarray(alphas, dtype=np.float64)
    return RdpCurve(alphas, (sensitivity ** 2) * alphas / (2.0 * sigma ** 2))


def rdp_subsampled_gaussian(q, sigma_bar, alphas=None):
    """RDP curve of the Poisson-subsampled Gaussian mechanism at integer orders.

    For integer alpha >= 2 and sampling ratio q:

        eps(alpha) = log( sum_{k=0..alpha} C(alpha, k) (1-q)^(alpha-k) q^k
                          * exp(k (k-1) / (2 sigma_bar^2)) ) / (alpha - 1)

    with sigma_bar the noise-to-sensitivity ratio. Computed in log space
    with max subtraction; the binomial terms overflow naively for large
    orders.
    """
    if not 0 < q <= 1:
        raise ValueError("sampling ratio q must lie in (0, 1]")
    if sigma_bar <= 0:
        raise InfinitePrivacyLoss("subsampled Gaussian needs sigma_bar > 0")
    if alphas is None:
        alphas = default_alpha_grid(low_orders=False)
    alphas = np.asarray(alphas, dtype=np.float64)
    if np.any(alphas != np.round(alphas)) or np.any(alphas < 2):
        raise ValueError("subsampled Gaussian curve supports integer orders >= 2 only")

    if q == 1.0:
        return RdpCurve(alphas, alphas / (2.0 * sigma_bar ** 2))

    log_q, log_1mq = math.log(q), math.log1p(-q)
    eps = np.empty_like(alphas)
    for idx, a in enumerate(alphas.astype(np.int64)):
        k = np.arange(a + 1)
        log_binom = gammaln(a + 1) - gammaln(k + 1) - gammaln(a - k + 1)
        log_terms = (log_binom + k * log_q + (a - k) * log_1mq
                     + k * (k - 1) / (2.0 * sigma_bar ** 2))
        eps[idx] = max(logsumexp(log_terms), 0.0) / (a - 1)
    return RdpCurve(alphas, eps)


def compose(curves):
    """Adaptive composition: pointwise sum of curves sharing one alpha grid."""
    curves = list(curves)
    if not curves:
        raise ValueError("compose needs at least one curve")
    alphas = curves[0].alphas
    total = np.zeros_like(curves[0].eps)
    for c in curves:
        if c.alphas.shape != alphas.shape or not np.array_equal(c.alphas, alphas):
            raise ValueError("curves must share an identical alpha grid")
        total = total + c.eps
    return RdpCurve(alphas, total)


def rdp_to_dp(curve, delta):
    """Best (epsilon, delta)-DP implied by a curve.

    Returns (min over the grid of eps(alpha) + log(1/delta)/(alpha - 1),
    argmin alpha).
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    objective = curve.eps + math.log(1.0 / delta) / (curve.alphas - 1.0)
    idx = int(np.argmin(objective))
    return float(objective[idx]), float(curve.alphas[idx])


def calibrate_dpcd_closed_form(lipschitz, T, K, n, budget):
    """Closed-form per-coordinate noise scales for T*K coordinate releases.

    sigma_j = sqrt(12 L_j^2 T K log(1/delta)) / (n eps); valid for
    eps <= 1 and delta < 1/3. The per-step sensitivity is 2 L_j / n.
    """
    if T * K < 1:
        raise ValueError("need at least one release")
    if budget.epsilon > 1 or budget.delta >= 1 / 3:
        raise HypothesisViolation(
            "closed form requires eps <= 1 and delta < 1/3; "
            "use calibrate_numeric instead")
    L = np.asarray(lipschitz, dtype=np.float64)
    sigma = np.sqrt(12.0 * L ** 2 * T * K * math.log(1.0 / budget.delta)) / (n * budget.epsilon)
    sigma_bar = float(np.sqrt(3.0 * T * K * math.log(1.0 / budget.delta)) / budget.epsilon)
    achieved, alpha = _achieved_epsilon(sigma_bar, T * K, budget.delta, None)
    # AccountantAudit raises if the re-audited eps ever exceeded the budget
    audit = AccountantAudit(
        mechanism="gaussian", steps=T * K, sensitivity=(2.0 * L / n).tolist(),
        noise_to_sensitivity=sigma_bar, best_alpha=alpha,
        epsilon=achieved, delta=budget.delta, budget_epsilon=budget.epsilon)
    return NoiseScales(sigma, audit)


def _achieved_epsilon(sigma_bar, steps, delta, q):
    """(eps, alpha) delivered by `steps` compositions at ratio sigma_bar."""
    if q is None:
        per_step = rdp_gaussian(1.0, sigma_bar)
    else:
        per_step = rdp_subsampled_gaussian(q, sigma_bar)
    total = RdpCurve(per_step.alphas, steps * per_step.eps)
    return rdp_to_dp(total, delta)


SIGMA_BAR_CEILING = 1e12


def calibrate_numeric(sensitivity_per_step, steps, budget, subsampling_q=None,
                      rel_tol=1e-4):
    """Smallest noise-to-sensitivity ratio meeting the budget, by bisection.

    The per-step curve is a plain Gaussian when subsampling_q is None and
    a Poisson-subsampled Gaussian at that ratio otherwise. The returned
    ratio multiplies `sensitivity_per_step` to give the actual noise std.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    eps_target = budget.epsilon

    def feasible(s):
        return _achieved_epsilon(s, steps, budget.delta, subsampling_q)[0] <= eps_target

    hi = 1.0
    lo = 0.0
    if feasible(hi):
        # walk down to an infeasible lower bracket; achieved eps blows up
        # as the ratio shrinks, so this terminates for any finite budget
        for _ in range(200):
            probe = hi / 2.0
            if feasible(probe):
                hi = probe
            else:
                lo = probe
                break
        else:
            raise CalibrationFailure("budget appears unbounded; cannot bracket")
    else:
        while not feasible(hi):
            lo = hi
            hi *= 2.0
            if hi > SIGMA_BAR_CEILING:
                raise CalibrationFailure(
                    f"budget eps={eps_target} unreachable below ratio {SIGMA_BAR_CEILING}")
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def calibrate_dpcd_numeric(lipschitz, T, K, n, budget):
    """Per-coordinate noise scales via the numeric accountant.

    The per-step noise-to-sensitivity ratio is shared across coordinates
    because sigma_j is proportional to the per-coordinate sensitivity
    2 L_j / n, so T*K identical Gaussian curves compose.
    """
    L = np.asarray(lipschitz, dtype=np.float64)
    sens = 2.0 * L / n
    sigma_bar = calibrate_numeric(float(sens.max()), T * K, budget)
    achieved, alpha = _achieved_epsilon(sigma_bar, T * K, budget.delta, None)
    audit = AccountantAudit(
        mechanism="gaussian", steps=T * K, sensitivity=sens.tolist(),
        noise_to_sensitivity=sigma_bar, best_alpha=alpha,
        epsilon=achieved, delta=budget.delta, budget_epsilon=budget.epsilon)
    return NoiseScales(sens * sigma_bar, audit)


def calibrate_dpsgd_numeric(q, steps, budget, sensitivity=1.0):
    """(sigma_bar, audit) for DP-SGD's subsampled Gaussian releases."""
    sigma_bar = calibrate_numeric(sensitivity, steps, budget, subsampling_q=q)
    achieved, alpha = _achieved_epsilon(sigma_bar, steps, budget.delta, q)
    audit = AccountantAudit(
        mechanism="subsampled_gaussian", steps=steps, sensitivity=sensitivity,
        noise_to_sensitivity=sigma_bar, best_alpha=alpha,
        epsilon=achieved, delta=budget.delta,
        budget_epsilon=budget.epsilon, subsampling_q=q)
    return sigma_bar, audit
