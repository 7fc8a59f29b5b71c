"""Composite objective F = f + psi: losses, coordinate gradients, constants.

The smooth part f is an average of per-sample losses; psi is a separable
regularizer scaled by a strength lambda. Coordinate gradients are served
from a ResidualState so that one coordinate costs O(n), never a full
matrix pass.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

SMOOTHNESS_FLOOR = 1e-12


class UnboundedLipschitz(ValueError):
    """The loss has no data-independent per-coordinate gradient bound."""


class LossKind(str, enum.Enum):
    SQUARED = "squared"        # (w.x - y)^2
    LOGISTIC = "logistic"      # log(1 + exp(-y w.x)), y in {-1, +1}


@dataclass(frozen=True, eq=False)
class Regularizer:
    """Separable regularizer: none, l1, l2_squared, or a box indicator."""

    kind: str
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    KINDS = ("none", "l1", "l2_squared", "box")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if self.kind == "box":
            lo = np.asarray(self.lo, dtype=np.float64)
            hi = np.asarray(self.hi, dtype=np.float64)
            if lo.shape != hi.shape or np.any(lo > hi):
                raise ValueError("box requires lo[j] <= hi[j] of equal shape")
            object.__setattr__(self, "lo", lo)
            object.__setattr__(self, "hi", hi)
        elif self.lo is not None or self.hi is not None:
            raise ValueError("lo/hi only apply to the box kind")

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def l1(cls):
        return cls("l1")

    @classmethod
    def l2_squared(cls):
        return cls("l2_squared")

    @classmethod
    def box(cls, lo, hi):
        return cls("box", lo=lo, hi=hi)


@dataclass(frozen=True, eq=False)
class Problem:
    """A dataset together with a loss, a separable regularizer and lambda."""

    dataset: "Dataset"
    loss: LossKind
    regularizer: Regularizer = field(default_factory=Regularizer.none)
    reg_strength: float = 0.0

    def __post_init__(self):
        if self.reg_strength < 0:
            raise ValueError("reg_strength must be nonnegative")
        object.__setattr__(self, "loss", LossKind(self.loss))
        if self.loss is LossKind.LOGISTIC:
            y = self.dataset.labels
            if not np.all(np.abs(y) == 1.0):
                raise ValueError("logistic labels must be in {-1, +1}")
        if self.regularizer.kind == "box" and self.regularizer.lo.shape[0] != self.dataset.p:
            raise ValueError("box bounds must have one entry per feature")

    @property
    def n(self):
        return self.dataset.n

    @property
    def p(self):
        return self.dataset.p


def penalty_value(regularizer, lam, w):
    """psi(w): lam*||w||_1, (lam/2)*||w||^2, box indicator, or 0."""
    kind = regularizer.kind
    if kind == "none":
        return 0.0
    if kind == "l1":
        return lam * float(np.sum(np.abs(w)))
    if kind == "l2_squared":
        return 0.5 * lam * float(np.dot(w, w))
    # box indicator
    if np.any(w < regularizer.lo) or np.any(w > regularizer.hi):
        return np.inf
    return 0.0


def evaluate(problem, w):
    """Objective value F(w) = (1/n) sum_i loss(w; x_i, y_i) + psi(w)."""
    w = np.asarray(w, dtype=np.float64)
    X, y = problem.dataset.features, problem.dataset.labels
    z = X @ w
    if problem.loss is LossKind.SQUARED:
        r = z - y
        smooth = float(np.dot(r, r)) / problem.n
    else:
        # log(1 + exp(-m)) computed stably for any margin sign
        m = y * z
        smooth = float(np.mean(np.logaddexp(0.0, -m)))
    return smooth + penalty_value(problem.regularizer, problem.reg_strength, w)


def evaluate_many(problem, W):
    """Objective values for the rows of W, sharing one matrix product."""
    W = np.asarray(W, dtype=np.float64)
    X, y = problem.dataset.features, problem.dataset.labels
    Z = X @ W.T                                    # (n, m)
    if problem.loss is LossKind.SQUARED:
        R = Z - y[:, None]
        smooth = np.einsum("im,im->m", R, R) / problem.n
    else:
        smooth = np.logaddexp(0.0, -y[:, None] * Z).mean(axis=0)
    lam, reg = problem.reg_strength, problem.regularizer
    out = np.empty(W.shape[0])
    for k in range(W.shape[0]):
        out[k] = smooth[k] + penalty_value(reg, lam, W[k])
    return out


@dataclass
class ResidualState:
    """Weights plus cached per-sample quantities for O(n) coordinate gradients.

    For squared loss the cache holds residuals r_i = w.x_i - y_i; for
    logistic it holds margins m_i = y_i * w.x_i. A full recomputation is
    triggered every n*p single-coordinate updates to bound float drift.
    Single-owner mutable: one solver run owns one state.
    """

    problem: Problem
    w: np.ndarray
    residuals: np.ndarray
    updates_since_refresh: int = 0

    @property
    def refresh_period(self):
        return self.problem.n * self.problem.p


def residual_state(problem, w=None):
    """Build a consistent ResidualState at w (default: the zero vector)."""
    if w is None:
        w = np.zeros(problem.p)
    else:
        w = np.array(w, dtype=np.float64)
    return ResidualState(problem, w, _recompute_residuals(problem, w))


def _recompute_residuals(problem, w):
    z = problem.dataset.features @ w
    if problem.loss is LossKind.SQUARED:
        return z - problem.dataset.labels
    return problem.dataset.labels * z


def refresh_state(state):
    """Recompute the cached residuals from the weights in place."""
    state.residuals = _recompute_residuals(state.problem, state.w)
    state.updates_since_refresh = 0
    return state


def grad_coord(problem, state, j):
    """j-th coordinate of the gradient of the smooth part f at state.w."""
    x_j = problem.dataset.features[:, j]
    if problem.loss is LossKind.SQUARED:
        return 2.0 * float(np.dot(x_j, state.residuals)) / problem.n
    y = problem.dataset.labels
    sig = _sigmoid(-state.residuals)
    return -float(np.dot(y * x_j, sig)) / problem.n


def per_sample_grad_coord(problem, state, j):
    """Per-sample j-th gradient coordinates (length n), from cached residuals."""
    x_j = problem.dataset.features[:, j]
    if problem.loss is LossKind.SQUARED:
        return 2.0 * x_j * state.residuals
    return -problem.dataset.labels * x_j * _sigmoid(-state.residuals)


def update_state(state, j, delta):
    """Apply w[j] += delta, updating the cached residuals with column j only."""
    if delta == 0.0:
        return state
    state.w[j] += delta
    x_j = state.problem.dataset.features[:, j]
    if state.problem.loss is LossKind.SQUARED:
        state.residuals += delta * x_j
    else:
        state.residuals += delta * state.problem.dataset.labels * x_j
    state.updates_since_refresh += 1
    if state.updates_since_refresh >= state.refresh_period:
        refresh_state(state)
    return state


def _sigmoid(t):
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def smoothness_constants(problem):
    """Per-coordinate curvature bounds of f, floored at a tiny positive value.

    Squared loss: (2/n) ||X[:, j]||^2. Logistic: (1/(4n)) ||X[:, j]||^2.
    """
    col_sq = np.einsum("ij,ij->j", problem.dataset.features, problem.dataset.features)
    if problem.loss is LossKind.SQUARED:
        M = 2.0 * col_sq / problem.n
    else:
        M = 0.25 * col_sq / problem.n
    return np.maximum(M, SMOOTHNESS_FLOOR)


def lipschitz_constants(problem):
    """Per-coordinate gradient bounds L_j = max_i |x_ij| (logistic only).

    Squared loss has no data-independent bound; callers should use the
    clipping path instead.
    """
    if problem.loss is not LossKind.LOGISTIC:
        raise UnboundedLipschitz(
            "squared loss has unbounded per-coordinate gradients; "
            "use clipped mode with explicit thresholds")
    L = np.abs(problem.dataset.features).max(axis=0)
    return np.maximum(L, SMOOTHNESS_FLOOR)
