"""Private estimation of per-coordinate smoothness constants.

The smooth part's constants are averages of per-sample constants, so they
can be released as p clipped means under the Laplace mechanism, spending
a pure-epsilon slice of the overall budget.
"""

import numpy as np

from .objective import SMOOTHNESS_FLOOR, LossKind


def per_sample_smoothness(dataset, loss):
    """(n, p) matrix of per-sample coordinate curvature constants.

    Squared loss: 2 x_ij^2. Logistic: x_ij^2 / 4.
    """
    sq = dataset.features ** 2
    if LossKind(loss) is LossKind.SQUARED:
        return 2.0 * sq
    return 0.25 * sq


def default_bounds(bounds, loss):
    """Crude per-coordinate caps from feature bounds.

    Doubles each max-abs feature bound, then applies the loss's
    curvature map: squared -> 2 * (2 m_j)^2, logistic -> (2 m_j)^2 / 4.
    """
    doubled = 2.0 * np.asarray(bounds.max_abs, dtype=np.float64)
    if LossKind(loss) is LossKind.SQUARED:
        b = 2.0 * doubled ** 2
    else:
        b = 0.25 * doubled ** 2
    return np.maximum(b, SMOOTHNESS_FLOOR)


def private_smoothness(dataset, loss, bounds, eps_prime, rng):
    """Laplace-mechanism estimate of the p smoothness constants.

    Per-sample constants are clipped to [0, b_j], averaged, and perturbed
    with Laplace noise of scale 2 b_j p / (n eps'); the factor p charges
    one query per coordinate under simple composition. Negative results
    are floored at a tiny positive value (post-processing, free).
    """
    if not eps_prime > 0:
        raise ValueError("eps_prime must be positive")
    b = np.asarray(bounds, dtype=np.float64)
    if np.any(b <= 0):
        raise ValueError("bounds must be positive")
    n, p = dataset.n, dataset.p
    per_sample = np.minimum(per_sample_smoothness(dataset, loss), b)
    means = per_sample.mean(axis=0)
    scales = 2.0 * b * p / (n * eps_prime)
    noisy = means + rng.laplace(0.0, 1.0, size=p) * scales
    return np.maximum(noisy, SMOOTHNESS_FLOOR)
