"""Privately estimate per-coordinate smoothness constants.

Spends a slice of the privacy budget on Laplace-mechanism estimates of the
coordinate curvatures, then compares them (and the clipping thresholds
they induce) with the exact values.
"""

import numpy as np

from dpcd import (Dataset, coordinate_thresholds, default_bounds,
                  feature_bounds, per_sample_smoothness, private_smoothness)

rng = np.random.default_rng(0)
n, p = 5000, 6
X = rng.standard_normal((n, p)) * np.array([50.0, 10.0, 2.0, 1.0, 1.0, 0.2])
data = Dataset(X, rng.standard_normal(n))

exact = per_sample_smoothness(data, "squared").mean(axis=0)
bounds = default_bounds(feature_bounds(data), "squared")
print("exact constants:   ", np.array2string(exact, precision=3))
print("crude upper bounds:", np.array2string(bounds, precision=3))

for eps_prime in (0.1, 1.0, 10.0):
    est = private_smoothness(data, "squared", bounds, eps_prime,
                             np.random.default_rng(1))
    rel = np.abs(est - exact) / exact
    print(f"eps' = {eps_prime:<4}: estimate "
          f"{np.array2string(est, precision=3)}  max rel err {rel.max():.3f}")

# the induced clipping thresholds only need the smoothness *ratios*
est = private_smoothness(data, "squared", bounds, 0.1, np.random.default_rng(2))
print("\nthresholds at C = 100:")
print("  from exact constants:  ",
      np.array2string(coordinate_thresholds(exact, 100.0), precision=2))
print("  from private estimates:",
      np.array2string(coordinate_thresholds(est, 100.0), precision=2))
