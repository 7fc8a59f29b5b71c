import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dpcd import Dataset, LossKind, Problem, Regularizer


@pytest.fixture
def small_regression():
    rng = np.random.default_rng(42)
    X = rng.standard_normal((40, 7))
    w = rng.standard_normal(7)
    y = X @ w + 0.3 * rng.standard_normal(40)
    return Problem(Dataset(X, y), LossKind.SQUARED, Regularizer.l1(), 0.5)


@pytest.fixture
def small_logistic():
    rng = np.random.default_rng(43)
    X = rng.standard_normal((40, 7))
    w = rng.standard_normal(7)
    y = np.where(X @ w + 0.5 * rng.standard_normal(40) > 0, 1.0, -1.0)
    return Problem(Dataset(X, y), LossKind.LOGISTIC, Regularizer.l2_squared(), 0.1)
