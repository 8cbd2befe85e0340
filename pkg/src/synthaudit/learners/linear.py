"""Least-squares attack model for continuous sensitive attributes.

Features are centred by their column means and the fit has no intercept;
the residual variance estimate divides by n minus the feature count. The
Gaussian posterior built from (prediction, residual variance) is what the
attribute-inference game scores guesses with.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from synthaudit.errors import InsufficientRows, RankDeficient

RIDGE_JITTER = 1e-9
VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class LinearAttackModel:
    weights: np.ndarray
    offsets: np.ndarray
    sigma2: float

    def predict(self, features) -> float:
        """Posterior mean for one feature vector."""
        f = np.asarray(features, dtype=np.float64)
        return float((f - self.offsets) @ self.weights)


def fit_linear(features, target) -> LinearAttackModel:
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if X.ndim != 2:
        raise InsufficientRows("features must be 2-dimensional")
    n, k = X.shape
    if n < k + 2:
        raise InsufficientRows(f"need at least {k + 2} rows to fit {k} weights, got {n}")
    offsets = X.mean(axis=0)
    Xc = X - offsets
    gram = Xc.T @ Xc + RIDGE_JITTER * np.eye(k)
    try:
        w = np.linalg.solve(gram, Xc.T @ y)
    except np.linalg.LinAlgError:
        raise RankDeficient("normal equations are singular") from None
    resid = y - Xc @ w
    sigma2 = float(resid @ resid) / (n - k)
    return LinearAttackModel(weights=w, offsets=offsets, sigma2=sigma2)


def posterior_density(model: LinearAttackModel, features, value: float) -> float:
    """Normal density at `value` under the model's posterior for `features`.

    The variance is floored at 1e-12 so a perfect fit still yields a proper
    (if extremely peaked) density.
    """
    var = max(model.sigma2, VARIANCE_FLOOR)
    mean = model.predict(features)
    return math.exp(-((value - mean) ** 2) / (2.0 * var)) / math.sqrt(2.0 * math.pi * var)


def mode_density(model: LinearAttackModel) -> float:
    """Density at the posterior mean; the normaliser for success scoring."""
    var = max(model.sigma2, VARIANCE_FLOOR)
    return 1.0 / math.sqrt(2.0 * math.pi * var)
