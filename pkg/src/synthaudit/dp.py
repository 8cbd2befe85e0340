"""Differential-privacy primitives: Laplace noise and the exponential mechanism.

Both draw from an explicit numpy Generator so every noisy quantity in the
package is reproducible from a seed. Laplace samples come from the inverse
CDF of a single uniform per draw, which keeps the draw count predictable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from synthaudit.errors import EmptyScores, InvalidConfig, InvalidScale, InvalidSensitivity


@dataclass(frozen=True)
class PrivacyBudget:
    """Total epsilon and the fraction spent on structure selection.

    The remainder is spent on noising conditional tables. epsilon_total of
    1e9 or more is treated by callers as the non-private sentinel; it flows
    through the same code path with vanishing noise.
    """

    epsilon_total: float
    structure_fraction: float = 0.5

    def __post_init__(self):
        if not (self.epsilon_total > 0 and math.isfinite(self.epsilon_total)):
            raise InvalidConfig("epsilon_total must be positive and finite")
        if not 0.0 < self.structure_fraction < 1.0:
            raise InvalidConfig("structure_fraction must lie strictly in (0, 1)")

    @property
    def epsilon_structure(self) -> float:
        return self.epsilon_total * self.structure_fraction

    @property
    def epsilon_tables(self) -> float:
        return self.epsilon_total * (1.0 - self.structure_fraction)


def laplace_noise(scale: float, rng: np.random.Generator, size=None):
    """Zero-mean Laplace draw(s) with the given scale, via inverse CDF.

    One uniform is consumed per sample. Variance is 2 * scale**2.
    """
    if not (scale > 0 and math.isfinite(scale)):
        raise InvalidScale(f"scale must be positive and finite, got {scale!r}")
    u = rng.random(size) - 0.5
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def exponential_mechanism(
    scores, sensitivity: float, epsilon: float, rng: np.random.Generator
) -> int:
    """Pick an index with probability proportional to exp(eps * score / (2 * sens)).

    The max score is subtracted before exponentiation, so the selection is
    invariant under adding a constant to all scores and never overflows.
    epsilon == 0 degenerates to a uniform choice.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise EmptyScores("no candidates to select from")
    if not (sensitivity > 0 and math.isfinite(sensitivity)):
        raise InvalidSensitivity(f"sensitivity must be positive and finite, got {sensitivity!r}")
    if epsilon < 0 or not math.isfinite(epsilon):
        raise InvalidConfig("epsilon must be finite and >= 0")
    logits = epsilon * scores / (2.0 * sensitivity)
    logits = logits - logits.max()
    weights = np.exp(logits)
    probs = weights / weights.sum()
    return int(rng.choice(scores.size, p=probs))
