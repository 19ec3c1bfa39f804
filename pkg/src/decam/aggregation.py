"""Monte Carlo combination of high-fitness masks into a saliency map.

The final population's better-than-threshold individuals each stamp their
binary mask onto a counter grid; dividing by the maximum count yields a
grayscale map in [0, 1] whose brightest pixel is exactly 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .de import Population
from .errors import DegenerateSaliencyError, EmptyPopulationError
from .genome import Individual, rasterize


@dataclass
class SaliencyMap:
    values: np.ndarray  # (H, W) float64 in [0, 1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def select_candidates(pop: Population) -> list[Individual]:
    """Individuals above the fitness threshold of the final population.

    With a positive mean the threshold is two thirds of the mean. A
    non-positive mean inverts that rule's meaning (2/3 of a negative mean
    sits above it, admitting worse individuals), so the fallback keeps
    everything at or above the mean instead. Either way the best individual
    qualifies, so the result is nonempty.
    """
    if not pop.individuals:
        raise EmptyPopulationError("cannot select candidates from an empty population")
    fits = pop.fitnesses()
    if np.isnan(fits).any():
        raise ValueError("population contains unevaluated individuals")
    mean = float(fits.mean())
    if mean > 0.0:
        keep = fits > (2.0 / 3.0) * mean
    else:
        keep = fits >= mean
    return [ind for ind, k in zip(pop.individuals, keep) if k]


def aggregate(candidates: list[Individual], height: int, width: int) -> SaliencyMap:
    """Sum candidate masks pixelwise and normalize by the maximum count."""
    if not candidates:
        raise EmptyPopulationError("cannot aggregate an empty candidate list")
    counts = np.zeros((height, width), dtype=np.int64)
    for ind in candidates:
        counts += rasterize(ind, height, width).bits
    peak = int(counts.max())
    if peak == 0:
        raise DegenerateSaliencyError("all candidate masks are empty; nothing to normalize")
    return SaliencyMap(counts / peak)
