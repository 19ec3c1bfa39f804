"""Differential evolution over ellipse-mask genomes.

Classic rand/1 scheme: per gene, with probability CR the trial takes
a + F*(b - c) from three distinct donors, otherwise it keeps the target's
gene. Trials are clipped back into the valid genome space, evaluated in
scorer batches, and replace their targets only on strictly better fitness.

Donors are drawn from the generation-start snapshot so all N trials of a
generation can be evaluated in parallel batches; selection itself stays
per-target greedy. The optimized objective is
score(X * M) - alpha * |M| / (H * W).
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DecamError
from .genome import Individual, apply_mask, clip_genes, mask_fraction, rasterize
from .scorer import Scorer, ScoreRequest

GENE_FIELDS = 5


@dataclass(frozen=True)
class DEConfig:
    """Hyperparameters of one run. Defaults: CR/F/K/MaxIter as published
    for this scheme; pop_size and alpha have no published values and were
    chosen for oracle-scale logits in [0, 1] (alpha must be commensurate
    with the model's logit scale)."""

    cr: float = 0.2
    f: float = 0.8
    k: int = 10
    max_iter: int = 200
    pop_size: int = 200
    alpha: float = 2.0
    seed: int = 0
    batch_size: int = 32

    def __post_init__(self):
        if not 0.0 <= self.cr <= 1.0:
            raise ValueError(f"cr must lie in [0, 1], got {self.cr}")
        if self.f <= 0.0:
            raise ValueError(f"f must be positive, got {self.f}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.pop_size < 4:
            raise ValueError(f"pop_size must be >= 4 (target plus three donors), got {self.pop_size}")
        if self.alpha < 0.0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class Population:
    individuals: list[Individual]
    generation: int = 0

    def fitnesses(self) -> np.ndarray:
        return np.array([ind.fitness for ind in self.individuals], dtype=np.float64)

    def best(self) -> Individual:
        return max(self.individuals, key=lambda ind: ind.fitness)


@dataclass
class RunTrace:
    """Per-generation population stats plus run-level bookkeeping.

    mean_fitness/max_fitness have one entry per completed generation; the
    pre-evolution population's stats live in initial_mean/initial_max.
    """

    mean_fitness: list[float] = field(default_factory=list)
    max_fitness: list[float] = field(default_factory=list)
    initial_mean: float = 0.0
    initial_max: float = 0.0
    scorer_evals: int = 0
    wall_time: float = 0.0


def fitness(ind: Individual, image: np.ndarray, scorer: Scorer, class_index: int,
             alpha: float) -> float:
    """score(X * M) - alpha * preserved-pixel fraction, for one individual."""
    height, width = image.shape[:2]
    mask = rasterize(ind, height, width)
    resp = scorer.score_batch(ScoreRequest(apply_mask(image, mask)[None], class_index))
    return float(resp.logits[0]) - alpha * mask_fraction(mask)


def mutate_crossover(x: Individual, a: Individual, b: Individual, c: Individual,
                     cfg: DEConfig, rng: np.random.Generator) -> np.ndarray:
    """Raw (unclipped) trial vector. One uniform draw per gene, in storage
    order (ellipse-major, field-minor), so runs are reproducible."""
    xv = x.genes.ravel()
    donor = a.genes.ravel() + cfg.f * (b.genes.ravel() - c.genes.ravel())
    draws = rng.random(xv.size)
    return np.where(draws < cfg.cr, donor, xv)


def random_individual(rng: np.random.Generator, cfg: DEConfig, height: int,
                      width: int) -> Individual:
    """Uniform genes over the valid coordinate ranges, then clipped."""
    raw = rng.random((cfg.k, GENE_FIELDS))
    raw *= np.array([width - 1.0, height - 1.0, width - 1.0, height - 1.0, np.pi])
    return clip_genes(raw.ravel(), height, width)


def evolve(image: np.ndarray, scorer: Scorer, class_index: int, cfg: DEConfig,
           jobs: int = 1, on_generation=None) -> tuple[Population, RunTrace]:
    """Run the full optimization; returns the final population and trace.

    Scorer evaluations total exactly pop_size * (1 + max_iter): the initial
    population plus one trial per individual per generation. If the scorer
    fails mid-run the error propagates with the partial trace attached as
    err.partial_trace.
    """
    image = np.asarray(image, dtype=np.float64)
    height, width = image.shape[:2]
    rng = np.random.default_rng(cfg.seed)
    trace = RunTrace()
    start = time.perf_counter()

    def evaluate(batch_inds: list[Individual]):
        chunks = [
            batch_inds[i : i + cfg.batch_size]
            for i in range(0, len(batch_inds), cfg.batch_size)
        ]

        def run_chunk(chunk):
            masks = [rasterize(ind, height, width) for ind in chunk]
            imgs = np.stack([apply_mask(image, m) for m in masks])
            logits = scorer.score_batch(ScoreRequest(imgs, class_index)).logits
            return [
                float(lg) - cfg.alpha * mask_fraction(m)
                for m, lg in zip(masks, logits)
            ]

        if jobs > 1 and scorer.supports_concurrent_calls and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(run_chunk, chunks))
        else:
            results = [run_chunk(chunk) for chunk in chunks]
        for chunk, fits in zip(chunks, results):
            for ind, fit in zip(chunk, fits):
                ind.fitness = fit
        trace.scorer_evals += len(batch_inds)

    def abort(err: DecamError):
        trace.wall_time = time.perf_counter() - start
        err.partial_trace = trace
        raise err

    pop = [random_individual(rng, cfg, height, width) for _ in range(cfg.pop_size)]
    try:
        evaluate(pop)
    except DecamError as err:
        abort(err)
    fits = np.array([ind.fitness for ind in pop])
    trace.initial_mean = float(fits.mean())
    trace.initial_max = float(fits.max())

    n = cfg.pop_size
    for gen in range(1, cfg.max_iter + 1):
        trials = []
        for i in range(n):
            r1 = r2 = r3 = i
            while r1 == i:
                r1 = int(rng.integers(n))
            while r2 == i or r2 == r1:
                r2 = int(rng.integers(n))
            while r3 == i or r3 == r2 or r3 == r1:
                r3 = int(rng.integers(n))
            raw = mutate_crossover(pop[i], pop[r1], pop[r2], pop[r3], cfg, rng)
            trials.append(clip_genes(raw, height, width))
        try:
            evaluate(trials)
        except DecamError as err:
            abort(err)
        for i in range(n):
            if trials[i].fitness > pop[i].fitness:
                pop[i] = trials[i]
        fits = np.array([ind.fitness for ind in pop])
        trace.mean_fitness.append(float(fits.mean()))
        trace.max_fitness.append(float(fits.max()))
        if on_generation is not None:
            on_generation(gen, trace)

    trace.wall_time = time.perf_counter() - start
    return Population(pop, generation=cfg.max_iter), trace
