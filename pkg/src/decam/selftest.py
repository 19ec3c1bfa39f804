"""Built-in sanity checks behind the ``selftest`` CLI command.

Each check re-derives its expectation independently of the code path it
verifies: rasterization against a full-grid membership sweep, oracles
against directly recomputed brightness fractions, and the end-to-end
pipeline against a planted disc whose location is known.
"""

from __future__ import annotations

import numpy as np

from .aggregation import aggregate, select_candidates
from .de import DEConfig, evolve
from .genome import canonical_rotation, clip_genes, rasterize, span_limits
from .scorer import BridgeScorer, ScoreRequest, make_disc_oracle


def _reference_rasterize(genes: np.ndarray, height: int, width: int) -> np.ndarray:
    """Full-grid membership sweep, no bounding-box pruning."""
    out = np.zeros((height, width), dtype=np.uint8)
    jj = np.arange(width, dtype=np.float64)[None, :]
    ii = np.arange(height, dtype=np.float64)[:, None]
    for x0, y0, x1, y1, rot in np.asarray(genes, dtype=np.float64).reshape(-1, 5):
        cx = 0.5 * (x0 + x1)
        cy = 0.5 * (y0 + y1)
        a = 0.5 * abs(x1 - x0)
        b = 0.5 * abs(y1 - y0)
        if a == 0.0 or b == 0.0:
            continue
        theta = canonical_rotation(rot)
        cos_r = np.cos(theta)
        sin_r = np.sin(theta)
        dx = jj - cx
        dy = ii - cy
        u = (cos_r * dx + sin_r * dy) / a
        v = (-sin_r * dx + cos_r * dy) / b
        out[u * u + v * v <= 1.0] = 1
    return out


def check_rasterization(samples: int = 200, side: int = 48, seed: int = 0):
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        raw = rng.uniform(-side, 2 * side, size=10)
        raw[4::5] = rng.uniform(-2 * np.pi, 2 * np.pi, size=2)
        ind = clip_genes(raw, side, side)
        got = rasterize(ind, side, side).bits
        want = _reference_rasterize(ind.genes, side, side)
        if not np.array_equal(got, want):
            return False, f"mask mismatch for genes {ind.genes.tolist()}"
    return True, f"{samples} random genomes match the full-grid sweep exactly"


def check_clipping(samples: int = 2000, side: int = 100, seed: int = 1):
    rng = np.random.default_rng(seed)
    min_span, max_span = span_limits(side, side)
    for _ in range(samples):
        raw = rng.uniform(-2 * side, 3 * side, size=15)
        ind = clip_genes(raw, side, side)
        g = ind.genes
        ok = (
            np.all(g[:, [0, 2]] >= 0)
            and np.all(g[:, [0, 2]] <= side - 1)
            and np.all(g[:, [1, 3]] >= 0)
            and np.all(g[:, [1, 3]] <= side - 1)
            and np.all(g[:, 2] - g[:, 0] >= min_span)
            and np.all(g[:, 2] - g[:, 0] <= max_span)
            and np.all(g[:, 3] - g[:, 1] >= min_span)
            and np.all(g[:, 3] - g[:, 1] <= max_span)
        )
        if not ok:
            return False, f"constraint violation for raw {raw.tolist()}"
        if not np.array_equal(g, clip_genes(g.ravel(), side, side).genes):
            return False, "clipping is not idempotent"
    return True, f"{samples} raw vectors satisfy span/bounds; clipping idempotent"


def check_oracle(seed: int = 2):
    rng = np.random.default_rng(seed)
    image = rng.random((24, 24, 3))
    oracle = make_disc_oracle(image, (12, 12), 6)
    ii, jj = np.indices((24, 24))
    disc = (ii - 12) ** 2 + (jj - 12) ** 2 <= 36
    bright = image.sum(axis=2)
    in_total = bright[disc].sum()
    out_total = bright[~disc].sum()

    masks = (rng.random((50, 24, 24)) < 0.4).astype(np.float64)
    batch = image[None] * masks[:, :, :, None]
    logits = oracle.score_batch(ScoreRequest(batch, 0)).logits
    for mask, logit in zip(masks, logits):
        kept = bright * mask
        want = kept[disc].sum() / in_total - kept[~disc].sum() / out_total
        if abs(logit - want) > 1e-12:
            return False, f"oracle logit {logit} != closed form {want}"

    full = oracle.score_batch(ScoreRequest(image[None], 0)).logits[0]
    none = oracle.score_batch(ScoreRequest(np.zeros_like(image)[None], 0)).logits[0]
    exact = oracle.score_batch(
        ScoreRequest((image * disc[:, :, None])[None], 0)
    ).logits[0]
    if full != 0.0 or none != 0.0 or exact != 1.0:
        return False, f"trivial oracle values wrong: {full}, {none}, {exact}"
    return True, "50 random masks match the closed form to 1e-12"


def check_planted_disc(seed: int = 0):
    image = np.full((24, 24, 3), 0.5)
    oracle = make_disc_oracle(image, (12, 12), 6)
    cfg = DEConfig(pop_size=60, max_iter=80, alpha=1.0, seed=seed)
    pop, trace = evolve(image, oracle, 0, cfg)
    sm = aggregate(select_candidates(pop), 24, 24)
    inside = sm.values[oracle.inside].sum()
    ratio = inside / sm.values.sum()
    best = max(trace.max_fitness)
    if ratio < 0.5:
        return False, f"only {ratio:.0%} of saliency mass inside the planted disc"
    if best < 0.4:
        return False, f"best fitness {best:.3f} below 0.4"
    return True, f"{ratio:.0%} of saliency mass inside the disc, best fitness {best:.3f}"


def check_bridge_consistency(scorer: BridgeScorer, class_index: int, seed: int = 3):
    rng = np.random.default_rng(seed)
    shape = (4, scorer.height, scorer.width, scorer.channels)
    batch = rng.random(shape)
    single = scorer.score_batch(ScoreRequest(batch, class_index)).logits
    again = scorer.score_batch(ScoreRequest(batch, class_index)).logits
    if not np.array_equal(single, again):
        return False, "bridge is not deterministic on identical batches"
    full = scorer.score_all(batch)
    if not np.array_equal(single, full[:, class_index]):
        return False, "SCORE disagrees with the LOGITS_ALL column"
    return True, "SCORE equals the LOGITS_ALL column; responses deterministic"


def run_all(bridge: BridgeScorer | None = None, class_index: int = 0):
    """Yield (name, ok, detail) for every applicable check."""
    yield ("rasterization", *check_rasterization())
    yield ("constraint-clipping", *check_clipping())
    yield ("disc-oracle", *check_oracle())
    yield ("planted-disc-recovery", *check_planted_disc())
    if bridge is not None:
        yield ("bridge-consistency", *check_bridge_consistency(bridge, class_index))
