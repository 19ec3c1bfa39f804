"""Black-box saliency maps via differential evolution over ellipse masks."""

from .aggregation import SaliencyMap, aggregate, select_candidates
from .de import DEConfig, Population, RunTrace, evolve, fitness, mutate_crossover
from .genome import (
    BinaryMask,
    EllipseGene,
    Individual,
    apply_mask,
    clip_genes,
    mask_fraction,
    rasterize,
    span_limits,
)
from .metrics import (
    EvalReport,
    MetricConfig,
    MetricCurve,
    auc,
    deletion_curve,
    diff_auc,
    gaussian_blur,
    insertion_curve,
    saliency_order,
)
from .scorer import (
    BridgeScorer,
    DiscOracle,
    ScoreRequest,
    ScoreResponse,
    Scorer,
    TwoBlobOracle,
    make_disc_oracle,
    make_two_blob_oracle,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryMask",
    "BridgeScorer",
    "DEConfig",
    "DiscOracle",
    "EllipseGene",
    "EvalReport",
    "Individual",
    "MetricConfig",
    "MetricCurve",
    "Population",
    "RunTrace",
    "SaliencyMap",
    "ScoreRequest",
    "ScoreResponse",
    "Scorer",
    "TwoBlobOracle",
    "aggregate",
    "apply_mask",
    "auc",
    "clip_genes",
    "deletion_curve",
    "diff_auc",
    "evolve",
    "fitness",
    "gaussian_blur",
    "insertion_curve",
    "make_disc_oracle",
    "make_two_blob_oracle",
    "mask_fraction",
    "mutate_crossover",
    "rasterize",
    "saliency_order",
    "select_candidates",
    "span_limits",
]
