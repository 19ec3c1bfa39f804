"""Insertion/deletion curves, their AUCs, and the DiffAUC summary.

Deletion starts from the original image and zeroes pixels in order of
decreasing saliency; insertion starts from a Gaussian-blurred baseline and
restores pixels in the same order. Curve heights are classification
scores: the softmax probability of the target class when the scorer can
produce full logit vectors, otherwise the logistic of its single logit
(the choice is recorded in the report). A good map gives a large
insertion AUC and a small deletion AUC; DiffAUC is their gap in
percentage points.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .scorer import Scorer, ScoreRequest


@dataclass(frozen=True)
class MetricConfig:
    steps: int = 100
    blur_sigma: float = 5.0
    blur_kernel: int = 11
    batch_size: int = 32

    def __post_init__(self):
        if self.steps < 2:
            raise ValueError(f"steps must be >= 2, got {self.steps}")
        if self.blur_kernel < 1 or self.blur_kernel % 2 == 0:
            raise ValueError(f"blur_kernel must be odd and positive, got {self.blur_kernel}")
        if self.blur_sigma <= 0:
            raise ValueError(f"blur_sigma must be positive, got {self.blur_sigma}")


@dataclass
class MetricCurve:
    xs: np.ndarray  # fractions of pixels processed, 0 to 1 inclusive
    ys: np.ndarray  # classification score after each step
    kind: str       # "insertion" | "deletion"


@dataclass
class EvalReport:
    auc_insertion: float
    auc_deletion: float
    diff_auc: float  # percentage points: 100 * (insertion - deletion)
    score_kind: str  # "softmax_prob" | "sigmoid_logit"


def saliency_order(sm) -> np.ndarray:
    """Flat pixel indices in decreasing saliency; ties break row-major."""
    values = np.asarray(getattr(sm, "values", sm), dtype=np.float64)
    return np.argsort(-values.ravel(), kind="stable")


def gaussian_blur(image: np.ndarray, sigma: float, kernel: int) -> np.ndarray:
    """Square-kernel Gaussian blur with edge-replication padding."""
    offsets = np.arange(kernel, dtype=np.float64) - kernel // 2
    g = np.exp(-(offsets**2) / (2.0 * sigma**2))
    k2 = np.outer(g, g)
    k2 /= k2.sum()
    out = np.empty_like(image, dtype=np.float64)
    for c in range(image.shape[2]):
        out[:, :, c] = ndimage.correlate(image[:, :, c], k2, mode="nearest")
    return out


def score_kind(scorer: Scorer) -> str:
    """Which quantity curves plot for this scorer."""
    if scorer.num_classes is not None and scorer.num_classes >= 2:
        return "softmax_prob"
    return "sigmoid_logit"


def _classification_scores(scorer: Scorer, images: np.ndarray, class_index: int,
                           batch_size: int) -> tuple[np.ndarray, str]:
    chunks = [images[i : i + batch_size] for i in range(0, len(images), batch_size)]
    if score_kind(scorer) == "softmax_prob":
        logits = np.concatenate([scorer.score_all(chunk) for chunk in chunks])
        shifted = logits - logits.max(axis=1, keepdims=True)
        probs = np.exp(shifted)
        probs /= probs.sum(axis=1, keepdims=True)
        return probs[:, class_index], "softmax_prob"
    logits = np.concatenate(
        [scorer.score_batch(ScoreRequest(chunk, class_index)).logits for chunk in chunks]
    )
    return 1.0 / (1.0 + np.exp(-logits)), "sigmoid_logit"


def _step_images(base: np.ndarray, restore_from: np.ndarray | None, order: np.ndarray,
                 steps: int) -> np.ndarray:
    """Stack of steps+1 images; step t has the top round(t*total/steps)
    pixels either zeroed (restore_from None) or reset to the original."""
    height, width, chans = base.shape
    total = height * width
    work = base.copy().reshape(total, chans)
    source = None if restore_from is None else restore_from.reshape(total, chans)
    frames = [work.copy()]
    prev = 0
    for t in range(1, steps + 1):
        k = int(round(t * total / steps))
        idx = order[prev:k]
        work[idx] = 0.0 if source is None else source[idx]
        frames.append(work.copy())
        prev = k
    return np.stack(frames).reshape(steps + 1, height, width, chans)


def deletion_curve(image: np.ndarray, sm, scorer: Scorer, class_index: int,
                   cfg: MetricConfig = MetricConfig()) -> MetricCurve:
    """Score of the image as its most salient pixels are muted first."""
    order = saliency_order(sm)
    frames = _step_images(np.asarray(image, dtype=np.float64), None, order, cfg.steps)
    ys, _ = _classification_scores(scorer, frames, class_index, cfg.batch_size)
    xs = np.arange(cfg.steps + 1, dtype=np.float64) / cfg.steps
    return MetricCurve(xs, ys, "deletion")


def insertion_curve(image: np.ndarray, sm, scorer: Scorer, class_index: int,
                    cfg: MetricConfig = MetricConfig()) -> MetricCurve:
    """Score of a blurred baseline as the most salient pixels are restored."""
    image = np.asarray(image, dtype=np.float64)
    order = saliency_order(sm)
    baseline = gaussian_blur(image, cfg.blur_sigma, cfg.blur_kernel)
    frames = _step_images(baseline, image, order, cfg.steps)
    ys, _ = _classification_scores(scorer, frames, class_index, cfg.batch_size)
    xs = np.arange(cfg.steps + 1, dtype=np.float64) / cfg.steps
    return MetricCurve(xs, ys, "insertion")


def auc(curve: MetricCurve) -> float:
    """Trapezoidal integral of the curve over x in [0, 1]."""
    return float(np.trapezoid(curve.ys, curve.xs))


def diff_auc(image: np.ndarray, sm, scorer: Scorer, class_index: int,
             cfg: MetricConfig = MetricConfig()) -> EvalReport:
    ins = insertion_curve(image, sm, scorer, class_index, cfg)
    dele = deletion_curve(image, sm, scorer, class_index, cfg)
    a_ins = auc(ins)
    a_del = auc(dele)
    return EvalReport(a_ins, a_del, 100.0 * (a_ins - a_del), score_kind(scorer))


def curve_to_csv(curve: MetricCurve, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y"])
        for x, y in zip(curve.xs, curve.ys):
            writer.writerow([f"{x:.10g}", f"{y:.10g}"])


def write_report(report: EvalReport, path):
    with open(path, "w") as fh:
        fh.write(f"auc_insertion={report.auc_insertion:.10g}\n")
        fh.write(f"auc_deletion={report.auc_deletion:.10g}\n")
        fh.write(f"diff_auc={report.diff_auc:.10g}\n")
        fh.write(f"score_kind={report.score_kind}\n")
