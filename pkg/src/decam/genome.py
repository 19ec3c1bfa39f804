"""Ellipse-union mask genome: gene encoding, constraint clipping, rasterization.

A candidate mask is the union of K rotated ellipses. Each ellipse is stored
as five reals [x0, y0, x1, y1, r]: the top-left / bottom-right corners of
its bounding box, plus a rotation angle in radians about the box center.

Coordinates are in pixel-index units: coordinate value k addresses the
center of pixel column (or row) k, so valid positions span [0, W-1] and
[0, H-1]. Rasterization tests the integer lattice (j, i) against each
ellipse, which is the pixel-center convention expressed in index units.

The effective rotation is r modulo pi snapped to a grid of pi / 2**32
(about 7e-10 rad, i.e. sub-nanopixel at any realistic image size). The
snap makes r and r + pi rasterize bit-identically, which plain floating
point trig cannot guarantee at pixels lying exactly on an ellipse boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, InvalidGeometryError

GENE_FIELDS = 5      # x0, y0, x1, y1, r
MIN_IMAGE_SIDE = 20  # below this the minimum-span constraint collapses to zero
ANGLE_STEPS = 2**32  # rotation resolution over [0, pi)


def canonical_rotation(rot: float) -> float:
    """Map a rotation to its grid representative in [0, pi)."""
    k = int(np.round(np.mod(rot, np.pi) / np.pi * ANGLE_STEPS)) % ANGLE_STEPS
    return (k / ANGLE_STEPS) * np.pi


@dataclass(frozen=True)
class EllipseGene:
    """One rotated ellipse: bounding-box corners plus rotation angle."""

    x0: float
    y0: float
    x1: float
    y1: float
    r: float


@dataclass
class Individual:
    """K-ellipse candidate mask with its cached fitness.

    genes is a (K, 5) float64 array, one row per ellipse in field order
    [x0, y0, x1, y1, r]. fitness is None until evaluated.
    """

    genes: np.ndarray
    fitness: float | None = None

    @property
    def k(self) -> int:
        return self.genes.shape[0]

    def ellipses(self) -> list[EllipseGene]:
        return [EllipseGene(*map(float, row)) for row in self.genes]

    def copy(self) -> Individual:
        return Individual(self.genes.copy(), self.fitness)


@dataclass
class BinaryMask:
    """H x W grid of {0, 1}; 1 marks a preserved pixel."""

    bits: np.ndarray

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]


def span_limits(height: int, width: int) -> tuple[float, float]:
    """Minimum and maximum bounding-box side length for an image size.

    Square images use H; non-square images use min(H, W) for both axes.
    """
    side = min(height, width)
    return side / 20.0, side / 4.0


def clip_genes(raw, height: int, width: int) -> Individual:
    """Project a raw gene vector of length 5K onto the valid genome space.

    Corners are clipped into the image, ordered so x0 <= x1 and y0 <= y1,
    and each box side is forced into [side/20, side/4]. When raising the
    far corner to meet the minimum span would leave the image, the pair is
    shifted back inside instead. The rotation is wrapped into [0, pi).

    Idempotent: an already-valid vector passes through bit-identically.
    """
    vec = np.asarray(raw, dtype=np.float64).ravel()
    if vec.size == 0 or vec.size % GENE_FIELDS != 0:
        raise DimensionMismatchError(
            f"gene vector length {vec.size} is not a positive multiple of {GENE_FIELDS}"
        )
    if min(height, width) < MIN_IMAGE_SIDE:
        raise InvalidGeometryError(
            f"image side {min(height, width)} < {MIN_IMAGE_SIDE}: "
            "minimum ellipse span would vanish"
        )
    if not np.isfinite(vec).all():
        raise InvalidGeometryError("gene vector contains non-finite values")

    min_span, max_span = span_limits(height, width)
    genes = vec.reshape(-1, GENE_FIELDS).copy()
    genes[:, 0], genes[:, 2] = _clip_axis(
        genes[:, 0], genes[:, 2], width - 1.0, min_span, max_span
    )
    genes[:, 1], genes[:, 3] = _clip_axis(
        genes[:, 1], genes[:, 3], height - 1.0, min_span, max_span
    )
    genes[:, 4] = np.mod(genes[:, 4], np.pi)
    return Individual(genes)


def _clip_axis(lo, hi, limit, min_span, max_span):
    lo = np.clip(lo, 0.0, limit)
    hi = np.clip(hi, 0.0, limit)
    lo, hi = np.minimum(lo, hi), np.maximum(lo, hi)

    short = (hi - lo) < min_span
    hi = np.where(short, lo + min_span, hi)
    spill = hi > limit
    hi = np.where(spill, limit, hi)
    lo = np.where(spill, limit - min_span, lo)
    # (x + s) - x can land one ulp below s; the span bounds must hold under
    # exact comparison, so nudge endpoints until they do.
    while True:
        short = (hi - lo) < min_span
        if not short.any():
            break
        room = hi < limit
        hi = np.where(short & room, np.nextafter(hi, np.inf), hi)
        lo = np.where(short & ~room, np.nextafter(lo, -np.inf), lo)

    wide = (hi - lo) > max_span
    hi = np.where(wide, lo + max_span, hi)
    while True:
        wide = (hi - lo) > max_span
        if not wide.any():
            break
        hi = np.where(wide, np.nextafter(hi, -np.inf), hi)
    return lo, hi


def rasterize(ind: Individual, height: int, width: int) -> BinaryMask:
    """Union of the individual's ellipses on the pixel grid.

    A pixel is set when its center lies inside or on the boundary of at
    least one ellipse: with d the offset from the box center and u, v the
    components of d rotated by -r, the test is (u/a)^2 + (v/b)^2 <= 1.
    Each ellipse is evaluated only on its enclosing axis-aligned box for
    speed; the membership test itself decides every pixel.
    """
    bits = np.zeros((height, width), dtype=np.uint8)
    for x0, y0, x1, y1, rot in ind.genes:
        cx = 0.5 * (x0 + x1)
        cy = 0.5 * (y0 + y1)
        a = 0.5 * abs(x1 - x0)
        b = 0.5 * abs(y1 - y0)
        if a == 0.0 or b == 0.0:
            continue
        theta = canonical_rotation(rot)
        cos_r = np.cos(theta)
        sin_r = np.sin(theta)
        half_w = np.hypot(a * cos_r, b * sin_r)
        half_h = np.hypot(a * sin_r, b * cos_r)
        j0 = max(int(np.floor(cx - half_w)) - 1, 0)
        j1 = min(int(np.ceil(cx + half_w)) + 1, width - 1)
        i0 = max(int(np.floor(cy - half_h)) - 1, 0)
        i1 = min(int(np.ceil(cy + half_h)) + 1, height - 1)
        if j1 < j0 or i1 < i0:
            continue
        dx = np.arange(j0, j1 + 1, dtype=np.float64) - cx
        dy = np.arange(i0, i1 + 1, dtype=np.float64) - cy
        u = (cos_r * dx[None, :] + sin_r * dy[:, None]) / a
        v = (-sin_r * dx[None, :] + cos_r * dy[:, None]) / b
        region = bits[i0 : i1 + 1, j0 : j1 + 1]
        region[u * u + v * v <= 1.0] = 1
    return BinaryMask(bits)


def mask_fraction(mask: BinaryMask) -> float:
    """Fraction of preserved pixels: sum(bits) / (H * W)."""
    return int(mask.bits.sum()) / mask.bits.size


def apply_mask(image: np.ndarray, mask: BinaryMask) -> np.ndarray:
    """X * M: zero every channel of each eliminated pixel."""
    return image * mask.bits[:, :, None]
