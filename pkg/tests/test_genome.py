import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decam.errors import DimensionMismatchError, InvalidGeometryError
from decam.genome import (
    BinaryMask,
    Individual,
    apply_mask,
    clip_genes,
    mask_fraction,
    rasterize,
    span_limits,
)

import reference


def random_valid_individual(rng, k, height, width):
    raw = reference.random_raw_vector(rng, k, height, width)
    return clip_genes(raw, height, width)


class TestClipGenes:
    def test_min_span_raises_far_corner(self):
        ind = clip_genes([10, 10, 12, 40, 0.5], 100, 100)
        assert ind.genes[0, 2] == 15.0  # 10 + 100/20

    def test_max_span_lowers_far_corner(self):
        ind = clip_genes([10, 10, 60, 40, 0.5], 100, 100)
        assert ind.genes[0, 2] == 35.0  # 10 + 100/4

    def test_idempotent_on_valid_individual(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            ind = random_valid_individual(rng, 3, 100, 100)
            again = clip_genes(ind.genes.ravel(), 100, 100)
            assert np.array_equal(ind.genes, again.genes)

    def test_wrong_length_rejected(self):
        with pytest.raises(DimensionMismatchError):
            clip_genes([1.0, 2.0, 3.0], 100, 100)
        with pytest.raises(DimensionMismatchError):
            clip_genes([], 100, 100)

    def test_tiny_image_rejected(self):
        with pytest.raises(InvalidGeometryError):
            clip_genes([0, 0, 5, 5, 0], 19, 19)

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidGeometryError):
            clip_genes([0, 0, np.nan, 5, 0], 100, 100)

    def test_rotation_wrapped(self):
        ind = clip_genes([10, 10, 20, 20, -0.5], 100, 100)
        assert ind.genes[0, 4] == pytest.approx(np.pi - 0.5)
        ind = clip_genes([10, 10, 20, 20, np.pi], 100, 100)
        assert ind.genes[0, 4] == 0.0

    @given(st.integers(0, 2**32 - 1), st.sampled_from([(100, 100), (24, 24), (40, 64)]))
    @settings(max_examples=200, deadline=None)
    def test_invariants_and_idempotence(self, seed, shape):
        height, width = shape
        rng = np.random.default_rng(seed)
        raw = reference.random_raw_vector(rng, 4, height, width)
        ind = clip_genes(raw, height, width)
        min_span, max_span = span_limits(height, width)
        g = ind.genes
        assert np.all(g[:, 0] >= 0) and np.all(g[:, 2] <= width - 1)
        assert np.all(g[:, 1] >= 0) and np.all(g[:, 3] <= height - 1)
        assert np.all(g[:, 0] <= g[:, 2]) and np.all(g[:, 1] <= g[:, 3])
        assert np.all(g[:, 2] - g[:, 0] >= min_span)
        assert np.all(g[:, 2] - g[:, 0] <= max_span)
        assert np.all(g[:, 3] - g[:, 1] >= min_span)
        assert np.all(g[:, 3] - g[:, 1] <= max_span)
        assert np.all(g[:, 4] >= 0) and np.all(g[:, 4] < np.pi)
        twice = clip_genes(g.ravel(), height, width)
        assert np.array_equal(g, twice.genes)


class TestRasterize:
    def test_matches_scalar_reference_small_grid(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            ind = random_valid_individual(rng, 1, 24, 24)
            got = rasterize(ind, 24, 24).bits
            want = reference.ellipse_mask_python(*ind.genes[0], 24, 24)
            assert np.array_equal(got, want)

    def test_matches_fullgrid_reference(self):
        rng = np.random.default_rng(13)
        for _ in range(200):
            ind = random_valid_individual(rng, 1, 64, 64)
            got = rasterize(ind, 64, 64).bits
            want = reference.ellipse_mask_fullgrid(*ind.genes[0], 64, 64)
            assert np.array_equal(got, want)

    def test_axis_aligned_circle_is_lattice_disc(self):
        # Box [20,40]^2 with r=0: circle of radius 10 centered on pixel (30,30).
        ind = Individual(np.array([[20.0, 20.0, 40.0, 40.0, 0.0]]))
        got = rasterize(ind, 100, 100).bits
        want = reference.lattice_disc(100, 100, 30, 30, 10)
        assert np.array_equal(got, want)
        assert int(got.sum()) == 317

    def test_union_of_genes_is_or_of_masks(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            a = random_valid_individual(rng, 2, 48, 48)
            b = random_valid_individual(rng, 3, 48, 48)
            both = Individual(np.vstack([a.genes, b.genes]))
            got = rasterize(both, 48, 48).bits
            want = rasterize(a, 48, 48).bits | rasterize(b, 48, 48).bits
            assert np.array_equal(got, want)

    def test_rotation_by_pi_is_invariant(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            ind = random_valid_individual(rng, 2, 40, 40)
            shifted = Individual(ind.genes.copy())
            shifted.genes[:, 4] += np.pi
            assert np.array_equal(
                rasterize(ind, 40, 40).bits, rasterize(shifted, 40, 40).bits
            )

    def test_non_square_grid_matches_reference(self):
        rng = np.random.default_rng(29)
        for _ in range(40):
            ind = random_valid_individual(rng, 2, 40, 64)
            got = rasterize(ind, 40, 64).bits
            want = reference.union_mask_fullgrid(ind.genes, 40, 64)
            assert np.array_equal(got, want)

    def test_full_overlap_leaves_union_unchanged(self):
        # A gene duplicated exactly adds nothing to the union.
        rng = np.random.default_rng(17)
        ind = random_valid_individual(rng, 1, 32, 32)
        doubled = Individual(np.vstack([ind.genes, ind.genes]))
        assert np.array_equal(
            rasterize(ind, 32, 32).bits, rasterize(doubled, 32, 32).bits
        )


class TestMaskFraction:
    def test_all_ones(self):
        assert mask_fraction(BinaryMask(np.ones((10, 10), dtype=np.uint8))) == 1.0

    def test_all_zeros(self):
        assert mask_fraction(BinaryMask(np.zeros((10, 10), dtype=np.uint8))) == 0.0

    def test_lattice_disc_fraction(self):
        ind = Individual(np.array([[20.0, 20.0, 40.0, 40.0, 0.0]]))
        assert mask_fraction(rasterize(ind, 100, 100)) == 317 / 10000


def test_apply_mask_zeroes_all_channels():
    image = np.full((24, 24, 3), 0.5)
    bits = np.zeros((24, 24), dtype=np.uint8)
    bits[3, 4] = 1
    masked = apply_mask(image, BinaryMask(bits))
    assert masked[3, 4, :].tolist() == [0.5, 0.5, 0.5]
    masked[3, 4, :] = 0
    assert not masked.any()
