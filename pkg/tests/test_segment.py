"""Segmentation against a brute-force oracle, plus the generator contract."""

import numpy as np
import pytest

from captchakit.capgen import GenStyle, render_captcha
from captchakit.imageio import BinaryImage, GrayImage
from captchakit.rng import Rng
from captchakit.segment import (
    Roi,
    binarize,
    extract_rois,
    normalize_mask,
    normalize_roi,
    segment_pipeline,
)


def binary(arr):
    return BinaryImage(np.asarray(arr, dtype=bool))


# Independent reimplementation: per-column python scan, then tight row range.
def brute_force_spans(ink):
    h, w = len(ink), len(ink[0])
    has_ink = [any(ink[y][x] for y in range(h)) for x in range(w)]
    spans = []
    x = 0
    while x < w:
        if has_ink[x]:
            start = x
            while x < w and has_ink[x]:
                x += 1
            rows = [y for y in range(h) if any(ink[y][start:x])]
            spans.append((start, x - 1, rows[0], rows[-1]))
        else:
            x += 1
    return spans


class TestExtractRois:
    def test_blank_image_yields_nothing(self):
        assert extract_rois(binary(np.zeros((10, 10)))) == []

    def test_two_blobs_hand_traced(self):
        ink = np.zeros((10, 10), dtype=bool)
        ink[2:7, 1:4] = True
        ink[1:8, 6:9] = True
        rois = extract_rois(binary(ink))
        assert [(r.col_start, r.col_end, r.row_start, r.row_end) for r in rois] == [
            (1, 3, 2, 6),
            (6, 8, 1, 7),
        ]
        assert rois[0].width == 3 and rois[0].height == 5 and rois[0].area == 15
        assert np.array_equal(rois[0].pixels.ink, ink[2:7, 1:4])

    def test_touching_glyphs_merge(self):
        ink = np.zeros((6, 10), dtype=bool)
        ink[1:5, 1:4] = True
        ink[2:6, 4:8] = True  # shares column boundary, no gap
        rois = extract_rois(binary(ink))
        assert len(rois) == 1
        assert (rois[0].col_start, rois[0].col_end) == (1, 7)
        assert (rois[0].row_start, rois[0].row_end) == (1, 5)

    def test_noise_below_min_area_dropped(self):
        ink = np.zeros((8, 12), dtype=bool)
        ink[3, 1] = True  # bbox area 1
        ink[2:4, 5:7] = True  # bbox area 4, kept
        rois = extract_rois(binary(ink), min_area=4)
        assert len(rois) == 1
        assert rois[0].col_start == 5

    def test_tall_thin_stroke_kept_by_area(self):
        ink = np.zeros((8, 8), dtype=bool)
        ink[1:6, 3] = True  # 1 wide x 5 tall = area 5
        rois = extract_rois(binary(ink), min_area=4)
        assert len(rois) == 1

    def test_pad_grows_boxes_with_clipping(self):
        ink = np.zeros((6, 6), dtype=bool)
        ink[0:2, 0:2] = True
        r = extract_rois(binary(ink), min_area=1, pad=2)[0]
        assert (r.col_start, r.col_end, r.row_start, r.row_end) == (0, 3, 0, 3)
        assert r.pixels.ink.shape == (4, 4)

    def test_validation(self):
        img = binary(np.ones((2, 2)))
        with pytest.raises(ValueError, match="min_area"):
            extract_rois(img, min_area=0)
        with pytest.raises(ValueError, match="pad"):
            extract_rois(img, pad=-1)

    def test_matches_brute_force_on_random_images(self):
        rng = np.random.default_rng(31)
        for _ in range(300):
            ink = rng.random((rng.integers(1, 12), rng.integers(1, 20))) < 0.3
            rois = extract_rois(binary(ink), min_area=1)
            expect = brute_force_spans(ink.tolist())
            assert [(r.col_start, r.col_end, r.row_start, r.row_end) for r in rois] == expect
            for r in rois:
                assert np.array_equal(
                    r.pixels.ink, ink[r.row_start : r.row_end + 1, r.col_start : r.col_end + 1]
                )

    def test_invariants_on_random_images(self):
        rng = np.random.default_rng(77)
        for _ in range(100):
            ink = rng.random((10, 30)) < 0.25
            rois = extract_rois(binary(ink), min_area=4)
            # Ordered, column-disjoint, each with ink and enough area.
            for a, b in zip(rois, rois[1:]):
                assert a.col_end < b.col_start
            for r in rois:
                assert r.pixels.ink.any()
                assert r.area >= 4
            # Ink accounting: kept + dropped spans carry all the ink.
            spans = brute_force_spans(ink.tolist())
            dropped = [
                s for s in spans if (s[1] - s[0] + 1) * (s[3] - s[2] + 1) < 4
            ]
            dropped_ink = sum(
                ink[s[2] : s[3] + 1, s[0] : s[1] + 1].sum() for s in dropped
            )
            kept_ink = sum(r.pixels.ink.sum() for r in rois)
            assert kept_ink + dropped_ink == ink.sum()


class TestNormalize:
    def test_square_identity_scale(self):
        ink = np.random.default_rng(1).random((8, 8)) < 0.5
        out = normalize_mask(binary(ink), 16)
        expect = np.kron(ink, np.ones((2, 2), dtype=bool)).astype(np.uint8) * 255
        assert np.array_equal(out.data, expect)

    def test_tall_roi_pads_width_centered(self):
        # 4 wide x 8 tall: pad to 8x8 with 2 columns each side, then scale x2.
        ink = np.ones((8, 4), dtype=bool)
        out = normalize_mask(binary(ink), 16)
        assert out.data.shape == (16, 16)
        assert (out.data[:, 4:12] == 255).all()
        assert (out.data[:, :4] == 0).all() and (out.data[:, 12:] == 0).all()

    def test_odd_remainder_pads_right_and_bottom(self):
        # 3 wide x 8 tall: left pad 2, right pad 3.
        ink = np.ones((8, 3), dtype=bool)
        out = normalize_mask(binary(ink), 8)
        assert (out.data[:, 2:5] == 255).all()
        assert (out.data[:, :2] == 0).all() and (out.data[:, 5:] == 0).all()

    def test_single_pixel_fills_cell(self):
        out = normalize_mask(binary([[True]]), 16)
        assert (out.data == 255).all()

    def test_normalize_roi_wraps_mask(self):
        ink = np.ones((2, 2), dtype=bool)
        roi = Roi(0, 1, 0, 1, binary(ink))
        assert np.array_equal(normalize_roi(roi, 4).data, np.full((4, 4), 255, np.uint8))

    def test_cell_validation(self):
        with pytest.raises(ValueError, match="cell"):
            normalize_mask(binary([[True]]), 0)


def zero_jitter(length, name="clean", charset="ABCDEFGH"):
    return GenStyle(
        name,
        charset,
        length,
        spacing_jitter=0,
        dy_jitter=0,
        max_rotation_deg=0.0,
        max_shear=0.0,
    )


class TestPipeline:
    def test_blank_gray_input_gives_empty_list(self):
        img = GrayImage(np.full((10, 10), 255, dtype=np.uint8))
        assert segment_pipeline(img, "otsu", 16) == []

    def test_bad_preprocess_name(self):
        with pytest.raises(ValueError, match="preprocess"):
            segment_pipeline(GrayImage(np.zeros((4, 4), np.uint8)), "blur", 16)

    def test_clean_zero_jitter_recovers_each_glyph_exactly(self):
        from captchakit.font import default_font

        label = "ACE"
        img = render_captcha(label, zero_jitter(3), Rng(2))
        cells = segment_pipeline(img, "otsu", 16)
        assert len(cells) == 3
        font = default_font()
        for cell, ch in zip(cells, label):
            mask = np.kron(font.glyph(ch), np.ones((2, 2), dtype=bool))
            expect = normalize_mask(binary(mask), 16)
            assert np.array_equal(cell.data, expect.data)

    def test_clean_contract_rate(self):
        style = GenStyle.preset("clean", 4, charset="ABCDEFGHJKMNPQRS")
        good = sum(
            len(segment_pipeline(render_captcha("AFKQ", style, Rng(seed)), "otsu", 16)) == 4
            for seed in range(200)
        )
        assert good >= 198

    def test_jam_strike_removed_count_preserved(self):
        style = GenStyle.preset("jam", 5)
        good = 0
        for seed in range(200):
            img = render_captcha("35791", style, Rng(seed))
            cells = segment_pipeline(img, "jam", 20)
            good += len(cells) == 5
        assert good >= 198

    def test_railway_speckle_removed_count_preserved(self):
        style = GenStyle.preset("railway", 3)
        good = 0
        for seed in range(200):
            img = render_captcha("R4Y", style, Rng(seed))
            cells = segment_pipeline(img, "railway", 16)
            good += len(cells) == 3
        assert good >= 198

    def test_binarize_polarity_is_canonical(self):
        # Dark-on-light via otsu and bright-on-dark via jam must both mark
        # glyph pixels, not background, as ink.
        img = render_captcha("88", zero_jitter(2, charset="8"), Rng(0))
        mask = binarize(img, "otsu")
        assert mask.ink.sum() == (img.data == 0).sum()
