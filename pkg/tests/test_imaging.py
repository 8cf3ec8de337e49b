import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from airis.imaging import (
    BadMagic,
    DegenerateOutput,
    ImageFrame,
    InvalidPercentiles,
    Truncated,
    UnsupportedMaxval,
    contrast_stretch,
    load_pgm,
    otsu_threshold,
    save_pgm,
    scale_nearest,
    sharpen,
)


def make_frame(width, height, values):
    return ImageFrame(width=width, height=height, pixels=bytes(values))


def random_frame(rng, max_side=12):
    w = rng.randint(1, max_side)
    h = rng.randint(1, max_side)
    return make_frame(w, h, [rng.randint(0, 255) for _ in range(w * h)])


# Independent oracle: exhaustive between-class variance search, computed
# from the raw pixel list for every candidate threshold.
def otsu_oracle_threshold(pixels):
    best_t, best_var = None, -1.0
    for t in range(256):
        low = [p for p in pixels if p < t]
        high = [p for p in pixels if p >= t]
        if not low or not high:
            continue
        mu0 = sum(low) / len(low)
        mu1 = sum(high) / len(high)
        var = len(low) * len(high) * (mu0 - mu1) ** 2
        if var > best_var:
            best_var, best_t = var, t
    return best_t


class TestFrame:
    def test_payload_length_enforced(self):
        with pytest.raises(ValueError):
            make_frame(2, 2, [1, 2, 3])

    def test_dimensions_positive(self):
        with pytest.raises(ValueError):
            ImageFrame(width=0, height=1, pixels=b"")

    def test_array_round_trip(self):
        f = make_frame(3, 2, [0, 1, 2, 3, 4, 5])
        assert ImageFrame.from_array(f.to_array()) == f


class TestPgm:
    def test_load_basic(self):
        data = b"P5\n2 2\n255\n" + bytes([0, 64, 128, 255])
        frame = load_pgm(data)
        assert (frame.width, frame.height) == (2, 2)
        assert frame.pixels == bytes([0, 64, 128, 255])

    def test_comments_skipped(self):
        data = b"P5\n# a comment\n2 1 # inline\n255\n" + bytes([9, 8])
        assert load_pgm(data).pixels == bytes([9, 8])

    def test_bad_magic(self):
        with pytest.raises(BadMagic):
            load_pgm(b"P6\n1 1\n255\nx")

    def test_unsupported_maxval(self):
        with pytest.raises(UnsupportedMaxval):
            load_pgm(b"P5\n1 1\n65535\n\x00\x00")

    def test_truncated(self):
        with pytest.raises(Truncated):
            load_pgm(b"P5\n2 2\n255\n\x00\x01")

    def test_save_canonical(self):
        assert save_pgm(make_frame(1, 1, [7])) == b"P5\n1 1\n255\n\x07"
        assert len(save_pgm(make_frame(2, 3, [0] * 6))) == len(b"P5\n2 3\n255\n") + 6

    def test_round_trip_100_random_frames(self):
        rng = random.Random(1234)
        for _ in range(100):
            f = random_frame(rng)
            data = save_pgm(f)
            assert load_pgm(data) == f
            assert save_pgm(load_pgm(data)) == data


class TestOtsu:
    def test_uniform_goes_white(self):
        f = make_frame(3, 3, [100] * 9)
        assert set(otsu_threshold(f).pixels) == {255}

    def test_two_level_separation(self):
        values = [50] * 8 + [200] * 8
        f = make_frame(4, 4, values)
        out = otsu_threshold(f)
        expected_t = otsu_oracle_threshold(values)
        assert 50 < expected_t <= 200
        assert out.pixels == bytes(0 if v < expected_t else 255 for v in values)

    def test_binary_frame_unchanged(self):
        values = [0, 255, 255, 0, 255, 0]
        f = make_frame(3, 2, values)
        assert otsu_threshold(f) == f

    def test_matches_exhaustive_oracle(self):
        rng = random.Random(77)
        for _ in range(30):
            f = random_frame(rng, max_side=8)
            pixels = list(f.pixels)
            t = otsu_oracle_threshold(pixels)
            expected = (
                bytes([255] * len(pixels))
                if t is None
                else bytes(0 if v < t else 255 for v in pixels)
            )
            assert otsu_threshold(f).pixels == expected

    def test_idempotent(self):
        rng = random.Random(5)
        for _ in range(20):
            f = random_frame(rng)
            once = otsu_threshold(f)
            assert otsu_threshold(once) == once


class TestContrastStretch:
    def test_constant_unchanged(self):
        f = make_frame(2, 2, [9] * 4)
        assert contrast_stretch(f, 0, 100) == f

    def test_full_range_identity(self):
        values = list(range(0, 256, 5)) + [255, 0]
        f = make_frame(len(values), 1, values)
        assert contrast_stretch(f, 0, 100) == f

    def test_three_pixel_map_rounds_half_up(self):
        # Hand evaluation: p_lo=10, p_hi=30; 20 -> (10*255)/20 = 127.5 -> 128.
        f = make_frame(3, 1, [10, 20, 30])
        assert list(contrast_stretch(f, 0, 100).pixels) == [0, 128, 255]

    def test_invalid_percentiles(self):
        f = make_frame(1, 1, [1])
        for low, high in [(60, 90), (10, 40), (50, 50), (-1, 99), (0, 101)]:
            with pytest.raises(InvalidPercentiles):
                contrast_stretch(f, low, high)

    def test_output_in_range(self):
        rng = random.Random(9)
        for _ in range(20):
            f = random_frame(rng)
            out = contrast_stretch(f, 1, 99)
            assert all(0 <= v <= 255 for v in out.pixels)
            assert (out.width, out.height) == (f.width, f.height)


class TestSharpen:
    def test_constant_unchanged(self):
        f = make_frame(4, 3, [77] * 12)
        assert sharpen(f) == f

    def test_single_bright_pixel(self):
        # Direct convolution: center 5*255 clamps to 255; each 4-neighbor
        # sees 5*0 - 255 which clamps to 0.
        values = [0] * 25
        values[12] = 255
        out = sharpen(make_frame(5, 5, values))
        arr = out.to_array()
        assert arr[2, 2] == 255
        assert arr[1, 2] == arr[3, 2] == arr[2, 1] == arr[2, 3] == 0

    def test_1x1_unchanged(self):
        f = make_frame(1, 1, [13])
        assert sharpen(f) == f

    def test_matches_direct_convolution(self):
        rng = random.Random(3)
        f = random_frame(rng, max_side=6)
        arr = f.to_array().astype(int)
        h, w = arr.shape

        def at(y, x):
            return arr[min(max(y, 0), h - 1), min(max(x, 0), w - 1)]

        out = sharpen(f).to_array()
        for y in range(h):
            for x in range(w):
                raw = 5 * at(y, x) - at(y - 1, x) - at(y + 1, x) - at(y, x - 1) - at(y, x + 1)
                assert out[y, x] == min(max(raw, 0), 255)


class TestScaleNearest:
    def test_identity(self):
        rng = random.Random(4)
        f = random_frame(rng)
        assert scale_nearest(f, 1) == f

    def test_2x2_doubling_enumerated(self):
        f = make_frame(2, 2, [1, 2, 3, 4])
        out = scale_nearest(f, 2)
        # All 16 samples: each source pixel becomes a 2x2 block.
        assert out.to_array().tolist() == [
            [1, 1, 2, 2],
            [1, 1, 2, 2],
            [3, 3, 4, 4],
            [3, 3, 4, 4],
        ]

    def test_degenerate(self):
        with pytest.raises(DegenerateOutput):
            scale_nearest(make_frame(1, 1, [5]), 1, 2)

    def test_downscale_dimensions(self):
        f = make_frame(5, 3, list(range(15)))
        out = scale_nearest(f, 1, 2)
        assert (out.width, out.height) == (2, 1)


@settings(max_examples=50)
@given(
    w=st.integers(1, 8),
    h=st.integers(1, 8),
    data=st.data(),
)
def test_ops_preserve_pixel_length_invariant(w, h, data):
    values = data.draw(st.lists(st.integers(0, 255), min_size=w * h, max_size=w * h))
    f = make_frame(w, h, values)
    for out in (otsu_threshold(f), sharpen(f), contrast_stretch(f, 1, 99)):
        assert len(out.pixels) == out.width * out.height
        assert (out.width, out.height) == (w, h)
    doubled = scale_nearest(f, 2)
    assert len(doubled.pixels) == doubled.width * doubled.height
