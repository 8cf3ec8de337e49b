"""Grayscale image container, binary PGM I/O, and enhancement filters.

All pixel data is 8-bit luminance, row-major.  The filters here are the
preprocessing steps the barcode and money pipelines rely on: global Otsu
thresholding, percentile contrast stretching, a 3x3 sharpen, and
nearest-neighbor scaling.  Every remapping rounds half-up so ports of this
code can agree bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAXVAL = 255


class PgmError(ValueError):
    """Base class for PGM load failures."""


class BadMagic(PgmError):
    """Data does not start with the binary PGM magic 'P5'."""


class BadHeader(PgmError):
    """Header is syntactically broken or declares invalid dimensions."""


class UnsupportedMaxval(PgmError):
    """Only maxval 255 files are accepted."""


class Truncated(PgmError):
    """Payload is shorter than the header promises."""


class InvalidPercentiles(ValueError):
    """Percentile pair outside its legal ranges or not increasing."""


class DegenerateOutput(ValueError):
    """Requested scale factor would produce an empty image."""


@dataclass(frozen=True)
class ImageFrame:
    """An 8-bit grayscale raster; the only pixel currency in the system."""

    width: int
    height: int
    pixels: bytes

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError("frame dimensions must be positive")
        if len(self.pixels) != self.width * self.height:
            raise ValueError(
                f"pixel payload is {len(self.pixels)} bytes, "
                f"expected {self.width * self.height}"
            )

    def to_array(self) -> np.ndarray:
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(
            self.height, self.width
        )

    @classmethod
    def from_array(cls, array: np.ndarray) -> "ImageFrame":
        arr = np.asarray(array, dtype=np.uint8)
        if arr.ndim != 2:
            raise ValueError("expected a 2-D array")
        return cls(width=arr.shape[1], height=arr.shape[0], pixels=arr.tobytes())

    def row(self, y: int) -> bytes:
        start = y * self.width
        return self.pixels[start : start + self.width]


_WHITESPACE = b" \t\n\r\x0b\x0c"


def _skip_header_filler(data: bytes, pos: int) -> int:
    # Whitespace and '#' comments (to end of line) may appear between tokens.
    while pos < len(data):
        byte = data[pos : pos + 1]
        if byte in (b"#",):
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
        elif byte in _WHITESPACE and byte:
            pos += 1
        else:
            break
    return pos


def _read_header_int(data: bytes, pos: int) -> tuple[int, int]:
    pos = _skip_header_filler(data, pos)
    start = pos
    while pos < len(data) and data[pos : pos + 1].isdigit():
        pos += 1
    if pos == start:
        raise BadHeader("expected an integer in the PGM header")
    return int(data[start:pos]), pos


def load_pgm(data: bytes) -> ImageFrame:
    """Parse a binary (P5) PGM byte sequence into an ImageFrame."""
    if data[:2] != b"P5":
        raise BadMagic("not a binary PGM (missing P5 magic)")
    width, pos = _read_header_int(data, 2)
    height, pos = _read_header_int(data, pos)
    maxval, pos = _read_header_int(data, pos)
    if maxval != MAXVAL:
        raise UnsupportedMaxval(f"maxval {maxval} not supported, expected {MAXVAL}")
    if width <= 0 or height <= 0:
        raise BadHeader(f"invalid dimensions {width}x{height}")
    if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE:
        raise BadHeader("expected a single whitespace byte after maxval")
    pos += 1
    payload = data[pos : pos + width * height]
    if len(payload) < width * height:
        raise Truncated(
            f"payload has {len(payload)} bytes, header promises {width * height}"
        )
    return ImageFrame(width=width, height=height, pixels=bytes(payload))


def save_pgm(frame: ImageFrame) -> bytes:
    """Serialize to the canonical form: 'P5\\n{w} {h}\\n255\\n' + raw pixels."""
    header = f"P5\n{frame.width} {frame.height}\n{MAXVAL}\n".encode("ascii")
    return header + frame.pixels


def otsu_threshold_value(histogram) -> int | None:
    """Threshold maximizing between-class variance over a 256-bin histogram.

    Returns None when the histogram holds a single gray level (no split
    exists).  Ties resolve to the smallest maximizing threshold.
    """
    hist = list(histogram) + [0] * (256 - len(histogram))
    total = sum(hist)
    weighted_total = sum(v * hist[v] for v in range(256))
    best_t = None
    best_var = -1.0
    count0 = 0
    sum0 = 0
    for t in range(1, 256):
        count0 += hist[t - 1]
        sum0 += (t - 1) * hist[t - 1]
        count1 = total - count0
        if count0 == 0 or count1 == 0:
            continue
        mu0 = sum0 / count0
        mu1 = (weighted_total - sum0) / count1
        var = count0 * count1 * (mu0 - mu1) ** 2
        if var > best_var:
            best_var = var
            best_t = t
    return best_t


def otsu_threshold(frame: ImageFrame) -> ImageFrame:
    """Binarize: pixel < t -> 0 else 255; single-level frames go all-255."""
    arr = frame.to_array()
    hist = np.bincount(arr.ravel(), minlength=256)
    t = otsu_threshold_value(hist.tolist())
    if t is None:
        out = np.full_like(arr, 255)
    else:
        out = np.where(arr < t, 0, 255).astype(np.uint8)
    return ImageFrame.from_array(out)


def _rank_of(pct: float, n: int) -> int:
    # Nearest-rank percentile: the ceil(pct*n/100)-th smallest value,
    # clamped to [1, n] so 0% means the minimum.
    if isinstance(pct, int):
        rank = -((-pct * n) // 100)
    else:
        rank = math.ceil(pct * n / 100.0)
    return min(max(rank, 1), n)


def _value_at_rank(cumulative, rank: int) -> int:
    for v in range(256):
        if cumulative[v] >= rank:
            return v
    return 255


def contrast_stretch(frame: ImageFrame, low_pct: float, high_pct: float) -> ImageFrame:
    """Linearly map the [low_pct, high_pct] percentile range onto [0, 255].

    low_pct must lie in [0, 50], high_pct in [50, 100], and low < high.
    Constant frames (equal percentile values) pass through unchanged.
    """
    if not (0 <= low_pct <= 50 and 50 <= high_pct <= 100 and low_pct < high_pct):
        raise InvalidPercentiles(f"bad percentile pair ({low_pct}, {high_pct})")
    arr = frame.to_array()
    n = arr.size
    cumulative = np.cumsum(np.bincount(arr.ravel(), minlength=256))
    p_lo = _value_at_rank(cumulative, _rank_of(low_pct, n))
    p_hi = _value_at_rank(cumulative, _rank_of(high_pct, n))
    if p_lo == p_hi:
        return frame
    levels = np.arange(256, dtype=np.float64)
    lut = np.floor((levels - p_lo) * 255.0 / (p_hi - p_lo) + 0.5)
    lut = np.clip(lut, 0, 255).astype(np.uint8)
    return ImageFrame.from_array(lut[arr])


def sharpen(frame: ImageFrame) -> ImageFrame:
    """3x3 sharpen (center 5, cross -1) with replicated borders, clamped."""
    arr = frame.to_array().astype(np.int32)
    padded = np.pad(arr, 1, mode="edge")
    out = (
        5 * padded[1:-1, 1:-1]
        - padded[:-2, 1:-1]
        - padded[2:, 1:-1]
        - padded[1:-1, :-2]
        - padded[1:-1, 2:]
    )
    return ImageFrame.from_array(np.clip(out, 0, 255).astype(np.uint8))


def scale_nearest(frame: ImageFrame, num: int, den: int = 1) -> ImageFrame:
    """Nearest-neighbor rescale by the rational factor num/den.

    Output dimensions are floor(dim * num / den); source index for output
    index i is floor(i * den / num).
    """
    if num <= 0 or den <= 0:
        raise ValueError("scale factor must be a positive rational")
    out_w = (frame.width * num) // den
    out_h = (frame.height * num) // den
    if out_w < 1 or out_h < 1:
        raise DegenerateOutput(f"factor {num}/{den} yields {out_w}x{out_h}")
    arr = frame.to_array()
    xs = (np.arange(out_w) * den) // num
    ys = (np.arange(out_h) * den) // num
    return ImageFrame.from_array(arr[np.ix_(ys, xs)])
