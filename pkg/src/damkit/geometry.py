"""Pixel-space geometry: boxes, binary region masks, focal crop construction.

All coordinates are half-open integer pixel ranges [x0, x1) x [y0, y1).
Every function here is pure and safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MIN_FOCAL_SIDE = 48


class EmptyMaskError(ValueError):
    """A localization mask with no set pixels was supplied."""


class InvalidBoxError(ValueError):
    """A box is degenerate or falls outside the image it refers to."""


@dataclass(frozen=True)
class PixelBox:
    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (0 <= self.x0 < self.x1 and 0 <= self.y0 < self.y1):
            raise InvalidBoxError(f"degenerate box ({self.x0},{self.y0},{self.x1},{self.y1})")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    @property
    def area(self) -> int:
        return self.width * self.height

    def contains(self, other: "PixelBox") -> bool:
        return (
            self.x0 <= other.x0
            and self.y0 <= other.y0
            and other.x1 <= self.x1
            and other.y1 <= self.y1
        )

    def as_dict(self) -> dict:
        return {"x0": self.x0, "y0": self.y0, "x1": self.x1, "y1": self.y1}


class RegionMask:
    """Binary mask over a pixel grid; `data` is a (height, width) bool array."""

    def __init__(self, data: np.ndarray):
        data = np.asarray(data)
        if data.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {data.shape}")
        self.data = data.astype(bool)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def count(self) -> int:
        return int(self.data.sum())

    @classmethod
    def zeros(cls, width: int, height: int) -> "RegionMask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def full(cls, width: int, height: int) -> "RegionMask":
        return cls(np.ones((height, width), dtype=bool))


class Image:
    """RGB image; `data` is a (height, width, 3) float array with values in [0, 1]."""

    def __init__(self, data: np.ndarray):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 3 or data.shape[2] != 3:
            raise ValueError(f"image must be (h, w, 3), got shape {data.shape}")
        if data.size and (data.min() < 0.0 or data.max() > 1.0):
            raise ValueError("image values must lie in [0, 1]")
        self.data = data

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass
class FocalPrompt:
    """Paired global and zoomed-in views of one region, both at encoder resolution.

    `crop_box` is expressed in the coordinates of the original (pre-resize)
    image the prompt was built from.
    """

    full_image: Image
    full_mask: RegionMask
    crop_box: PixelBox
    focal_image: Image
    focal_mask: RegionMask


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def bbox_of_mask(mask: RegionMask) -> PixelBox:
    """Tight axis-aligned bounding box of the set pixels."""
    ys, xs = np.nonzero(mask.data)
    if xs.size == 0:
        raise EmptyMaskError("mask has no set pixels")
    return PixelBox(int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)


def expand_box(
    box: PixelBox,
    alpha: float,
    image_w: int,
    image_h: int,
    min_side: int = MIN_FOCAL_SIDE,
) -> PixelBox:
    """Grow a box symmetrically by ((alpha-1)/2) of its size per side, clip to the
    image, then enforce a minimum side length.

    alpha=3 grows by one full width towards left and right and one full height
    towards top and bottom (up to 9x the area before clipping). A dimension
    shorter than `min_side` after clipping is re-grown symmetrically about its
    center (round-half-up) and shifted inward at image borders; the target
    length is capped at the image size.
    """
    if alpha < 1.0:
        raise InvalidBoxError(f"alpha must be >= 1, got {alpha}")
    if min_side < 1:
        raise InvalidBoxError(f"min_side must be >= 1, got {min_side}")
    if box.x1 > image_w or box.y1 > image_h:
        raise InvalidBoxError(
            f"box ({box.x0},{box.y0},{box.x1},{box.y1}) exceeds image {image_w}x{image_h}"
        )
    gx = _round_half_up((alpha - 1.0) / 2.0 * box.width)
    gy = _round_half_up((alpha - 1.0) / 2.0 * box.height)
    x0 = max(0, box.x0 - gx)
    y0 = max(0, box.y0 - gy)
    x1 = min(image_w, box.x1 + gx)
    y1 = min(image_h, box.y1 + gy)
    x0, x1 = _enforce_min_side(x0, x1, min(min_side, image_w), image_w)
    y0, y1 = _enforce_min_side(y0, y1, min(min_side, image_h), image_h)
    return PixelBox(x0, y0, x1, y1)


def _enforce_min_side(lo: int, hi: int, target: int, limit: int) -> tuple[int, int]:
    if hi - lo >= target:
        return lo, hi
    new_lo = _round_half_up((lo + hi - target) / 2.0)
    if new_lo < 0:
        return 0, target
    if new_lo + target > limit:
        return limit - target, limit
    return new_lo, new_lo + target


def crop(image: Image, box: PixelBox) -> Image:
    """Exact pixel copy of the boxed region; no resampling."""
    if box.x1 > image.width or box.y1 > image.height:
        raise InvalidBoxError(f"crop box exceeds image {image.width}x{image.height}")
    return Image(image.data[box.y0:box.y1, box.x0:box.x1].copy())


def crop_mask(mask: RegionMask, box: PixelBox) -> RegionMask:
    if box.x1 > mask.width or box.y1 > mask.height:
        raise InvalidBoxError(f"crop box exceeds mask {mask.width}x{mask.height}")
    return RegionMask(mask.data[box.y0:box.y1, box.x0:box.x1].copy())


def _sample_axis(n_in: int, n_out: int) -> np.ndarray:
    # Half-pixel-center mapping; identity when n_in == n_out.
    return (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5


def resize(image: Image, out_w: int, out_h: int) -> Image:
    """Bilinear resample to (out_w, out_h)."""
    if out_w < 1 or out_h < 1:
        raise ValueError(f"output dims must be >= 1, got {out_w}x{out_h}")
    src = image.data
    in_h, in_w = src.shape[:2]
    sx = _sample_axis(in_w, out_w)
    sy = _sample_axis(in_h, out_h)
    x0 = np.clip(np.floor(sx).astype(int), 0, in_w - 1)
    y0 = np.clip(np.floor(sy).astype(int), 0, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    y1 = np.minimum(y0 + 1, in_h - 1)
    fx = np.clip(sx - x0, 0.0, 1.0)[None, :, None]
    fy = np.clip(sy - y0, 0.0, 1.0)[:, None, None]
    top = src[y0[:, None], x0[None, :]] * (1.0 - fx) + src[y0[:, None], x1[None, :]] * fx
    bot = src[y1[:, None], x0[None, :]] * (1.0 - fx) + src[y1[:, None], x1[None, :]] * fx
    out = top * (1.0 - fy) + bot * fy
    return Image(np.clip(out, 0.0, 1.0))


def resize_mask(mask: RegionMask, out_w: int, out_h: int) -> RegionMask:
    """Nearest-neighbor resample; output stays binary."""
    if out_w < 1 or out_h < 1:
        raise ValueError(f"output dims must be >= 1, got {out_w}x{out_h}")
    in_h, in_w = mask.data.shape
    xs = np.clip(np.floor((np.arange(out_w) + 0.5) * (in_w / out_w)).astype(int), 0, in_w - 1)
    ys = np.clip(np.floor((np.arange(out_h) + 0.5) * (in_h / out_h)).astype(int), 0, in_h - 1)
    return RegionMask(mask.data[ys[:, None], xs[None, :]])


def build_focal_prompt(
    image: Image,
    mask: RegionMask,
    alpha: float = 3.0,
    min_side: int = MIN_FOCAL_SIDE,
    enc_res: int = 32,
) -> FocalPrompt:
    """Compose bbox -> expand -> crop -> resize into a two-view prompt.

    Both views (and their masks) come out at enc_res x enc_res.
    """
    if (mask.width, mask.height) != (image.width, image.height):
        raise ValueError(
            f"mask {mask.width}x{mask.height} does not match image {image.width}x{image.height}"
        )
    box = bbox_of_mask(mask)
    crop_box = expand_box(box, alpha, image.width, image.height, min_side)
    focal_image = resize(crop(image, crop_box), enc_res, enc_res)
    focal_mask = resize_mask(crop_mask(mask, crop_box), enc_res, enc_res)
    full_image = resize(image, enc_res, enc_res)
    full_mask = resize_mask(mask, enc_res, enc_res)
    return FocalPrompt(full_image, full_mask, crop_box, focal_image, focal_mask)
