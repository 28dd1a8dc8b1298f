"""Image decoding, luminance, gradient fields, window scoring and patch crops.

Images are plain numpy arrays: RGB images are ``(height, width, 3)`` uint8,
gray images and gradient fields are ``(height, width)`` float64.
"""
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import CenterOutOfBounds, CorruptImage, ImageNotFound, ImageTooSmall, UnsupportedFormat

SUPPORTED_SUFFIXES = (".png", ".jpg", ".jpeg")
_PIL_FORMATS = {"PNG", "JPEG", "MPO"}

# Rec. 601 weights scaled to integers so white maps to exactly 1.0
_LUMA = np.array([299, 587, 114], dtype=np.int64)


@dataclass(frozen=True)
class Patch:
    center: tuple
    side: int
    pixels: np.ndarray  # (side, side, 3) uint8
    enlarged: bool = False


def pixel_index(v):
    """Nearest pixel index of a sub-pixel coordinate (halves round up)."""
    return int(np.floor(v + 0.5))


def load_image(path):
    """Decode a PNG or JPEG file into an RGB uint8 array.

    Alpha is discarded and single-channel sources are replicated to three
    channels.
    """
    path = Path(path)
    if not path.is_file():
        raise ImageNotFound(f"no such image: {path}")
    if path.suffix.lower() not in SUPPORTED_SUFFIXES:
        raise UnsupportedFormat(f"{path}: expected one of {SUPPORTED_SUFFIXES}")
    try:
        with Image.open(path) as im:
            if im.format not in _PIL_FORMATS:
                raise UnsupportedFormat(f"{path}: decoded as {im.format}, not PNG/JPEG")
            im.load()
            if im.mode.startswith("I"):
                # 16-bit grayscale PNG
                arr = np.asarray(im, dtype=np.float64) / 257.0
                im = Image.fromarray(np.clip(np.rint(arr), 0, 255).astype(np.uint8), mode="L")
            rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise CorruptImage(f"{path}: {exc}") from exc
    return np.ascontiguousarray(rgb)


def save_image(path, rgb):
    Image.fromarray(np.asarray(rgb, dtype=np.uint8), mode="RGB").save(path)


def to_grayscale(img):
    """Luminance ``(0.299 R + 0.587 G + 0.114 B) / 255`` in [0, 1]."""
    img = np.asarray(img)
    acc = img[..., :3].astype(np.int64) @ _LUMA
    return acc / 255000.0


def gradient_magnitude(gray):
    """Gradient magnitude with central differences, one-sided at the border."""
    gray = np.asarray(gray, dtype=np.float64)
    if gray.ndim != 2 or gray.shape[0] < 3 or gray.shape[1] < 3:
        raise ImageTooSmall(f"gradient needs at least 3x3 pixels, got {gray.shape}")
    gy, gx = np.gradient(gray)
    return np.hypot(gx, gy)


def window_gradient_sum(field, center, half_width):
    """Sum of ``field`` over the (2*half_width+1)^2 window clipped to the image."""
    h, w = field.shape
    x, y = pixel_index(center[0]), pixel_index(center[1])
    x0, x1 = max(x - half_width, 0), min(x + half_width + 1, w)
    y0, y1 = max(y - half_width, 0), min(y + half_width + 1, h)
    if x0 >= x1 or y0 >= y1:
        return 0.0
    return float(field[y0:y1, x0:x1].sum())


def extract_patch(img, center, side, enlarged=False):
    """Crop a ``side`` x ``side`` RGB patch around ``center`` (x, y).

    Pixels outside the image replicate the nearest edge pixel.
    """
    if side < 1:
        raise ValueError("patch side must be >= 1")
    h, w = img.shape[:2]
    if not (0 <= center[0] < w and 0 <= center[1] < h):
        raise CenterOutOfBounds(f"center {center} outside {w}x{h} image")
    cx, cy = min(pixel_index(center[0]), w - 1), min(pixel_index(center[1]), h - 1)
    start_x = cx - side // 2
    start_y = cy - side // 2
    cols = np.clip(np.arange(start_x, start_x + side), 0, w - 1)
    rows = np.clip(np.arange(start_y, start_y + side), 0, h - 1)
    pixels = img[rows[:, None], cols[None, :]]
    return Patch(center=(cx, cy), side=side, pixels=np.ascontiguousarray(pixels), enlarged=enlarged)
