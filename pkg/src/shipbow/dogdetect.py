"""Difference-of-Gaussians keypoint detection.

Only keypoint locations and scales are produced; no orientation and no SIFT
descriptor. The detector uses the usual SIFT construction: a Gaussian pyramid with
``scales_per_octave + 3`` layers per octave, DoG layers as adjacent
differences, strict 26-neighbour extrema, quadratic sub-pixel refinement, a
contrast test and a Hessian edge test.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ImageTooSmall

logger = logging.getLogger(__name__)

MIN_SIDE = 16
MIN_OCTAVE_SIDE = 8
MAX_REFINE_STEPS = 5
_BORDER = 1


@dataclass(frozen=True)
class ScaleSpaceParams:
    octaves: int = 4
    scales_per_octave: int = 3
    base_sigma: float = 1.6
    contrast_threshold: float = 0.03
    edge_ratio: float = 10.0
    upsample: bool = False
    assumed_blur: float = 0.5

    def __post_init__(self):
        if self.octaves < 1 or self.scales_per_octave < 1:
            raise ValueError("octaves and scales_per_octave must be >= 1")
        if self.base_sigma <= 0 or self.contrast_threshold <= 0:
            raise ValueError("base_sigma and contrast_threshold must be > 0")
        if self.edge_ratio <= 1:
            raise ValueError("edge_ratio must be > 1")
        if not 0 <= self.assumed_blur < self.base_sigma:
            raise ValueError("assumed_blur must lie in [0, base_sigma)")


@dataclass(frozen=True)
class Keypoint:
    """A detected point in original-image coordinates.

    ``octave``, ``layer``, ``ix`` and ``iy`` locate the refined sample inside
    the pyramid so that the detection can be re-checked.
    """

    x: float
    y: float
    sigma: float
    dog_response: float
    octave: int = 0
    layer: int = 0
    ix: int = 0
    iy: int = 0


@dataclass
class DogPyramid:
    params: ScaleSpaceParams
    gaussians: list = field(default_factory=list)  # per octave: (S+3, h, w)
    dogs: list = field(default_factory=list)  # per octave: (S+2, h, w)
    octave_scale: list = field(default_factory=list)  # octave pixel -> image pixel

    @property
    def n_octaves(self):
        return len(self.dogs)

    def layer_sigmas(self):
        s = self.params.scales_per_octave
        return self.params.base_sigma * 2.0 ** (np.arange(s + 3) / s)


def _blur(img, sigma):
    return ndimage.gaussian_filter(img, sigma, mode="nearest", truncate=4.0)


def _octave_count(h, w, params):
    n = 0
    while n < params.octaves and min(h, w) >> n >= MIN_OCTAVE_SIDE:
        n += 1
    return n


def build_dog_pyramid(gray, params=None):
    """Gaussian and DoG stacks for every octave of ``gray``."""
    params = params or ScaleSpaceParams()
    gray = np.asarray(gray, dtype=np.float64)
    if gray.ndim != 2 or min(gray.shape) < MIN_SIDE:
        raise ImageTooSmall(f"DoG detection needs at least {MIN_SIDE}x{MIN_SIDE} pixels, got {gray.shape}")
    s = params.scales_per_octave
    sigmas = params.base_sigma * 2.0 ** (np.arange(s + 3) / s)
    first_scale = 1.0
    prior_blur = params.assumed_blur
    if params.upsample:
        gray = ndimage.zoom(gray, 2, order=1, mode="nearest")
        first_scale = 0.5
        prior_blur *= 2.0

    pyr = DogPyramid(params=params)
    h, w = gray.shape
    base = None
    for o in range(_octave_count(h, w, params)):
        if o == 0:
            layers = [_blur(gray, np.sqrt(sig**2 - prior_blur**2)) for sig in sigmas]
        else:
            # layer s of the previous octave carries blur 2*base_sigma
            base = pyr.gaussians[-1][s][::2, ::2]
            layers = [base] + [_blur(base, np.sqrt(sig**2 - sigmas[0] ** 2)) for sig in sigmas[1:]]
        g = np.stack(layers)
        pyr.gaussians.append(g)
        pyr.dogs.append(g[1:] - g[:-1])
        pyr.octave_scale.append(first_scale * 2.0**o)
    return pyr


def _strict_extrema(dog, threshold):
    """(layer, y, x) of strict 3x3x3 extrema with |value| > threshold."""
    c = dog[1:-1, 1:-1, 1:-1]
    nl, nh, nw = dog.shape
    is_max = np.abs(c) > threshold
    is_min = is_max.copy()
    for dl in (0, 1, 2):
        for dy in (0, 1, 2):
            for dx in (0, 1, 2):
                if dl == dy == dx == 1:
                    continue
                nb = dog[dl : nl - 2 + dl, dy : nh - 2 + dy, dx : nw - 2 + dx]
                is_max &= c > nb
                is_min &= c < nb
    ls, ys, xs = np.nonzero(is_max | is_min)
    return ls + 1, ys + 1, xs + 1


def derivatives(dog, l, y, x):
    """Central-difference gradient and Hessian of a DoG stack at a sample.

    Axis order is (x, y, scale).
    """
    v = dog[l, y, x]
    dx = 0.5 * (dog[l, y, x + 1] - dog[l, y, x - 1])
    dy = 0.5 * (dog[l, y + 1, x] - dog[l, y - 1, x])
    ds = 0.5 * (dog[l + 1, y, x] - dog[l - 1, y, x])
    dxx = dog[l, y, x + 1] + dog[l, y, x - 1] - 2 * v
    dyy = dog[l, y + 1, x] + dog[l, y - 1, x] - 2 * v
    dss = dog[l + 1, y, x] + dog[l - 1, y, x] - 2 * v
    dxy = 0.25 * (dog[l, y + 1, x + 1] - dog[l, y + 1, x - 1] - dog[l, y - 1, x + 1] + dog[l, y - 1, x - 1])
    dxs = 0.25 * (dog[l + 1, y, x + 1] - dog[l + 1, y, x - 1] - dog[l - 1, y, x + 1] + dog[l - 1, y, x - 1])
    dys = 0.25 * (dog[l + 1, y + 1, x] - dog[l + 1, y - 1, x] - dog[l - 1, y + 1, x] + dog[l - 1, y - 1, x])
    grad = np.array([dx, dy, ds])
    hess = np.array([[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]])
    return grad, hess


def _refine(dog, l, y, x, n_scales):
    """Iterated quadratic fit; None when it diverges or leaves the stack."""
    nl, nh, nw = dog.shape
    for _ in range(MAX_REFINE_STEPS):
        grad, hess = derivatives(dog, l, y, x)
        try:
            offset = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(offset)):
            return None
        if np.all(np.abs(offset) < 0.5):
            value = dog[l, y, x] + 0.5 * float(grad @ offset)
            return l, y, x, offset, value, hess
        x += int(np.round(offset[0]))
        y += int(np.round(offset[1]))
        l += int(np.round(offset[2]))
        if not (1 <= l <= n_scales and _BORDER <= y < nh - _BORDER and _BORDER <= x < nw - _BORDER):
            return None
    return None


def passes_edge_test(hess, edge_ratio):
    tr = hess[0, 0] + hess[1, 1]
    det = hess[0, 0] * hess[1, 1] - hess[0, 1] ** 2
    return det > 0 and tr * tr / det < (edge_ratio + 1) ** 2 / edge_ratio


def detect_keypoints(gray, params=None):
    """Refined DoG extrema of ``gray`` sorted by (octave, layer, y, x)."""
    params = params or ScaleSpaceParams()
    gray = np.asarray(gray, dtype=np.float64)
    pyr = build_dog_pyramid(gray, params)
    h, w = gray.shape
    s = params.scales_per_octave
    out = []
    for o, dog in enumerate(pyr.dogs):
        scale = pyr.octave_scale[o]
        found = []
        for l, y, x in zip(*_strict_extrema(dog, 0.5 * params.contrast_threshold)):
            r = _refine(dog, int(l), int(y), int(x), s)
            if r is None:
                continue
            rl, ry, rx, offset, value, hess = r
            if abs(value) < params.contrast_threshold:
                continue
            if not passes_edge_test(hess, params.edge_ratio):
                continue
            kx = (rx + offset[0]) * scale
            ky = (ry + offset[1]) * scale
            if not (0 <= kx < w and 0 <= ky < h):
                continue
            sigma = params.base_sigma * 2.0 ** ((rl + offset[2]) / s) * scale
            found.append(Keypoint(float(kx), float(ky), float(sigma), float(value), o, rl, rx, ry))
        found.sort(key=lambda k: (k.layer, k.y, k.x))
        kept = []
        for kp in found:
            if all((kp.x - q.x) ** 2 + (kp.y - q.y) ** 2 >= 0.25 for q in kept):
                kept.append(kp)
        out.extend(kept)
    logger.debug("detected %d keypoints", len(out))
    return out
