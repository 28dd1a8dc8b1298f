"""Gradient-ranked, dispersion-constrained keypoint selection.

Keypoints are ranked by the gradient energy in a small window around them,
then a greedy pass keeps a point when at most ``min_over`` of the points kept
so far lie within ``dist_th`` pixels of it. If fewer than ``top_n`` points
survive, the shortfall is filled by re-using the best kept points with an
enlarged patch.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import PointOutOfBounds
from .imagecore import pixel_index


@dataclass(frozen=True)
class SelectionParams:
    dist_th: float = 15.0
    min_over: int = 2
    top_n: int = 100
    score_half_width: int = 3
    base_patch: int = 64
    enlarged_patch: int = 128

    def __post_init__(self):
        if self.dist_th <= 0:
            raise ValueError("dist_th must be > 0")
        if self.min_over < 0:
            raise ValueError("min_over must be >= 0")
        if self.top_n < 1:
            raise ValueError("top_n must be >= 1")
        if self.score_half_width < 0:
            raise ValueError("score_half_width must be >= 0")
        if not 1 <= self.base_patch < self.enlarged_patch:
            raise ValueError("need 1 <= base_patch < enlarged_patch")


@dataclass(frozen=True)
class ScoredKeypoint:
    keypoint: object
    score: float

    @property
    def x(self):
        return self.keypoint.x

    @property
    def y(self):
        return self.keypoint.y


@dataclass
class SelectionResult:
    selected: list = field(default_factory=list)  # (ScoredKeypoint, enlarged) pairs
    found_n: int = 0
    remain_n: int = 0

    def points(self, enlarged=None):
        return [sk for sk, e in self.selected if enlarged is None or e == enlarged]


def score_and_sort(field, points, half_width=3):
    """Score points by windowed gradient sum, best first.

    Ties are broken by (y, x) ascending.
    """
    if not points:
        return []
    h, w = field.shape
    cx = np.empty(len(points), dtype=np.int64)
    cy = np.empty(len(points), dtype=np.int64)
    for n, p in enumerate(points):
        if not (0 <= p.x < w and 0 <= p.y < h):
            raise PointOutOfBounds(f"point ({p.x}, {p.y}) outside {w}x{h} field")
        cx[n] = min(pixel_index(p.x), w - 1)
        cy[n] = min(pixel_index(p.y), h - 1)
    scores = kernels.window_sums(field, cx, cy, half_width)
    scored = [ScoredKeypoint(p, float(s)) for p, s in zip(points, scores)]
    scored.sort(key=lambda sk: (-sk.score, sk.y, sk.x))
    return scored


def greedy_select(ordered, params):
    """First selection pass over score-ordered points."""
    if not ordered:
        return SelectionResult()
    xs = np.fromiter((sk.x for sk in ordered), dtype=np.float64, count=len(ordered))
    ys = np.fromiter((sk.y for sk in ordered), dtype=np.float64, count=len(ordered))
    idx = kernels.greedy_select(xs, ys, float(params.dist_th), int(params.min_over), int(params.top_n))
    selected = [(ordered[i], False) for i in idx]
    return SelectionResult(selected=selected, found_n=len(selected), remain_n=0)


def augment_remainder(first_pass, params):
    """Fill the shortfall to ``top_n`` with enlarged copies of the leading points.

    Indices cycle from the start when the shortfall exceeds the number of
    points found.
    """
    found = first_pass.found_n
    if found == 0 or found >= params.top_n:
        return SelectionResult(list(first_pass.selected), found, 0)
    remain = params.top_n - found
    base = [sk for sk, _ in first_pass.selected[:found]]
    extra = [(base[i % found], True) for i in range(remain)]
    return SelectionResult(list(first_pass.selected) + extra, found, remain)


def select_keypoints(field, points, params):
    """Score, greedily select and augment in one call."""
    ordered = score_and_sort(field, points, params.score_half_width)
    return augment_remainder(greedy_select(ordered, params), params)
