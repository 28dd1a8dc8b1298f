"""Procedurally drawn ship silhouettes for end-to-end checks.

Three classes over a sky/sea backdrop with randomized pose and sensor noise:

container
    long dark hull carrying stacks of coloured boxes, bridge at the stern
tanker
    hull with a row of large pale spherical tanks
sailboat
    small hull, a mast and one or two white triangular sails
"""
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

CLASSES = ("container", "tanker", "sailboat")
WIDTH = 160
HEIGHT = 120

_BOX_COLORS = [(200, 40, 35), (30, 80, 170), (40, 140, 60), (230, 140, 30), (210, 200, 50), (120, 120, 125)]
_HULL_COLORS = [(35, 35, 40), (90, 25, 25), (25, 35, 70), (60, 60, 60)]


def _backdrop(rng, w, h):
    horizon = int(h * rng.uniform(0.45, 0.62))
    sky_top = np.array([135.0, 175.0, 220.0]) + rng.uniform(-12, 12, 3)
    sky_low = sky_top + rng.uniform(15, 30)
    sea = np.array([35.0, 75.0, 115.0]) + rng.uniform(-10, 10, 3)
    img = np.empty((h, w, 3))
    t = np.linspace(0, 1, horizon)[:, None]
    img[:horizon] = ((1 - t) * sky_top + t * sky_low)[:, None, :]
    depth = np.linspace(0, 1, h - horizon)[:, None]
    img[horizon:] = (sea * (1 - 0.3 * depth))[:, None, :]
    return np.clip(img, 0, 255), horizon


def _hull(draw, x0, waterline, length, height, color, rng):
    bow = rng.uniform(0.08, 0.15) * length
    draw.polygon(
        [(x0, waterline - height), (x0 + length, waterline - height),
         (x0 + length - bow, waterline), (x0 + 0.04 * length, waterline)],
        fill=color,
    )


def _container(draw, rng, w, waterline, scale):
    length = rng.uniform(0.70, 0.85) * w * scale
    x0 = rng.uniform(2, max(3, w - length - 2))
    hull_h = rng.uniform(9, 13) * scale
    _hull(draw, x0, waterline, length, hull_h, _HULL_COLORS[rng.integers(len(_HULL_COLORS))], rng)
    deck = waterline - hull_h
    # bridge tower at the stern
    bw = 0.09 * length
    draw.rectangle([x0 + 0.02 * length, deck - 24 * scale, x0 + 0.02 * length + bw, deck], fill=(235, 235, 230))
    bx = x0 + 0.14 * length
    box_w = rng.uniform(7, 10) * scale
    box_h = rng.uniform(5, 7) * scale
    n_rows = int(rng.integers(2, 4))
    while bx + box_w < x0 + 0.90 * length:
        for r in range(n_rows):
            col = _BOX_COLORS[rng.integers(len(_BOX_COLORS))]
            top = deck - (r + 1) * box_h
            draw.rectangle([bx, top, bx + box_w - 1, top + box_h - 1], fill=col, outline=(20, 20, 20))
        bx += box_w + 1


def _tanker(draw, rng, w, waterline, scale):
    length = rng.uniform(0.70, 0.85) * w * scale
    x0 = rng.uniform(2, max(3, w - length - 2))
    hull_h = rng.uniform(10, 14) * scale
    _hull(draw, x0, waterline, length, hull_h, _HULL_COLORS[rng.integers(len(_HULL_COLORS))], rng)
    deck = waterline - hull_h
    draw.rectangle([x0 + 0.02 * length, deck - 20 * scale, x0 + 0.11 * length, deck], fill=(235, 235, 230))
    n_tanks = int(rng.integers(3, 5))
    span = 0.74 * length
    r = min(span / (2 * n_tanks) - 1, 13 * scale)
    tone = int(rng.integers(200, 245))
    for i in range(n_tanks):
        cx = x0 + 0.16 * length + (i + 0.5) * span / n_tanks
        draw.ellipse([cx - r, deck - 1.5 * r, cx + r, deck + 0.5 * r], fill=(tone, tone, tone - 10), outline=(120, 120, 120))
    draw.line([(x0 + 0.14 * length, deck - 2), (x0 + 0.92 * length, deck - 2)], fill=(150, 60, 40), width=2)


def _sailboat(draw, rng, w, waterline, scale):
    length = rng.uniform(0.28, 0.40) * w * scale
    x0 = rng.uniform(10, max(11, w - length - 10))
    hull_h = rng.uniform(5, 8) * scale
    hull_col = [(240, 240, 240), (30, 30, 90), (150, 30, 30)][rng.integers(3)]
    _hull(draw, x0, waterline, length, hull_h, hull_col, rng)
    deck = waterline - hull_h
    mast_x = x0 + rng.uniform(0.40, 0.55) * length
    mast_h = rng.uniform(55, 75) * scale
    top = deck - mast_h
    draw.line([(mast_x, deck), (mast_x, top)], fill=(60, 50, 40), width=2)
    sail = (int(rng.integers(235, 256)),) * 3
    draw.polygon([(mast_x + 2, top + 3), (mast_x + 2, deck - 3), (x0 + 0.95 * length, deck - 3)], fill=sail)
    if rng.random() < 0.7:
        draw.polygon([(mast_x - 2, top + 6), (mast_x - 2, deck - 4), (x0 + 0.02 * length, deck - 4)], fill=sail)


_DRAWERS = {"container": _container, "tanker": _tanker, "sailboat": _sailboat}


def render(label, rng, width=WIDTH, height=HEIGHT):
    """One RGB uint8 image of class ``label``."""
    img, horizon = _backdrop(rng, width, height)
    layer = Image.new("RGBA", (width, height), (0, 0, 0, 0))
    draw = ImageDraw.Draw(layer)
    scale = rng.uniform(0.85, 1.1)
    waterline = horizon + rng.uniform(4, 12)
    _DRAWERS[label](draw, rng, width, waterline, scale)
    if rng.random() < 0.5:
        layer = layer.transpose(Image.FLIP_LEFT_RIGHT)
    angle = rng.uniform(-4, 4)
    layer = layer.rotate(angle, resample=Image.BICUBIC, center=(width / 2, waterline))
    base = Image.fromarray(img.astype(np.uint8), mode="RGB").convert("RGBA")
    out = np.asarray(Image.alpha_composite(base, layer).convert("RGB"), dtype=np.float64)
    out += rng.normal(0, rng.uniform(2, 7), out.shape)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def generate_dataset(out_dir, seed=0, per_class=90, classes=CLASSES, width=WIDTH, height=HEIGHT):
    """Write ``per_class`` PNGs per class under ``out_dir/<class>/``."""
    out_dir = Path(out_dir)
    paths = []
    for ci, label in enumerate(classes):
        cdir = out_dir / label
        cdir.mkdir(parents=True, exist_ok=True)
        for i in range(per_class):
            rng = np.random.default_rng([seed, ci, i])
            path = cdir / f"{label}_{i:04d}.png"
            Image.fromarray(render(label, rng, width, height), mode="RGB").save(path)
            paths.append(path)
    return paths
