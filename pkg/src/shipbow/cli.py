"""Command-line entry point: ``shipbow <command> ...``."""
import argparse
import logging
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from . import pipeline
from .bundle import load_bundle, save_bundle
from .config import load_config
from .dataset import DEFAULT_TRAIN_FRACTION, scan_dataset
from .errors import ShipBowError, ZeroKeypoints
from .imagecore import load_image
from .synthetic import HEIGHT, WIDTH, generate_dataset

logger = logging.getLogger("shipbow")

DETECTED_COLOR = (255, 215, 0)
SELECTED_COLOR = (0, 220, 70)
ENLARGED_COLOR = (230, 40, 200)


def _fraction(text):
    try:
        value = float(Fraction(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a fraction: {text!r}") from exc
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError("train fraction must lie in (0, 1]")
    return value


def _add_split_args(p, defaults=True):
    p.add_argument("--split-seed", type=int, default=0 if defaults else None)
    p.add_argument("--train-fraction", type=_fraction, default=DEFAULT_TRAIN_FRACTION if defaults else None,
                   help="fraction of each class used for training, e.g. 0.7 or 2/3")


def cmd_train(args):
    config = load_config(args.config)
    manifest = scan_dataset(args.data, args.split_seed, args.train_fraction)
    bundle = pipeline.train_pipeline(manifest, config, jobs=args.jobs)
    save_bundle(bundle, args.out)
    for item in bundle.build_log:
        logger.warning("excluded from training: %s (%s)", item["path"], item["reason"])
    print(f"wrote {args.out}: {len(bundle.class_names)} classes, {bundle.codebook.k} visual words")
    return 0


def cmd_predict(args):
    bundle = load_bundle(args.bundle)
    try:
        label = pipeline.predict_image(bundle, args.image)
    except ZeroKeypoints as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(label)
    return 0


def cmd_evaluate(args):
    bundle = load_bundle(args.bundle)
    seed = args.split_seed if args.split_seed is not None else bundle.dataset.get("split_seed", 0)
    frac = args.train_fraction
    if frac is None:
        frac = bundle.dataset.get("train_fraction", DEFAULT_TRAIN_FRACTION)
    manifest = scan_dataset(args.data, seed, frac)
    report = pipeline.evaluate(bundle, manifest, args.split, jobs=args.jobs)
    sys.stdout.write(report.to_csv() if args.format == "csv" else report.to_text())
    return 0


def cmd_sweep(args):
    config = load_config(args.config)
    manifest = scan_dataset(args.data, args.split_seed, args.train_fraction)
    grid = pipeline.DEFAULT_SWEEP_GRID
    if args.grid:
        grid = pipeline.read_grid_csv(Path(args.grid).read_text(encoding="utf-8"))
    rows = pipeline.sweep(manifest, config, grid, jobs=args.jobs)
    text = pipeline.sweep_csv(rows)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 1 if any(r.error for r in rows) else 0


def draw_overlay(image, analysis, radius=3):
    """RGB overlay: detected points, first-pass selections and enlarged entries."""
    im = Image.fromarray(np.asarray(image, dtype=np.uint8), mode="RGB")
    draw = ImageDraw.Draw(im)
    for kp in analysis.keypoints:
        draw.point((kp.x, kp.y), fill=DETECTED_COLOR)
        draw.ellipse([kp.x - 1, kp.y - 1, kp.x + 1, kp.y + 1], outline=DETECTED_COLOR)
    if analysis.selection is not None:
        enlarged = {(sk.x, sk.y) for sk, big in analysis.selection.selected if big}
        for x, y in enlarged:
            r = radius + 3
            draw.rectangle([x - r, y - r, x + r, y + r], outline=ENLARGED_COLOR)
        for sk, big in analysis.selection.selected:
            if not big:
                draw.ellipse([sk.x - radius, sk.y - radius, sk.x + radius, sk.y + radius], outline=SELECTED_COLOR)
    return im


def cmd_inspect(args):
    config = load_config(args.config)
    image = load_image(args.image)
    analysis = pipeline.analyze_image(image, config)
    draw_overlay(image, analysis).save(args.out)
    sel = analysis.selection
    found = sel.found_n if sel else 0
    remain = sel.remain_n if sel else 0
    print(f"detected {len(analysis.keypoints)}, selected {found}, enlarged {remain}")
    return 0


def cmd_gen(args):
    paths = generate_dataset(args.out, seed=args.seed, per_class=args.per_class, width=args.width, height=args.height)
    print(f"wrote {len(paths)} images under {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="shipbow", description="Bag-of-visual-words ship image classifier")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model bundle on a dataset's train split")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None, help="JSON config; defaults apply when omitted")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    _add_split_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="classify one image")
    p.add_argument("--bundle", required=True)
    p.add_argument("--image", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="error rate and confusion matrix on a split")
    p.add_argument("--bundle", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=("test", "train"), default="test")
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("--jobs", type=int, default=1)
    _add_split_args(p, defaults=False)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="train and evaluate over a parameter grid")
    p.add_argument("--data", required=True)
    p.add_argument("--grid", default=None, help="CSV with DistTH,minOver,TopN,Nbins rows; nine default rows otherwise")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None, help="also write the CSV here")
    p.add_argument("--jobs", type=int, default=1)
    _add_split_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("inspect-keypoints", help="draw detected and selected keypoints")
    p.add_argument("--image", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("gen-synthetic", help="write the synthetic three-class dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-class", type=int, default=90)
    p.add_argument("--width", type=int, default=WIDTH)
    p.add_argument("--height", type=int, default=HEIGHT)
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ShipBowError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
