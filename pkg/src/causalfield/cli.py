"""Command-line pipeline: train, sample, eval, deadleaves, scramble, lpstat, pyramid.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .errors import FormatError, GeometryError, NumericalError, ParameterError
from .filterstats import lp_statistic_table
from .multiscale import train_multiscale
from .neighborhoods import causal_mask, superpixel_mask
from .pyramid import Pyramid, build_pyramid, collapse_pyramid
from .rates import cross_mir
from .sampler import SampleConfig, synthesize
from .synth import DeadLeavesConfig, generate_dead_leaves, phase_scramble
from .trainer import TrainConfig

__all__ = ["main", "build_parser", "center_crop"]

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4

log = logging.getLogger("causalfield")


def center_crop(image, multiple):
    """Crop the center of an image to the largest size divisible by ``multiple``."""
    H, W = image.shape[-2:]
    h, w = H - H % multiple, W - W % multiple
    if h == 0 or w == 0:
        raise GeometryError(f"image {image.shape} smaller than {multiple}")
    r, c = (H - h) // 2, (W - w) // 2
    return image[..., r:r + h, c:c + w]


def _load_images(path, log_transform, multiple=1):
    images = io.load_corpus(path, log_transform=log_transform)
    return [center_crop(np.asarray(im, dtype=float), multiple) for im in images]


def _write_json(obj, out):
    text = json.dumps(obj, indent=2)
    if out in (None, "-"):
        print(text)
    else:
        Path(out).write_text(text + "\n")


def cmd_train(args):
    images = _load_images(args.corpus, args.log_transform, 2**args.levels)
    cfg = TrainConfig(max_iters=args.max_iters, gtol=args.gtol, history=args.history,
                      val_fraction=args.val_fraction, patience=args.patience, seed=args.seed,
                      em_iters=args.em_iters, em_restarts=args.em_restarts)
    model = train_multiscale(images, M=args.levels, C=args.components, S=args.scales,
                             coarse_mask=causal_mask(args.rows_above, args.row_width),
                             fine_mask=superpixel_mask(args.window), config=cfg,
                             max_samples=args.samples, seed=args.seed)
    model.meta.update({
        "corpus": str(args.corpus),
        "n_images": len(images),
        "log_transform": args.log_transform,
        "config": {k: v for k, v in cfg.__dict__.items()},
        "final_loglik": [lv.trace.objective[-1] if lv.trace.objective else None
                         for lv in [model.coarse] + model.details],
    })
    io.save_model(args.output, model)
    log.info("wrote %s", args.output)
    return EXIT_OK


def cmd_sample(args):
    model = io.load_model(args.model)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    for k in range(args.count):
        cfg = SampleConfig(size=tuple(args.size), burn_in=args.burn_in,
                           boundary_std=args.boundary_std, seed=args.seed + k)
        io.save_image(out / f"sample_{k:04d}.cfim", synthesize(model, cfg))
    return EXIT_OK


def cmd_eval(args):
    model = io.load_model(args.model)
    images = _load_images(args.corpus, args.log_transform, 2**model.levels)
    report = cross_mir(model, images, max_samples=args.max_samples, n_boot=args.bootstrap,
                       seed=args.seed)
    if args.output in (None, "-"):
        print(report.to_text())
    else:
        Path(args.output).write_text(report.to_text() + "\n")
    return EXIT_OK


def cmd_deadleaves(args):
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    for k in range(args.count):
        cfg = DeadLeavesConfig(size=tuple(args.size), r_min=args.r_min, r_max=args.r_max,
                               exponent=args.exponent, noise_std=args.noise_std,
                               seed=args.seed + k)
        io.save_image(out / f"leaves_{k:04d}.cfim", generate_dead_leaves(cfg))
        meta = {**cfg.to_dict(), "size": list(cfg.size)}
        (out / f"leaves_{k:04d}.json").write_text(json.dumps(meta, indent=2) + "\n")
    return EXIT_OK


def cmd_scramble(args):
    images = io.load_corpus(args.corpus)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    for k, img in enumerate(images):
        io.save_image(out / f"scrambled_{k:04d}.cfim", phase_scramble(img, rng))
    return EXIT_OK


def cmd_lpstat(args):
    images = _load_images(args.corpus, args.log_transform)
    rows = lp_statistic_table(images, args.offsets, sigma_f=args.sigma, stride=args.stride)
    _write_json([r.to_dict() for r in rows], args.output)
    return EXIT_OK


def cmd_pyramid(args):
    if args.direction == "forward":
        img = io.load_image(args.input)
        pyr = build_pyramid(center_crop(img, 2**args.levels), args.levels)
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        io.save_image(out / "coarse.cfim", pyr.coarse)
        for m, d in enumerate(pyr.details, start=1):
            io.save_image(out / f"details_{m}.cfim", d)
    else:
        src = Path(args.input)
        details = []
        m = 1
        while (src / f"details_{m}.cfim").exists():
            details.append(io.load_image(src / f"details_{m}.cfim"))
            m += 1
        coarse = io.load_image(src / "coarse.cfim")
        pyr = Pyramid(coarse, details, [])
        io.save_image(args.output, collapse_pyramid(pyr))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="causalfield", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--threads", type=int, default=1,
                   help="BLAS threads (results do not depend on this)")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a multiscale model on a corpus")
    t.add_argument("corpus")
    t.add_argument("-o", "--output", required=True)
    t.add_argument("-M", "--levels", type=int, default=3)
    t.add_argument("-C", "--components", type=int, default=8)
    t.add_argument("-S", "--scales", type=int, default=4)
    t.add_argument("--rows-above", type=int, default=3)
    t.add_argument("--row-width", type=int, default=7)
    t.add_argument("--window", type=int, default=3)
    t.add_argument("--samples", type=int, default=200000)
    t.add_argument("--max-iters", type=int, default=1000)
    t.add_argument("--gtol", type=float, default=1e-5)
    t.add_argument("--history", type=int, default=20)
    t.add_argument("--val-fraction", type=float, default=0.1)
    t.add_argument("--patience", type=int, default=100)
    t.add_argument("--em-iters", type=int, default=100)
    t.add_argument("--em-restarts", type=int, default=3)
    t.add_argument("--log-transform", action="store_true", help="apply log(1 + v) to PGM input")
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sample", help="sample images from a model")
    s.add_argument("model")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--size", type=int, nargs=2, default=[64, 64], metavar=("H", "W"))
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--burn-in", type=int, default=None)
    s.add_argument("--boundary-std", type=float, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("eval", help="cross-entropy rates and cross-MIR on a corpus")
    e.add_argument("model")
    e.add_argument("corpus")
    e.add_argument("-o", "--output", default=None)
    e.add_argument("--max-samples", type=int, default=None)
    e.add_argument("--bootstrap", type=int, default=200)
    e.add_argument("--log-transform", action="store_true")
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_eval)

    d = sub.add_parser("deadleaves", help="generate dead-leaves images")
    d.add_argument("-o", "--output", required=True)
    d.add_argument("--count", type=int, default=1)
    d.add_argument("--size", type=int, nargs=2, default=[256, 256], metavar=("H", "W"))
    d.add_argument("--r-min", type=float, default=2.0)
    d.add_argument("--r-max", type=float, default=64.0)
    d.add_argument("--exponent", type=float, default=3.0)
    d.add_argument("--noise-std", type=float, default=0.01)
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=cmd_deadleaves)

    c = sub.add_parser("scramble", help="phase-scramble images")
    c.add_argument("corpus")
    c.add_argument("-o", "--output", required=True)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_scramble)

    lp = sub.add_parser("lpstat", help="L_p exponent of derivative-filter pairs versus offset")
    lp.add_argument("corpus")
    lp.add_argument("-o", "--output", default=None)
    lp.add_argument("--offsets", type=int, nargs="+", default=[1, 2, 4, 8, 16, 25, 32, 48, 64])
    lp.add_argument("--sigma", type=float, default=1.5)
    lp.add_argument("--stride", type=int, default=4)
    lp.add_argument("--log-transform", action="store_true")
    lp.set_defaults(func=cmd_lpstat)

    py = sub.add_parser("pyramid", help="forward or inverse Haar pyramid")
    py.add_argument("direction", choices=["forward", "inverse"])
    py.add_argument("input")
    py.add_argument("-o", "--output", required=True)
    py.add_argument("-M", "--levels", type=int, default=3)
    py.set_defaults(func=cmd_pyramid)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(args.threads))
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, GeometryError, FileNotFoundError, NotADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
