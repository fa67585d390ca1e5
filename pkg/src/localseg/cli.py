"""Command-line entry point: ``localseg <command> [flags]``.

Exit codes: 0 success, 2 usage error, 3 data/format error,
4 numeric/model error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import errors
from .data import (
    SHAPES,
    SynthConfig,
    generate_synthetic_dataset,
    holdout_split,
    load_dataset,
    load_image,
    load_mask,
    pascal5i_split,
    save_dataset,
    save_map,
    write_tensor,
)
from .episode import Episode
from .features import bilinear_upsample
from .losses import LossWeights, finite_diff_check
from .training import (
    TrainConfig,
    evaluate,
    load_params,
    random_episode,
    random_params,
    save_params,
    train,
)
from .transform import run_episode

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_MODEL = 0, 2, 3, 4
GRADCHECK_TOL = 1e-3


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, errors.InvalidArgument):
        return EXIT_USAGE
    if isinstance(exc, (errors.IoError, errors.FormatError, OSError)):
        return EXIT_DATA
    return EXIT_MODEL


def _split_dataset(data_dir, split: int, folds):
    ds = load_dataset(data_dir)
    train_names, test_names = holdout_split(ds.names, split, folds)
    return ds, train_names, test_names


def cmd_synth(args) -> int:
    classes = tuple(c.strip() for c in args.classes.split(",")) if args.classes else SHAPES
    cfg = SynthConfig(size=args.size, classes=classes, per_class=args.per_class,
                      noise=args.noise, seed=args.seed)
    ds = generate_synthetic_dataset(cfg)
    save_dataset(ds, args.out)
    print(f"wrote {len(ds)} pairs in {len(ds.classes)} classes "
          f"({cfg.size}x{cfg.size}, seed {cfg.seed}) to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = TrainConfig.from_json(args.config) if args.config else TrainConfig()
    ds, train_names, test_names = _split_dataset(args.data, args.split, args.folds)
    log = sys.stderr if args.verbose else None

    def progress(step, losses):
        if (step + 1) % 200 == 0:
            print(f"episode {step + 1}: L={losses.total:.3f}", file=log)

    result = train(ds.subset(train_names), cfg, progress if log else None)
    out = Path(args.out)
    save_params(out, result.params, cfg.stride)
    trace_path = Path(args.trace) if args.trace else out.with_suffix(".csv")
    result.write_trace_csv(trace_path)
    if args.figures:
        from .plotting import plot_loss_trace

        Path(args.figures).mkdir(parents=True, exist_ok=True)
        plot_loss_trace(result.trace, Path(args.figures) / "loss_trace.png")
    head = np.mean([b.total for b in result.trace[:100]])
    tail = np.mean([b.total for b in result.trace[-100:]])
    print(f"trained {cfg.episodes} episodes on {','.join(train_names)} "
          f"(held out {','.join(test_names)})")
    print(f"mean loss first100={head:.4f} last100={tail:.4f}")
    print(f"params -> {out}  trace -> {trace_path}")
    return EXIT_OK


def _parse_support(spec: str):
    parts = [p for p in spec.split(",") if p]
    if len(parts) % 2 or not parts:
        raise errors.InvalidArgument("--support takes IMG,MASK pairs")
    pairs = [(parts[i], parts[i + 1]) for i in range(0, len(parts), 2)]
    if not 1 <= len(pairs) <= 5:
        raise errors.InvalidArgument("between 1 and 5 support pairs are allowed")
    return pairs


def cmd_attend(args) -> int:
    pairs = _parse_support(args.support)
    support = []
    for img_path, mask_path in pairs:
        mask = load_mask(mask_path)
        if not mask.any():
            raise errors.EmptyMask(f"{mask_path} has no foreground")
        support.append((load_image(img_path), mask))
    query = load_image(args.query)
    params, stored_stride = load_params(args.params)
    stride = args.stride or stored_stride or 4
    trace = run_episode(Episode(tuple(support), query), params, stride)
    h, w = query.shape[:2]
    attn_full = np.clip(bilinear_upsample(trace.attention_map, h, w), 0.0, 1.0)
    save_map(args.out_attn, attn_full)
    sidecar = {"A": trace.attention_map, "A_raw": trace.raw_maps}
    if args.out_pred:
        save_map(args.out_pred, trace.prob)
        sidecar["M"] = trace.prob
    sidecar_path = Path(args.out_attn).with_suffix(".fst")
    write_tensor(sidecar_path, sidecar)
    if args.figure:
        from .plotting import plot_attention_panel

        plot_attention_panel(query, support, attn_full,
                             trace.prob if args.out_pred else None, args.figure)
    print(f"shots={len(support)} grid={trace.grid_shape[0]}x{trace.grid_shape[1]} "
          f"attention -> {args.out_attn}  raw -> {sidecar_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.pairs < 1:
        raise errors.InvalidArgument("--pairs must be >= 1")
    ds, train_names, test_names = _split_dataset(args.data, args.split, args.folds)
    params, stored_stride = load_params(args.params)
    stride = args.stride or stored_stride or 4
    report = evaluate(ds.subset(test_names), params, k=args.shots, pairs=args.pairs,
                      seed=args.seed, threshold=args.threshold, stride=stride,
                      exclude_classes=train_names)
    print(report.table())
    if args.json:
        Path(args.json).write_text(report.to_json() + "\n")
    if args.figures:
        from .plotting import plot_class_iou

        Path(args.figures).mkdir(parents=True, exist_ok=True)
        plot_class_iou({f"{args.shots}-shot": report},
                       Path(args.figures) / f"class_iou_{args.shots}shot.png")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    if not args.eps > 0:
        raise errors.InvalidArgument("--eps must be positive")
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.episodes):
        episode = random_episode(rng, size=8, k=1)
        params = random_params(rng, 4, 4)
        worst = max(worst, finite_diff_check(episode, params, LossWeights(),
                                             args.eps, stride=1))
    ok = worst < GRADCHECK_TOL
    relation = "<" if ok else ">="
    print(f"max_rel_err {relation} 1e-3 (max_rel_err={worst:.3e}, "
          f"episodes={args.episodes}, eps={args.eps:g})")
    return EXIT_OK if ok else EXIT_MODEL


def cmd_splits(args) -> int:
    train_names, test_names = pascal5i_split(args.i)
    print(f"PASCAL-5^{args.i} test: " + ", ".join(test_names))
    print("train: " + ", ".join(train_names))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="localseg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic shapes dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--classes", default=None, help=f"comma list from {','.join(SHAPES)}")
    p.add_argument("--per-class", type=int, default=40)
    p.add_argument("--noise", type=float, default=0.08)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="episodic training on the non-held-out classes")
    p.add_argument("--data", required=True)
    p.add_argument("--split", type=int, required=True)
    p.add_argument("--config", default=None, help="TrainConfig JSON")
    p.add_argument("--out", required=True, help="FST1 params file")
    p.add_argument("--trace", default=None, help="loss CSV (default: OUT with .csv)")
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--figures", default=None, help="directory for report figures")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("attend", help="attention map for one query")
    p.add_argument("--support", required=True, help="IMG,MASK[,IMG,MASK...]")
    p.add_argument("--query", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--out-attn", required=True)
    p.add_argument("--out-pred", default=None)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--figure", default=None, help="PNG panel of inputs and outputs")
    p.set_defaults(func=cmd_attend)

    p = sub.add_parser("eval", help="held-out class evaluation")
    p.add_argument("--data", required=True)
    p.add_argument("--split", type=int, required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--shots", type=int, choices=(1, 5), default=1)
    p.add_argument("--pairs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--json", default=None)
    p.add_argument("--figures", default=None, help="directory for report figures")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="analytic vs central-difference gradients")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--episodes", type=int, default=1)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("splits", help="print a PASCAL-5^i fold")
    p.add_argument("--i", type=int, required=True)
    p.set_defaults(func=cmd_splits)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (errors.LocalSegError, OSError) as exc:
        print(f"localseg {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return _exit_code(exc)
