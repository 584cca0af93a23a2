"""Command-line entry point.

Exit codes: 0 success, 1 validation/configuration error, 2 I/O or parse error.
Human-readable summaries go to stdout; artifacts are written only to the
paths given by ``--out`` (and the other explicit output flags).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from multisem import baselines
from multisem.dataset import (
    BuildStats,
    SynthConfig,
    filter_and_label,
    parse_coco_instances,
    read_features,
    read_manifest,
    synth_dataset,
    write_features,
    write_manifest,
)
from multisem.errors import ConfigError, DimensionMismatch, MultisemError
from multisem.hierarchy import LabelHierarchy, load_hierarchy, validate
from multisem.losses import FocalConfig, inverse_frequency_alpha
from multisem.metrics import MetricConfig, PredictionRecord, build_report, read_predictions, write_predictions
from multisem.model import TrainConfig, label_matrices, load_model, predict_scores, save_model, train
from multisem.rules import DEFAULT_TAU, make_rule


def _read_bytes(path):
    if path == "-":
        return sys.stdin.buffer.read()
    return Path(path).read_bytes()


def _write(path, data: bytes):
    Path(path).write_bytes(data)


def _hierarchy(source) -> LabelHierarchy:
    h = load_hierarchy(source)
    problems = validate(h)
    if problems:
        raise ConfigError(f"invalid hierarchy {source}: {'; '.join(problems)}")
    return h


def _split_filter(records, split):
    if split in (None, "all"):
        return records
    return [r for r in records if r.split == split]


def _aligned_features(records, ids, x, source):
    pos = {sid: i for i, sid in enumerate(ids)}
    missing = [r.id for r in records if r.id not in pos]
    if missing:
        raise ConfigError(f"{source}: no feature vector for sample {missing[0]!r}")
    return x[[pos[r.id] for r in records]] if records else np.empty((0, x.shape[1] if x.ndim == 2 else 0))


def cmd_build(args):
    h = _hierarchy(args.hierarchy)
    splits = args.split or []
    if len(splits) != len(args.coco):
        raise ConfigError("give one --split per --coco path")
    records, total, per_file = [], BuildStats(), []
    for path, split in zip(args.coco, splits):
        views = parse_coco_instances(_read_bytes(path), h, source=path)
        recs, stats = filter_and_label(views, h, split)
        records.extend(recs)
        total = total.merge(stats)
        per_file.append({"path": path, "split": split, **stats.to_dict()})
    _write(args.out, write_manifest(records))
    print(json.dumps({"files": per_file, "total": total.to_dict()}, indent=2))
    return 0


def cmd_synth(args):
    cfg = SynthConfig(
        n_samples=args.n,
        t_fine=args.t_fine,
        m_coarse=args.m_coarse,
        max_fines_per_image=args.max_fines,
        feature_dim=args.feature_dim,
        noise_std=args.noise_std,
        seed=args.seed,
        public_prob=args.public_prob,
        test_fraction=args.test_fraction,
    )
    records, x, h = synth_dataset(cfg)
    _write(args.out, write_manifest(records))
    _write(args.features, write_features([r.id for r in records], x))
    _write(args.hierarchy_out, h.to_json().encode("utf-8"))
    n_test = sum(r.split == "test" for r in records)
    print(f"synth: {len(records)} records ({len(records) - n_test} train, {n_test} test), "
          f"T={h.n_fine} M={h.n_coarse} D={cfg.feature_dim}")
    return 0


def cmd_train(args):
    h = _hierarchy(args.hierarchy)
    records = _split_filter(read_manifest(_read_bytes(args.manifest), h, source=args.manifest), args.split)
    ids, x = read_features(_read_bytes(args.features), source=args.features)
    x = _aligned_features(records, ids, x, args.features)
    if not records:
        raise ConfigError("no training records selected")
    alpha = 1.0
    if args.focal_alpha == "inverse-frequency":
        alpha = inverse_frequency_alpha(label_matrices(records, h)[0])
    cfg = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        seed=args.seed,
        fine_loss=args.fine_loss,
        mode=args.mode.replace("-", "_"),
        focal=FocalConfig(alpha=alpha, gamma=args.gamma),
        hidden_dim=args.hidden,
        n_layers=args.layers,
    )
    params, trace = train(records, x, h, cfg)
    _write(args.out, save_model(params))
    if args.trace:
        _write(args.trace, trace.to_json().encode("utf-8"))
    print(f"train: {len(records)} samples, {cfg.epochs} epochs, loss {trace.total[0]:.4f} -> {trace.total[-1]:.4f}")
    return 0


def cmd_predict(args):
    params = load_model(_read_bytes(args.model))
    ids, x = read_features(_read_bytes(args.features), source=args.features)
    if x.shape[0] and x.shape[1] != params.dims["feature_dim"]:
        raise DimensionMismatch(f"features have length {x.shape[1]}, model expects {params.dims['feature_dim']}")
    fine, coarse = predict_scores(params, x) if len(ids) else (np.empty((0, 0)), np.empty((0, 0)))
    preds = [PredictionRecord(sid, fine[i], coarse[i]) for i, sid in enumerate(ids)]
    _write(args.out, write_predictions(preds))
    print(f"predict: {len(preds)} predictions ({params.fine_path} fine scores)")
    return 0


def cmd_eval(args):
    h = _hierarchy(args.hierarchy)
    records = _split_filter(read_manifest(_read_bytes(args.truth), h, source=args.truth), args.split)
    preds = read_predictions(_read_bytes(args.preds), h, source=args.preds)
    rule = make_rule(args.rule, args.tau)
    try:
        cfg = MetricConfig(alpha=args.alpha)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    report = build_report(records, preds, h, rule, cfg)
    _write(args.out, report.to_json().encode("utf-8"))
    print(f"eval[{args.rule}]: {report.summary()}")
    return 0


def cmd_check_tables(args):
    worst = 0.0
    print(f"{'setting':<14} {'model':<12} {'IP':>7} {'IR':>7} {'IF1 printed':>12} {'IF1 recomputed':>15} {'|dev|':>8}")
    for row in baselines.ROWS:
        dev = row.deviation()
        worst = max(worst, dev)
        print(f"{row.setting:<14} {row.model:<12} {row.ip:7.4f} {row.ir:7.4f} {row.if1:12.4f} "
              f"{row.recompute_if1():15.5f} {dev:8.4f}")
    ok = worst <= baselines.REFERENCE_TOLERANCE
    print(f"max deviation {worst:.4f} ({'within' if ok else 'exceeds'} tolerance {baselines.REFERENCE_TOLERANCE})")
    return 0 if ok else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="multisem", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build a two-level manifest from COCO instance annotations")
    p.add_argument("--coco", action="append", required=True, help="instances JSON path ('-' for stdin); repeatable")
    p.add_argument("--split", action="append", choices=("train", "test"), help="split tag per --coco path")
    p.add_argument("--hierarchy", default="builtin")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("synth", help="generate a synthetic two-level dataset")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--t-fine", type=int, default=12)
    p.add_argument("--m-coarse", type=int, default=4)
    p.add_argument("--max-fines", type=int, default=3)
    p.add_argument("--feature-dim", type=int, default=SynthConfig.feature_dim)
    p.add_argument("--noise-std", type=float, default=0.1)
    p.add_argument("--public-prob", type=float, default=0.3)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="manifest JSONL")
    p.add_argument("--features", required=True, help="features JSONL")
    p.add_argument("--hierarchy-out", required=True, help="hierarchy JSON")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the two-head classifier")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--hierarchy", default="builtin")
    p.add_argument("--split", default="train", help="train, test or all")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fine-loss", choices=("focal", "bce"), default="focal")
    p.add_argument("--mode", choices=("two-level", "coarse-only", "two_level", "coarse_only"), default="two-level")
    p.add_argument("--gamma", type=float, default=2.0)
    p.add_argument("--focal-alpha", choices=("ones", "inverse-frequency"), default="ones")
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--out", required=True, help="model JSON")
    p.add_argument("--trace", help="loss-trace JSON")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score feature vectors with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True, help="predictions JSONL")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="compute IA/IR/IP/IF from predictions")
    p.add_argument("--preds", required=True)
    p.add_argument("--truth", required=True, help="manifest JSONL")
    p.add_argument("--hierarchy", default="builtin")
    p.add_argument("--split", default="all", help="train, test or all")
    p.add_argument("--rule", choices=("topk", "threshold"), default="topk")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--out", required=True, help="report JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("check-tables", help="recompute IF1 of the published baselines from their IP/IR")
    p.set_defaults(func=cmd_check_tables)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MultisemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
