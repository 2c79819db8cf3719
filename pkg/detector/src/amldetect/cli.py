"""Command-line entry points for the detection harness."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import joblib

from .harness import load_matrix, train_eval
from .importance import feature_importance


def cmd_train(args) -> int:
    rows = train_eval(
        args.matrix,
        args.out,
        feature_set=args.features,
        split_seed=args.split_seed,
        cv_folds=args.cv_folds,
        cv_cap=args.cv_cap,
    )
    width = max(len(r.model) for r in rows)
    print(f"{'model':<{width}}  test_acc   auc    f1")
    for r in rows:
        print(
            f"{r.model:<{width}}  {r.test_accuracy:.4f}  {r.auc_score:.4f}  {r.f1_score:.4f}"
        )
    print(f"artifacts -> {args.out}")
    return 0


def cmd_importance(args) -> int:
    X, y, names = load_matrix(args.matrix, feature_set=args.features)
    model = joblib.load(Path(args.models) / args.model_file)
    frame = feature_importance(model, X, y, names, out_dir=args.out, seed=args.split_seed)
    print(frame.head(15).to_string(index=False))
    print(f"artifacts -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amldetect", description="Train and evaluate laundering detectors"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train all nine configurations")
    p.add_argument("--matrix", required=True, help="features CSV from the simulator")
    p.add_argument("--out", required=True)
    p.add_argument("--features", type=int, choices=[70, 130], default=130)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--cv-folds", type=int, default=3)
    p.add_argument("--cv-cap", type=int, default=20000)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("importance", help="three-measure feature importance")
    p.add_argument("--matrix", required=True)
    p.add_argument("--models", required=True, help="models/ directory from train")
    p.add_argument("--model-file", default="Random_Forest.joblib")
    p.add_argument("--out", required=True)
    p.add_argument("--features", type=int, choices=[70, 130], default=130)
    p.add_argument("--split-seed", type=int, default=0)
    p.set_defaults(fn=cmd_importance)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
