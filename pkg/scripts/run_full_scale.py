#!/usr/bin/env python3
"""End-to-end experiment: full-scale dataset -> features -> stats.

Reproduces the headline numbers (about 2e5 transactions over about
1.2e5 active accounts) and leaves everything under --out for the
detection harness."""

import argparse
import sys
import time
from pathlib import Path

from utxosim.cli import main as cli

ROOT = Path(__file__).resolve().parent.parent


def run(argv):
    rc = cli(argv)
    if rc != 0:
        sys.exit(rc)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/full_scale")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--scale", type=float, default=1.0)
    parser.add_argument("--augment", action="store_true")
    args = parser.parse_args()

    out = Path(args.out)
    schema = ROOT / "schemas" / "e2e_laundering.csv"
    t0 = time.monotonic()
    run(
        [
            "simulate",
            "--schema", str(schema),
            "--seed", str(args.seed),
            "--out", str(out),
            "--scale", str(args.scale),
            "--trace",
            "--emit-plan",
        ]
    )
    t1 = time.monotonic()
    print(f"[simulate] {t1 - t0:.0f}s", file=sys.stderr)
    feature_args = [
        "features",
        "--dataset", str(out),
        "--out", str(out / "features.csv"),
        "--seed", str(args.seed),
    ]
    if args.augment:
        feature_args.append("--augment")
    run(feature_args)
    print(f"[features] {time.monotonic() - t1:.0f}s", file=sys.stderr)
    run(["stats", "--dataset", str(out)])


if __name__ == "__main__":
    main()
