"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Logs go to stderr with ISO-8601 timestamps; outputs land under ``--out``.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


def _common(p: Parser) -> None:
    p.add_argument("--config", help="JSON run-config file")
    p.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    p.add_argument("--out", required=True, help="output directory")


def build_parser() -> Parser:
    parser = Parser(prog="mpxembed",
                    description="Marker-agnostic embeddings for multiplexed images: "
                                "pretraining, evaluation, retrieval, and serving.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("synth", parser_class=Parser, help="generate a synthetic cohort")
    _common(p)
    p.add_argument("--n-images", type=int, dest="n_images")
    p.add_argument("--image-size", type=int, dest="image_size")
    p.add_argument("--cells", type=int, dest="cells_per_image")
    p.add_argument("--noise", type=float, dest="noise_sigma")
    p.add_argument("--subsets", type=int, dest="n_subsets")
    p.add_argument("--no-gains", action="store_true")

    p = sub.add_parser("pretrain", parser_class=Parser, help="self-supervised pretraining")
    _common(p)
    p.add_argument("--store", required=True)
    p.add_argument("--steps", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--log-every", type=int, default=100)
    p.add_argument("--checkpoint-every", type=int, default=None)

    p = sub.add_parser("embed", parser_class=Parser, help="extract embeddings")
    _common(p)
    p.add_argument("--store", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--random-init", action="store_true",
                   help="use a randomly initialized encoder instead of a checkpoint")
    p.add_argument("--unit", choices=["cell", "patch"], default="cell")
    p.add_argument("--readout", choices=["cls", "marker", "token"], default=None)
    p.add_argument("--patch-size", type=int, default=None)
    p.add_argument("--patch-stride", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--name", default="embeddings.mpxemb")

    p = sub.add_parser("probe", parser_class=Parser, help="linear probing")
    _common(p)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--test-embeddings", help="cross-dataset evaluation store")
    p.add_argument("--few-shot", type=int, default=None)
    p.add_argument("--human-guided", action="store_true")
    p.add_argument("--shots", type=int, default=20, help="shots per class in human-guided mode")

    p = sub.add_parser("zeroshot", parser_class=Parser, help="k-means + ARI")
    _common(p)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--k", type=int, default=None)

    p = sub.add_parser("patchpheno", parser_class=Parser,
                       help="segmentation-free patch phenotyping")
    _common(p)
    p.add_argument("--store", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--random-init", action="store_true")
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--stride", type=int, default=16)
    p.add_argument("--thresholds", default="0.2,0.4,0.6,0.8,1.0")
    p.add_argument("--batch-size", type=int, default=32)

    p = sub.add_parser("densemap", parser_class=Parser, help="dense prediction maps")
    _common(p)
    p.add_argument("--store", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--random-init", action="store_true")

    p = sub.add_parser("cluster", parser_class=Parser,
                       help="tissue clustering + case-level kNN")
    _common(p)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--case-labels", help="JSON file mapping case id to label")
    p.add_argument("--n-support", type=int, default=5)
    p.add_argument("--trials", type=int, default=100)

    p = sub.add_parser("stratify", parser_class=Parser, help="MIL patient stratification")
    _common(p)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--case-labels")
    p.add_argument("--pca-dim", type=int, default=64)
    p.add_argument("--block-dim", type=int, default=None,
                   help="per-marker block width (default: whole feature)")
    p.add_argument("--trials", type=int, default=100)

    p = sub.add_parser("retrieve", parser_class=Parser, help="embedding retrieval metrics")
    _common(p)
    p.add_argument("--query-embeddings", required=True)
    p.add_argument("--index-embeddings", default=None,
                   help="reference store (default: query store with self-exclusion)")
    p.add_argument("--unit", choices=["cell", "patch", "case"], default="cell")
    p.add_argument("--k", default="1,3,5")
    p.add_argument("--case-labels")
    p.add_argument("--n-support", type=int, default=3)
    p.add_argument("--trials", type=int, default=100)

    p = sub.add_parser("batchfx", parser_class=Parser, help="batch-effect silhouettes")
    _common(p)
    p.add_argument("--embeddings", required=True)

    p = sub.add_parser("attn", parser_class=Parser, help="marker attention z-scores")
    _common(p)
    p.add_argument("--store", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--random-init", action="store_true")
    p.add_argument("--patch-size", type=int, default=None)
    p.add_argument("--patch-stride", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=32)

    p = sub.add_parser("serve", parser_class=Parser, help="run the HTTP service")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8750)
    p.add_argument("--dataset", action="append", metavar="NAME=STOREPATH")
    p.add_argument("--index", action="store_true", help="build indexes at startup")
    p.add_argument("--patch-size", type=int, default=64)
    p.add_argument("--readout", choices=["cls", "marker"], default="cls")

    p = sub.add_parser("report", parser_class=Parser, help="aggregate reports into CSV")
    p.add_argument("--out", required=True)
    p.add_argument("inputs", nargs="+", help="report JSON files")

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s %(message)s",
                        datefmt="%Y-%m-%dT%H:%M:%S")
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_usage(sys.stderr)
        return 1

    from . import commands
    from ..cli.config import ConfigError
    from ..data.store import StoreError
    from ..data.synth import PlacementError

    handler = getattr(commands, f"cmd_{args.command}")
    try:
        return handler(args)
    except (ConfigError, StoreError, PlacementError, FileNotFoundError, ValueError,
            KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
