"""CLI: mlvat-export export --model <id> --data <tsv> --out <mlve>."""

from __future__ import annotations

import argparse
import sys

from .export import DatasetError, ExporterError, ExportSpec, export_embeddings


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlvat-export")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="export per-layer sentence embeddings")
    p.add_argument("--model", required=True, help="encoder hub id or local directory")
    p.add_argument("--data", required=True, help="dataset TSV (ID, Tweet, labels...)")
    p.add_argument("--out", required=True, help="output MLVE path")
    p.add_argument("--layers", default="all", help="'all' or comma-separated indices")
    p.add_argument("--max-len", dest="max_len", type=int, default=128)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=16)
    p.add_argument("--exclude-special-tokens", dest="exclude_special", action="store_true",
                   help="drop delimiter tokens from the per-layer average")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 1
    layers = args.layers if args.layers == "all" else tuple(
        int(v) for v in args.layers.split(",") if v
    )
    spec = ExportSpec(
        model=args.model, data=args.data, out=args.out, layers=layers,
        max_len=args.max_len, batch_size=args.batch_size,
        include_special_tokens=not args.exclude_special,
    )
    try:
        path = export_embeddings(spec)
    except DatasetError as e:
        print(f"ERR:data: {e}", file=sys.stderr)
        return 2
    except ExporterError as e:
        print(f"ERR:export: {e}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
