"""Command-line surface: train, sweep, probe, gen-synth, inspect-store, report.

Flags mirror RunConfig field names; a key=value config file may supply
a base configuration that explicit flags override. Every failure prints
one ERR:<code>: line to stderr; exit status is 0 on success, 1 for
config problems, 2 for data problems.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from . import data as data_mod
from . import metrics as metrics_mod
from . import net, probe, trainer
from .errors import ConfigError, DataError, MlvatError


def _default_manifest() -> str | None:
    root = os.environ.get("MLVAT_DATA_DIR")
    return str(Path(root) / "manifest.json") if root else None


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", default=_default_manifest(),
                   help="dataset manifest (default: $MLVAT_DATA_DIR/manifest.json)")
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--mode", choices=["sup", "mlvat"])
    p.add_argument("--target", "--target-language", dest="target_language")
    p.add_argument("--rho", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--divergence", choices=["mse_sigmoid", "mse_logits", "kl_per_label"])
    p.add_argument("--power-iters", dest="power_iters", type=int)
    p.add_argument("--labeled-batch", dest="labeled_batch", type=int)
    p.add_argument("--unlabeled-batch", dest="unlabeled_batch", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--dropout", type=float)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--train-plus-dev", dest="train_on_train_plus_dev", action="store_true", default=None)
    p.add_argument("--eval-split", dest="eval_split", choices=["dev", "test"])
    p.add_argument("--eval-language", dest="eval_language")
    p.add_argument("--unlabeled-sources", dest="unlabeled_sources",
                   help="comma-separated other languages for the unlabeled pool")
    p.add_argument("--feature-layer", dest="feature_layer", type=int)
    p.add_argument("--threshold", type=float)


def _resolve_config(args) -> trainer.RunConfig:
    cfg = trainer.load_config_kv(args.config) if args.config else trainer.RunConfig()
    overrides = {}
    for f in dataclasses.fields(trainer.RunConfig):
        value = getattr(args, f.name, None)
        if value is None:
            continue
        if f.name == "unlabeled_sources" and isinstance(value, str):
            value = tuple(v for v in value.split(",") if v)
        overrides[f.name] = value
    return dataclasses.replace(cfg, **overrides)


def _load_bundle(args) -> data_mod.DataBundle:
    if not args.manifest:
        raise ConfigError("no manifest: pass --manifest or set MLVAT_DATA_DIR")
    if not Path(args.manifest).exists():
        raise DataError(f"manifest not found: {args.manifest}")
    return data_mod.load_bundle(args.manifest)


def _cmd_train(args) -> int:
    cfg = _resolve_config(args)
    bundle = _load_bundle(args)
    result = trainer.train(cfg, bundle)
    if args.save_params:
        net.save_params(args.save_params, result.params)
    if args.save_config:
        trainer.save_config_kv(args.save_config, cfg)
    line = result.record_json()
    if args.out:
        trainer.write_results_jsonl(args.out, [result])
    else:
        print(line)
    print(
        f"{cfg.mode} {cfg.target_language} rho={cfg.rho} seed={cfg.seed}: "
        f"JI={100 * result.metrics.jaccard:.2f} MiF1={100 * result.metrics.micro_f1:.2f} "
        f"MaF1={100 * result.metrics.macro_f1:.2f} ({result.wall_clock_sec:.1f}s)",
        file=sys.stderr,
    )
    return 0


def _cmd_sweep(args) -> int:
    cfg = _resolve_config(args)
    bundle = _load_bundle(args)
    values: list = [v for v in args.values.split(",") if v]
    results = trainer.sweep(cfg, args.axis, values, bundle, jobs=args.jobs)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trainer.write_results_jsonl(out_dir / f"sweep_{args.axis}.jsonl", results)
    csv_text = trainer.sweep_csv(args.axis, values, results)
    (out_dir / f"sweep_{args.axis}.csv").write_text(csv_text)
    print(csv_text, end="")
    return 0


def _cmd_probe(args) -> int:
    cfg = _resolve_config(args)
    bundle = _load_bundle(args)
    report = probe.probe_report(
        bundle.store, bundle.records, cfg,
        include_per_layer=args.which in ("per-layer", "both"),
        include_cumulative=args.which in ("cumulative", "both"),
    )
    text = probe.probe_csv(report)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    print(text, end="")
    return 0


def _cmd_gen_synth(args) -> int:
    domains = tuple(f"synthetic-{i}" for i in range(args.domains))
    spec = data_mod.SyntheticSpec(
        n_per_cluster=args.per_cluster,
        dim=args.dim,
        n_labels=args.labels,
        n_clusters=args.clusters,
        noise_sigma=args.noise,
        domains=domains,
        domain_shift_sigma=args.domain_shift,
        center_scale=args.center_scale,
        seed=args.seed,
    )
    records, store = data_mod.gen_synthetic(spec)
    manifest = data_mod.write_bundle(args.out_dir, args.prefix, records, store)
    print(manifest)
    return 0


def _cmd_inspect_store(args) -> int:
    store = data_mod.open_embeddings(args.store)
    print(f"sentences: {store.n_sentences}")
    print(f"layers:    {store.n_layers}")
    print(f"dim:       {store.dim}")
    for sid in store.ids[:5]:
        print(f"id: {sid}")
    if store.n_sentences > 5:
        print(f"... and {store.n_sentences - 5} more")
    return 0


def _cmd_report(args) -> int:
    reports: dict[str, metrics_mod.MetricReport] = {}
    for path in args.results:
        with open(path, encoding="utf-8") as f:
            for i, line in enumerate(f):
                if not line.strip():
                    continue
                rec = json.loads(line)
                m = rec["metrics"]
                cfg = rec.get("config", {})
                name = f"{Path(path).stem}:{i} {cfg.get('mode', '?')} seed={rec.get('seed', '?')}"
                reports[name] = metrics_mod.MetricReport(
                    jaccard=m["jaccard"], micro_f1=m["micro_f1"], macro_f1=m["macro_f1"],
                    threshold=m.get("threshold", 0.5),
                )
    if args.csv:
        Path(args.csv).write_text(metrics_mod.report_csv(reports))
    print(metrics_mod.report_table(reports), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlvat", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run one training job")
    _add_run_flags(p)
    p.add_argument("--out", help="write the result record to this JSONL file")
    p.add_argument("--save-params", dest="save_params", help="write an MLVP checkpoint")
    p.add_argument("--save-config", dest="save_config", help="write the resolved key=value config")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("sweep", help="grid of runs along one axis")
    _add_run_flags(p)
    p.add_argument("--axis", required=True, choices=list(trainer.SWEEP_AXES))
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("probe", help="layer-wise probing report")
    _add_run_flags(p)
    p.add_argument("--which", choices=["per-layer", "cumulative", "both"], default="both")
    p.add_argument("--out", help="write the CSV report here")
    p.set_defaults(func=_cmd_probe)

    p = sub.add_parser("gen-synth", help="generate a synthetic dataset + store")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--prefix", default="synth")
    p.add_argument("--clusters", type=int, default=4)
    p.add_argument("--per-cluster", dest="per_cluster", type=int, default=250)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--labels", type=int, default=6)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--domains", type=int, default=1)
    p.add_argument("--domain-shift", dest="domain_shift", type=float, default=0.0)
    p.add_argument("--center-scale", dest="center_scale", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gen_synth)

    p = sub.add_parser("inspect-store", help="print MLVE store header fields")
    p.add_argument("--store", required=True)
    p.set_defaults(func=_cmd_inspect_store)

    p = sub.add_parser("report", help="summarize JSONL result records")
    p.add_argument("--results", nargs="+", required=True)
    p.add_argument("--csv", help="also write a CSV summary here")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 1
    try:
        return args.func(args)
    except DataError as e:
        print(f"ERR:{e.code}: {e}", file=sys.stderr)
        return 2
    except MlvatError as e:
        print(f"ERR:{e.code}: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"ERR:file-not-found: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
