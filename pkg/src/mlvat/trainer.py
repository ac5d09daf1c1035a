"""Training runs: supervised baseline, semi-supervised objective, sweeps.

A run is fully determined by its RunConfig: every random draw descends
from the config seed through separate substreams (weight init, batch
shuffling, dropout/perturbation), so repeating a run reproduces its
result record byte for byte. Wall-clock time lives on the in-memory
result only and never enters the serialized record.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from . import net, vat
from .data import BatchComposer, BatchPlan, DataBundle, make_semisup_split
from .errors import ConfigError
from .metrics import MetricReport
from .numkit import make_rng


@dataclass(frozen=True)
class RunConfig:
    mode: str = "sup"  # sup | mlvat
    target_language: str = "en"
    rho: float = 1.0
    epsilon: float = 0.5
    alpha: float = 1.0
    divergence: str = "mse_sigmoid"
    power_iters: int = 1
    labeled_batch: int = 8
    unlabeled_batch: int = 24
    epochs: int = 30
    lr: float = 2e-5
    weight_decay: float = 0.01
    dropout: float = 0.1
    hidden_dim: int = 768
    seed: int = 1
    train_on_train_plus_dev: bool = False
    eval_split: str = "test"  # dev | test
    eval_language: str | None = None  # crosslingual evaluation; None = target
    unlabeled_sources: tuple[str, ...] | None = None  # other languages; None = all
    feature_layer: int | None = None  # None = mean over store layers
    threshold: float = 0.5

    def __post_init__(self):
        if self.mode not in ("sup", "mlvat"):
            raise ConfigError(f"mode must be 'sup' or 'mlvat', got {self.mode!r}")
        if not (0 < self.rho <= 1):
            raise ConfigError(f"rho must be in (0, 1], got {self.rho}")
        if self.eval_split not in ("dev", "test"):
            raise ConfigError(f"eval_split must be 'dev' or 'test', got {self.eval_split!r}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")

    def vat_config(self) -> vat.VatConfig:
        return vat.VatConfig(
            epsilon=self.epsilon, alpha=self.alpha,
            divergence=self.divergence, power_iters=self.power_iters,
        )

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        if out["unlabeled_sources"] is not None:
            out["unlabeled_sources"] = list(out["unlabeled_sources"])
        return out


_BOOL_WORDS = {"true": True, "false": False, "1": True, "0": False}


def save_config_kv(path, cfg: RunConfig) -> None:
    """Flat key=value text file; None-valued keys are omitted (defaults)."""
    with open(path, "w", encoding="utf-8") as f:
        for key, value in sorted(cfg.to_dict().items()):
            if value is None:
                continue
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, list):
                value = ",".join(str(v) for v in value)
            f.write(f"{key}={value}\n")


def load_config_kv(path) -> RunConfig:
    raw: dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            raw[key.strip()] = value.strip()
    kwargs: dict = {}
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    for key, value in raw.items():
        if key not in fields:
            raise ConfigError(f"{path}: unknown config key {key!r}")
        kwargs[key] = _parse_field(key, value)
    return RunConfig(**kwargs)


def _parse_field(key: str, value: str):
    optional_int = {"feature_layer"}
    optional_str = {"eval_language"}
    if key == "unlabeled_sources":
        return tuple(v for v in value.split(",") if v)
    if value == "":
        return None
    if key in optional_str or key in ("mode", "target_language", "divergence", "eval_split"):
        return value
    if key == "train_on_train_plus_dev":
        if value.lower() not in _BOOL_WORDS:
            raise ConfigError(f"config key {key}: expected boolean, got {value!r}")
        return _BOOL_WORDS[value.lower()]
    if key in ("rho", "epsilon", "alpha", "lr", "weight_decay", "dropout", "threshold"):
        return float(value)
    if key in optional_int or key in (
        "power_iters", "labeled_batch", "unlabeled_batch", "epochs", "hidden_dim", "seed",
    ):
        return int(value)
    raise ConfigError(f"unhandled config key {key!r}")


@dataclass
class RunResult:
    config: dict
    metrics: MetricReport
    loss_curve: list[float]
    wall_clock_sec: float
    seed: int
    params: net.MlpParams | None = None

    def to_record(self) -> dict:
        """Deterministic portion of the result (wall clock excluded)."""
        return {
            "config": self.config,
            "metrics": self.metrics.to_dict(),
            "loss_curve": self.loss_curve,
            "seed": self.seed,
        }

    def record_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)


def evaluate(
    params: net.MlpParams,
    records,
    store,
    threshold: float = 0.5,
    feature_layer: int | None = None,
) -> MetricReport:
    """Deterministic evaluation of a head on one dataset split."""
    ids = [r.id for r in records]
    x = store.matrix(ids, layer=feature_layer)
    gold = np.asarray([r.labels for r in records], dtype=np.int64)
    logits = net.forward(params, x, mode="eval").logits
    pred = metrics_mod.predict_labels(logits, threshold)
    return metrics_mod.report(gold, pred, threshold)


def _unlabeled_ids(cfg: RunConfig, bundle: DataBundle, split) -> list[str]:
    """Leftover target-train rows always stay; other languages obey the filter."""
    if cfg.unlabeled_sources is None:
        return list(split.unlabeled_ids)
    allowed = set(cfg.unlabeled_sources) | {cfg.target_language}
    language_of = {r.id: r.language for r in bundle.records}
    return [i for i in split.unlabeled_ids if language_of[i] in allowed]


def _run(cfg: RunConfig, bundle: DataBundle) -> RunResult:
    started = time.perf_counter()
    split = make_semisup_split(
        bundle.records, cfg.target_language, cfg.rho,
        bundle.other_language_records(cfg.target_language), seed=cfg.seed,
    )
    labeled_ids = list(split.labeled_ids)
    if cfg.train_on_train_plus_dev:
        labeled_ids += [r.id for r in bundle.records_for(cfg.target_language, "dev")]
    if not labeled_ids:
        raise ConfigError(
            f"no labeled rows for language {cfg.target_language!r} at rho={cfg.rho}"
        )
    labels = bundle.labels_by_id()
    x_l = bundle.features(labeled_ids, layer=cfg.feature_layer)
    y_l = np.asarray([labels[i] for i in labeled_ids], dtype=np.float64)

    if cfg.mode == "mlvat" and cfg.unlabeled_batch > 0:
        u_ids = _unlabeled_ids(cfg, bundle, split)
        x_u = bundle.features(u_ids, layer=cfg.feature_layer)
    else:
        x_u = np.empty((0, x_l.shape[1]))

    rng_init, rng_plan, rng_train = make_rng(cfg.seed).spawn(3)
    n_out = y_l.shape[1]
    params = net.init_params(rng_init, x_l.shape[1], cfg.hidden_dim, n_out)
    opt = net.init_optimizer(params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    plan = BatchPlan(
        labeled_batch=cfg.labeled_batch,
        unlabeled_batch=cfg.unlabeled_batch if cfg.mode == "mlvat" else 0,
        seed=int(rng_plan.integers(2**63)),
    )
    composer = BatchComposer(x_l, y_l, x_u, plan)
    vat_cfg = cfg.vat_config() if cfg.mode == "mlvat" else None

    loss_curve: list[float] = []
    for _ in range(cfg.epochs):
        total, steps = 0.0, 0
        for (bx, by), bu in composer.epoch_batches():
            if cfg.mode == "sup":
                loss, grads = vat.bce_loss(params, bx, by, rng=rng_train, dropout=cfg.dropout)
            else:
                loss, grads = vat.mlvat_loss(
                    params, (bx, by), bu, vat_cfg, rng_train, dropout=cfg.dropout
                )
            opt, params = net.adamw_step(opt, params, grads)
            total += loss
            steps += 1
        loss_curve.append(total / steps)

    eval_language = cfg.eval_language or cfg.target_language
    eval_records = bundle.records_for(eval_language, cfg.eval_split)
    if not eval_records:
        raise ConfigError(f"no {cfg.eval_split!r} rows for language {eval_language!r}")
    report = evaluate(params, eval_records, bundle.store, cfg.threshold, cfg.feature_layer)
    return RunResult(
        config=cfg.to_dict(),
        metrics=report,
        loss_curve=loss_curve,
        wall_clock_sec=time.perf_counter() - started,
        seed=cfg.seed,
        params=params,
    )


def train_supervised(cfg: RunConfig, bundle: DataBundle) -> RunResult:
    if cfg.mode != "sup":
        raise ConfigError(f"train_supervised needs mode='sup', got {cfg.mode!r}")
    return _run(cfg, bundle)


def train_mlvat(cfg: RunConfig, bundle: DataBundle) -> RunResult:
    if cfg.mode != "mlvat":
        raise ConfigError(f"train_mlvat needs mode='mlvat', got {cfg.mode!r}")
    return _run(cfg, bundle)


def train(cfg: RunConfig, bundle: DataBundle) -> RunResult:
    return train_supervised(cfg, bundle) if cfg.mode == "sup" else train_mlvat(cfg, bundle)


def run_seeds(cfg: RunConfig, bundle: DataBundle, seeds=(1, 2, 3, 4, 5)) -> list[RunResult]:
    return [train(replace(cfg, seed=s), bundle) for s in seeds]


def mean_jaccard(results: list[RunResult]) -> tuple[float, float]:
    """(mean, std) of the Jaccard index across runs."""
    values = np.asarray([r.metrics.jaccard for r in results])
    return float(values.mean()), float(values.std())


SWEEP_AXES = ("epsilon", "alpha", "rho", "ratio", "divergence", "seed")


def sweep_config(base: RunConfig, axis: str, value) -> RunConfig:
    if axis == "epsilon":
        return replace(base, epsilon=float(value))
    if axis == "alpha":
        return replace(base, alpha=float(value))
    if axis == "rho":
        return replace(base, rho=float(value))
    if axis == "ratio":
        return replace(base, unlabeled_batch=int(round(float(value) * base.labeled_batch)))
    if axis == "divergence":
        return replace(base, divergence=str(value))
    if axis == "seed":
        return replace(base, seed=int(value))
    raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")


def _sweep_cell(args):
    cfg, bundle = args
    result = train(cfg, bundle)
    result.params = None  # keep worker payloads small
    return result


def sweep(base: RunConfig, axis: str, values, bundle: DataBundle, jobs: int = 1) -> list[RunResult]:
    """One run per value along an axis, in the given order."""
    configs = [sweep_config(base, axis, v) for v in values]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_cell, [(c, bundle) for c in configs]))
    return [train(c, bundle) for c in configs]


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(text)
    os.replace(tmp, path)


def write_results_jsonl(path, results: list[RunResult]) -> None:
    _atomic_write(path, "".join(r.record_json() + "\n" for r in results))


def sweep_csv(axis: str, values, results: list[RunResult]) -> str:
    lines = [f"{axis},jaccard,micro_f1,macro_f1"]
    for value, r in zip(values, results):
        lines.append(
            f"{value},{r.metrics.jaccard:.6f},{r.metrics.micro_f1:.6f},{r.metrics.macro_f1:.6f}"
        )
    return "\n".join(lines) + "\n"


def standard_benchmark_config(mode: str, seed: int = 1) -> RunConfig:
    """Desk-scale settings for the synthetic multi-domain benchmark.

    The head trains from scratch on raw 32-dim features, so the learning
    rate is far above the finetuning default; everything else keeps the
    stock semi-supervised recipe (batch 8+24, epsilon 0.5, alpha 1).
    """
    return RunConfig(
        mode=mode,
        target_language="synthetic-0",
        rho=0.10,
        lr=5e-3,
        epochs=30,
        seed=seed,
    )
