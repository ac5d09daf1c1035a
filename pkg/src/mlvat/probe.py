"""Layer-wise probing: which store layers carry the label signal.

Each probe trains a fresh head (same architecture and hyperparameters
as the main classifier) on a single layer's vectors, or on the mean of
a layer prefix, and evaluates on the test split. The expected-layer
statistic is the delta-weighted mean index of the cumulative curve: how
deep the gains from adding layers concentrate.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace

import numpy as np

from .data import DataBundle, EmbeddingStore, LabeledRecord
from .errors import LayerOutOfRange, ZeroDenominator
from .metrics import MetricReport
from .trainer import RunConfig, train_supervised


@dataclass(frozen=True)
class LayerEvalReport:
    per_layer: tuple[tuple[int, MetricReport], ...]
    cumulative: tuple[tuple[int, MetricReport], ...]
    expected_layer: float | None
    has_negative_deltas: bool


def _check_layer(store: EmbeddingStore, layer: int) -> None:
    if not (0 <= layer < store.n_layers):
        raise LayerOutOfRange(f"layer {layer} out of range [0, {store.n_layers})")


def layer_eval(
    store: EmbeddingStore,
    records: list[LabeledRecord],
    layer: int,
    train_cfg: RunConfig,
) -> MetricReport:
    """Train a fresh supervised head on layer `layer`, evaluate on test."""
    _check_layer(store, layer)
    cfg = replace(train_cfg, mode="sup", feature_layer=layer)
    bundle = DataBundle(records=records, store=store)
    return train_supervised(cfg, bundle).metrics


def cumulative_layer_eval(
    store: EmbeddingStore,
    records: list[LabeledRecord],
    max_layer: int,
    train_cfg: RunConfig,
) -> MetricReport:
    """Same, on the mean of layers 0..max_layer."""
    _check_layer(store, max_layer)
    merged = store.layer_view(list(range(max_layer + 1)))
    cfg = replace(train_cfg, mode="sup", feature_layer=0)
    bundle = DataBundle(records=records, store=merged)
    return train_supervised(cfg, bundle).metrics


def expected_layer(deltas) -> float:
    """Delta-weighted mean layer index: sum(l * d_l) / sum(d_l), l from 1."""
    deltas = np.asarray(deltas, dtype=np.float64)
    total = float(deltas.sum())
    if total == 0.0:
        raise ZeroDenominator("deltas sum to zero")
    indices = np.arange(1, deltas.shape[0] + 1, dtype=np.float64)
    return float((indices * deltas).sum() / total)


def probe_report(
    store: EmbeddingStore,
    records: list[LabeledRecord],
    train_cfg: RunConfig,
    include_per_layer: bool = True,
    include_cumulative: bool = True,
) -> LayerEvalReport:
    per_layer = []
    if include_per_layer:
        for layer in range(store.n_layers):
            per_layer.append((layer, layer_eval(store, records, layer, train_cfg)))
    cumulative = []
    if include_cumulative:
        for layer in range(store.n_layers):
            cumulative.append((layer, cumulative_layer_eval(store, records, layer, train_cfg)))

    expected: float | None = None
    negative = False
    if len(cumulative) >= 2:
        curve = [r.jaccard for _, r in cumulative]
        deltas = [curve[i] - curve[i - 1] for i in range(1, len(curve))]
        negative = any(d < 0 for d in deltas)
        try:
            expected = expected_layer(deltas)
        except ZeroDenominator:
            expected = None
    return LayerEvalReport(
        per_layer=tuple(per_layer),
        cumulative=tuple(cumulative),
        expected_layer=expected,
        has_negative_deltas=negative,
    )


def probe_csv(report: LayerEvalReport) -> str:
    """CSV rows (kind, layer, JI, MiF1, MaF1) plus an expected-layer line."""
    buf = io.StringIO()
    buf.write("kind,layer,jaccard,micro_f1,macro_f1\n")
    for layer, r in report.per_layer:
        buf.write(f"per_layer,{layer},{r.jaccard:.6f},{r.micro_f1:.6f},{r.macro_f1:.6f}\n")
    for layer, r in report.cumulative:
        buf.write(f"cumulative,{layer},{r.jaccard:.6f},{r.micro_f1:.6f},{r.macro_f1:.6f}\n")
    if report.expected_layer is not None:
        flag = " (negative deltas present)" if report.has_negative_deltas else ""
        buf.write(f"# expected_layer,{report.expected_layer:.4f}{flag}\n")
    return buf.getvalue()
