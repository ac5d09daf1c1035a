"""Multilabel evaluation: Jaccard index, micro F1, macro F1.

Conventions (the upstream task descriptions leave both unstated): the
decision threshold is 0.5 on sigmoid outputs, a row with empty gold and
empty predicted label sets scores Jaccard 1.0 (an all-negative
prediction on a neutral sample is correct), and a per-label F1 with
zero TP+FP+FN counts is 0.0 so never-predicted labels drag the macro
average down.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch
from .numkit import stable_sigmoid


@dataclass(frozen=True)
class MetricReport:
    jaccard: float
    micro_f1: float
    macro_f1: float
    threshold: float
    per_label_f1: tuple[float, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "jaccard": self.jaccard,
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
            "threshold": self.threshold,
            "per_label_f1": list(self.per_label_f1),
        }


def predict_labels(logits: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Binary decisions: 1 iff sigmoid(logit) strictly exceeds threshold."""
    probs = stable_sigmoid(np.asarray(logits, dtype=np.float64))
    return (probs > threshold).astype(np.int64)


def _check_pair(gold, pred) -> tuple[np.ndarray, np.ndarray]:
    g = np.asarray(gold)
    p = np.asarray(pred)
    if g.shape != p.shape or g.ndim != 2:
        raise ShapeMismatch(f"gold shape {g.shape} != pred shape {p.shape} (need 2-d)")
    return g.astype(bool), p.astype(bool)


def jaccard_index(gold, pred) -> float:
    """Mean over samples of |G n P| / |G u P|, with empty/empty = 1.0."""
    g, p = _check_pair(gold, pred)
    inter = (g & p).sum(axis=1).astype(np.float64)
    union = (g | p).sum(axis=1).astype(np.float64)
    per_row = np.where(union > 0, inter / np.maximum(union, 1.0), 1.0)
    return float(per_row.mean())


def _f1(tp: float, fp: float, fn: float) -> float:
    denom = 2.0 * tp + fp + fn
    return 2.0 * tp / denom if denom > 0 else 0.0


def micro_f1(gold, pred) -> float:
    """F1 over TP/FP/FN pooled across all samples and labels."""
    g, p = _check_pair(gold, pred)
    tp = float((g & p).sum())
    fp = float((~g & p).sum())
    fn = float((g & ~p).sum())
    return _f1(tp, fp, fn)


def per_label_f1(gold, pred) -> np.ndarray:
    g, p = _check_pair(gold, pred)
    tp = (g & p).sum(axis=0).astype(np.float64)
    fp = (~g & p).sum(axis=0).astype(np.float64)
    fn = (g & ~p).sum(axis=0).astype(np.float64)
    denom = 2.0 * tp + fp + fn
    return np.where(denom > 0, 2.0 * tp / np.maximum(denom, 1.0), 0.0)


def macro_f1(gold, pred) -> float:
    """Unweighted mean of per-label F1."""
    return float(per_label_f1(gold, pred).mean())


def report(gold, pred, threshold: float = 0.5) -> MetricReport:
    return MetricReport(
        jaccard=jaccard_index(gold, pred),
        micro_f1=micro_f1(gold, pred),
        macro_f1=macro_f1(gold, pred),
        threshold=threshold,
        per_label_f1=tuple(float(v) for v in per_label_f1(gold, pred)),
    )


def report_csv(reports: dict[str, MetricReport]) -> str:
    """CSV with one row per named report."""
    buf = io.StringIO()
    buf.write("name,jaccard,micro_f1,macro_f1,threshold\n")
    for name, r in reports.items():
        buf.write(f"{name},{r.jaccard:.6f},{r.micro_f1:.6f},{r.macro_f1:.6f},{r.threshold}\n")
    return buf.getvalue()


def report_table(reports: dict[str, MetricReport]) -> str:
    """Aligned text table, metrics scaled to 0..100."""
    width = max([len(n) for n in reports] + [6])
    lines = [f"{'name':<{width}}  {'JI':>6}  {'MiF1':>6}  {'MaF1':>6}"]
    for name, r in reports.items():
        lines.append(
            f"{name:<{width}}  {100 * r.jaccard:6.2f}  {100 * r.micro_f1:6.2f}  {100 * r.macro_f1:6.2f}"
        )
    return "\n".join(lines) + "\n"
