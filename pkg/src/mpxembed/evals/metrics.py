"""Multiclass classification metrics and their report container."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class MetricReport:
    balanced_accuracy: float
    macro_f1: float
    macro_average_precision: float
    auroc_ovo_macro: float
    per_class_precision: dict[int, float] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "balanced_accuracy": self.balanced_accuracy,
            "macro_f1": self.macro_f1,
            "macro_average_precision": self.macro_average_precision,
            "auroc_ovo_macro": self.auroc_ovo_macro,
            "per_class_precision": {str(k): v for k, v in self.per_class_precision.items()},
            "warnings": self.warnings,
        }


def _binary_average_precision(y: np.ndarray, scores: np.ndarray) -> float:
    """Step-wise AP over distinct score thresholds (no interpolation)."""
    n_pos = int(y.sum())
    if n_pos == 0:
        return float("nan")
    order = np.argsort(-scores, kind="stable")
    y_sorted = y[order]
    s_sorted = scores[order]
    tp = np.cumsum(y_sorted)
    k = np.arange(1, len(y) + 1)
    # evaluate only at the last index of each distinct threshold
    last = np.append(s_sorted[1:] != s_sorted[:-1], True)
    precision = tp[last] / k[last]
    recall = tp[last] / n_pos
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev_recall) * precision))


def _pairwise_auc(scores: np.ndarray, is_pos: np.ndarray) -> float:
    """P(score of a positive > score of a negative), ties counted 0.5."""
    pos = scores[is_pos]
    neg = scores[~is_pos]
    if len(pos) == 0 or len(neg) == 0:
        return float("nan")
    order = np.argsort(np.concatenate([pos, neg]), kind="stable")
    ranks = np.empty(len(order), dtype=np.float64)
    combined = np.concatenate([pos, neg])[order]
    # midranks
    i = 0
    while i < len(combined):
        j = i
        while j + 1 < len(combined) and combined[j + 1] == combined[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    r_pos = ranks[:len(pos)].sum()
    n1, n2 = len(pos), len(neg)
    return float((r_pos - n1 * (n1 + 1) / 2.0) / (n1 * n2))


def classify_metrics(y_true, y_pred, y_scores) -> MetricReport:
    """Balanced accuracy, macro F1, macro AP, and one-vs-one macro AUROC.

    ``y_scores`` has one column per class id; classes absent from
    ``y_true`` are excluded from the macro means and recorded as warnings.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    y_scores = np.asarray(y_scores, dtype=np.float64)
    if not (len(y_true) == len(y_pred) == len(y_scores)):
        raise ValueError(f"length mismatch: {len(y_true)}, {len(y_pred)}, {len(y_scores)}")
    n_classes = y_scores.shape[1]
    warnings = []

    present = sorted(set(y_true.tolist()))
    for c in range(n_classes):
        if c not in present:
            warnings.append(f"class {c} absent from y_true; excluded from macro means")

    recalls, f1s, aps = [], [], []
    precisions = {}
    for c in present:
        tp = int(np.sum((y_true == c) & (y_pred == c)))
        fn = int(np.sum((y_true == c) & (y_pred != c)))
        fp = int(np.sum((y_true != c) & (y_pred == c)))
        recall = tp / (tp + fn) if tp + fn else 0.0
        prec = tp / (tp + fp) if tp + fp else 0.0
        recalls.append(recall)
        f1s.append(2 * prec * recall / (prec + recall) if prec + recall else 0.0)
        precisions[c] = prec
        aps.append(_binary_average_precision((y_true == c).astype(np.int64), y_scores[:, c]))

    aucs = []
    for a in present:
        for b in present:
            if a == b:
                continue
            sel = (y_true == a) | (y_true == b)
            aucs.append(_pairwise_auc(y_scores[sel, a], y_true[sel] == a))

    return MetricReport(
        balanced_accuracy=float(np.mean(recalls)),
        macro_f1=float(np.mean(f1s)),
        macro_average_precision=float(np.mean(aps)),
        auroc_ovo_macro=float(np.mean(aucs)) if aucs else float("nan"),
        per_class_precision=precisions,
        warnings=warnings,
    )


def aggregate_reports(reports: list[MetricReport]) -> dict:
    """Fold mean and standard deviation for every scalar metric."""
    out = {}
    for key in ("balanced_accuracy", "macro_f1", "macro_average_precision", "auroc_ovo_macro"):
        vals = np.array([getattr(r, key) for r in reports], dtype=np.float64)
        out[key] = {"mean": float(vals.mean()), "std": float(vals.std()),
                    "folds": vals.tolist()}
    classes = sorted({c for r in reports for c in r.per_class_precision})
    out["per_class_precision"] = {
        str(c): {
            "mean": float(np.mean([r.per_class_precision[c] for r in reports
                                   if c in r.per_class_precision])),
            "std": float(np.std([r.per_class_precision[c] for r in reports
                                 if c in r.per_class_precision])),
        }
        for c in classes
    }
    return out


def save_report(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")
