"""Confusion matrices, per-class precision/recall/F1, and macro F1.

Zero-division convention: precision, recall, and F1 are 0 whenever their
denominator is 0, and classes absent from both predictions and gold still
contribute a 0 to the macro mean.  This matches shared-task scoring where
every class of the subtask counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import IdMismatch, UnknownLabel


@dataclass(frozen=True)
class ConfusionMatrix:
    classes: tuple[str, ...]
    counts: np.ndarray  # counts[gold_index][pred_index]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class EvalReport:
    classes: tuple[str, ...]
    precision: dict[str, float]
    recall: dict[str, float]
    f1: dict[str, float]
    support: dict[str, int]
    macro_f1: float


def confusion(
    preds: Iterable[tuple[int, str]],
    gold: Iterable[tuple[int, str]],
    classes: Sequence[str],
) -> ConfusionMatrix:
    """Tabulate counts[gold][pred] over examples matched by id."""
    pred_by_id = dict(preds)
    gold_by_id = dict(gold)
    if pred_by_id.keys() != gold_by_id.keys():
        missing = sorted(gold_by_id.keys() - pred_by_id.keys())[:5]
        extra = sorted(pred_by_id.keys() - gold_by_id.keys())[:5]
        raise IdMismatch(f"pred/gold id sets differ; missing={missing} extra={extra}")
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for example_id, gold_label in gold_by_id.items():
        pred_label = pred_by_id[example_id]
        if gold_label not in index:
            raise UnknownLabel(f"gold label {gold_label!r} not in {tuple(classes)}")
        if pred_label not in index:
            raise UnknownLabel(f"predicted label {pred_label!r} not in {tuple(classes)}")
        counts[index[gold_label], index[pred_label]] += 1
    return ConfusionMatrix(classes=tuple(classes), counts=counts)


def macro_f1(matrix: ConfusionMatrix) -> EvalReport:
    """Per-class precision/recall/F1 and their unweighted mean."""
    precision, recall, f1, support = {}, {}, {}, {}
    for i, cls in enumerate(matrix.classes):
        tp = float(matrix.counts[i, i])
        fp = float(matrix.counts[:, i].sum()) - tp
        fn = float(matrix.counts[i, :].sum()) - tp
        p = tp / (tp + fp) if tp + fp > 0 else 0.0
        r = tp / (tp + fn) if tp + fn > 0 else 0.0
        precision[cls] = p
        recall[cls] = r
        f1[cls] = 2 * p * r / (p + r) if p + r > 0 else 0.0
        support[cls] = int(matrix.counts[i, :].sum())
    macro = sum(f1.values()) / len(matrix.classes)
    return EvalReport(
        classes=matrix.classes,
        precision=precision,
        recall=recall,
        f1=f1,
        support=support,
        macro_f1=macro,
    )


def evaluate(
    preds: Iterable[tuple[int, str]],
    gold: Iterable[tuple[int, str]],
    classes: Sequence[str],
) -> EvalReport:
    return macro_f1(confusion(preds, gold, classes))


def format_report(report: EvalReport) -> str:
    """Human-readable per-class table followed by the macro F1."""
    width = max(len(c) for c in report.classes)
    lines = [f"{'class':<{width}}  precision  recall     f1     support"]
    for cls in report.classes:
        lines.append(
            f"{cls:<{width}}  {report.precision[cls]:9.4f}  {report.recall[cls]:6.4f}"
            f"  {report.f1[cls]:6.4f}  {report.support[cls]:7d}"
        )
    lines.append(f"macro F1: {report.macro_f1:.6f}")
    return "\n".join(lines)


def report_lines(report: EvalReport) -> list[str]:
    """Flat machine-readable key=value lines (macro_f1=0.73 style)."""
    lines = []
    for cls in report.classes:
        lines.append(f"precision_{cls}={report.precision[cls]:.6g}")
        lines.append(f"recall_{cls}={report.recall[cls]:.6g}")
        lines.append(f"f1_{cls}={report.f1[cls]:.6g}")
        lines.append(f"support_{cls}={report.support[cls]}")
    lines.append(f"macro_f1={report.macro_f1:.6g}")
    return lines
