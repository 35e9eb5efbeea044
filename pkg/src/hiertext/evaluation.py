"""Confusion matrices, precision/recall/F1, macro F1 and hierarchy checks."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .data import Dataset
from .errors import LengthMismatch, Misaligned, UnknownLabel
from .predictions import PredictionSet
from .taxonomy import Level, TaskALabel, check_consistency, parent_of


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    counts: np.ndarray  # rows = truth, cols = predicted
    class_list: tuple

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion_matrix(truth: Sequence, predicted: Sequence, class_list: Sequence) -> ConfusionMatrix:
    class_list = tuple(class_list)
    if len(truth) != len(predicted):
        raise LengthMismatch(f"{len(truth)} truth labels vs {len(predicted)} predictions")
    pos = {c: i for i, c in enumerate(class_list)}
    counts = np.zeros((len(class_list), len(class_list)), dtype=np.int64)
    for t, p in zip(truth, predicted):
        if t not in pos:
            raise UnknownLabel(t, "truth")
        if p not in pos:
            raise UnknownLabel(p, "prediction")
        counts[pos[t], pos[p]] += 1
    return ConfusionMatrix(counts, class_list)


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


@dataclass
class MetricsReport:
    class_list: tuple
    precision: list
    recall: list
    f1: list
    support: list
    macro_f1: float
    accuracy: float
    n: int
    extra: dict = field(default_factory=dict)

    def per_class(self) -> dict:
        return {
            c.key if hasattr(c, "key") else str(c): {
                "name": c.display if hasattr(c, "display") else str(c),
                "precision": p, "recall": r, "f1": f, "support": s,
            }
            for c, p, r, f, s in zip(self.class_list, self.precision, self.recall, self.f1, self.support)
        }

    def to_dict(self) -> dict:
        out = {"per_class": self.per_class(), "macro_f1": self.macro_f1,
               "accuracy": self.accuracy, "support": self.n}
        out.update(self.extra)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        names = [c.display if hasattr(c, "display") else str(c) for c in self.class_list]
        width = max([len(n) for n in names] + [9])
        lines = [f"{'class':<{width}}  precision  recall     f1  support"]
        for name, p, r, f, s in zip(names, self.precision, self.recall, self.f1, self.support):
            lines.append(f"{name:<{width}}  {p:9.4f}  {r:6.4f}  {f:5.4f}  {s:7d}")
        lines.append(f"{'macro F1':<{width}}  {self.macro_f1:.4f}")
        lines.append(f"{'accuracy':<{width}}  {self.accuracy:.4f}  (n={self.n})")
        for key, value in sorted(self.extra.items()):
            lines.append(f"{key:<{width}}  {value}")
        return "\n".join(lines) + "\n"


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Per-class P/R/F1 with 0/0 taken as 0; macro F1 averages every listed class."""
    counts = cm.counts
    k = len(cm.class_list)
    precision, recall, f1, support = [], [], [], []
    for c in range(k):
        tp = float(counts[c, c])
        predicted = float(counts[:, c].sum())
        actual = float(counts[c, :].sum())
        p = _ratio(tp, predicted)
        r = _ratio(tp, actual)
        precision.append(p)
        recall.append(r)
        f1.append(_ratio(2 * p * r, p + r))
        support.append(int(actual))
    total = cm.total
    macro = sum(f1) / k if k else 0.0
    accuracy = _ratio(float(np.trace(counts)), float(total))
    return MetricsReport(cm.class_list, precision, recall, f1, support, macro, accuracy, total)


def macro_f1(truth: Sequence, predicted: Sequence, class_list: Sequence) -> float:
    return metrics(confusion_matrix(truth, predicted, class_list)).macro_f1


def evaluate_run(pred: PredictionSet, truth: Dataset, level=None) -> MetricsReport:
    """Score ``pred`` on every example of ``truth`` labelled at ``level``.

    Each such id must have a prediction; predictions for other ids are
    ignored (gated runs may predict rows that the gold data leaves
    unlabelled at this level).
    """
    level = Level.parse(level) if level is not None else (truth.level or pred.level)
    gold = truth.at_level(level)
    if pred.level is not level:
        raise Misaligned(f"predictions are level {pred.level.value}, evaluation level is {level.value}")
    aligned = pred.reorder(gold.ids)
    return metrics(confusion_matrix(gold.labels(level), aligned.labels, pred.class_list))


@dataclass
class HierarchyReport:
    checked: int
    violations: int
    by_rule: dict

    def to_dict(self) -> dict:
        return {"checked": self.checked, "violations": self.violations, "by_rule": self.by_rule}


def hierarchy_violations(preds: Mapping) -> HierarchyReport:
    """Count ids whose predicted labels break the taxonomy.

    ``preds`` maps levels to prediction sets, which may cover different ids
    (gated runs predict B and C only for rows predicted sexist). A missing
    A prediction is read as sexist; a missing B prediction is read as the
    parent of the C prediction.
    """
    by_level = {Level.parse(k): v.label_of() for k, v in preds.items()}
    if len(by_level) < 2:
        raise ValueError("hierarchy check needs predictions at two or more levels")
    a_map = by_level.get(Level.A, {})
    b_map = by_level.get(Level.B, {})
    c_map = by_level.get(Level.C, {})
    ids = sorted(set(a_map) | set(b_map) | set(c_map))
    rules = Counter()
    checked = 0
    for id_ in ids:
        c = c_map.get(id_)
        b = b_map.get(id_)
        if b is None and c is not None and Level.B not in by_level:
            b = parent_of(c)
        a = a_map.get(id_, TaskALabel.SEXIST if (b is not None or c is not None) else None)
        if a is None:
            continue
        checked += 1
        if c is not None and b is None:
            rules["missing_category"] += 1
            continue
        verdict = check_consistency(a, b, c)
        if not verdict:
            rules[verdict.rule] += 1
    return HierarchyReport(checked, sum(rules.values()), dict(sorted(rules.items())))
