"""Aligned per-example predictions and the prediction CSV format.

File layout: header ``rewire_id,label,prob_<key>...`` with one probability
column per class (keys ``not_sexist``/``sexist``, ``1``..``4`` or
``1.1``..``4.2``). ``label`` holds the display string of the chosen class.
Probabilities are written with ``repr(float)`` so they round-trip exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import MalformedRow, Misaligned, MissingColumn
from .taxonomy import Level, labels, level_of, parse_label


@dataclass(frozen=True, eq=False)
class PredictionSet:
    model_id: str
    class_list: tuple
    example_ids: tuple
    probs: np.ndarray
    label_idx: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "class_list", tuple(self.class_list))
        object.__setattr__(self, "example_ids", tuple(self.example_ids))
        probs = np.asarray(self.probs, dtype=np.float64).reshape(len(self.example_ids), len(self.class_list))
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "label_idx", np.asarray(self.label_idx, dtype=np.int64).reshape(-1))
        if self.label_idx.shape[0] != len(self.example_ids):
            raise ValueError("one label per example required")

    @classmethod
    def from_probs(cls, model_id: str, class_list: Sequence, example_ids: Sequence,
                   probs) -> "PredictionSet":
        probs = np.asarray(probs, dtype=np.float64).reshape(len(example_ids), len(class_list))
        # np.argmax returns the first maximum: ties go to the earlier class
        return cls(model_id, tuple(class_list), tuple(example_ids), probs,
                   np.argmax(probs, axis=1) if len(example_ids) else np.zeros(0, dtype=np.int64))

    def __len__(self):
        return len(self.example_ids)

    @property
    def level(self) -> Level:
        return level_of(self.class_list[0])

    @property
    def labels(self) -> list:
        return [self.class_list[i] for i in self.label_idx]

    def label_of(self) -> dict:
        return dict(zip(self.example_ids, self.labels))

    def same(self, other: "PredictionSet") -> bool:
        return (self.class_list == other.class_list and self.example_ids == other.example_ids
                and np.array_equal(self.probs, other.probs)
                and np.array_equal(self.label_idx, other.label_idx))

    def reorder(self, ids: Sequence[str]) -> "PredictionSet":
        pos = {id_: i for i, id_ in enumerate(self.example_ids)}
        try:
            rows = [pos[id_] for id_ in ids]
        except KeyError as exc:
            raise Misaligned(f"id {exc.args[0]!r} missing from predictions {self.model_id!r}") from None
        return PredictionSet(self.model_id, self.class_list, tuple(ids),
                             self.probs[rows], self.label_idx[rows])


def check_aligned(preds: Sequence[PredictionSet]) -> None:
    first = preds[0]
    for other in preds[1:]:
        if other.class_list != first.class_list:
            raise Misaligned(f"class lists differ: {first.model_id!r} vs {other.model_id!r}")
        if other.example_ids != first.example_ids:
            raise Misaligned(f"example ids differ: {first.model_id!r} vs {other.model_id!r}")


def write_predictions(path, preds: PredictionSet) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rewire_id", "label"] + [f"prob_{c.key}" for c in preds.class_list])
        for id_, li, row in zip(preds.example_ids, preds.label_idx, preds.probs):
            writer.writerow([id_, preds.class_list[li].display] + [repr(float(p)) for p in row])


def _level_from_keys(keys: list[str]) -> Level:
    for level in Level:
        if sorted(keys) == sorted(c.key for c in labels(level)):
            return level
    raise MissingColumn(f"probability columns {keys} do not match any task level")


def read_predictions(path, model_id: str | None = None) -> PredictionSet:
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MalformedRow(1, "missing header row") from None
        if header[:2] != ["rewire_id", "label"]:
            raise MissingColumn(f"{path}: prediction header must start with rewire_id,label")
        prob_cols = header[2:]
        if not all(h.startswith("prob_") for h in prob_cols):
            raise MissingColumn(f"{path}: non-probability column in {prob_cols}")
        keys = [h[len("prob_"):] for h in prob_cols]
        level = _level_from_keys(keys)
        class_list = labels(level)
        order = [keys.index(c.key) for c in class_list]
        ids, rows, label_idx = [], [], []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedRow(reader.line_num)
            ids.append(row[0])
            try:
                values = [float(row[2 + j]) for j in order]
            except ValueError:
                raise MalformedRow(reader.line_num, "non-numeric probability") from None
            rows.append(values)
            lab = parse_label(row[1], level)
            label_idx.append(class_list.index(lab))
    if len(set(ids)) != len(ids):
        raise Misaligned(f"{path}: duplicate ids in prediction file")
    probs = np.array(rows, dtype=np.float64).reshape(len(ids), len(class_list))
    return PredictionSet(model_id or str(path), class_list, tuple(ids), probs,
                         np.array(label_idx, dtype=np.int64))
