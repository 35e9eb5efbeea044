"""Dataset ingestion, class statistics and seeded stratified splitting."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import (DuplicateId, EmptyClass, InconsistentLabels, InvalidK,
                     MalformedRow, MissingColumn, TooFewExamples)
from .hashing import SplitMix64, derive_seed
from .taxonomy import (CategoryLabel, Label, Level, TaskALabel, VectorLabel,
                       check_consistency, labels, parse_label)

COLUMNS = ("rewire_id", "text", "label_sexist", "label_category", "label_vector")
NONE_SENTINEL = "none"


@dataclass(frozen=True)
class Example:
    id: str
    text: str
    label_a: Optional[TaskALabel] = None
    label_b: Optional[CategoryLabel] = None
    label_c: Optional[VectorLabel] = None

    def label(self, level) -> Optional[Label]:
        level = Level.parse(level)
        return {Level.A: self.label_a, Level.B: self.label_b, Level.C: self.label_c}[level]


@dataclass(frozen=True)
class Dataset:
    examples: tuple
    level: Optional[Level] = None

    def __post_init__(self):
        object.__setattr__(self, "examples", tuple(self.examples))
        if self.level is not None:
            object.__setattr__(self, "level", Level.parse(self.level))
        seen = set()
        for ex in self.examples:
            if ex.id in seen:
                raise DuplicateId(ex.id)
            seen.add(ex.id)
            if self.level is not None and ex.label(self.level) is None:
                raise ValueError(f"example {ex.id!r} has no label at level {self.level.value}")

    def __len__(self):
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    @property
    def ids(self) -> list[str]:
        return [ex.id for ex in self.examples]

    @property
    def texts(self) -> list[str]:
        return [ex.text for ex in self.examples]

    def labels(self, level=None) -> list:
        level = self.level if level is None else Level.parse(level)
        return [ex.label(level) for ex in self.examples]

    def class_list(self) -> tuple:
        return labels(self.level)

    def subset(self, indices: Iterable[int]) -> "Dataset":
        return Dataset(tuple(self.examples[i] for i in indices), self.level)

    def at_level(self, level) -> "Dataset":
        """Keep only the examples that carry a label at ``level``."""
        level = Level.parse(level)
        return Dataset(tuple(ex for ex in self.examples if ex.label(level) is not None), level)


def _parse_optional(raw: Optional[str], level: Level):
    if raw is None:
        return None
    raw = raw.strip()
    if raw == "" or raw.lower() == NONE_SENTINEL:
        return None
    return parse_label(raw, level)


def read_examples(path, allow_empty_text: bool = False) -> list[Example]:
    """Read every row of an EDOS-format CSV with whatever labels it carries.

    Only ``text`` is mandatory. Without a ``rewire_id`` column rows are
    numbered ``row-1``, ``row-2``, ...
    """
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRow(1, "missing header row") from None
        header = [h.strip() for h in header]
        if "text" not in header:
            raise MissingColumn(f"{path}: no 'text' column in header {header}")
        col = {name: header.index(name) for name in COLUMNS if name in header}
        rows = []
        seen = set()
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedRow(line)

            def get(name):
                return row[col[name]] if name in col else None

            id_ = get("rewire_id")
            id_ = f"row-{len(rows) + 1}" if id_ is None else id_.strip()
            if id_ in seen:
                raise DuplicateId(id_)
            seen.add(id_)
            text = get("text")
            if not text.strip() and not allow_empty_text:
                raise MalformedRow(line, "empty text")
            a = _parse_optional(get("label_sexist"), Level.A)
            b = _parse_optional(get("label_category"), Level.B)
            c = _parse_optional(get("label_vector"), Level.C)
            # partial label sets are checked only on the links they carry
            verdict = check_consistency(
                TaskALabel.SEXIST if a is None else a, b,
                c if (b is not None or a is TaskALabel.NOT_SEXIST) else None)
            if not verdict:
                raise InconsistentLabels(f"line {line} ({id_}): {verdict.rule}")
            rows.append(Example(id_, text, a, b, c))
    return rows


def load_dataset(path, level) -> Dataset:
    """Load a labelled dataset for one task level.

    Level A requires every row to carry ``label_sexist``. For levels B and C
    rows without a label at that level (the not-sexist ones) are dropped.
    """
    level = Level.parse(level)
    column = {Level.A: "label_sexist", Level.B: "label_category", Level.C: "label_vector"}[level]
    with open(path, newline="", encoding="utf-8-sig") as fh:
        first = fh.readline()
    if first and column not in [h.strip() for h in next(csv.reader([first]))]:
        raise MissingColumn(f"{path}: no {column!r} column for level {level.value}")
    rows = read_examples(path)
    if level is Level.A:
        missing = [ex.id for ex in rows if ex.label_a is None]
        if missing:
            raise MalformedRow(0, f"row {missing[0]!r} has no label_sexist")
        return Dataset(tuple(rows), level)
    return Dataset(tuple(ex for ex in rows if ex.label(level) is not None), level)


def write_dataset(path, examples: Iterable[Example]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for ex in examples:
            writer.writerow([
                ex.id, ex.text,
                ex.label_a.display if ex.label_a else "",
                ex.label_b.display if ex.label_b else NONE_SENTINEL,
                ex.label_c.display if ex.label_c else NONE_SENTINEL,
            ])


def write_ids(path, ids: Iterable[str]) -> None:
    Path(path).write_text("".join(f"{i}\n" for i in ids), encoding="utf-8")


def read_ids(path) -> list[str]:
    return [line for line in Path(path).read_text(encoding="utf-8").splitlines() if line]


@dataclass(frozen=True)
class DatasetStats:
    n_samples: int
    n_classes: int
    counts: dict

    @classmethod
    def from_counts(cls, counts: dict) -> "DatasetStats":
        counts = dict(counts)
        return cls(sum(counts.values()), len(counts), counts)


def dataset_stats(ds: Dataset) -> DatasetStats:
    """Counts over the labels present in ``ds``, in taxonomy order."""
    tally = Counter(ds.labels())
    counts = {lab: tally[lab] for lab in ds.class_list() if tally[lab] > 0}
    return DatasetStats.from_counts(counts)


def class_weights(stats: DatasetStats) -> dict:
    """Balanced weights ``n_samples / (n_classes * count)`` per class."""
    weights = {}
    for label, count in stats.counts.items():
        if count <= 0:
            raise EmptyClass(label)
        weights[label] = stats.n_samples / (stats.n_classes * count)
    return weights


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 42
    stratify: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")


def _half_up(x: Fraction) -> int:
    return math.floor(x + Fraction(1, 2))


def apportion(sizes: Sequence[int], fraction: float) -> list[int]:
    """Largest-remainder split of ``fraction * sum(sizes)`` across groups.

    Each group gets floor or ceil of its exact share; leftover units go to the
    largest remainders, earlier groups first on ties.
    """
    frac = Fraction(repr(float(fraction)))
    total = _half_up(frac * sum(sizes))
    quotas = [frac * s for s in sizes]
    out = [math.floor(q) for q in quotas]
    leftover = total - sum(out)
    order = sorted(range(len(sizes)), key=lambda i: (-(quotas[i] - out[i]), i))
    for i in order[:leftover]:
        out[i] += 1
    return out


def _by_class(ds: Dataset) -> list[list[int]]:
    groups: dict = {}
    for i, lab in enumerate(ds.labels()):
        groups.setdefault(lab, []).append(i)
    order = ds.class_list()
    return [groups[lab] for lab in order if lab in groups]


def stratified_split(ds: Dataset, spec: SplitSpec = SplitSpec()) -> tuple[Dataset, Dataset]:
    """Seeded holdout split; members keep their original relative order."""
    rng = SplitMix64(derive_seed(spec.seed, "split"))
    if spec.stratify:
        groups = _by_class(ds)
        for members in groups:
            if len(members) < 2:
                raise TooFewExamples(ds.labels()[members[0]], len(members), 2)
    else:
        groups = [list(range(len(ds)))]
    quotas = apportion([len(g) for g in groups], spec.train_fraction)
    train_idx = []
    for members, quota in zip(groups, quotas):
        members = list(members)
        rng.shuffle(members)
        train_idx.extend(members[:quota])
    chosen = set(train_idx)
    train = sorted(chosen)
    validation = [i for i in range(len(ds)) if i not in chosen]
    return ds.subset(train), ds.subset(validation)


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    fold_of: tuple = field(default_factory=tuple)

    def fold_indices(self, fold: int) -> list[int]:
        return [i for i, f in enumerate(self.fold_of) if f == fold]

    def train_indices(self, fold: int) -> list[int]:
        return [i for i, f in enumerate(self.fold_of) if f != fold]

    def sizes(self) -> list[int]:
        counts = Counter(self.fold_of)
        return [counts[f] for f in range(self.k)]


def stratified_kfold(ds: Dataset, k: int, seed: int = 42) -> FoldAssignment:
    """Stratified fold assignment.

    Each class is shuffled, the classes are laid end to end in taxonomy
    order, and position ``i`` goes to fold ``i mod k``. Every class then
    lands in each fold floor or ceil of ``n_c / k`` times, and fold sizes
    differ by at most one.
    """
    n = len(ds)
    if k < 2 or k > n:
        raise InvalidK(f"k must satisfy 2 <= k <= {n}, got {k}")
    rng = SplitMix64(derive_seed(seed, "kfold"))
    fold_of = [0] * n
    position = 0
    for members in _by_class(ds):
        members = list(members)
        rng.shuffle(members)
        for i in members:
            fold_of[i] = position % k
            position += 1
    return FoldAssignment(k, tuple(fold_of))
