"""The fixed three-level EDOS label space.

Task A is binary (sexist / not sexist), Task B splits sexist posts into four
categories and Task C into eleven vectors. Every vector belongs to exactly one
category and every category implies ``sexist``.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

from .errors import UnknownLabel


class Level(str, Enum):
    A = "A"
    B = "B"
    C = "C"

    @classmethod
    def parse(cls, raw) -> "Level":
        if isinstance(raw, Level):
            return raw
        try:
            return cls(str(raw).strip().upper())
        except ValueError:
            raise ValueError(f"task level must be one of A, B, C (got {raw!r})") from None


class TaskALabel(Enum):
    NOT_SEXIST = "not_sexist"
    SEXIST = "sexist"

    @property
    def level(self) -> Level:
        return Level.A

    @property
    def key(self) -> str:
        return self.value

    @property
    def name_text(self) -> str:
        return "not sexist" if self is TaskALabel.NOT_SEXIST else "sexist"

    @property
    def display(self) -> str:
        return self.name_text

    def __repr__(self):
        return f"TaskALabel.{self.name}"


_CATEGORY_NAMES = {
    1: "threats, plans to harm and incitement",
    2: "derogation",
    3: "animosity",
    4: "prejudiced discussions",
}

_CATEGORY_ALIASES = {
    1: ("threats", "threats, plans to harm & incitement"),
    2: (),
    3: (),
    4: ("prejudiced discussion",),
}


class CategoryLabel(Enum):
    THREATS = 1
    DEROGATION = 2
    ANIMOSITY = 3
    PREJUDICED_DISCUSSIONS = 4

    @property
    def level(self) -> Level:
        return Level.B

    @property
    def id(self) -> int:
        return self.value

    @property
    def key(self) -> str:
        return str(self.value)

    @property
    def name_text(self) -> str:
        return _CATEGORY_NAMES[self.value]

    @property
    def display(self) -> str:
        return f"{self.value}. {self.name_text}"

    def __repr__(self):
        return f"CategoryLabel{{{self.value}}}"


# Names follow the task's data release; aliases cover the prose variants.
_VECTOR_NAMES = {
    "1.1": "threats of harm",
    "1.2": "incitement and encouragement of harm",
    "2.1": "descriptive attacks",
    "2.2": "aggressive and emotive attacks",
    "2.3": "dehumanising attacks & overt sexual objectification",
    "3.1": "casual use of gendered slurs, profanities, and insults",
    "3.2": "immutable gender differences and gender stereotypes",
    "3.3": "backhanded gendered compliments",
    "3.4": "condescending explanations or unwelcome advice",
    "4.1": "supporting mistreatment of individual women",
    "4.2": "supporting systemic discrimination against women as a group",
}

_VECTOR_ALIASES = {
    "1.1": ("threats of harm and incitement",),
    "1.2": ("encouragement of harm",),
    "2.3": ("dehumanising attacks and overt sexual objectification",
            "dehumanizing attacks & overt sexual objectification",
            "dehumanizing attacks and overt sexual objectification"),
    "3.1": ("casual use of gendered slurs, profanities and insults",
            "causal use of gendered slurs, profanities and insults",
            "causal use of gendered slurs, profanities, and insults"),
}


class VectorLabel(Enum):
    V1_1 = "1.1"
    V1_2 = "1.2"
    V2_1 = "2.1"
    V2_2 = "2.2"
    V2_3 = "2.3"
    V3_1 = "3.1"
    V3_2 = "3.2"
    V3_3 = "3.3"
    V3_4 = "3.4"
    V4_1 = "4.1"
    V4_2 = "4.2"

    @property
    def level(self) -> Level:
        return Level.C

    @property
    def code(self) -> tuple[int, int]:
        cat, sub = self.value.split(".")
        return int(cat), int(sub)

    @property
    def key(self) -> str:
        return self.value

    @property
    def name_text(self) -> str:
        return _VECTOR_NAMES[self.value]

    @property
    def display(self) -> str:
        return f"{self.value} {self.name_text}"

    def __repr__(self):
        return f"VectorLabel{{{self.value}}}"


Label = Union[TaskALabel, CategoryLabel, VectorLabel]

_LEVEL_ENUM = {Level.A: TaskALabel, Level.B: CategoryLabel, Level.C: VectorLabel}


def labels(level) -> tuple:
    """Canonical class order for a level; model rows and probability columns follow it."""
    return tuple(_LEVEL_ENUM[Level.parse(level)])


def level_of(label: Label) -> Level:
    for level, enum_cls in _LEVEL_ENUM.items():
        if isinstance(label, enum_cls):
            return level
    raise TypeError(f"not a taxonomy label: {label!r}")


def normalize_label_text(raw: str) -> str:
    text = unicodedata.normalize("NFC", raw)
    return " ".join(text.strip().lower().split())


_PREFIX_RE = re.compile(r"^(\d+)(?:\.(\d+))?\s*\.?\s*(.*)$")


def _name_index(level: Level) -> dict[str, Label]:
    index: dict[str, Label] = {}
    if level is Level.A:
        index = {"sexist": TaskALabel.SEXIST, "not sexist": TaskALabel.NOT_SEXIST}
    elif level is Level.B:
        for cat in CategoryLabel:
            for name in (cat.name_text,) + _CATEGORY_ALIASES[cat.value]:
                index[name] = cat
    else:
        for vec in VectorLabel:
            for name in (vec.name_text,) + _VECTOR_ALIASES.get(vec.value, ()):
                index[name] = vec
    return index


_NAME_INDEX = {level: _name_index(level) for level in Level}


def parse_label(raw, level) -> Label:
    """Map a raw label string onto the canonical label at ``level``.

    Matching is case-insensitive and whitespace-tolerant. A numeric prefix
    ("2.", "3.2") is the key when present and the trailing name is ignored;
    otherwise the bare name must match a known name.
    """
    level = Level.parse(level)
    if isinstance(raw, _LEVEL_ENUM[level]):
        return raw
    if not isinstance(raw, str):
        raise UnknownLabel(raw, level.value)
    text = normalize_label_text(raw)

    if level is Level.A:
        text = " ".join(text.replace("_", " ").replace("-", " ").split())
        found = _NAME_INDEX[level].get(text)
        if found is None:
            raise UnknownLabel(raw, level.value)
        return found

    m = _PREFIX_RE.match(text)
    if m:
        major, minor = int(m.group(1)), m.group(2)
        if level is Level.B and minor is None and major in _CATEGORY_NAMES:
            return CategoryLabel(major)
        if level is Level.C and minor is not None:
            code = f"{major}.{int(minor)}"
            if code in _VECTOR_NAMES:
                return VectorLabel(code)
        raise UnknownLabel(raw, level.value)

    found = _NAME_INDEX[level].get(text.rstrip("."))
    if found is None:
        raise UnknownLabel(raw, level.value)
    return found


def parent_of(label: Union[VectorLabel, CategoryLabel]) -> Union[CategoryLabel, TaskALabel]:
    if isinstance(label, VectorLabel):
        return CategoryLabel(label.code[0])
    if isinstance(label, CategoryLabel):
        return TaskALabel.SEXIST
    raise TypeError(f"{label!r} has no parent in the taxonomy")


def children_of(label) -> tuple:
    if label is TaskALabel.SEXIST:
        return tuple(CategoryLabel)
    if isinstance(label, CategoryLabel):
        return tuple(v for v in VectorLabel if v.code[0] == label.value)
    return ()


@dataclass(frozen=True)
class Verdict:
    consistent: bool
    rule: Optional[str] = None

    def __bool__(self):
        return self.consistent


def check_consistency(a: TaskALabel, b: Optional[CategoryLabel] = None,
                      c: Optional[VectorLabel] = None) -> Verdict:
    """Check one (A, B, C) label triple against the hierarchy.

    Returns a falsy :class:`Verdict` naming the first violated rule:
    ``not_sexist_has_children``, ``category_requires_sexist`` or
    ``parent_mismatch``.
    """
    if a is TaskALabel.NOT_SEXIST and (b is not None or c is not None):
        return Verdict(False, "not_sexist_has_children")
    if b is not None and a is not TaskALabel.SEXIST:
        return Verdict(False, "category_requires_sexist")
    if c is not None and b is not parent_of(c):
        return Verdict(False, "parent_mismatch")
    return Verdict(True)


@dataclass(frozen=True)
class LabelTaxonomy:
    task_a: tuple = tuple(TaskALabel)
    categories: tuple = tuple(CategoryLabel)
    vectors: tuple = tuple(VectorLabel)

    @property
    def child_to_parent(self) -> dict:
        mapping = {v: parent_of(v) for v in self.vectors}
        mapping.update({c: parent_of(c) for c in self.categories})
        return mapping

    def levels(self) -> dict:
        return {Level.A: self.task_a, Level.B: self.categories, Level.C: self.vectors}

    def to_dict(self) -> dict:
        return {
            "A": [{"key": x.key, "name": x.display} for x in self.task_a],
            "B": [
                {"key": c.key, "name": c.display, "parent": TaskALabel.SEXIST.key,
                 "children": [v.key for v in children_of(c)]}
                for c in self.categories
            ],
            "C": [{"key": v.key, "name": v.display, "parent": parent_of(v).key}
                  for v in self.vectors],
        }


TAXONOMY = LabelTaxonomy()


def label_from_key(key: str, level) -> Label:
    """Inverse of ``label.key``; used by prediction-file headers."""
    level = Level.parse(level)
    for lab in labels(level):
        if lab.key == key:
            return lab
    raise UnknownLabel(key, level.value)
