import sys

import pytest

from hiertext.data import Dataset, Example, write_dataset
from hiertext.synth import generate_corpus
from hiertext.taxonomy import Level, TaskALabel, parent_of


def make_dataset(labels, level="A", prefix="ex"):
    """Dataset with one dummy-text example per label, ids ``<prefix>-<i>``."""
    level = Level.parse(level)
    rows = []
    for i, lab in enumerate(labels):
        a = b = c = None
        if level is Level.A:
            a = lab
        elif level is Level.B:
            a, b = TaskALabel.SEXIST, lab
        else:
            a, b, c = TaskALabel.SEXIST, parent_of(lab), lab
        rows.append(Example(f"{prefix}-{i}", f"text {i}", a, b, c))
    return Dataset(tuple(rows), level)


@pytest.fixture
def corpus_csv(tmp_path):
    def _make(n=300, level="A", seed=0, name=None):
        path = tmp_path / (name or f"synth_{level}_{n}_{seed}.csv")
        write_dataset(path, generate_corpus(n, level, seed))
        return path
    return _make


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
