"""Keyword-separable synthetic corpora in the EDOS file format.

Every class owns a private pool of made-up keywords and every post mixes
shared filler words with one to three keywords of its own class, so the
classes are linearly separable by construction. Labels are always
hierarchically consistent: a sexist post gets a vector and its category.
"""

from __future__ import annotations

from .data import Example
from .hashing import SplitMix64, derive_seed
from .taxonomy import TaskALabel, VectorLabel, Level, parent_of

# disjoint syllable sets keep keyword char n-grams out of the filler words
_FILLER_SYLLABLES = ("ka", "mo", "ri", "te", "lan", "sep", "fen", "gal")
_KEYWORD_SYLLABLES = ("zu", "vo", "qui", "dro", "hux", "jor", "pim", "wex")


def _word(rng: SplitMix64, syllables: tuple, n_syllables: int) -> str:
    return "".join(syllables[rng.below(len(syllables))] for _ in range(n_syllables))


def _pools(seed: int):
    rng = SplitMix64(derive_seed(seed, "synth/vocab"))
    used = set()

    def fresh(syllables, n_syl):
        while True:
            w = _word(rng, syllables, n_syl)
            if w not in used:
                used.add(w)
                return w

    filler = [fresh(_FILLER_SYLLABLES, 3) for _ in range(150)]
    keywords = {"not_sexist": [fresh(_KEYWORD_SYLLABLES, 3) for _ in range(4)]}
    for vec in VectorLabel:
        keywords[vec.key] = [fresh(_KEYWORD_SYLLABLES, 3) for _ in range(4)]
    return filler, keywords


def generate_corpus(n: int, level="A", seed: int = 0, sexist_fraction: float = 3398 / 14000):
    """``n`` examples whose classes at ``level`` are keyword-separable.

    Level A draws sexist posts with probability ``sexist_fraction``; levels
    B and C produce only sexist posts. Vectors are drawn uniformly, so
    categories follow the 2/3/4/2 vector split.
    """
    level = Level.parse(level)
    filler, keywords = _pools(seed)
    rng = SplitMix64(derive_seed(seed, f"synth/rows/{level.value}"))
    vectors = list(VectorLabel)
    rows = []
    for i in range(n):
        if level is Level.A and rng.uniform() >= sexist_fraction:
            a, b, c = TaskALabel.NOT_SEXIST, None, None
            pool = keywords["not_sexist"]
        else:
            c = vectors[rng.below(len(vectors))]
            b, a = parent_of(c), TaskALabel.SEXIST
            pool = keywords[c.key]
        words = [filler[rng.below(len(filler))] for _ in range(5 + rng.below(8))]
        words += [pool[rng.below(len(pool))] for _ in range(1 + rng.below(3))]
        rng.shuffle(words)
        text = " ".join(words).capitalize()
        rows.append(Example(f"synth-{level.value.lower()}-{i:05d}", text, a, b, c))
    return rows
