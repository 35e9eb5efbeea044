"""Hashed word/char n-gram features with optional smoothed IDF.

Each n-gram is hashed with FNV-1a 64 over ``tag + utf8(ngram)`` where the tag
byte is ``0x01`` for word n-grams and ``0x02`` for char n-grams, and the
feature index is ``hash % dimension``. Word tokens are runs of word
characters or single punctuation marks; word n-grams join tokens with one
space. Char n-grams run over the normalized text padded with one space on
each side.
"""

from __future__ import annotations

import math
import re
import unicodedata
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, EmptyCorpus
from .hashing import fnv1a64

WORD_TAG = b"\x01"
CHAR_TAG = b"\x02"
_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


@dataclass(frozen=True)
class FeaturizerConfig:
    word_ngrams: Optional[tuple] = (1, 2)
    char_ngrams: Optional[tuple] = (3, 5)
    dimension: int = 2 ** 18
    use_idf: bool = True
    lowercase: bool = True

    def __post_init__(self):
        d = self.dimension
        if not isinstance(d, int) or d < 2 or d & (d - 1):
            raise ValueError(f"dimension must be a power of two >= 2, got {d!r}")
        for name in ("word_ngrams", "char_ngrams"):
            rng = getattr(self, name)
            if rng is None:
                continue
            rng = tuple(int(v) for v in rng)
            if len(rng) != 2 or rng[0] < 1 or rng[0] > rng[1]:
                raise ValueError(f"{name} must be (low, high) with 1 <= low <= high, got {rng!r}")
            object.__setattr__(self, name, rng)
        if self.word_ngrams is None and self.char_ngrams is None:
            raise ValueError("at least one of word_ngrams / char_ngrams must be enabled")

    def to_dict(self) -> dict:
        out = asdict(self)
        for name in ("word_ngrams", "char_ngrams"):
            if out[name] is not None:
                out[name] = list(out[name])
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "FeaturizerConfig":
        d = dict(d)
        for name in ("word_ngrams", "char_ngrams"):
            if d.get(name) is not None:
                d[name] = tuple(d[name])
        return cls(**d)


@dataclass(frozen=True)
class FeatureVector:
    indices: np.ndarray
    values: np.ndarray
    dimension: int

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.values, self.values)))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dimension)
        out[self.indices] = self.values
        return out


@dataclass(frozen=True)
class Featurizer:
    config: FeaturizerConfig
    idf: Optional[np.ndarray] = None
    fitted_on: int = 0

    @property
    def dimension(self) -> int:
        return self.config.dimension


def preprocess(text: str, lowercase: bool = True) -> str:
    text = unicodedata.normalize("NFC", text)
    if lowercase:
        text = text.lower()
    return " ".join(text.split())


@lru_cache(maxsize=1 << 20)
def _hash(tag: bytes, gram: str) -> int:
    return fnv1a64(tag + gram.encode("utf-8"))


def ngram_hashes(text: str, config: FeaturizerConfig) -> list[int]:
    """64-bit hashes of every n-gram occurrence in ``text`` (already preprocessed)."""
    out = []
    if config.word_ngrams is not None:
        tokens = _TOKEN_RE.findall(text)
        lo, hi = config.word_ngrams
        for n in range(lo, hi + 1):
            for i in range(len(tokens) - n + 1):
                out.append(_hash(WORD_TAG, " ".join(tokens[i:i + n])))
    if config.char_ngrams is not None and text:
        padded = f" {text} "
        lo, hi = config.char_ngrams
        for n in range(lo, hi + 1):
            for i in range(len(padded) - n + 1):
                out.append(_hash(CHAR_TAG, padded[i:i + n]))
    return out


def _counts(text: str, config: FeaturizerConfig) -> tuple[np.ndarray, np.ndarray]:
    hashes = ngram_hashes(preprocess(text, config.lowercase), config)
    if not hashes:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    idx = np.array([h % config.dimension for h in hashes], dtype=np.int64)
    uniq, counts = np.unique(idx, return_counts=True)
    return uniq, counts.astype(np.float64)


def _texts(corpus) -> list[str]:
    if hasattr(corpus, "texts"):
        return list(corpus.texts)
    return list(corpus)


def fit_featurizer(config: FeaturizerConfig, corpus) -> Featurizer:
    """Fit smoothed IDF ``ln((1 + N) / (1 + df)) + 1`` over a corpus.

    ``corpus`` is a :class:`~hiertext.data.Dataset` or any iterable of texts.
    """
    texts = _texts(corpus)
    if not config.use_idf:
        return Featurizer(config, None, len(texts))
    if not texts:
        raise EmptyCorpus("cannot fit IDF on an empty corpus")
    df = np.zeros(config.dimension, dtype=np.int64)
    for text in texts:
        idx, _ = _counts(text, config)
        df[idx] += 1
    n = len(texts)
    idf = np.log((1.0 + n) / (1.0 + df)) + 1.0
    return Featurizer(config, idf, n)


def transform(f: Featurizer, text: str) -> FeatureVector:
    idx, vals = _counts(text, f.config)
    if f.idf is not None:
        vals = vals * f.idf[idx]
    if idx.size:
        vals = vals / math.sqrt(float(np.dot(vals, vals)))
    return FeatureVector(idx, vals, f.dimension)


def transform_many(f: Featurizer, texts: Iterable[str]) -> sp.csr_matrix:
    """Row-stacked feature vectors as a CSR matrix of shape (n, dimension)."""
    indptr = [0]
    indices = []
    data = []
    for text in texts:
        vec = transform(f, text)
        indices.append(vec.indices)
        data.append(vec.values)
        indptr.append(indptr[-1] + vec.nnz)
    n = len(indptr) - 1
    return sp.csr_matrix(
        (np.concatenate(data) if data else np.zeros(0),
         np.concatenate(indices) if indices else np.zeros(0, dtype=np.int64),
         np.array(indptr, dtype=np.int64)),
        shape=(n, f.dimension),
    )


def stack(vectors: Sequence[FeatureVector], dimension: int) -> sp.csr_matrix:
    indptr = [0]
    for v in vectors:
        if v.dimension != dimension:
            raise DimensionMismatch(f"feature dimension {v.dimension} != model dimension {dimension}")
        indptr.append(indptr[-1] + v.nnz)
    if vectors:
        data = np.concatenate([v.values for v in vectors])
        idx = np.concatenate([v.indices for v in vectors])
    else:
        data, idx = np.zeros(0), np.zeros(0, dtype=np.int64)
    return sp.csr_matrix((data, idx, np.array(indptr, dtype=np.int64)),
                         shape=(len(vectors), dimension))
