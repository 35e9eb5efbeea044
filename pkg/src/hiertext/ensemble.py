"""Hard majority voting and grid-searched weighted averaging of prediction sets."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .data import Dataset
from .errors import InvalidStep, Misaligned, WeightLengthMismatch
from .evaluation import macro_f1
from .predictions import PredictionSet, check_aligned


def _require_members(preds: Sequence[PredictionSet], minimum: int) -> None:
    if len(preds) < minimum:
        raise ValueError(f"need at least {minimum} prediction sets, got {len(preds)}")
    check_aligned(preds)


def majority_vote(preds: Sequence[PredictionSet], model_id: str = "majority_vote") -> PredictionSet:
    """Per example, the label most members predicted.

    Ties go to the tied label with the largest summed probability, then to
    the earliest class. Member probabilities are sorted before summing, so
    the result does not depend on member order even in floating point. The
    output probabilities are the plain member mean.
    """
    _require_members(preds, 2)
    first = preds[0]
    n, k = len(first), len(first.class_list)
    if n == 0:
        return PredictionSet(model_id, first.class_list, first.example_ids, np.zeros((0, k)),
                             np.zeros(0, dtype=np.int64))
    votes = np.zeros((n, k), dtype=np.int64)
    rows = np.arange(n)
    for member in preds:
        votes[rows, member.label_idx] += 1
    stacked = np.sort(np.stack([m.probs for m in preds]), axis=0)
    summed = stacked.sum(axis=0)
    tied = votes == votes.max(axis=1, keepdims=True)
    score = np.where(tied, summed, -np.inf)
    return PredictionSet(model_id, first.class_list, first.example_ids,
                         summed / len(preds), np.argmax(score, axis=1))


def _check_weights(weights: Sequence[float], n_members: int) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.shape[0] != n_members:
        raise WeightLengthMismatch(f"{w.shape[0] if w.ndim == 1 else w.shape} weights for {n_members} members")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"weights must be non-negative and sum to 1, got {list(w)}")
    return w


def weighted_average(preds: Sequence[PredictionSet], weights: Sequence[float],
                     model_id: str = "weighted_average") -> PredictionSet:
    _require_members(preds, 1)
    w = _check_weights(weights, len(preds))
    first = preds[0]
    probs = np.zeros_like(first.probs)
    for wm, member in zip(w, preds):
        probs += wm * member.probs
    return PredictionSet.from_probs(model_id, first.class_list, first.example_ids, probs)


def simplex_grid(n_members: int, step: float) -> list[tuple]:
    """All weight vectors on the simplex with coordinates in multiples of ``step``.

    Returned in lexicographically ascending order of the weights.
    """
    if step <= 0 or step > 1:
        raise InvalidStep(f"step must lie in (0, 1], got {step}")
    units = round(1.0 / step)
    if abs(units * step - 1.0) > 1e-9:
        raise InvalidStep(f"step {step} does not divide 1 evenly")

    def compositions(total, parts):
        if parts == 1:
            yield (total,)
            return
        for first in range(total + 1):
            for rest in compositions(total - first, parts - 1):
                yield (first,) + rest

    return [tuple(c / units for c in comp) for comp in compositions(units, n_members)]


def _truth_labels(truth, ids: Sequence[str], level) -> list:
    if isinstance(truth, Dataset):
        gold = dict(zip(truth.ids, truth.labels(level)))
    elif isinstance(truth, dict):
        gold = truth
    else:
        truth = list(truth)
        if len(truth) != len(ids):
            raise Misaligned(f"{len(truth)} truth labels for {len(ids)} predictions")
        return truth
    missing = [i for i in ids if gold.get(i) is None]
    if missing:
        raise Misaligned(f"no gold label for id {missing[0]!r}")
    return [gold[i] for i in ids]


def grid_search_weights(preds: Sequence[PredictionSet], truth,
                        step: float = 0.1) -> tuple[tuple, float]:
    """Best simplex weights by validation macro F1.

    ``truth`` is a labelled :class:`Dataset`, an id-to-label dict, or a label
    list aligned with the predictions. Ties keep the lexicographically
    smallest weight vector.
    """
    _require_members(preds, 1)
    first = preds[0]
    gold = _truth_labels(truth, first.example_ids, first.level)
    best_w, best_f1 = None, -1.0
    for w in simplex_grid(len(preds), step):
        fused = weighted_average(preds, w)
        score = macro_f1(gold, fused.labels, first.class_list)
        if score > best_f1:
            best_w, best_f1 = w, score
    return best_w, best_f1
