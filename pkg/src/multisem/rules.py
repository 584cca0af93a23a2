"""Turning head scores into predicted label sets.

Two fine-label selection rules are supported:

* ``TopK``: keep the ``k`` highest-scoring fine labels, where ``k`` is the
  size of the ground-truth fine set of that sample (used with softmax scores).
* ``Threshold``: keep every fine label whose sigmoid score is strictly above
  ``tau``.

Ties are always broken toward the smaller index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from multisem.errors import BadK, ConfigError

DEFAULT_TAU = 0.7


@dataclass(frozen=True)
class TopK:
    name = "topk"

    def to_dict(self):
        return {"name": self.name}


@dataclass(frozen=True)
class Threshold:
    tau: float = DEFAULT_TAU
    name = "threshold"

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ConfigError(f"threshold tau must lie in (0, 1), got {self.tau}")

    def to_dict(self):
        return {"name": self.name, "tau": self.tau}


def make_rule(name, tau=DEFAULT_TAU):
    if name == "topk":
        return TopK()
    if name == "threshold":
        return Threshold(tau)
    raise ConfigError(f"unknown selection rule {name!r}")


@dataclass(frozen=True)
class SamplePrediction:
    fine_pred: frozenset
    coarse_pred: int


def select_topk(fine_scores, k: int) -> frozenset:
    scores = np.asarray(fine_scores, dtype=float)
    if not 1 <= k <= scores.shape[0]:
        raise BadK(f"k={k} outside [1, {scores.shape[0]}]")
    order = np.argsort(-scores, kind="stable")
    return frozenset(int(i) for i in order[:k])


def select_threshold(fine_scores, tau: float) -> frozenset:
    scores = np.asarray(fine_scores, dtype=float)
    return frozenset(int(i) for i in np.flatnonzero(scores > tau))


def predict_coarse(coarse_scores) -> int:
    scores = np.asarray(coarse_scores, dtype=float)
    if scores.size == 0:
        raise ValueError("empty coarse score vector")
    # np.argmax returns the first maximum
    return int(np.argmax(scores))


def fine_correct(pred, truth) -> bool:
    return frozenset(pred) == frozenset(truth)


def apply_rule(fine_scores, coarse_scores, rule, truth_fine_size=None) -> SamplePrediction:
    if isinstance(rule, TopK):
        if truth_fine_size is None or truth_fine_size < 1:
            raise BadK("TopK needs the ground-truth fine-set size (>= 1)")
        fine = select_topk(fine_scores, truth_fine_size)
    elif isinstance(rule, Threshold):
        fine = select_threshold(fine_scores, rule.tau)
    else:
        raise ConfigError(f"unsupported rule {rule!r}")
    return SamplePrediction(fine, predict_coarse(coarse_scores))
