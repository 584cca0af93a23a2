"""Quadrant counting and the interpretability indexes IA / IR / IP / IF.

Every evaluated sample falls in exactly one quadrant, crossing "fine-label
set predicted exactly" with "coarse category predicted correctly":

    FTCT  fine right, coarse right   (an interpretable prediction)
    FTCF  fine right, coarse wrong
    FFCT  fine wrong, coarse right
    FFCF  fine wrong, coarse wrong

Ratios whose denominator is zero are reported as ``None`` rather than 0.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from multisem.errors import DimensionMismatch, EmptyEvaluation, MissingPrediction, ParseError, UnknownLabel
from multisem.rules import SamplePrediction, TopK, apply_rule, fine_correct


class Quadrant(enum.Enum):
    FTCT = "ftct"
    FTCF = "ftcf"
    FFCT = "ffct"
    FFCF = "ffcf"


@dataclass(frozen=True)
class QuadrantCounts:
    ftct: int = 0
    ftcf: int = 0
    ffct: int = 0
    ffcf: int = 0

    def __post_init__(self):
        if min(self.ftct, self.ftcf, self.ffct, self.ffcf) < 0:
            raise ValueError("quadrant counts must be non-negative")

    @property
    def total(self):
        return self.ftct + self.ftcf + self.ffct + self.ffcf

    def to_dict(self):
        return {"ftct": self.ftct, "ftcf": self.ftcf, "ffct": self.ffct, "ffcf": self.ffcf}


@dataclass(frozen=True)
class MetricConfig:
    alpha: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise ValueError("alpha must be finite and non-negative")


def classify_sample(fine_ok: bool, coarse_ok: bool) -> Quadrant:
    if fine_ok:
        return Quadrant.FTCT if coarse_ok else Quadrant.FTCF
    return Quadrant.FFCT if coarse_ok else Quadrant.FFCF


def accumulate(counts: QuadrantCounts, quadrant: Quadrant) -> QuadrantCounts:
    key = quadrant.value
    return QuadrantCounts(**{**counts.to_dict(), key: getattr(counts, key) + 1})


def merge(a: QuadrantCounts, b: QuadrantCounts) -> QuadrantCounts:
    return QuadrantCounts(a.ftct + b.ftct, a.ftcf + b.ftcf, a.ffct + b.ffct, a.ffcf + b.ffcf)


def _ratio(num, den):
    return num / den if den else None


def ia(c: QuadrantCounts) -> float:
    if c.total == 0:
        raise EmptyEvaluation("no samples evaluated")
    return c.ftct / c.total


def ir(c: QuadrantCounts):
    return _ratio(c.ftct, c.ftct + c.ffct)


def ip(c: QuadrantCounts):
    return _ratio(c.ftct, c.ftct + c.ftcf)


def if_score(ip_value, ir_value, cfg: MetricConfig = MetricConfig()):
    """(alpha^2 + 1) * IP * IR / (IP + IR); alpha = 1 gives IF1."""
    if ip_value is None or ir_value is None or ip_value + ir_value == 0:
        return None
    lo, hi = sorted((ip_value, ir_value))
    # the harmonic mean lies in [lo, hi]; clipping only removes rounding drift
    harmonic = min(max(2 * ip_value * ir_value / (ip_value + ir_value), lo), hi)
    return (cfg.alpha**2 + 1) / 2 * harmonic


def coarse_accuracy(c: QuadrantCounts) -> float:
    if c.total == 0:
        raise EmptyEvaluation("no samples evaluated")
    return (c.ftct + c.ffct) / c.total


def fine_accuracy(c: QuadrantCounts) -> float:
    if c.total == 0:
        raise EmptyEvaluation("no samples evaluated")
    return (c.ftct + c.ftcf) / c.total


@dataclass(frozen=True)
class PredictionRecord:
    """Raw head scores for one image, or pre-selected labels from a third-party log."""

    id: str
    fine_scores: np.ndarray | None = None
    coarse_scores: np.ndarray | None = None
    fine_pred: frozenset | None = None
    coarse_pred: int | None = None

    @property
    def preselected(self):
        return self.fine_scores is None

    def to_dict(self):
        if self.preselected:
            return {"id": self.id, "fine_pred": sorted(self.fine_pred), "coarse_pred": self.coarse_pred}
        return {
            "id": self.id,
            "fine_scores": [float(v) for v in self.fine_scores],
            "coarse_scores": [float(v) for v in self.coarse_scores],
        }


def read_predictions(data, h=None, source=None):
    """Parse predictions JSONL (score form or pre-selected form).

    Pre-selected labels may be given as indices or, when ``h`` is supplied,
    as label names.
    """
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    out = []
    for lineno, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            sid = str(obj["id"])
            if "fine_scores" in obj:
                rec = PredictionRecord(
                    sid,
                    np.asarray(obj["fine_scores"], dtype=float),
                    np.asarray(obj["coarse_scores"], dtype=float),
                )
            else:
                fine = obj["fine_pred"]
                coarse = obj["coarse_pred"]
                if h is not None:
                    fine = [h.fine_index(f) if isinstance(f, str) else f for f in fine]
                    coarse = h.coarse_index(coarse) if isinstance(coarse, str) else coarse
                rec = PredictionRecord(sid, fine_pred=frozenset(int(f) for f in fine), coarse_pred=int(coarse))
        except UnknownLabel:
            raise
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad prediction record ({exc})", line=lineno, source=source) from None
        out.append(rec)
    return out


def write_predictions(preds: Iterable[PredictionRecord]) -> bytes:
    return "".join(json.dumps(p.to_dict(), separators=(",", ":")) + "\n" for p in preds).encode("utf-8")


@dataclass(frozen=True)
class InterpretabilityReport:
    counts: QuadrantCounts
    ia: float
    ir: float | None
    ip: float | None
    if_score: float | None
    coarse_accuracy: float
    fine_accuracy: float
    alpha: float
    rule: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.counts.total

    @classmethod
    def from_counts(cls, counts, rule=None, cfg: MetricConfig = MetricConfig()):
        p, r = ip(counts), ir(counts)
        return cls(
            counts,
            ia(counts),
            r,
            p,
            if_score(p, r, cfg),
            coarse_accuracy(counts),
            fine_accuracy(counts),
            cfg.alpha,
            dict(rule or {}),
        )

    def to_dict(self):
        return {
            "counts": self.counts.to_dict(),
            "ia": self.ia,
            "ir": self.ir,
            "ip": self.ip,
            "if": self.if_score,
            "alpha": self.alpha,
            "coarse_accuracy": self.coarse_accuracy,
            "fine_accuracy": self.fine_accuracy,
            "rule": self.rule,
            "n": self.n,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def summary(self):
        def fmt(v):
            return "n/a" if v is None else f"{v:.4f}"

        return (
            f"n={self.n} IA={fmt(self.ia)} IR={fmt(self.ir)} IP={fmt(self.ip)} "
            f"IF(alpha={self.alpha:g})={fmt(self.if_score)} coarse_acc={fmt(self.coarse_accuracy)} "
            f"fine_acc={fmt(self.fine_accuracy)}"
        )


def predict_sample(pred: PredictionRecord, rule, truth_size, n_fine, n_coarse) -> SamplePrediction:
    if pred.preselected:
        if any(not 0 <= i < n_fine for i in pred.fine_pred) or not 0 <= pred.coarse_pred < n_coarse:
            raise DimensionMismatch(f"prediction {pred.id!r} has out-of-range label indices")
        return SamplePrediction(pred.fine_pred, pred.coarse_pred)
    if pred.fine_scores.shape != (n_fine,) or pred.coarse_scores.shape != (n_coarse,):
        raise DimensionMismatch(
            f"prediction {pred.id!r} has score lengths {pred.fine_scores.shape[0]}/"
            f"{pred.coarse_scores.shape[0]}, expected {n_fine}/{n_coarse}"
        )
    return apply_rule(pred.fine_scores, pred.coarse_scores, rule, truth_size)


def count_quadrants(records, predictions: Mapping[str, PredictionRecord], rule, h) -> QuadrantCounts:
    counts = QuadrantCounts()
    for rec in records:
        pred = predictions.get(rec.id)
        if pred is None:
            raise MissingPrediction(rec.id)
        truth = h.fine_indices(rec.fine)
        sp = predict_sample(pred, rule, len(truth), h.n_fine, h.n_coarse)
        q = classify_sample(fine_correct(sp.fine_pred, truth), sp.coarse_pred == h.coarse_index(rec.coarse))
        counts = accumulate(counts, q)
    return counts


def build_report(records, predictions, h, rule=TopK(), cfg: MetricConfig = MetricConfig()):
    """Evaluate ``predictions`` (mapping id -> PredictionRecord, or a list) against ``records``."""
    if not isinstance(predictions, Mapping):
        predictions = {p.id: p for p in predictions}
    counts = count_quadrants(records, predictions, rule, h)
    return InterpretabilityReport.from_counts(counts, rule.to_dict(), cfg)
