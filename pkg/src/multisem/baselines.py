"""Published baseline numbers for the two-level scheme, kept as reference data.

Each row records the printed IP, IR and IF1 of one backbone under one
fine-label selection rule. ``recompute_if1`` re-derives IF1 from IP and IR so
the printed values can be checked for internal consistency.
"""

from __future__ import annotations

from dataclasses import dataclass

from multisem.metrics import MetricConfig, if_score

REFERENCE_TOLERANCE = 0.01


@dataclass(frozen=True)
class BaselineRow:
    setting: str
    model: str
    ia: float
    ip: float
    ir: float
    if1: float

    def recompute_if1(self):
        return if_score(self.ip, self.ir, MetricConfig(alpha=1.0))

    def deviation(self):
        return abs(self.recompute_if1() - self.if1)


# softmax head + focal loss, top-k selection
TOPK_ROWS = (
    BaselineRow("focal/topk", "VGG16", 0.6502, 0.9947, 0.7544, 0.8586),
    BaselineRow("focal/topk", "ResNet34", 0.6841, 0.9981, 0.7774, 0.8715),
    BaselineRow("focal/topk", "DenseNet121", 0.7295, 0.9988, 0.8102, 0.8913),
)

# sigmoid head + binary cross-entropy, threshold 0.7
THRESHOLD_ROWS = (
    BaselineRow("bce/threshold", "VGG16", 0.4947, 1.0000, 0.6146, 0.7567),
    BaselineRow("bce/threshold", "ResNet34", 0.5856, 1.0000, 0.6799, 0.8044),
    BaselineRow("bce/threshold", "DenseNet121", 0.5488, 1.0000, 0.6632, 0.7900),
)

ROWS = TOPK_ROWS + THRESHOLD_ROWS

# coarse head only ("unexplainable" accuracy)
COARSE_ONLY_ACCURACY = {"VGG16": 0.8457, "ResNet34": 0.8655, "DenseNet121": 0.8946}
