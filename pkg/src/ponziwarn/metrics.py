"""Evaluation metrics: positive-class F1, per-scale reports, reporting threshold."""

from __future__ import annotations

from dataclasses import dataclass, field


def f1_score(predictions, labels) -> float:
    """F1 of the positive (Ponzi) class; 0.0 when precision + recall is 0."""
    predictions = list(predictions)
    labels = list(labels)
    if len(predictions) != len(labels):
        raise ValueError(f"{len(predictions)} predictions vs {len(labels)} labels")
    tp = sum(1 for p, t in zip(predictions, labels) if p == 1 and t == 1)
    fp = sum(1 for p, t in zip(predictions, labels) if p == 1 and t == 0)
    fn = sum(1 for p, t in zip(predictions, labels) if p == 0 and t == 1)
    if 2 * tp + fp + fn == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


@dataclass
class ScaleReport:
    """Per-scale F1 results for one method, possibly over several repeats."""

    method: str
    delta: int
    per_repeat: list[list[float]] = field(default_factory=list)

    def __post_init__(self):
        m = self.m
        for row in self.per_repeat:
            if len(row) != m:
                raise ValueError("all repeats must cover the same scales")
            if any(not 0.0 <= f1 <= 1.0 for f1 in row):
                raise ValueError("F1 values must lie in [0, 1]")

    @property
    def m(self) -> int:
        return len(self.per_repeat[0]) if self.per_repeat else 0

    @property
    def repeats(self) -> int:
        return len(self.per_repeat)

    @property
    def mean(self) -> list[float]:
        return [
            sum(row[k] for row in self.per_repeat) / self.repeats
            for k in range(self.m)
        ]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "delta": self.delta,
            "repeats": self.repeats,
            "per_repeat": self.per_repeat,
            "mean": self.mean,
        }


@dataclass(frozen=True)
class ThresholdResult:
    scale: int
    tx_count: int
    stabilized: bool     # False means the curve never settled before the last scale
    epsilon: float


def threshold_report(report: ScaleReport, epsilon: float = 0.005) -> ThresholdResult:
    """Smallest scale from which the mean F1 curve stays within epsilon of
    its final value. That scale times delta is the recommended transaction
    count for reporting an account.
    """
    curve = report.mean
    m = len(curve)
    if m < 3:
        raise ValueError(f"threshold analysis needs at least 3 scales, got {m}")
    final = curve[-1]
    scale = m
    for s in range(1, m + 1):
        if all(abs(curve[k - 1] - final) <= epsilon for k in range(s, m + 1)):
            scale = s
            break
    return ThresholdResult(
        scale=scale,
        tx_count=scale * report.delta,
        stabilized=scale < m,
        epsilon=epsilon,
    )
