"""Classifier-agnostic evaluation: prediction-log parsing, confusion matrix,
and accuracy / sensitivity / specificity / precision / F1 in percent.

The positive class is fixed to malignant. Undefined ratios (empty
denominator) are returned as None and rendered "n/a", never silently 0 or
100.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence

LABELS = ("benign", "malignant")
LOG_HEADER = ["case_id", "predicted", "confidence", "truth"]


@dataclass(frozen=True)
class PredictionRecord:
    case_id: str
    predicted: str
    confidence: float
    truth: str


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricsReport:
    confusion: ConfusionMatrix
    accuracy: Optional[float]
    sensitivity: Optional[float]
    specificity: Optional[float]
    precision: Optional[float]
    f1: Optional[float]


class PredictionLogError(ValueError):
    pass


def _parse_confidence(token: str, lineno: int) -> float:
    token = token.strip()
    try:
        if token.endswith("%"):
            value = float(token[:-1].strip()) / 100.0
        else:
            value = float(token)
    except ValueError:
        raise PredictionLogError(f"line {lineno}: bad confidence {token!r}") from None
    if not 0.0 <= value <= 1.0 or math.isnan(value):
        raise PredictionLogError(f"line {lineno}: confidence {token!r} out of [0, 1]")
    return value


def parse_prediction_log(data: bytes | str) -> list[PredictionRecord]:
    """Parse a `case_id,predicted,confidence,truth` CSV log.

    Confidence accepts a decimal fraction ("0.978") or a percent token
    ("97.8%"). Errors name the offending line; duplicate case_ids name both
    lines involved.
    """
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != LOG_HEADER:
        raise PredictionLogError(f"bad header {header!r}, expected {LOG_HEADER}")
    records = []
    seen: dict[str, int] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise PredictionLogError(f"line {lineno}: expected 4 fields, got {len(row)}")
        case_id, predicted, confidence, truth = (f.strip() for f in row)
        if predicted not in LABELS:
            raise PredictionLogError(f"line {lineno}: unknown label {predicted!r}")
        if truth not in LABELS:
            raise PredictionLogError(f"line {lineno}: unknown label {truth!r}")
        if case_id in seen:
            raise PredictionLogError(
                f"duplicate case_id {case_id!r} on lines {seen[case_id]} and {lineno}"
            )
        seen[case_id] = lineno
        records.append(
            PredictionRecord(case_id, predicted, _parse_confidence(confidence, lineno), truth)
        )
    return records


def confusion(records: Sequence[PredictionRecord]) -> ConfusionMatrix:
    """Count tp/fp/fn/tn with malignant as the positive class."""
    if not records:
        raise ValueError("no records to evaluate")
    tp = fp = fn = tn = 0
    for r in records:
        if r.predicted == "malignant":
            if r.truth == "malignant":
                tp += 1
            else:
                fp += 1
        else:
            if r.truth == "malignant":
                fn += 1
            else:
                tn += 1
    return ConfusionMatrix(tp, fp, fn, tn)


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    return 100.0 * (cm.tp + cm.tn) / cm.total


def sensitivity(cm: ConfusionMatrix) -> Optional[float]:
    """True positive rate; None when there are no positives."""
    if cm.tp + cm.fn == 0:
        return None
    return 100.0 * cm.tp / (cm.tp + cm.fn)


def specificity(cm: ConfusionMatrix) -> Optional[float]:
    """True negative rate; None when there are no negatives."""
    if cm.tn + cm.fp == 0:
        return None
    return 100.0 * cm.tn / (cm.tn + cm.fp)


def precision(cm: ConfusionMatrix) -> Optional[float]:
    """Positive predictive value; None when nothing was predicted positive."""
    if cm.tp + cm.fp == 0:
        return None
    return 100.0 * cm.tp / (cm.tp + cm.fp)


def f1(precision_pct: float, recall_pct: float) -> float:
    """Harmonic mean 2PR/(P+R) of two percentages."""
    if precision_pct + recall_pct == 0:
        raise ValueError("f1 undefined when precision + recall = 0")
    return 2.0 * precision_pct * recall_pct / (precision_pct + recall_pct)


def metrics_report(records: Sequence[PredictionRecord]) -> MetricsReport:
    """All five metrics from one confusion matrix; F1 is computed from this
    report's own precision and sensitivity."""
    cm = confusion(records)
    sens = sensitivity(cm)
    prec = precision(cm)
    if sens is None or prec is None or sens + prec == 0:
        f1_value = None
    else:
        f1_value = f1(prec, sens)
    return MetricsReport(
        confusion=cm,
        accuracy=accuracy(cm),
        sensitivity=sens,
        specificity=specificity(cm),
        precision=prec,
        f1=f1_value,
    )


def paper_rounding(report: MetricsReport) -> dict[str, Optional[int]]:
    """Integer display matching the published table: round half up for
    accuracy/sensitivity/specificity/precision, truncation for F1 (the table's
    F1 cells are consistent only with truncation of 2PR/(P+R))."""

    def nearest(v):
        return None if v is None else math.floor(v + 0.5)

    return {
        "accuracy": nearest(report.accuracy),
        "sensitivity": nearest(report.sensitivity),
        "specificity": nearest(report.specificity),
        "precision": nearest(report.precision),
        "f1": None if report.f1 is None else math.floor(report.f1),
    }


def report_to_dict(report: MetricsReport, paper_round: bool = False) -> dict:
    """Machine-readable rendering; percentages carry two decimals."""

    def fmt(v):
        return None if v is None else round(v, 2)

    d = {
        "confusion": {
            "tp": report.confusion.tp,
            "fp": report.confusion.fp,
            "fn": report.confusion.fn,
            "tn": report.confusion.tn,
        },
        "metrics": {
            "accuracy": fmt(report.accuracy),
            "sensitivity": fmt(report.sensitivity),
            "specificity": fmt(report.specificity),
            "precision": fmt(report.precision),
            "f1": fmt(report.f1),
        },
    }
    if paper_round:
        d["paper_rounded"] = paper_rounding(report)
    return d


def render_report_text(report: MetricsReport, paper_round: bool = False) -> str:
    """Human-readable rendering of the same data."""

    def pct(v):
        return "n/a" if v is None else f"{v:.2f}%"

    cm = report.confusion
    lines = [
        f"confusion (positive=malignant): tp={cm.tp} fp={cm.fp} fn={cm.fn} tn={cm.tn}",
        f"accuracy     {pct(report.accuracy)}",
        f"sensitivity  {pct(report.sensitivity)}",
        f"specificity  {pct(report.specificity)}",
        f"precision    {pct(report.precision)}",
        f"f1           {pct(report.f1)}",
    ]
    if paper_round:
        rounded = paper_rounding(report)
        cells = " ".join(
            f"{k}={'n/a' if v is None else f'{v}%'}" for k, v in rounded.items()
        )
        lines.append(f"paper-rounded: {cells}")
    return "\n".join(lines) + "\n"
