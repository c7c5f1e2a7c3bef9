"""Classification metrics, feature-subset evaluation, and the conformance
harness that compares fused rankings against the shipped reference tables."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .data import Dataset
from .fixtures import load_reference_metrics, load_reference_top_features
from .fusion import FusedRanking, top_k
from .models import ModelFamily, train_model


class EvaluationError(Exception):
    pass


# -- confusion matrix and metrics -------------------------------------------


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts of (true, predicted) label pairs; rows are true classes."""

    roster: tuple[int, ...]
    counts: np.ndarray

    def __post_init__(self) -> None:
        roster = tuple(int(c) for c in self.roster)
        counts = np.asarray(self.counts, dtype=np.int64)
        k = len(roster)
        if k == 0 or len(set(roster)) != k:
            raise EvaluationError("class roster must be non-empty and unique")
        if counts.shape != (k, k):
            raise EvaluationError(
                f"counts have shape {counts.shape}, expected ({k}, {k})"
            )
        if counts.min() < 0:
            raise EvaluationError("negative count")
        counts = counts.copy()
        counts.setflags(write=False)
        object.__setattr__(self, "roster", roster)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        total = self.total
        if total == 0:
            raise EvaluationError("empty confusion matrix")
        return float(np.trace(self.counts)) / total


def confusion_matrix(y_true, y_pred, roster=None) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.size == 0:
        raise EvaluationError("no rows to evaluate")
    if y_true.shape != y_pred.shape:
        raise EvaluationError("true and predicted labels differ in length")
    if roster is None:
        roster = np.union1d(y_true, y_pred)
    roster = np.asarray(sorted(int(c) for c in roster), dtype=np.int64)
    ti = np.searchsorted(roster, y_true)
    pi = np.searchsorted(roster, y_pred)
    k = roster.size
    bad = (
        (ti >= k)
        | (pi >= k)
        | (roster[np.minimum(ti, k - 1)] != y_true)
        | (roster[np.minimum(pi, k - 1)] != y_pred)
    )
    if bad.any():
        raise EvaluationError("label outside the class roster")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (ti, pi), 1)
    return ConfusionMatrix(roster=tuple(int(c) for c in roster), counts=counts)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    # a zero denominator reports the metric as 0 and clears the flag
    precision_defined: bool = True
    recall_defined: bool = True


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    per_class: Mapping[int, ClassMetrics]
    precision: float
    recall: float
    f1: float
    convention: str
    positive_class: int | None = None

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "convention": self.convention,
            "positive_class": self.positive_class,
            "per_class": {
                str(label): {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                    "precision_defined": m.precision_defined,
                    "recall_defined": m.recall_defined,
                }
                for label, m in self.per_class.items()
            },
        }


def classification_metrics(
    cm: ConfusionMatrix,
    convention: str = "macro",
    positive_class: int | None = None,
) -> MetricsReport:
    if cm.total == 0:
        raise EvaluationError("empty confusion matrix")
    counts = cm.counts.astype(np.float64)
    tp = np.diag(counts)
    pred_totals = counts.sum(axis=0)
    true_totals = counts.sum(axis=1)

    per_class: dict[int, ClassMetrics] = {}
    for i, label in enumerate(cm.roster):
        p_def = pred_totals[i] > 0
        r_def = true_totals[i] > 0
        p = float(tp[i] / pred_totals[i]) if p_def else 0.0
        r = float(tp[i] / true_totals[i]) if r_def else 0.0
        # single division keeps F1 exactly rounded; equals the harmonic
        # mean of p and r whenever p + r > 0
        fp = pred_totals[i] - tp[i]
        fn = true_totals[i] - tp[i]
        denom = 2.0 * tp[i] + fp + fn
        f1 = float(2.0 * tp[i] / denom) if denom > 0 else 0.0
        per_class[label] = ClassMetrics(
            precision=p,
            recall=r,
            f1=f1,
            support=int(true_totals[i]),
            precision_defined=bool(p_def),
            recall_defined=bool(r_def),
        )

    accuracy = cm.accuracy
    if convention == "positive_class":
        if positive_class is None or positive_class not in cm.roster:
            raise EvaluationError(
                f"positive class {positive_class!r} not in roster {cm.roster}"
            )
        m = per_class[positive_class]
        agg = (m.precision, m.recall, m.f1)
    elif convention == "macro":
        ms = list(per_class.values())
        agg = (
            float(np.mean([m.precision for m in ms])),
            float(np.mean([m.recall for m in ms])),
            float(np.mean([m.f1 for m in ms])),
        )
        positive_class = None
    elif convention == "micro":
        # single-label: micro precision = micro recall = accuracy
        agg = (accuracy, accuracy, accuracy)
        positive_class = None
    else:
        raise EvaluationError(f"unknown metrics convention: {convention!r}")

    return MetricsReport(
        accuracy=accuracy,
        per_class=per_class,
        precision=agg[0],
        recall=agg[1],
        f1=agg[2],
        convention=convention,
        positive_class=positive_class,
    )


# -- feature-subset evaluation ----------------------------------------------


def evaluate_feature_subset(
    train: Dataset,
    test: Dataset,
    features: Sequence[str],
    family: ModelFamily | str,
    seed: int = 0,
    overrides: Mapping | None = None,
    convention: str | None = None,
    positive_class: int | None = None,
) -> MetricsReport:
    """Train one classifier on the named feature columns only and score it
    on the test split.  Deterministic per seed."""
    if not features:
        raise EvaluationError("feature list must not be empty")
    tr = train.project(tuple(features))
    te = test.project(tuple(features))
    model = train_model(family, tr.rows, tr.labels, seed=seed, overrides=overrides)
    y_pred = model.predict(te.rows)
    roster = np.union1d(train.labels, test.labels)
    cm = confusion_matrix(te.labels, y_pred, roster=roster)
    if convention is None:
        if set(cm.roster) == {0, 1}:
            convention, positive_class = "positive_class", 1
        else:
            convention = "macro"
    return classification_metrics(cm, convention, positive_class)


# -- conformance harness -----------------------------------------------------


METHOD_LABELS = {
    "shap": "SHAP",
    "lime": "LIME",
    "dalex": "DALEX",
    "permutation": "DALEX",
    "leveled": "Leveled",
}

EXACT_ORDER_MATCH = "exact_order_match"
SET_MATCH = "set_match"
MISMATCH = "mismatch"


@dataclass(frozen=True)
class CellVerdict:
    dataset: str
    method: str
    computed: tuple[str, ...]
    reference: tuple[str, ...]
    verdict: str
    diff: str

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "method": self.method,
            "computed": list(self.computed),
            "reference": list(self.reference),
            "verdict": self.verdict,
            "diff": self.diff,
        }


@dataclass(frozen=True)
class RequiredCheck:
    name: str
    passed: bool
    detail: str

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass(frozen=True)
class ConformanceReport:
    cells: tuple[CellVerdict, ...]
    required: tuple[RequiredCheck, ...]
    passed: bool

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "required": [r.to_dict() for r in self.required],
            "cells": [c.to_dict() for c in self.cells],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ConformanceReport":
        return cls(
            cells=tuple(
                CellVerdict(
                    dataset=c["dataset"],
                    method=c["method"],
                    computed=tuple(c["computed"]),
                    reference=tuple(c["reference"]),
                    verdict=c["verdict"],
                    diff=c["diff"],
                )
                for c in d["cells"]
            ),
            required=tuple(
                RequiredCheck(name=r["name"], passed=r["passed"], detail=r["detail"])
                for r in d["required"]
            ),
            passed=bool(d["passed"]),
        )


def _judge(computed: tuple[str, ...], reference: tuple[str, ...]) -> tuple[str, str]:
    if computed == reference:
        return EXACT_ORDER_MATCH, ""
    diff = f"computed {list(computed)} vs reference {list(reference)}"
    if set(computed) == set(reference):
        return SET_MATCH, diff
    return MISMATCH, diff


def _top_names(fused: FusedRanking, k: int) -> tuple[str, ...]:
    return tuple(f.name for f in top_k(fused, k))


def conformance_check(
    computed: Mapping[str, tuple[Mapping[str, FusedRanking], FusedRanking]],
    reference: Mapping[tuple[str, str], tuple[str, ...]] | None = None,
) -> ConformanceReport:
    """Compare two-level fusion outputs against the reference top-k columns.

    `computed` maps a dataset tag to a (per_method, leveled) pair as returned
    by two_level_fuse.  Four checks are hard requirements; every other cell
    is reported informationally with its diff.
    """
    if reference is None:
        reference = load_reference_top_features()

    cells = []
    for (dataset, method), ref_column in sorted(reference.items()):
        if dataset not in computed:
            continue
        per_method, leveled = computed[dataset]
        fused = leveled if method == "leveled" else per_method.get(method)
        if fused is None:
            continue
        names = _top_names(fused, len(ref_column))
        verdict, diff = _judge(names, ref_column)
        cells.append(
            CellVerdict(
                dataset=dataset,
                method=method,
                computed=names,
                reference=ref_column,
                verdict=verdict,
                diff=diff,
            )
        )

    def cell_for(dataset: str, method: str) -> CellVerdict | None:
        for c in cells:
            if c.dataset == dataset and c.method == method:
                return c
        return None

    required = []

    def add_required(name: str, cell: CellVerdict | None, ok_when) -> None:
        if cell is None:
            required.append(
                RequiredCheck(name=name, passed=False, detail="not computed")
            )
            return
        passed, detail = ok_when(cell)
        required.append(RequiredCheck(name=name, passed=passed, detail=detail))

    add_required(
        "veremi_binary_leveled_top4_set",
        cell_for("veremi_binary", "leveled"),
        lambda c: (c.verdict in (EXACT_ORDER_MATCH, SET_MATCH), c.diff or "set matches"),
    )
    add_required(
        "veremi_multiclass_leveled_top4_set",
        cell_for("veremi_multiclass", "leveled"),
        lambda c: (c.verdict in (EXACT_ORDER_MATCH, SET_MATCH), c.diff or "set matches"),
    )
    add_required(
        "veremi_binary_lime_exact_order",
        cell_for("veremi_binary", "lime"),
        lambda c: (c.verdict == EXACT_ORDER_MATCH, c.diff or "order matches"),
    )
    add_required(
        "veremi_binary_dalex_top3_order",
        cell_for("veremi_binary", "dalex"),
        lambda c: (
            c.computed[:3] == c.reference[:3],
            f"computed top-3 {list(c.computed[:3])} vs reference {list(c.reference[:3])}",
        ),
    )

    return ConformanceReport(
        cells=tuple(cells),
        required=tuple(required),
        passed=all(r.passed for r in required),
    )


# -- Markdown rendering -------------------------------------------------------


def conformance_markdown(report: ConformanceReport) -> str:
    lines = ["## Conformance", ""]
    lines.append(f"Overall: {'PASS' if report.passed else 'FAIL'}")
    lines.append("")
    lines.append("| Required check | Passed | Detail |")
    lines.append("|---|---|---|")
    for r in report.required:
        lines.append(f"| {r.name} | {'yes' if r.passed else 'no'} | {r.detail} |")
    lines.append("")
    lines.append("| Dataset | Method | Verdict | Computed | Reference |")
    lines.append("|---|---|---|---|---|")
    for c in report.cells:
        lines.append(
            f"| {c.dataset} | {METHOD_LABELS.get(c.method, c.method)} | {c.verdict} |"
            f" {', '.join(c.computed)} | {', '.join(c.reference)} |"
        )
    return "\n".join(lines) + "\n"


def reference_metrics_markdown(rows=None) -> str:
    """Reference classifier metrics rendered per (dataset, classifier) block,
    one metric row by method column.  For context only; nothing in the test
    suite or pipeline asserts against these numbers."""
    if rows is None:
        rows = load_reference_metrics()
    lookup: dict[tuple[str, str], dict[tuple[str, str], float]] = {}
    for r in rows:
        lookup.setdefault((r.dataset, r.classifier), {})[(r.metric, r.method)] = r.value
    methods = ("shap", "lime", "dalex", "leveled")
    metrics = ("acc", "precision", "recall", "f1")
    lines = [
        "## Reference metrics (not recomputed)",
        "",
        "Values quoted for orientation only; this toolkit asserts nothing",
        "against them.",
    ]
    for (dataset, classifier), grid in sorted(lookup.items()):
        lines.append("")
        lines.append(f"### {dataset} / {classifier}")
        lines.append("")
        header = " | ".join(METHOD_LABELS[m] for m in methods)
        lines.append(f"| Metric | {header} |")
        lines.append("|---|" + "---|" * len(methods))
        for metric in metrics:
            vals = " | ".join(f"{grid[(metric, m)]:.2f}" for m in methods)
            lines.append(f"| {metric} | {vals} |")
    return "\n".join(lines) + "\n"
