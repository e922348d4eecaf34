"""Confusion matrices, misclassification rate, bootstrap learning curves."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import cart
from .classes import DEFAULT_CLASSES, ClassTable, level2_name
from .features import FeatureMatrix
from .sampling import SplitPlan, stratified_sample


@dataclass
class ConfusionMatrix:
    """Counts of true (rows) against predicted (columns) class codes."""

    codes: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.int64)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.codes)
        if self.counts.shape != (k, k):
            raise ValueError("count matrix must be square and match the codes")
        if np.any(self.counts < 0):
            raise ValueError("negative counts")

    @classmethod
    def from_labels(cls, true, pred, codes=None) -> "ConfusionMatrix":
        true = np.asarray(true, dtype=np.int64)
        pred = np.asarray(pred, dtype=np.int64)
        if true.shape != pred.shape:
            raise ValueError("true and predicted labels differ in length")
        if codes is None:
            codes = np.union1d(true, pred)
        codes = np.asarray(codes, dtype=np.int64)
        k = len(codes)
        ti = np.searchsorted(codes, true)
        pi = np.searchsorted(codes, pred)
        for arr, idx in ((true, ti), (pred, pi)):
            if len(arr) and (idx.max() >= k or not np.array_equal(codes[idx], arr)):
                raise ValueError("labels outside the code list")
        M = np.bincount(ti * k + pi, minlength=k * k).reshape(k, k)
        return cls(codes, M)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_text(self) -> str:
        head = "true\\pred," + ",".join(str(c) for c in self.codes)
        rows = [f"{c}," + ",".join(str(v) for v in row) for c, row in zip(self.codes, self.counts)]
        return "\n".join([head] + rows) + "\n"

    def aligned(self) -> str:
        cells = [["true\\pred"] + [str(c) for c in self.codes]]
        cells += [[str(c)] + [str(v) for v in row] for c, row in zip(self.codes, self.counts)]
        width = max(len(x) for r in cells for x in r)
        return "\n".join(" ".join(x.rjust(width) for x in r) for r in cells) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ConfusionMatrix":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        codes = [int(v) for v in lines[0].split(",")[1:]]
        counts = [[int(v) for v in ln.split(",")[1:]] for ln in lines[1:]]
        return cls(np.array(codes), np.array(counts).reshape(len(codes), len(codes)))


def mcr(M: ConfusionMatrix) -> float:
    """``1 - trace / total``."""
    J = M.total
    if J == 0:
        raise ValueError("empty confusion matrix")
    return 1.0 - int(np.trace(M.counts)) / J


def format_mcr(value: float) -> str:
    return f"MCR {value:.3f}"


@dataclass
class ReportRow:
    code: int
    name: str
    total: int
    predicted: list[tuple[int, str, int]]     # (code, name, whole percent)


def confusion_report(M: ConfusionMatrix, classes: ClassTable | None = None) -> list[ReportRow]:
    """Per true class, the predicted classes ranked by share (whole percents)."""
    classes = classes or DEFAULT_CLASSES
    out = []
    for i, c in enumerate(M.codes.tolist()):
        row = M.counts[i]
        tot = int(row.sum())
        if tot == 0:
            continue
        nz = np.flatnonzero(row)
        # descending share, ties by code
        nz = sorted(nz.tolist(), key=lambda j: (-row[j], M.codes[j]))
        preds = [(int(M.codes[j]), _name(classes, int(M.codes[j])),
                  int(math.floor(100.0 * row[j] / tot + 0.5))) for j in nz]
        out.append(ReportRow(c, _name(classes, c), tot, preds))
    return out


def _name(classes: ClassTable, code: int) -> str:
    try:
        return level2_name(classes, code)
    except KeyError:
        return f"class {code}"


def format_report(rows: Sequence[ReportRow]) -> str:
    """Human-readable listing, e.g. ``Deciduous forest (67%), Coniferous forest (20%)``."""
    width = max((len(r.name) for r in rows), default=0)
    lines = []
    for r in rows:
        listing = ", ".join(f"{n[:1].upper()}{n[1:]} ({p}%)" for _, n, p in r.predicted)
        lines.append(f"{r.name.ljust(width)}  {listing}")
    return "\n".join(lines) + "\n"


def report_to_text(rows: Sequence[ReportRow]) -> str:
    lines = ["true_code,predicted_code,percent"]
    for r in rows:
        lines += [f"{r.code},{c},{p}" for c, _, p in r.predicted]
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------ bootstrap

Pipeline = Callable[[SplitPlan], np.ndarray]


@dataclass
class CurvePoint:
    size: int
    mean: float
    sd: float
    values: np.ndarray


def bootstrap_mcr(pipeline: Pipeline, labels, sizes: Sequence[int], replications: int = 50,
                  seed: int = 0) -> list[CurvePoint]:
    """Mean and sd of held-out MCR over replicated stratified splits per size.

    ``pipeline(plan)`` trains on ``plan.train_ids`` and returns predicted
    codes for ``plan.test_ids``.  Replication ``r`` uses seed ``seed + r``.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if replications < 2:
        raise ValueError("need at least 2 replications")
    for s in sizes:
        if s > len(labels):
            raise ValueError(f"training size {s} exceeds {len(labels)} labeled points")
    out = []
    for size in sizes:
        vals = np.empty(replications)
        for r in range(replications):
            plan = stratified_sample(labels, int(size), seed + r)
            pred = np.asarray(pipeline(plan))
            vals[r] = float(np.mean(pred != labels[plan.test_ids]))
        out.append(CurvePoint(int(size), float(vals.mean()), float(vals.std(ddof=1)), vals))
    return out


def curve_to_text(points: Sequence[CurvePoint]) -> str:
    lines = ["size,mean_mcr,sd_mcr"]
    lines += [f"{p.size},{p.mean!r},{p.sd!r}" for p in points]
    return "\n".join(lines) + "\n"


def tree_pipeline(fm: FeatureMatrix, columns: Sequence[str] | None = None,
                  pruned: bool = True, controls: cart.Controls | None = None,
                  weighted: bool = True) -> Pipeline:
    """Train-and-predict closure over a labeled feature matrix (ids are row positions)."""
    if fm.labels is None:
        raise ValueError("feature matrix carries no labels")
    names = list(columns) if columns is not None else list(fm.names)
    X = fm.values[:, [fm.names.index(c) for c in names]]
    y = fm.labels

    def run(plan: SplitPlan) -> np.ndarray:
        tr = plan.train_ids
        w = plan.case_weights(y[tr]) if weighted else None
        tree = cart.fit(X[tr], y[tr], w, names, controls, seed=plan.seed, pruned=pruned)
        return tree.predict(X[plan.test_ids])

    return run


def write_text(path: str | Path, text: str) -> None:
    Path(path).write_text(text)
