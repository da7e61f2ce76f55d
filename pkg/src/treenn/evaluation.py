"""Accuracy at root and all-node granularity, plus multi-run summaries.

Accuracy is 100 * #correct / #total. Root accuracy counts only sentence
roots (the headline number); all-node accuracy counts every labeled node.
Argmax ties break to the smallest class index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams, forward, iter_states
from .treebank import Tree


@dataclass
class EvalReport:
    root_accuracy: float
    allnode_accuracy: float
    root_correct: int
    root_total: int
    allnode_correct: int
    allnode_total: int


@dataclass
class RunStats:
    accuracies: list[float]
    min: float
    q1: float
    median: float
    q3: float
    max: float


def evaluate(params: ModelParams, trees: list[Tree]) -> EvalReport:
    root_correct = root_total = 0
    all_correct = all_total = 0
    for tree in trees:
        annotated = forward(tree, params)
        for node in iter_states(annotated):
            label = node.tree.label
            if label is None:
                continue
            # np.argmax returns the first maximum: smallest class index.
            predicted = int(np.argmax(node.state.class_distribution))
            hit = int(predicted == label)
            all_total += 1
            all_correct += hit
            if node is annotated:
                root_total += 1
                root_correct += hit
    return EvalReport(
        root_accuracy=100.0 * root_correct / root_total if root_total else 0.0,
        allnode_accuracy=100.0 * all_correct / all_total if all_total else 0.0,
        root_correct=root_correct,
        root_total=root_total,
        allnode_correct=all_correct,
        allnode_total=all_total,
    )


def run_stats(accuracies: list[float]) -> RunStats:
    """Order statistics over per-run accuracies; quartiles use linear
    interpolation (the inclusive method), so (1,2,3,4) has median 2.5."""
    if not accuracies:
        raise ValueError("need at least one accuracy")
    arr = np.asarray(accuracies, dtype=np.float64)
    q1, med, q3 = np.percentile(arr, [25.0, 50.0, 75.0])
    return RunStats(
        accuracies=list(accuracies),
        min=float(arr.min()),
        q1=float(q1),
        median=float(med),
        q3=float(q3),
        max=float(arr.max()),
    )


EVAL_CSV_HEADER = (
    "root_accuracy,allnode_accuracy,root_correct,root_total,"
    "allnode_correct,allnode_total"
)


def eval_report_csv(report: EvalReport) -> str:
    row = (
        f"{report.root_accuracy!r},{report.allnode_accuracy!r},"
        f"{report.root_correct},{report.root_total},"
        f"{report.allnode_correct},{report.allnode_total}"
    )
    return f"{EVAL_CSV_HEADER}\n{row}\n"


RUNS_CSV_HEADER = "run_id,accuracy,min,q1,median,q3,max"


def run_stats_csv(stats: RunStats) -> str:
    """Per-run rows under run_id/accuracy, then one summary row carrying
    the order statistics."""
    lines = [RUNS_CSV_HEADER]
    for i, acc in enumerate(stats.accuracies):
        lines.append(f"{i},{acc!r},,,,,")
    lines.append(
        f"summary,,{stats.min!r},{stats.q1!r},{stats.median!r},"
        f"{stats.q3!r},{stats.max!r}"
    )
    return "\n".join(lines) + "\n"
