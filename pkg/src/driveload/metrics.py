"""Evaluation: binary detection metrics, ROC analysis, policy comparison.

High workload is the positive class throughout. Zero-denominator metrics
return 0 and set a flag instead of raising, so degenerate journeys still
produce a report.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, InvariantViolation
from .filtering import ContextPolicy, init_filter, run_filter
from .labeling import HIGH, LOW, LabelWindow, expand_labels, label_prompts


@dataclass(frozen=True)
class BinaryMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    flags: tuple[str, ...] = ()


def binary_metrics(truth, pred) -> BinaryMetrics:
    """Accuracy / precision / recall / F1 with High as the positive class."""
    truth = list(truth)
    pred = list(pred)
    if not truth or len(truth) != len(pred):
        raise InvariantViolation("truth and prediction sequences must align and be non-empty")
    tp = fp = tn = fn = 0
    for t, p in zip(truth, pred):
        if t not in (LOW, HIGH) or p not in (LOW, HIGH):
            raise InvariantViolation(f"labels must be {LOW!r} or {HIGH!r}")
        if p == HIGH:
            if t == HIGH:
                tp += 1
            else:
                fp += 1
        else:
            if t == HIGH:
                fn += 1
            else:
                tn += 1
    flags = []
    accuracy = (tp + tn) / len(truth)
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        precision, flags = 0.0, flags + ["precision_zero_division"]
    if tp + fn > 0:
        recall = tp / (tp + fn)
    else:
        recall, flags = 0.0, flags + ["recall_zero_division"]
    if precision + recall > 0:
        f1 = 2.0 * precision * recall / (precision + recall)
    else:
        f1, flags = 0.0, flags + ["f1_zero_division"]
    return BinaryMetrics(accuracy, precision, recall, f1, tuple(flags))


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts indexed [true, predicted] over a fixed label order."""

    labels: tuple[str, ...]
    counts: np.ndarray

    @classmethod
    def from_pairs(cls, truth, pred, labels) -> "ConfusionMatrix":
        labels = tuple(labels)
        index = {lab: i for i, lab in enumerate(labels)}
        counts = np.zeros((len(labels), len(labels)), dtype=int)
        truth = list(truth)
        pred = list(pred)
        if len(truth) != len(pred):
            raise InvariantViolation("truth and prediction sequences must align")
        for t, p in zip(truth, pred):
            if t not in index or p not in index:
                raise InvariantViolation(f"label outside {labels}: {t!r}/{p!r}")
            counts[index[t], index[p]] += 1
        return cls(labels, counts)

    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def accuracy(self) -> float:
        total = int(self.counts.sum())
        if total == 0:
            raise InsufficientDataError("empty confusion matrix")
        return float(np.trace(self.counts)) / total


def macro_f1(truth, pred, labels) -> float:
    """Unweighted mean of per-class one-vs-rest F1 (degenerate classes
    contribute 0)."""
    truth = list(truth)
    pred = list(pred)
    scores = []
    for lab in labels:
        t = [HIGH if x == lab else LOW for x in truth]
        p = [HIGH if x == lab else LOW for x in pred]
        scores.append(binary_metrics(t, p).f1)
    return float(np.mean(scores))


@dataclass(frozen=True)
class RocCurve:
    """Threshold-sweep ROC with trapezoidal AUC. Points run from (0, 0) to
    (1, 1) with non-decreasing FPR."""

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float


def _binary_arrays(truth, scores):
    truth = list(truth)
    s = np.asarray(list(scores), dtype=float)
    if len(truth) != s.size or s.size == 0:
        raise InvariantViolation("truth and scores must align and be non-empty")
    y = np.array([lab == HIGH for lab in truth], dtype=bool)
    for lab in truth:
        if lab not in (LOW, HIGH):
            raise InvariantViolation(f"labels must be {LOW!r} or {HIGH!r}")
    if not np.isfinite(s).all():
        raise InvariantViolation("scores must be finite")
    return y, s


def roc(truth, scores) -> RocCurve:
    """ROC over decision rule `High iff score >= threshold`, one point per
    distinct score. Ties share a point, so the trapezoidal AUC equals the
    Mann-Whitney statistic with half credit for ties."""
    y, s = _binary_arrays(truth, scores)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise InsufficientDataError("roc needs both classes present")
    order = np.argsort(-s, kind="stable")
    s_desc = s[order]
    y_desc = y[order]
    cum_tp = np.cumsum(y_desc)
    cum_fp = np.cumsum(~y_desc)
    # last index of each run of equal scores
    last = np.ones(s_desc.size, dtype=bool)
    np.not_equal(s_desc[:-1], s_desc[1:], out=last[:-1])
    tpr = np.concatenate(([0.0], cum_tp[last] / n_pos))
    fpr = np.concatenate(([0.0], cum_fp[last] / n_neg))
    thresholds = np.concatenate(([np.inf], s_desc[last]))
    auc = float(np.trapezoid(tpr, fpr))
    return RocCurve(fpr, tpr, thresholds, auc)


def best_f1_threshold(truth, scores) -> tuple[float, float]:
    """Exhaustive sweep for the threshold maximizing F1 of `score >= t`.

    Candidates are the minimum score (the all-High rule) plus the midpoints
    between consecutive distinct scores. Ties prefer the lower threshold,
    which decides High more often.
    """
    y, s = _binary_arrays(truth, scores)
    order = np.argsort(s, kind="stable")
    s_asc = s[order]
    y_asc = y[order]
    n_pos = int(y_asc.sum())
    suffix_tp = n_pos - np.concatenate(([0], np.cumsum(y_asc)))
    # cut index k: predict High for items k..n-1
    best_f1 = -1.0
    best_thr = float(s_asc[0])
    cuts = [(0, float(s_asc[0]))]
    changed = np.nonzero(s_asc[:-1] < s_asc[1:])[0]
    for i in changed:
        cuts.append((int(i) + 1, float((s_asc[i] + s_asc[i + 1]) / 2.0)))
    for k, thr in cuts:
        tp = int(suffix_tp[k])
        fp = (y_asc.size - k) - tp
        fn = n_pos - tp
        denom = 2 * tp + fp + fn
        f1 = 2.0 * tp / denom if denom > 0 else 0.0
        if f1 > best_f1:
            best_f1 = f1
            best_thr = thr
    return best_thr, float(best_f1)


def labeled_filter_scores(
    journey,
    tables,
    policy: ContextPolicy,
    window: LabelWindow | None = None,
    prior_low: float | None = None,
):
    """Run the filter over a journey and read pi_high at every labeled
    sample. Returns aligned (labels, scores) lists over the prompt-window
    instances."""
    labels = label_prompts(journey)
    expanded = expand_labels(journey, labels, window or LabelWindow())
    state = init_filter(policy, tables, prior_low)
    posteriors = run_filter(journey, state)
    score_at = {p.t: p.pi_high for p in posteriors}
    y: list[str] = []
    s: list[float] = []
    for sample, lab in expanded:
        y.append(lab)
        s.append(score_at[sample.t])
    return y, s


@dataclass(frozen=True)
class JourneyPolicyRow:
    journey_id: str
    n_instances: int
    auc: float | None
    f1: float
    threshold: float


@dataclass(frozen=True)
class PolicyResult:
    name: str
    n_instances: int
    auc: float
    f1: float
    threshold: float
    per_journey: tuple[JourneyPolicyRow, ...]


@dataclass(frozen=True)
class ComparisonReport:
    policies: tuple[PolicyResult, ...]
    n_journeys: int


def compare_policies(
    journeys,
    tables,
    policies: dict[str, ContextPolicy],
    *,
    window: LabelWindow | None = None,
    per_journey_tables: dict[str, dict] | None = None,
) -> ComparisonReport:
    """Evaluate several context policies on the same labeled journeys.

    Reports pooled AUC and pooled best-F1 per policy plus a per-journey
    breakdown (per-journey best-F1 threshold; AUC None when a journey saw
    a single class). Pass per_journey_tables for leave-one-out likelihoods.
    """
    journeys = list(journeys)
    if not journeys:
        raise InsufficientDataError("no journeys to compare on")
    if len(policies) < 2:
        raise InvariantViolation("comparison needs at least two policies")
    results = []
    for name, policy in policies.items():
        pooled_y: list[str] = []
        pooled_s: list[float] = []
        rows = []
        for j in journeys:
            jt = per_journey_tables[j.journey_id] if per_journey_tables else tables
            y, s = labeled_filter_scores(j, jt, policy, window)
            pooled_y.extend(y)
            pooled_s.extend(s)
            if not y:
                rows.append(JourneyPolicyRow(j.journey_id, 0, None, 0.0, 0.5))
                continue
            if len(set(y)) == 2:
                j_auc = roc(y, s).auc
            else:
                j_auc = None
            thr, f1 = best_f1_threshold(y, s)
            rows.append(JourneyPolicyRow(j.journey_id, len(y), j_auc, f1, thr))
        if not pooled_y:
            raise InsufficientDataError("no labeled instances in any journey")
        pooled_auc = roc(pooled_y, pooled_s).auc
        thr, f1 = best_f1_threshold(pooled_y, pooled_s)
        results.append(
            PolicyResult(name, len(pooled_y), pooled_auc, f1, thr, tuple(rows))
        )
    return ComparisonReport(tuple(results), len(journeys))
