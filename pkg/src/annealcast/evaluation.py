"""Metrics, paired t-tests, top-group flags and comparison tables."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy.special import betainc

from .errors import DomainError, InsufficientDataError, SchemaError, UndefinedMetricError

BCE_EPS = 1e-12
ALPHA = 0.05


def _pair(y, p):
    y = np.asarray(y, dtype=float).ravel()
    p = np.asarray(p, dtype=float).ravel()
    if y.shape != p.shape:
        raise SchemaError(f"length mismatch: {y.size} targets, {p.size} predictions")
    if y.size == 0:
        raise InsufficientDataError("no samples to evaluate")
    return y, p


def squared_errors(y, p):
    y, p = _pair(y, p)
    return (y - p) ** 2


def mse(y, p):
    return float(np.mean(squared_errors(y, p)))


def bce_terms(y, p):
    y, p = _pair(y, p)
    p = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    return -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))


def bce(y, p):
    """Mean binary cross-entropy with probabilities clipped to [1e-12, 1 - 1e-12]."""
    return float(np.mean(bce_terms(y, p)))


def _labels(y):
    y = np.asarray(y).ravel()
    if not np.isin(y, (0, 1)).all():
        raise DomainError("labels must be 0/1")
    return y.astype(int)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn


def confusion(y_true, y_pred):
    t = _labels(y_true)
    p = _labels(y_pred)
    if t.shape != p.shape:
        raise SchemaError("length mismatch")
    return ConfusionMatrix(
        tp=int(np.sum((t == 1) & (p == 1))),
        fp=int(np.sum((t == 0) & (p == 1))),
        tn=int(np.sum((t == 0) & (p == 0))),
        fn=int(np.sum((t == 1) & (p == 0))),
    )


def accuracy(cm):
    if cm.total == 0:
        raise InsufficientDataError("empty confusion matrix")
    return (cm.tp + cm.tn) / cm.total


def recall(cm):
    """TP / (TP + FN); 0 when there are no positives."""
    pos = cm.tp + cm.fn
    return cm.tp / pos if pos else 0.0


def _midranks(s):
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(len(s))
    sorted_s = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc(y_true, scores):
    """(concordant + tied/2) / (n_pos * n_neg) via the rank-sum identity."""
    y = _labels(y_true)
    s = np.asarray(scores, dtype=float).ravel()
    if s.shape != y.shape:
        raise SchemaError("length mismatch")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both classes")
    # integer-valued numerator (doubled) keeps the result exact
    twice_rank_sum = int(round(2.0 * _midranks(s)[y == 1].sum()))
    u2 = twice_rank_sum - n_pos * (n_pos + 1)
    return u2 / (2 * n_pos * n_neg)


def auc_contributions(y_true, scores):
    """Per-sample vector whose mean is the AUC.

    Each positive contributes its placement among negatives (fraction below,
    ties half) and each negative its placement among positives, weighted by
    n / (2 * class size) so both classes carry half the mean.
    """
    y = _labels(y_true)
    s = np.asarray(scores, dtype=float).ravel()
    pos = s[y == 1]
    neg = s[y == 0]
    if pos.size == 0 or neg.size == 0:
        raise UndefinedMetricError("AUC needs both classes")
    n = y.size
    out = np.empty(n)
    neg_sorted = np.sort(neg)
    pos_sorted = np.sort(pos)
    below = np.searchsorted(neg_sorted, pos, "left")
    upto = np.searchsorted(neg_sorted, pos, "right")
    out[y == 1] = (below + 0.5 * (upto - below)) / neg.size * n / (2 * pos.size)
    above = pos.size - np.searchsorted(pos_sorted, neg, "right")
    ties = np.searchsorted(pos_sorted, neg, "right") - np.searchsorted(pos_sorted, neg, "left")
    out[y == 0] = (above + 0.5 * ties) / pos.size * n / (2 * neg.size)
    return out


@dataclass(frozen=True)
class TTest:
    t: float
    p: float
    n: int


def student_t_two_sided(t, df):
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    return float(betainc(0.5 * df, 0.5, df / (df + t * t)))


def paired_t_test(loss_a, loss_b):
    """Two-sided paired t-test on d = loss_a - loss_b.

    If every difference is identical (sd = 0) the test is degenerate: p = 1
    when the mean difference is 0, else p = 0 with t = +/-inf.
    """
    a, b = _pair(loss_a, loss_b)
    n = a.size
    if n < 2:
        raise InsufficientDataError("paired t-test needs at least two samples")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return TTest(0.0, 1.0, n)
        return TTest(math.copysign(math.inf, mean), 0.0, n)
    t = mean / (sd / math.sqrt(n))
    return TTest(t, min(1.0, max(0.0, student_t_two_sided(t, n - 1))), n)


@dataclass(frozen=True)
class Flag:
    best: bool
    top: bool
    p: float  # vs. the best model; 1.0 for the best itself


def top_group(per_model, alpha=ALPHA, direction="minimize"):
    """Best model by mean plus every model not significantly worse (p > alpha).

    ``per_model`` maps name -> per-sample vector (losses when minimizing,
    correctness or AUC contributions when maximizing). Ties for the best mean
    go to the first name in iteration order.
    """
    if direction not in ("minimize", "maximize"):
        raise DomainError(f"unknown direction {direction!r}")
    names = list(per_model)
    if len(names) < 2:
        raise InsufficientDataError("need at least two models to compare")
    means = [float(np.mean(per_model[n])) for n in names]
    sign = 1.0 if direction == "minimize" else -1.0
    best = min(range(len(names)), key=lambda i: (sign * means[i], i))
    flags = {}
    for i, name in enumerate(names):
        if i == best:
            flags[name] = Flag(True, True, 1.0)
            continue
        p = paired_t_test(per_model[name], per_model[names[best]]).p
        flags[name] = Flag(False, p > alpha, p)
    return flags


METRIC_DIRECTION = {"mse": "minimize", "accuracy": "maximize", "auc": "maximize", "recall": "maximize"}


@dataclass
class EvalReport:
    """Metrics per model, plus best/top-group flags per headline metric.

    ``flags[metric][model]`` exists for every metric with a per-sample
    vector (mse, accuracy; auc only with the decomposition enabled). Other
    metrics get a star for the best value and no significance test.
    """

    task: str
    metrics: Dict[str, Dict[str, float]] = field(default_factory=dict)
    per_sample: Dict[str, Dict[str, List[float]]] = field(default_factory=dict)
    flags: Dict[str, Dict[str, Flag]] = field(default_factory=dict)
    n_test: int = 0

    def to_dict(self):
        return {
            "task": self.task,
            "n_test": self.n_test,
            "metrics": self.metrics,
            "flags": {
                m: {k: {"best": f.best, "top": f.top, "p": f.p} for k, f in fl.items()} for m, fl in self.flags.items()
            },
        }

    @classmethod
    def from_dict(cls, d):
        flags = {m: {k: Flag(**f) for k, f in fl.items()} for m, fl in d.get("flags", {}).items()}
        return cls(d["task"], d["metrics"], {}, flags, d.get("n_test", 0))


def headline_metrics(task):
    return ("mse",) if task == "regression" else ("accuracy", "auc")


def evaluate(task, y_true, predictions, alpha=ALPHA, auc_decomposition=False):
    """Score every model on the same test rows.

    Regression predictions are values; classification predictions are
    P(y = 1) with labels by threshold 0.5 and ``y_true`` coded 0/1.
    """
    y = np.asarray(y_true, dtype=float)
    rep = EvalReport(task, n_test=int(y.size))
    vectors: Dict[str, Dict[str, np.ndarray]] = {}
    for name, pred in predictions.items():
        pred = np.asarray(pred, dtype=float)
        if task == "regression":
            se = squared_errors(y, pred)
            rep.metrics[name] = {"mse": float(se.mean())}
            vectors[name] = {"mse": se}
        else:
            labels = (pred >= 0.5).astype(int)
            cm = confusion(y, labels)
            correct = (labels == y).astype(float)
            m = {"accuracy": accuracy(cm), "recall": recall(cm), "bce": bce(y, pred)}
            vec = {"accuracy": correct}
            try:
                m["auc"] = roc_auc(y, pred)
                if auc_decomposition:
                    vec["auc"] = auc_contributions(y, pred)
            except UndefinedMetricError:
                m["auc"] = float("nan")
            rep.metrics[name] = m
            vectors[name] = vec
        rep.per_sample[name] = {k: v.tolist() for k, v in vectors[name].items()}
    for metric in headline_metrics(task):
        vecs = {n: v[metric] for n, v in vectors.items() if metric in v}
        if len(vecs) == len(predictions) > 1:
            rep.flags[metric] = top_group(vecs, alpha, METRIC_DIRECTION[metric])
        else:
            rep.flags[metric] = _star_only({n: rep.metrics[n][metric] for n in predictions}, METRIC_DIRECTION[metric])
    return rep


def _star_only(values, direction):
    names = list(values)
    finite = [n for n in names if np.isfinite(values[n])]
    sign = 1.0 if direction == "minimize" else -1.0
    best = min(finite, key=lambda n: (sign * values[n], names.index(n))) if finite else None
    return {n: Flag(n == best, n == best, 1.0 if n == best else float("nan")) for n in names}


# -- comparison tables ------------------------------------------------------------


@dataclass
class ComparisonTable:
    """Rows are model variants, columns datasets; one metric per table."""

    metric: str
    models: List[str]
    datasets: List[str]
    values: Dict[str, Dict[str, float]]
    flags: Dict[str, Dict[str, Flag]]  # dataset -> model -> flag
    title: Optional[str] = None


def comparison_table(reports, metric, title=None):
    """Assemble a table from {dataset: EvalReport}; model order follows the first report."""
    datasets = list(reports)
    if not datasets:
        raise InsufficientDataError("no reports")
    models = list(reports[datasets[0]].metrics)
    for d in datasets[1:]:
        for m in reports[d].metrics:
            if m not in models:
                models.append(m)
    values = {m: {d: reports[d].metrics.get(m, {}).get(metric, float("nan")) for d in datasets} for m in models}
    flags = {d: reports[d].flags.get(metric, {}) for d in datasets}
    return ComparisonTable(metric, models, datasets, values, flags, title)


def format_value(v):
    if v is None or not np.isfinite(v):
        return "-"
    return f"{v:.4g}"


def _cell(table, model, dataset):
    text = format_value(table.values[model][dataset])
    f = table.flags.get(dataset, {}).get(model)
    if f is not None and f.best:
        return text + "*"
    if f is not None and f.top:
        return text + "!"
    return text


def render_text(table):
    """Aligned plain-text table: ``*`` marks the best, ``!`` the rest of the top group."""
    header = ["Model/Data", *table.datasets]
    rows = [[m, *(_cell(table, m, d) for d in table.datasets)] for m in table.models]
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
    lines = []
    if table.title:
        lines.append(table.title)
    for r in [header, *rows]:
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    lines.append(f"* best {table.metric}; ! not significantly worse than the best (paired t-test, p > {ALPHA:g})")
    return "\n".join(lines) + "\n"


def render_csv(table):
    """Columns: model, then per dataset ``D`` (value, ``*`` suffix on the best) and ``D!`` (top-group marker)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["model"]
    for d in table.datasets:
        header += [d, f"{d}!"]
    w.writerow(header)
    for m in table.models:
        row = [m]
        for d in table.datasets:
            f = table.flags.get(d, {}).get(m)
            text = format_value(table.values[m][d])
            row += [text + ("*" if f is not None and f.best else ""), "!" if f is not None and f.top else ""]
        w.writerow(row)
    return buf.getvalue()


def render(table, fmt="txt"):
    if fmt == "txt":
        return render_text(table)
    if fmt == "csv":
        return render_csv(table)
    raise DomainError(f"unknown format {fmt!r}")
