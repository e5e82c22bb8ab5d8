"""Cross-validation, confusion-matrix metrics, ROC/AUC and one-way ANOVA."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .ensemble import TreeLimits, predict_rows, train_ensemble
from .features import FEATURE_NAMES, LabeledDataset
from .stats import f_survival

GROUPINGS = ("row", "recording")


class FoldError(ValueError):
    """The requested fold count cannot be honoured."""


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @classmethod
    def from_predictions(cls, labels, predicted) -> "ConfusionMatrix":
        y = np.asarray(labels)
        p = np.asarray(predicted)
        return cls(
            tp=int(np.sum((y == 1) & (p == 1))),
            fp=int(np.sum((y == 0) & (p == 1))),
            tn=int(np.sum((y == 0) & (p == 0))),
            fn=int(np.sum((y == 1) & (p == 0))),
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp,
                               self.tn + other.tn, self.fn + other.fn)


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


def confusion_metrics(cm: ConfusionMatrix) -> tuple[Optional[float], Optional[float], Optional[float]]:
    """(sensitivity, specificity, accuracy); ``None`` where a denominator is zero."""
    return (
        _ratio(cm.tp, cm.tp + cm.fn),
        _ratio(cm.tn, cm.tn + cm.fp),
        _ratio(cm.tp + cm.tn, cm.total),
    )


def _midranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(x.size)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC; tied positive/negative pairs count one half."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes among the labels")
    ranks = _midranks(s)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_curve(scores, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(fpr, tpr, threshold) points, sweeping thresholds from high to low.

    A row is called positive when its score is >= the threshold; the first
    point uses +inf so the curve starts at (0, 0).
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    n_pos = np.sum(y == 1)
    n_neg = np.sum(y == 0)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC curve needs both classes among the labels")
    thresholds = np.unique(s)[::-1]
    tpr = [0.0]
    fpr = [0.0]
    for t in thresholds:
        called = s >= t
        tpr.append(float(np.sum(called & (y == 1)) / n_pos))
        fpr.append(float(np.sum(called & (y == 0)) / n_neg))
    return np.array(fpr), np.array(tpr), np.concatenate([[np.inf], thresholds])


class AnovaResult(NamedTuple):
    f: float
    p: float

    @property
    def degenerate(self) -> bool:
        return math.isinf(self.f)


def anova_f_test(group0, group1) -> AnovaResult:
    """One-way ANOVA between two groups, df = (1, n - 2).

    Zero within-group spread with separated means gives F = inf, p = 0; with
    equal means as well, F = 0 and p = 1.
    """
    a = np.asarray(group0, dtype=np.float64)
    b = np.asarray(group1, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("each ANOVA group needs at least 2 values")
    n = a.size + b.size
    grand = (a.sum() + b.sum()) / n
    ma, mb = a.mean(), b.mean()
    ss_between = a.size * (ma - grand) ** 2 + b.size * (mb - grand) ** 2
    ss_within = float(np.sum((a - ma) ** 2) + np.sum((b - mb) ** 2))
    ms_between = ss_between / 1.0
    ms_within = ss_within / (n - 2)
    if ms_within == 0.0:
        return AnovaResult(0.0, 1.0) if ms_between == 0.0 else AnovaResult(math.inf, 0.0)
    f = float(ms_between / ms_within)
    return AnovaResult(f, f_survival(f, 1, n - 2))


# ---------------------------------------------------------------------------
# cross-validation


def kfold_split(dataset: LabeledDataset, k: int, seed: int, grouping: str = "recording") -> list[np.ndarray]:
    """Test-row indices of each fold, shuffled by ``seed``.

    In recording mode all windows of one recording land in the same fold.
    """
    if grouping not in GROUPINGS:
        raise ValueError(f"grouping must be one of {GROUPINGS}, got {grouping!r}")
    if k < 2:
        raise FoldError("k must be at least 2")
    rng = np.random.default_rng(seed)
    n = len(dataset)
    if grouping == "row":
        if k > n:
            raise FoldError(f"k exceeds group count: k={k} but only {n} rows")
        perm = rng.permutation(n)
        return [np.sort(part) for part in np.array_split(perm, k)]
    ids = dataset.recording_ids
    groups = list(dict.fromkeys(ids.tolist()))
    if k > len(groups):
        raise FoldError(f"k exceeds group count: k={k} but only {len(groups)} recordings")
    perm = rng.permutation(len(groups))
    folds = []
    for part in np.array_split(perm, k):
        chosen = {groups[i] for i in part}
        folds.append(np.flatnonzero([rid in chosen for rid in ids]))
    return folds


@dataclass(frozen=True)
class EnsembleConfig:
    n_trees: int = 30
    limits: TreeLimits = field(default_factory=TreeLimits)
    tie: str = "alert"


@dataclass
class FoldResult:
    fold: int
    n_train: int
    n_test: int
    confusion: ConfusionMatrix
    sensitivity: Optional[float]
    specificity: Optional[float]
    accuracy: Optional[float]
    normalizer_min: list
    normalizer_max: list


@dataclass
class EvaluationReport:
    sensitivity: Optional[float]
    specificity: Optional[float]
    accuracy: Optional[float]
    auc: Optional[float]
    confusion: ConfusionMatrix
    per_fold: list
    anova: dict
    mean_prediction_latency_s: float
    k: int
    grouping: str
    seed: int
    scores: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)

    @property
    def anova_f(self) -> float:
        return max(r.f for r in self.anova.values())

    @property
    def anova_p(self) -> float:
        return min(r.p for r in self.anova.values())

    def roc(self):
        return roc_curve(self.scores, self.labels)

    def to_dict(self) -> dict:
        return {
            "metrics": {
                "sensitivity": self.sensitivity,
                "specificity": self.specificity,
                "accuracy": self.accuracy,
                "auc": self.auc,
                "confusion": asdict(self.confusion),
            },
            "per_fold": [
                {
                    "fold": f.fold,
                    "n_train": f.n_train,
                    "n_test": f.n_test,
                    "confusion": asdict(f.confusion),
                    "sensitivity": f.sensitivity,
                    "specificity": f.specificity,
                    "accuracy": f.accuracy,
                    "normalizer": {"min": f.normalizer_min, "max": f.normalizer_max},
                }
                for f in self.per_fold
            ],
            "anova": {
                name: {"F": _finite_or_str(r.f), "p": r.p, "degenerate": r.degenerate}
                for name, r in self.anova.items()
            },
            "latency": {"mean_prediction_latency_s": self.mean_prediction_latency_s},
            "protocol": {"k": self.k, "split": self.grouping, "seed": self.seed},
        }

    def to_text(self) -> str:
        def pct(v):
            return "undefined" if v is None else f"{100 * v:.2f}%"

        cm = self.confusion
        lines = [
            f"{self.k}-fold cross-validation ({self.grouping} split, seed {self.seed})",
            f"rows evaluated   {cm.total}",
            f"confusion        tp={cm.tp} fp={cm.fp} tn={cm.tn} fn={cm.fn}",
            f"sensitivity      {pct(self.sensitivity)}",
            f"specificity      {pct(self.specificity)}",
            f"accuracy         {pct(self.accuracy)}",
            f"AUC              {'undefined' if self.auc is None else f'{self.auc:.4f}'}",
            f"mean latency     {1e3 * self.mean_prediction_latency_s:.4f} ms per row",
            "",
            "one-way ANOVA fatigue vs alert (raw features)",
        ]
        for name, r in self.anova.items():
            flag = "  (zero within-group variance)" if r.degenerate else ""
            lines.append(f"  {name:<16} F={r.f:<14.6g} p={r.p:.3g}{flag}")
        lines.append("")
        lines.append("fold  n_test  accuracy")
        for f in self.per_fold:
            lines.append(f"{f.fold:>4}  {f.n_test:>6}  {pct(f.accuracy)}")
        return "\n".join(lines) + "\n"


def _finite_or_str(v: float):
    return v if math.isfinite(v) else "inf"


def feature_anova(dataset: LabeledDataset) -> dict:
    fat = dataset.labels == 1
    return {
        name: anova_f_test(dataset.features[~fat, j], dataset.features[fat, j])
        for j, name in enumerate(FEATURE_NAMES)
    }


def cross_validate(
    dataset: LabeledDataset,
    config: EnsembleConfig = EnsembleConfig(),
    k: int = 10,
    seed: int = 42,
    grouping: str = "recording",
) -> EvaluationReport:
    """Fit normalizer and ensemble per training split; pool held-out results."""
    if len(dataset) == 0:
        raise ValueError("cannot cross-validate an empty dataset")
    if np.unique(dataset.labels).size < 2:
        raise ValueError("cross-validation needs both classes present")
    folds = kfold_split(dataset, k, seed, grouping)
    scores = np.empty(len(dataset))
    predicted = np.empty(len(dataset), dtype=np.int64)
    per_fold = []
    pooled = ConfusionMatrix()
    elapsed = 0.0
    for i, test in enumerate(folds):
        train = np.setdiff1d(np.arange(len(dataset)), test, assume_unique=True)
        model = train_ensemble(dataset.subset(train), config.n_trees, seed, config.limits,
                               tie=config.tie)
        t0 = time.perf_counter()
        lab, frac = predict_rows(model, dataset.features[test])
        elapsed += time.perf_counter() - t0
        scores[test] = frac
        predicted[test] = lab
        cm = ConfusionMatrix.from_predictions(dataset.labels[test], lab)
        pooled = pooled + cm
        sens, spec, acc = confusion_metrics(cm)
        per_fold.append(FoldResult(i, train.size, test.size, cm, sens, spec, acc,
                                   model.normalizer.minimum.tolist(), model.normalizer.maximum.tolist()))
    sens, spec, acc = confusion_metrics(pooled)
    return EvaluationReport(
        sensitivity=sens,
        specificity=spec,
        accuracy=acc,
        auc=roc_auc(scores, dataset.labels),
        confusion=pooled,
        per_fold=per_fold,
        anova=feature_anova(dataset),
        mean_prediction_latency_s=elapsed / len(dataset),
        k=k,
        grouping=grouping,
        seed=seed,
        scores=scores,
        labels=dataset.labels.copy(),
    )
