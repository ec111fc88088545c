"""Classification metrics for imbalanced data and the exact Wilcoxon
signed-rank test."""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, rankdata

__all__ = ["ConfusionMatrix", "EvalReport", "WilcoxonResult", "confusion_from_predictions",
           "accuracy", "balanced_accuracy", "cohen_kappa", "evaluate", "wilcoxon_signed_rank",
           "EXACT_WILCOXON_MAX_N"]

EXACT_WILCOXON_MAX_N = 25


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""
    counts: np.ndarray

    def __eq__(self, other):
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValueError(f"confusion matrix must be square, got shape {counts.shape}")
        if np.any(counts < 0):
            raise ValueError("confusion matrix entries must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def tolist(self) -> list[list[int]]:
        return self.counts.tolist()


def confusion_from_predictions(truth, pred, k: int) -> ConfusionMatrix:
    truth = np.asarray(truth, dtype=np.int64).ravel()
    pred = np.asarray(pred, dtype=np.int64).ravel()
    if truth.shape != pred.shape:
        raise ValueError(f"{truth.size} true labels but {pred.size} predictions")
    for name, lab in (("true", truth), ("predicted", pred)):
        if lab.size and (lab.min() < 0 or lab.max() >= k):
            raise ValueError(f"{name} label outside [0, {k})")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (truth, pred), 1)
    return ConfusionMatrix(counts)


def _nonempty(cm: ConfusionMatrix) -> np.ndarray:
    if cm.total <= 0:
        raise ValueError("metric undefined on an empty confusion matrix")
    return cm.counts


def accuracy(cm: ConfusionMatrix) -> float:
    c = _nonempty(cm)
    return float(np.trace(c) / c.sum())


def balanced_accuracy(cm: ConfusionMatrix) -> float:
    """Mean per-class recall over classes with non-zero support."""
    c = _nonempty(cm)
    support = c.sum(axis=1)
    present = support > 0
    if not present.all():
        warnings.warn(f"{int((~present).sum())} class(es) without support excluded "
                      "from balanced accuracy", RuntimeWarning, stacklevel=2)
    recalls = np.diag(c)[present] / support[present]
    return float(recalls.mean())


def cohen_kappa(cm: ConfusionMatrix) -> float:
    c = _nonempty(cm).astype(np.float64)
    total = c.sum()
    p_o = np.trace(c) / total
    p_e = float(c.sum(axis=1) @ c.sum(axis=0)) / total ** 2
    if p_e == 1.0:
        return 1.0 if p_o == 1.0 else 0.0
    return float((p_o - p_e) / (1.0 - p_e))


@dataclass(frozen=True)
class EvalReport:
    acc: float
    bac: float
    kappa: float
    confusion: ConfusionMatrix

    CSV_FIELDS = ("acc", "bac", "kappa", "k", "confusion")

    def as_dict(self) -> dict:
        return {"acc": self.acc, "bac": self.bac, "kappa": self.kappa,
                "k": self.confusion.k, "confusion": self.confusion.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        d = json.loads(text)
        return cls(d["acc"], d["bac"], d["kappa"], ConfusionMatrix(d["confusion"]))

    def to_csv_row(self) -> str:
        """acc,bac,kappa,k,confusion where confusion is row-major counts joined by ';'."""
        buf = io.StringIO()
        flat = ";".join(str(x) for x in self.confusion.counts.ravel())
        csv.writer(buf, lineterminator="\n").writerow(
            [repr(self.acc), repr(self.bac), repr(self.kappa), self.confusion.k, flat])
        return buf.getvalue()

    @classmethod
    def from_csv_row(cls, line: str) -> "EvalReport":
        acc, bac, kappa, k, flat = next(csv.reader([line.strip()]))
        k = int(k)
        counts = np.array([int(x) for x in flat.split(";")], dtype=np.int64).reshape(k, k)
        return cls(float(acc), float(bac), float(kappa), ConfusionMatrix(counts))


def evaluate(truth, pred, k: int) -> EvalReport:
    cm = confusion_from_predictions(truth, pred, k)
    return EvalReport(accuracy(cm), balanced_accuracy(cm), cohen_kappa(cm), cm)


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float
    p_value: float
    reject: bool
    n_effective: int
    method: str  # "exact", "normal" or "degenerate"

    def as_dict(self) -> dict:
        return {"statistic": self.statistic, "p_value": self.p_value, "reject": self.reject,
                "n_effective": self.n_effective, "method": self.method}


def _exact_two_sided(doubled_ranks: np.ndarray, w_obs2: int) -> float:
    """P(min(W+, W-) <= observed) under random signs.

    Ranks are doubled so tied (half-integer) ranks stay integral; the
    distribution of doubled W+ is built by subset-sum counting.
    """
    total = int(doubled_ranks.sum())
    counts = [0] * (total + 1)
    counts[0] = 1
    reach = 0
    for r in doubled_ranks.astype(int):
        for s in range(reach, -1, -1):
            if counts[s]:
                counts[s + r] += counts[s]
        reach += r
    hits = sum(cnt for s, cnt in enumerate(counts) if min(s, total - s) <= w_obs2)
    return min(1.0, hits / 2 ** len(doubled_ranks))


def wilcoxon_signed_rank(x, y, alpha: float = 0.05) -> WilcoxonResult:
    """Two-sided paired Wilcoxon signed-rank test.

    Zero differences are dropped and tied magnitudes share their average
    rank. The statistic is min(W+, W-). With at most 25 non-zero differences
    the p-value is exact; above that a normal approximation with tie and
    continuity corrections is used. All-zero differences give p = 1.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"paired samples differ in length: {x.size} vs {y.size}")
    if x.size < 1:
        raise ValueError("need at least one pair")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")

    d = x - y
    d = d[d != 0.0]
    n = d.size
    if n == 0:
        return WilcoxonResult(0.0, 1.0, False, 0, "degenerate")

    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)

    if n <= EXACT_WILCOXON_MAX_N:
        p = _exact_two_sided(np.rint(2 * ranks), int(round(2 * w)))
        method = "exact"
    else:
        mean = n * (n + 1) / 4.0
        _, tie_sizes = np.unique(np.abs(d), return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_sizes ** 3 - tie_sizes)) / 48.0
        z = (abs(w - mean) - 0.5) / math.sqrt(var) if var > 0 else 0.0
        p = min(1.0, 2.0 * float(norm.sf(max(z, 0.0))))
        method = "normal"
    return WilcoxonResult(w, p, bool(p < alpha), n, method)
