import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from boltzclass.metrics import (ConfusionMatrix, EvalReport, accuracy, balanced_accuracy,
                                cohen_kappa, confusion_from_predictions, evaluate,
                                wilcoxon_signed_rank)


def cm(rows):
    return ConfusionMatrix(np.array(rows))


# independent loop-based definitions
def brute_acc(c):
    return sum(c[i][i] for i in range(len(c))) / sum(map(sum, c))


def brute_bac(c):
    recalls = [c[i][i] / sum(c[i]) for i in range(len(c)) if sum(c[i]) > 0]
    return sum(recalls) / len(recalls)


def brute_kappa(c):
    k = len(c)
    n = sum(map(sum, c))
    po = sum(c[i][i] for i in range(k)) / n
    pe = sum(sum(c[i]) * sum(c[j][i] for j in range(k)) for i in range(k)) / n / n
    return (po - pe) / (1 - pe)


def brute_wilcoxon_p(x, y):
    d = [a - b for a, b in zip(x, y) if a != b]
    ranks = stats.rankdata(np.abs(d))
    w_plus = sum(r for r, v in zip(ranks, d) if v > 0)
    w_obs = min(w_plus, sum(ranks) - w_plus)
    hits = 0
    for signs in itertools.product((0, 1), repeat=len(d)):
        wp = sum(r for r, s in zip(ranks, signs) if s)
        hits += min(wp, sum(ranks) - wp) <= w_obs + 1e-9
    return hits / 2 ** len(d)


# --- accuracy family ------------------------------------------------------------------

def test_accuracy_examples():
    assert accuracy(cm(np.diag([3, 4, 5]))) == 1.0
    assert accuracy(cm([[0, 2], [3, 0]])) == 0.0
    assert accuracy(cm([[3, 1], [2, 4]])) == pytest.approx(0.7, abs=1e-15)


def test_bac_examples():
    assert balanced_accuracy(cm(np.diag([5, 1]))) == 1.0
    assert balanced_accuracy(cm([[90, 0], [10, 0]])) == 0.5
    assert balanced_accuracy(cm([[8, 2], [3, 7]])) == pytest.approx(0.75, abs=1e-15)


def test_bac_excludes_unsupported_class_with_warning():
    with pytest.warns(RuntimeWarning):
        assert balanced_accuracy(cm([[4, 0, 0], [0, 0, 0], [1, 0, 1]])) == 0.75


def test_kappa_examples():
    assert cohen_kappa(cm(np.diag([10, 10]))) == 1.0
    assert cohen_kappa(cm([[25, 25], [25, 25]])) == 0.0
    assert cohen_kappa(cm([[20, 5], [10, 15]])) == pytest.approx(0.4, abs=1e-12)


def test_kappa_degenerate_chance():
    assert cohen_kappa(cm([[5, 0], [0, 0]])) == 1.0


@pytest.mark.parametrize("fn", [accuracy, balanced_accuracy, cohen_kappa])
def test_empty_matrix_errors(fn):
    with pytest.raises(ValueError):
        fn(cm(np.zeros((2, 2), int)))


matrices = st.integers(2, 5).flatmap(
    lambda k: st.lists(st.lists(st.integers(0, 30), min_size=k, max_size=k),
                       min_size=k, max_size=k)).filter(
    lambda c: all(sum(r) > 0 for r in c))


@settings(max_examples=200)
@given(matrices)
def test_metrics_match_brute_force(c):
    m = cm(c)
    assert abs(accuracy(m) - brute_acc(c)) < 1e-12
    assert abs(balanced_accuracy(m) - brute_bac(c)) < 1e-12
    pe_one = brute_acc(c) == 1.0 and sum(1 for r in c if sum(r)) == 1
    if not pe_one:
        assert abs(cohen_kappa(m) - brute_kappa(c)) < 1e-12


@settings(max_examples=100)
@given(matrices)
def test_kappa_at_most_one(c):
    k = cohen_kappa(cm(c))
    off = sum(c[i][j] for i in range(len(c)) for j in range(len(c)) if i != j)
    assert k <= 1.0 + 1e-12
    if off > 0:
        assert k < 1.0


@settings(max_examples=100)
@given(st.integers(2, 5), st.integers(1, 20), st.integers(0, 10**6))
def test_bac_equals_acc_for_equal_support(k, support, seed):
    rng = np.random.default_rng(seed)
    rows = [rng.multinomial(support, np.ones(k) / k) for _ in range(k)]
    m = cm(rows)
    assert abs(balanced_accuracy(m) - accuracy(m)) < 1e-12


@settings(max_examples=100)
@given(matrices, st.randoms())
def test_label_permutation_invariance(c, rnd):
    perm = list(range(len(c)))
    rnd.shuffle(perm)
    a = np.array(c)
    b = a[np.ix_(perm, perm)]
    for fn in (accuracy, balanced_accuracy, cohen_kappa):
        assert abs(fn(cm(a)) - fn(cm(b))) < 1e-12


def test_confusion_from_predictions():
    assert confusion_from_predictions([], [], 3).tolist() == [[0] * 3] * 3
    c = confusion_from_predictions([0, 1, 2, 1], [0, 1, 2, 1], 3)
    assert np.array_equal(c.counts, np.diag([1, 2, 1]))
    c = confusion_from_predictions([0, 1, 1, 2, 0], [1, 1, 0, 2, 0], 3)
    assert c.total == 5 and c.counts[0, 1] == 1 and c.counts[1, 0] == 1


def test_confusion_label_range():
    with pytest.raises(ValueError):
        confusion_from_predictions([0, 3], [0, 0], 3)
    with pytest.raises(ValueError):
        confusion_from_predictions([0, 1], [0], 3)


def test_sklearn_agreement_if_available():
    sk = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(0)
    t, p = rng.integers(0, 4, 200), rng.integers(0, 4, 200)
    rep = evaluate(t, p, 4)
    assert rep.bac == pytest.approx(sk.balanced_accuracy_score(t, p), abs=1e-12)
    assert rep.kappa == pytest.approx(sk.cohen_kappa_score(t, p), abs=1e-12)


def test_eval_report_serialization():
    rep = evaluate([0, 1, 1, 2], [0, 1, 0, 2], 3)
    assert EvalReport.from_json(rep.to_json()) == rep
    back = EvalReport.from_csv_row(rep.to_csv_row())
    assert (back.acc, back.bac, back.kappa) == (rep.acc, rep.bac, rep.kappa)
    assert np.array_equal(back.confusion.counts, rep.confusion.counts)
    assert rep.to_csv_row().count(",") == 4


# --- Wilcoxon -------------------------------------------------------------------------

def test_wilcoxon_identical_samples():
    res = wilcoxon_signed_rank([1, 2, 3], [1, 2, 3])
    assert (res.statistic, res.p_value, res.reject) == (0.0, 1.0, False)


def test_wilcoxon_five_positive():
    res = wilcoxon_signed_rank([2, 3, 4, 5, 6], [1, 1, 1, 1, 1])
    assert res.statistic == 0.0
    assert res.p_value == 0.0625
    assert not res.reject


def test_wilcoxon_matches_enumeration_n8():
    rng = np.random.default_rng(5)
    x, y = rng.normal(size=8), rng.normal(size=8)
    assert abs(wilcoxon_signed_rank(x, y).p_value - brute_wilcoxon_p(x, y)) < 1e-12


def test_wilcoxon_with_ties_and_zeros():
    x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]
    y = [0.0, 1.0, 3.0, 5.0, 3.0, 7.0, 4.0]
    res = wilcoxon_signed_rank(x, y)
    assert res.n_effective == 6
    assert abs(res.p_value - brute_wilcoxon_p(x, y)) < 1e-12


def test_wilcoxon_scipy_exact_agreement():
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=12), rng.normal(size=12)
    ref = stats.wilcoxon(x, y, method="exact")
    res = wilcoxon_signed_rank(x, y)
    assert res.statistic == ref.statistic
    assert res.p_value == pytest.approx(ref.pvalue, abs=1e-12)


def test_wilcoxon_normal_approximation():
    rng = np.random.default_rng(2)
    x = rng.normal(size=40)
    y = x + rng.normal(0.4, 1.0, size=40)
    res = wilcoxon_signed_rank(x, y)
    ref = stats.wilcoxon(x, y, method="approx", correction=True)
    assert res.method == "normal"
    assert res.p_value == pytest.approx(ref.pvalue, rel=1e-9)


def test_wilcoxon_errors():
    with pytest.raises(ValueError):
        wilcoxon_signed_rank([1, 2], [1])
    with pytest.raises(ValueError):
        wilcoxon_signed_rank([1], [2], alpha=1.5)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(-20, 20), st.integers(-20, 20)), min_size=1, max_size=9))
def test_wilcoxon_p_range_and_monotone_invariance(pairs):
    x = np.array([a for a, _ in pairs], float)
    y = np.array([b for _, b in pairs], float)
    res = wilcoxon_signed_rank(x, y)
    assert 0.0 < res.p_value <= 1.0
    # ranks of |x - y| survive positive affine maps (not arbitrary monotone ones)
    res2 = wilcoxon_signed_rank(3 * x + 5, 3 * y + 5)
    assert res2.statistic == res.statistic and res2.p_value == res.p_value
