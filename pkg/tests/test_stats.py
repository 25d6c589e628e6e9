import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats as sps

from llmsocial.errors import DegenerateGroup
from llmsocial.stats import anova, cohens_d, fisher_exact, spearman, two_proportion_z, welch_t


def test_welch_textbook_example():
    r = welch_t([1, 2, 3], [4, 5, 6])
    assert r.statistic == pytest.approx(-3 / math.sqrt(2 / 3), abs=1e-12)
    assert round(r.statistic, 3) == -3.674
    assert r.df == pytest.approx(4.0)
    assert r.effect_size == pytest.approx(-3.0)


def test_identical_groups():
    r = welch_t([1, 2, 3], [1, 2, 3])
    assert (r.statistic, r.effect_size, r.p_value) == (0.0, 0.0, 1.0)


def test_degenerate_groups():
    with pytest.raises(DegenerateGroup):
        welch_t([2, 2], [2, 2])
    with pytest.raises(DegenerateGroup):
        welch_t([1], [1, 2])


def test_welch_matches_scipy():
    rng = np.random.default_rng(0)
    a, b = rng.normal(0, 1, 17), rng.normal(0.5, 2, 23)
    ref = sps.ttest_ind(a, b, equal_var=False)
    r = welch_t(a, b)
    assert r.statistic == pytest.approx(ref.statistic, abs=1e-12)
    assert r.p_value == pytest.approx(ref.pvalue, abs=1e-12)


def test_anova_equal_means_and_scipy():
    r = anova([[1, 2, 3], [1, 2, 3], [3, 2, 1]])
    assert r.statistic == pytest.approx(0.0, abs=1e-12) and r.p_value == pytest.approx(1.0)
    rng = np.random.default_rng(1)
    groups = [rng.normal(m, 1, n) for m, n in ((0, 8), (1, 11), (0.5, 6))]
    assert anova(groups).statistic == pytest.approx(sps.f_oneway(*groups).statistic, abs=1e-10)


def test_anova_two_groups_is_t_squared():
    rng = np.random.default_rng(2)
    a, b = rng.normal(0, 1, 12), rng.normal(1, 1, 12)
    assert anova([a, b]).statistic == pytest.approx(welch_t(a, b).statistic ** 2, abs=1e-9)


def test_fisher_against_exact_rationals():
    table = [[3, 1], [1, 3]]
    # margins 4/4/4/4; P(k) = C(4,k) C(4,4-k) / C(8,4)
    pk = [Fraction(math.comb(4, k) * math.comb(4, 4 - k), math.comb(8, 4)) for k in range(5)]
    expected = sum(p for p in pk if p <= pk[3])
    assert fisher_exact(table) == pytest.approx(float(expected), abs=1e-12)
    rng = np.random.default_rng(3)
    for _ in range(20):
        t = rng.integers(0, 15, size=(2, 2)).tolist()
        assert fisher_exact(t) == pytest.approx(sps.fisher_exact(t).pvalue, abs=1e-9)


def test_two_proportion_by_hand():
    r = two_proportion_z(40, 50, 25, 50)
    p = 65 / 100
    z = (0.8 - 0.5) / math.sqrt(p * (1 - p) * (2 / 50))
    assert r.statistic == pytest.approx(z, abs=1e-12)
    assert r.p_value == pytest.approx(math.erfc(abs(z) / math.sqrt(2)), abs=1e-12)


def test_cohens_d_pooled():
    assert cohens_d([1, 2, 3, 4], [2, 3, 4, 5]) == pytest.approx(-1 / math.sqrt(5 / 3))


def test_spearman_monotone():
    assert spearman([1, 2, 3, 4], [10, 20, 25, 100]) == pytest.approx(1.0)
    assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
