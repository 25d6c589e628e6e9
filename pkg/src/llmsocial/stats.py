"""Significance tests used across the analyses."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats as sps

from .errors import DegenerateGroup


@dataclass(frozen=True)
class StatResult:
    statistic: float
    p_value: float
    effect_size: float
    df: float
    test: str = ""


def _clean(values, name) -> np.ndarray:
    arr = np.asarray(list(values), dtype=float)
    if arr.size < 2:
        raise DegenerateGroup(f"group {name} needs at least 2 observations")
    if not np.all(np.isfinite(arr)):
        raise DegenerateGroup(f"group {name} has non-finite values")
    return arr


def cohens_d(a, b) -> float:
    """Mean difference over the pooled standard deviation."""
    a, b = _clean(a, "a"), _clean(b, "b")
    na, nb = a.size, b.size
    pooled = ((na - 1) * a.var(ddof=1) + (nb - 1) * b.var(ddof=1)) / (na + nb - 2)
    if pooled == 0:
        raise DegenerateGroup("both groups have zero variance")
    return float((a.mean() - b.mean()) / math.sqrt(pooled))


def welch_t(a, b) -> StatResult:
    """Welch's unequal-variance t-test (two-sided) with Cohen's d."""
    a, b = _clean(a, "a"), _clean(b, "b")
    va, vb = a.var(ddof=1) / a.size, b.var(ddof=1) / b.size
    if va + vb == 0:
        raise DegenerateGroup("both groups have zero variance")
    t = (a.mean() - b.mean()) / math.sqrt(va + vb)
    df = (va + vb) ** 2 / (va ** 2 / (a.size - 1) + vb ** 2 / (b.size - 1))
    p = float(min(1.0, 2.0 * sps.t.sf(abs(t), df)))
    return StatResult(float(t), p, cohens_d(a, b), float(df), "welch_t")


compare_engagement = welch_t


def anova(groups: Sequence[Sequence[float]]) -> StatResult:
    """One-way ANOVA; effect size is eta squared."""
    arrays = [_clean(g, str(i)) for i, g in enumerate(groups)]
    if len(arrays) < 2:
        raise DegenerateGroup("ANOVA needs at least two groups")
    allv = np.concatenate(arrays)
    grand = allv.mean()
    ss_between = sum(g.size * (g.mean() - grand) ** 2 for g in arrays)
    ss_within = sum(((g - g.mean()) ** 2).sum() for g in arrays)
    df_b = len(arrays) - 1
    df_w = allv.size - len(arrays)
    if ss_within == 0:
        raise DegenerateGroup("all groups have zero variance")
    F = (ss_between / df_b) / (ss_within / df_w)
    p = float(sps.f.sf(F, df_b, df_w))
    eta2 = ss_between / (ss_between + ss_within)
    return StatResult(float(F), p, float(eta2), float(df_b), "anova")


def _hypergeom_pmf(k: int, row1: int, col1: int, n: int) -> float:
    return math.comb(col1, k) * math.comb(n - col1, row1 - k) / math.comb(n, row1)


def fisher_exact(table) -> float:
    """Two-sided Fisher exact p-value for a 2x2 table ``[[a, b], [c, d]]``.

    Sums the probability of every table with the same margins that is no
    more likely than the observed one.
    """
    (a, b), (c, d) = table
    row1, col1, n = a + b, a + c, a + b + c + d
    lo, hi = max(0, row1 + col1 - n), min(row1, col1)
    p_obs = _hypergeom_pmf(a, row1, col1, n)
    total = sum(
        p for p in (_hypergeom_pmf(k, row1, col1, n) for k in range(lo, hi + 1))
        if p <= p_obs * (1 + 1e-7)
    )
    return float(min(1.0, total))


def two_proportion_z(x1: int, n1: int, x2: int, n2: int) -> StatResult:
    """Pooled two-proportion z test (two-sided); effect size is p1 - p2."""
    if n1 == 0 or n2 == 0:
        raise DegenerateGroup("empty arm")
    p1, p2 = x1 / n1, x2 / n2
    pooled = (x1 + x2) / (n1 + n2)
    se = math.sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2))
    if se == 0:
        return StatResult(0.0, 1.0, p1 - p2, float(n1 + n2 - 2), "two_proportion_z")
    z = (p1 - p2) / se
    return StatResult(float(z), float(2 * sps.norm.sf(abs(z))), p1 - p2, float(n1 + n2 - 2), "two_proportion_z")


def spearman(x, y) -> float:
    r = sps.spearmanr(x, y).statistic
    return float(r)
