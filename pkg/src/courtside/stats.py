"""Two-sample effect size and Welch confidence interval."""

from __future__ import annotations

import math

import numpy as np
from scipy import stats as _st

from .errors import DegenerateVariance


def _moments(x):
    x = np.asarray(x, dtype=np.float64)
    if x.size < 2:
        raise ValueError("each sample needs at least two values")
    if np.all(x == x[0]):
        # exact, so constant samples are recognised as zero-variance
        return x.size, float(x[0]), 0.0
    mean = float(x.mean())
    var = float(((x - mean) ** 2).sum() / (x.size - 1))
    return x.size, mean, var


def cohens_d(a, b) -> float:
    """Standardized mean difference (mean(a) - mean(b)) / pooled sd."""
    na, ma, va = _moments(a)
    nb, mb, vb = _moments(b)
    pooled = math.sqrt(((na - 1) * va + (nb - 1) * vb) / (na + nb - 2))
    if pooled == 0.0:
        raise DegenerateVariance("both samples have zero variance")
    return (ma - mb) / pooled


def welch_df(a, b) -> float:
    na, _, va = _moments(a)
    nb, _, vb = _moments(b)
    qa, qb = va / na, vb / nb
    return (qa + qb) ** 2 / (qa ** 2 / (na - 1) + qb ** 2 / (nb - 1))


def ci95_mean_diff(a, b, level: float = 0.95) -> tuple[float, float]:
    """Welch interval for mean(a) - mean(b); zero-variance inputs give (diff, diff)."""
    na, ma, va = _moments(a)
    nb, mb, vb = _moments(b)
    diff = ma - mb
    se2 = va / na + vb / nb
    if se2 == 0.0:
        return diff, diff
    t = float(_st.t.ppf(0.5 + level / 2, welch_df(a, b)))
    half = t * math.sqrt(se2)
    return diff - half, diff + half
