import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import t

from courtside.errors import DegenerateVariance
from courtside.stats import ci95_mean_diff, cohens_d, welch_df

samples = st.lists(st.floats(-100, 100, allow_nan=False), min_size=2, max_size=30)


def bootstrap_ci(a, b, rng, n_boot=4000, level=0.95):
    """Percentile bootstrap interval for mean(a) - mean(b)."""
    ia = rng.integers(0, len(a), (n_boot, len(a)))
    ib = rng.integers(0, len(b), (n_boot, len(b)))
    diffs = a[ia].mean(axis=1) - b[ib].mean(axis=1)
    q = (1 - level) / 2
    return np.quantile(diffs, q), np.quantile(diffs, 1 - q)


def jaccard(i, j):
    inter = max(0.0, min(i[1], j[1]) - max(i[0], j[0]))
    union = max(i[1], j[1]) - min(i[0], j[0])
    return inter / union if union > 0 else 1.0


def test_cohens_d_examples():
    a = [0.0, 1.0, 2.0]
    b = [-1.0, 0.0, 1.0]
    assert cohens_d(a, b) == 1.0
    assert cohens_d(a, a) == 0.0
    with pytest.raises(DegenerateVariance):
        cohens_d([2.0, 2.0], [2.0, 2.0])
    with pytest.raises(ValueError):
        cohens_d([1.0], [1.0, 2.0])


def test_constant_shift_gives_fixed_effect():
    base = np.array([0.0, 0.4, 0.8, 0.2, 0.6])
    sd = base.std(ddof=1)
    a = base / sd * 0.4 + 0.5
    b = base / sd * 0.4
    assert cohens_d(a, b) == pytest.approx(1.25, abs=1e-12)


def _spread(x):
    return max(x) - min(x)


@settings(max_examples=60, deadline=None)
@given(samples, samples, st.floats(-50, 50), st.floats(0.1, 10))
def test_cohens_d_symmetries(a, b, c, alpha):
    if _spread(a) < 1e-3 and _spread(b) < 1e-3:
        return
    d = cohens_d(a, b)
    assert cohens_d(b, a) == pytest.approx(-d, abs=1e-9)
    assert cohens_d(np.add(a, c), np.add(b, c)) == pytest.approx(d, rel=1e-6, abs=1e-6)
    assert cohens_d(np.multiply(a, alpha), np.multiply(b, alpha)) == pytest.approx(d, rel=1e-9, abs=1e-9)


def test_degenerate_ci():
    assert ci95_mean_diff([1.0, 1.0], [0.0, 0.0]) == (1.0, 1.0)


def test_ci_known_values():
    a = [1.0, 2.0, 3.0, 4.0]
    b = [2.0, 4.0, 6.0]
    # var a = 5/3, var b = 4, diff of means -1.5
    se2 = (5 / 3) / 4 + 4 / 3
    nu = se2 ** 2 / (((5 / 3) / 4) ** 2 / 3 + (4 / 3) ** 2 / 2)
    assert welch_df(a, b) == pytest.approx(nu, rel=1e-12)
    half = t.ppf(0.975, nu) * np.sqrt(se2)
    lo, hi = ci95_mean_diff(a, b)
    assert lo == pytest.approx(-1.5 - half, rel=1e-12)
    assert hi == pytest.approx(-1.5 + half, rel=1e-12)


def test_null_interval_straddles_zero_mostly():
    rng = np.random.default_rng(0)
    hits = 0
    for _ in range(200):
        a, b = rng.normal(size=200), rng.normal(size=200)
        lo, hi = ci95_mean_diff(a, b)
        hits += lo <= 0.0 <= hi
    assert hits >= 180  # ~95% nominal coverage


def test_welch_agrees_with_bootstrap_oracle():
    rng = np.random.default_rng(1)
    scores = []
    for _ in range(100):
        a = rng.normal(0.5, 1.0, 40)
        b = rng.normal(0.0, 1.5, 35)
        scores.append(jaccard(ci95_mean_diff(a, b), bootstrap_ci(a, b, rng)))
    assert np.mean(scores) > 0.5
    assert min(scores) > 0.5
