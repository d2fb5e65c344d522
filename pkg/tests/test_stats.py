import math
import random

import numpy as np
import pytest

from toklab.errors import StatsError
from toklab.stats import (MIN_N_OBS, compare_dependent_correlations,
                          compare_independent_correlations, fit_ols,
                          linreg_holdout, minmax_scale, paired, pearson,
                          spearman, two_tailed_p)


def pearson_two_pass(x, y):
    """Independent reference: plain two-pass formula with exact fsum."""
    n = len(x)
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def midranks_reference(values):
    """Independent midrank computation: average 1-based positions per value."""
    ordered = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(ordered):
        j = i
        while j + 1 < len(ordered) and values[ordered[j + 1]] == values[ordered[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for idx in ordered[i:j + 1]:
            ranks[idx] = avg
        i = j + 1
    return ranks


# ---------------------------------------------------------------------------
# pearson


def test_pearson_identity_is_one():
    s = paired([1.0, 2.0, 5.0, 9.0], [1.0, 2.0, 5.0, 9.0])
    assert pearson(s) == 1.0


def test_pearson_perfect_negative():
    s = paired([1, 2, 3, 4], [8, 6, 4, 2])
    assert pearson(s) == -1.0


def test_pearson_matches_two_pass_reference():
    rng = np.random.default_rng(101)
    for _ in range(100):
        x = rng.normal(size=100)
        y = 0.4 * x + rng.normal(size=100)
        r = pearson(paired(x, y))
        assert abs(r - pearson_two_pass(x.tolist(), y.tolist())) <= 1e-12


def test_pearson_zero_variance_errors():
    with pytest.raises(StatsError, match="variance"):
        pearson(paired([1, 1, 1, 1], [1, 2, 3, 4]))


def test_pearson_affine_invariance():
    rng = np.random.default_rng(7)
    x = rng.normal(size=50)
    y = rng.normal(size=50)
    r = pearson(paired(x, y))
    assert pearson(paired(3.5 * x + 2, y)) == pytest.approx(r, abs=1e-12)
    assert pearson(paired(-2.0 * x, y)) == pytest.approx(-r, abs=1e-12)


def test_paired_validation():
    with pytest.raises(StatsError):
        paired([1, 2, 3], [1, 2, 3])          # below MIN_N_OBS
    with pytest.raises(StatsError):
        paired([1, 2, 3, 4], [1, 2, 3])
    with pytest.raises(StatsError):
        paired([1, 2, 3, float("nan")], [1, 2, 3, 4])
    assert MIN_N_OBS == 4


# ---------------------------------------------------------------------------
# spearman


def test_spearman_monotone_transform_is_one():
    x = [0.5, 1.0, 2.0, 7.0, 11.0]
    y = [math.exp(v) for v in x]
    assert spearman(paired(x, y)) == 1.0


def test_spearman_reversed_ranks():
    x = [1, 2, 3, 4, 5]
    assert spearman(paired(x, [10, 8, 6, 4, 2])) == pytest.approx(-1.0)


def test_spearman_with_ties_matches_midrank_oracle():
    rng = random.Random(5)
    for _ in range(50):
        n = rng.randint(6, 40)
        x = [rng.randint(0, 8) * 1.0 for _ in range(n)]
        y = [rng.randint(0, 8) * 1.0 for _ in range(n)]
        rx, ry = midranks_reference(x), midranks_reference(y)
        if len(set(rx)) == 1 or len(set(ry)) == 1:
            continue
        expected = pearson_two_pass(rx, ry)
        assert spearman(paired(x, y)) == pytest.approx(expected, abs=1e-12)


def test_spearman_invariant_under_monotone_transform():
    rng = np.random.default_rng(8)
    x = rng.normal(size=60)
    y = rng.normal(size=60)
    base = spearman(paired(x, y))
    assert spearman(paired(np.exp(x), y)) == pytest.approx(base, abs=1e-12)


# ---------------------------------------------------------------------------
# dependent correlations


def test_dependent_equal_correlations_give_p_one():
    for r12 in (0.0, 0.3, 0.8):
        res = compare_dependent_correlations(0.4, 0.4, r12, 200)
        assert res.statistic == 0.0
        assert res.p_value == 1.0
        assert res.test == "dependent-overlapping"


def test_dependent_large_sample_moderate_difference_significant():
    res = compare_dependent_correlations(0.5, 0.3, 0.2, 1000)
    assert res.p_value < 0.01


def test_dependent_preconditions():
    with pytest.raises(StatsError):
        compare_dependent_correlations(0.5, 0.3, 0.2, 3)
    with pytest.raises(StatsError):
        compare_dependent_correlations(0.999999, 0.3, 0.2, 100)
    with pytest.raises(StatsError):
        compare_dependent_correlations(0.5, 0.3, 0.999999, 100)


def test_dependent_refuses_when_pooled_covariance_degenerates():
    # one extreme and one weak correlation push the covariance estimate past
    # its valid range; the test must refuse instead of producing a p-value
    with pytest.raises(StatsError, match="out of range"):
        compare_dependent_correlations(-0.98, -0.145, 0.107, 80)


def test_dependent_symmetry_flips_sign():
    a = compare_dependent_correlations(0.5, 0.2, 0.4, 150)
    b = compare_dependent_correlations(0.2, 0.5, 0.4, 150)
    assert a.statistic == pytest.approx(-b.statistic, abs=1e-12)
    assert a.p_value == pytest.approx(b.p_value, abs=1e-15)


def test_p_values_monotone_in_z():
    zs = [0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 8.0]
    ps = [two_tailed_p(z) for z in zs]
    assert ps[0] == 1.0
    assert all(b < a for a, b in zip(ps, ps[1:]))
    # deep tail stays positive thanks to erfc
    assert 0.0 < two_tailed_p(30.0) < 1e-100


# ---------------------------------------------------------------------------
# independent correlations


def test_independent_closed_form():
    res = compare_independent_correlations(0.2, 5000, 0.0, 5000)
    expected_z = (math.atanh(0.2) - 0.0) / math.sqrt(2.0 / 4997.0)
    assert res.statistic == pytest.approx(expected_z, abs=1e-12)
    assert res.p_value < 0.01
    assert res.n_obs == (5000, 5000)


def test_independent_equal_correlations():
    res = compare_independent_correlations(0.35, 400, 0.35, 220)
    assert res.statistic == 0.0 and res.p_value == 1.0


def test_independent_boundary_guard():
    with pytest.raises(StatsError):
        compare_independent_correlations(0.999999, 100, 0.5, 100)


def test_independent_calibration_under_null():
    # under a true null, p-values should be roughly uniform
    rng = np.random.default_rng(55)
    n1, n2 = 120, 150
    rejections = 0
    trials = 2000
    for _ in range(trials):
        x = rng.standard_normal((n1, 2))
        y = rng.standard_normal((n2, 2))
        r1 = np.corrcoef(x[:, 0], x[:, 1])[0, 1]
        r2 = np.corrcoef(y[:, 0], y[:, 1])[0, 1]
        if compare_independent_correlations(r1, n1, r2, n2).p_value < 0.05:
            rejections += 1
    assert abs(rejections / trials - 0.05) < 0.02


# ---------------------------------------------------------------------------
# minmax + regression


def test_minmax_basic():
    out = minmax_scale([2.0, 4.0, 6.0])
    assert out.tolist() == [0.0, 0.5, 1.0]


def test_minmax_identity_on_unit_interval():
    v = [0.0, 0.25, 0.75, 1.0]
    assert minmax_scale(v).tolist() == v


def test_minmax_roundtrip():
    rng = np.random.default_rng(9)
    v = rng.normal(size=200) * 40 + 7
    scaled = minmax_scale(v)
    recovered = scaled * (v.max() - v.min()) + v.min()
    assert np.max(np.abs(recovered - v)) <= 1e-12


def test_minmax_constant_errors():
    with pytest.raises(StatsError, match="constant"):
        minmax_scale([3.0, 3.0, 3.0])


def test_fit_ols_recovers_exact_line():
    rng = np.random.default_rng(10)
    x = rng.uniform(size=100)
    y = 4.25 * x - 0.75
    slope, intercept = fit_ols(x, y)
    assert abs(slope - 4.25) <= 1e-10
    assert abs(intercept + 0.75) <= 1e-10


def test_linreg_noiseless_line():
    rng = np.random.default_rng(11)
    x = rng.uniform(size=200)
    y = 2.0 * x + 1.0
    res = linreg_holdout(x, y, 0.8, seed=3)
    assert res.mse <= 1e-20
    assert res.explained_variance >= 1.0 - 1e-12
    assert res.n_train == 160 and res.n_test == 40


def test_linreg_determinism():
    rng = np.random.default_rng(12)
    x = rng.uniform(size=50)
    y = rng.uniform(size=50)
    a = linreg_holdout(x, y, seed=13)
    b = linreg_holdout(x, y, seed=13)
    assert a == b
    c = linreg_holdout(x, y, seed=14)
    assert a != c


def test_linreg_independent_target_ev_nonpositive_on_average():
    rng = np.random.default_rng(13)
    evs = []
    for seed in range(30):
        x = rng.uniform(size=80)
        y = rng.standard_normal(80)
        evs.append(linreg_holdout(x, y, seed=seed).explained_variance)
    assert np.mean(evs) <= 0.0


def test_linreg_preconditions():
    with pytest.raises(StatsError):
        linreg_holdout([1, 2, 3], [1, 2, 3])
    with pytest.raises(StatsError):
        linreg_holdout([1.0] * 20, list(range(20)), seed=1)
