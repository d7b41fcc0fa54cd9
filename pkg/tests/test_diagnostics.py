import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ifit.core import DegenerateStatisticError
from ifit.diagnostics import diagnose, sargan_hansen, standardized_scores


def test_perfect_fit():
    t = np.array([1.0, 2.0, 3.0])
    stat, df, p = sargan_hansen(t, t, np.eye(3), 1)
    assert (stat, df, p) == (0.0, 2, 1.0)


def test_closed_form_chi2_two():
    stat, df, p = sargan_hansen([1.0, 1.0, math.sqrt(2.0)], np.zeros(3), np.eye(3), 1)
    assert stat == pytest.approx(4.0)
    assert df == 2
    assert p == pytest.approx(math.exp(-2.0), abs=1e-10)


def test_exactly_identified_has_no_pvalue():
    stat, df, p = sargan_hansen([0.3, -0.1], [0.0, 0.0], np.eye(2), 2)
    assert df == 0 and p is None and stat > 0


def test_q_below_p_rejected():
    with pytest.raises(ValueError):
        sargan_hansen([0.0], [0.0], np.eye(1), 2)


def test_invariant_under_joint_linear_map(rng):
    q = 5
    a = rng.standard_normal((q, q)) + 3 * np.eye(q)
    s = rng.standard_normal((q, q))
    sigma = s @ s.T + np.eye(q)
    t, tau = rng.standard_normal(q), rng.standard_normal(q)
    base = sargan_hansen(t, tau, sigma, 2)[0]
    moved = sargan_hansen(a @ t, a @ tau, a @ sigma @ a.T, 2)[0]
    assert moved == pytest.approx(base, rel=1e-9)


@given(st.floats(0, 100), st.floats(0, 100))
def test_pvalue_monotone_in_stat(x, y):
    lo, hi = sorted((x, y))
    p_lo = sargan_hansen([math.sqrt(lo), 0, 0], np.zeros(3), np.eye(3), 1)[2]
    p_hi = sargan_hansen([math.sqrt(hi), 0, 0], np.zeros(3), np.eye(3), 1)[2]
    assert 0.0 <= p_hi <= p_lo <= 1.0


def test_scores_examples():
    np.testing.assert_array_equal(standardized_scores(np.ones(3), np.ones(3), np.eye(3)), 0.0)
    np.testing.assert_allclose(standardized_scores([2.0], [0.0], [[4.0]]), [1.0])


def test_scores_zero_variance_names_index():
    with pytest.raises(DegenerateStatisticError) as info:
        standardized_scores(np.zeros(3), np.zeros(3), np.diag([1.0, 0.0, 1.0]))
    assert info.value.index == 1


def test_scores_scale_invariance(rng):
    t, tau = rng.standard_normal(4), rng.standard_normal(4)
    s = rng.standard_normal((4, 4))
    sigma = s @ s.T + np.eye(4)
    d = np.diag([10.0, 1.0, 1.0, 1.0])
    np.testing.assert_allclose(standardized_scores(d @ t, d @ tau, d @ sigma @ d),
                               standardized_scores(t, tau, sigma), rtol=1e-12)


def test_diagnose_bundles_everything():
    d = diagnose([1.0, 0.0, 0.0], np.zeros(3), np.eye(3), 1)
    assert d.sh_df == 2
    np.testing.assert_allclose(d.std_scores, [1.0, 0.0, 0.0])
