from fractions import Fraction

import numpy as np
import pandas as pd
import pytest

from spa_inattention import model as mc
from spa_inattention.beliefs import (
    Belief,
    bayes_step,
    belief_error_stats,
    initial_belief,
    modes,
    update_belief,
)
from spa_inattention.exceptions import DomainError

P = mc.ModelParams()


def test_initial_belief_is_prior():
    b = initial_belief(P)
    np.testing.assert_array_equal(b.dist, mc.no_receipt_prior(52, P))
    assert not b.receiving and b.age == 52
    b0 = initial_belief(mc.ModelParams(p_spa_step=0.0))
    assert b0.dist[0] == 1.0 and b0.mode(P) == 60
    assert b.mode(P) == 61


def test_uninformative_likelihood_only_propagates():
    b = initial_belief(P, age=64)
    out = update_belief(b, np.full(P.n_spa, 0.37), P)
    prop = b.dist @ mc.spa_transition_matrix(P)
    prop[P.spa_values <= 65] = 0
    np.testing.assert_allclose(out.dist, prop / prop.sum(), atol=1e-15)
    np.testing.assert_allclose(out.dist, mc.no_receipt_prior(65, P), atol=1e-14)


def test_receipt_reveals_spa():
    b = initial_belief(P, age=62)
    out = update_belief(b, np.ones(P.n_spa), P, receipt_spa=63)
    assert out.receiving and out.spa == 63 - P.spa_init and out.age == 63
    later = update_belief(out, np.ones(P.n_spa), P)
    assert later.receiving and np.array_equal(later.dist, out.dist)


def test_hand_bayes_two_values():
    dist = np.zeros(P.n_spa)
    dist[[2, 3]] = [0.3, 0.7]  # SPA 62 or 63
    lik = np.full(P.n_spa, 0.5)
    lik[[2, 3]] = [0.9, 0.2]
    out = update_belief(Belief(False, dist, 60), lik, P)
    a = Fraction(3, 10) * Fraction(9, 10)
    b = Fraction(7, 10) * Fraction(2, 10)
    a, b = a / (a + b), b / (a + b)
    st, up = Fraction(94, 100), Fraction(6, 100)
    expected = np.zeros(P.n_spa)
    expected[2], expected[3], expected[4] = float(st * a), float(up * a + st * b), float(up * b)
    np.testing.assert_allclose(out.dist, expected, atol=1e-12)
    assert out.mode(P) == 62


def test_zero_probability_action_raises():
    dist = mc.no_receipt_prior(60, P)
    with pytest.raises(DomainError):
        update_belief(Belief(False, dist, 60), np.zeros(P.n_spa), P)


def test_support_stays_above_age():
    rng = np.random.default_rng(3)
    b = initial_belief(P)
    for age in range(52, 69):
        b = update_belief(b, rng.uniform(0.05, 1.0, P.n_spa), P)
        assert np.all(b.dist[P.spa_values <= b.age] == 0)
        assert b.dist.sum() == pytest.approx(1.0, abs=1e-12)


def test_modes_break_ties_low():
    d = np.array([[0.0, 0.5, 0.5], [0.2, 0.2, 0.6]])
    np.testing.assert_array_equal(modes(d, np.array([60, 61, 62])), [61, 62])


def test_filter_is_calibrated():
    """Posterior probabilities match realised SPA frequencies when SPAs follow the process."""
    rng = np.random.default_rng(11)
    n = 10_000
    T = mc.spa_transition_matrix(P)
    spa_idx = np.zeros(n, dtype=int)
    for _ in range(P.age_entry + 1, 53):
        spa_idx = (rng.uniform(size=n)[:, None] > np.cumsum(T[spa_idx], axis=1)).sum(axis=1)
    # an action whose probability rises with the SPA
    work_prob = np.linspace(0.2, 0.8, P.n_spa)
    dist = np.broadcast_to(mc.no_receipt_prior(52, P), (n, P.n_spa)).copy()
    for age in range(52, 58):
        worked = rng.uniform(size=n) < work_prob[spa_idx]
        lik = np.where(worked[:, None], work_prob[None, :], 1 - work_prob[None, :])
        dist, got = bayes_step(dist, lik, T, P.spa_values, age + 1, P.spa_values[spa_idx])
        assert not got.any()
        cum = np.cumsum(T[spa_idx], axis=1)
        spa_idx = (rng.uniform(size=n)[:, None] > cum).sum(axis=1)
    # after the year-57 action the true SPA has taken its age-58 step
    mean_belief = dist.mean(axis=0)
    freq = np.bincount(spa_idx, minlength=P.n_spa) / n
    se = np.sqrt(np.maximum(mean_belief * (1 - mean_belief), 1e-12) / n)
    assert np.all(np.abs(freq - mean_belief) <= 4 * se + 1e-12)
    # and within the households whose mode is 61
    m = modes(dist, P.spa_values) == 61
    sub_b, sub_f = dist[m].mean(axis=0), np.bincount(spa_idx[m], minlength=P.n_spa) / m.sum()
    assert np.all(np.abs(sub_f - sub_b) <= 4 * np.sqrt(np.maximum(sub_b * (1 - sub_b), 1e-12) / m.sum()) + 1e-12)


def _panel(errors, age=58):
    n = len(errors)
    return pd.DataFrame({"age": age, "receiving": 0, "true_spa": 62,
                         "belief_mode": 62 + np.asarray(errors), "household_id": np.arange(n)})


def test_belief_error_stats():
    hist, within = belief_error_stats(_panel([0, 0, 1, -1, 2, -3]))
    assert within == pytest.approx(4 / 6)
    assert list(hist["error_years"]) == [-3, -1, 0, 1, 2]
    assert hist["share"].sum() == pytest.approx(1.0)
    hist, within = belief_error_stats(_panel([0, 0]))
    assert within == 1.0
    with pytest.raises(ValueError):
        belief_error_stats(_panel([0], age=57))
