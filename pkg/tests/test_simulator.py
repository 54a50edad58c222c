import numpy as np
import pandas as pd
import pytest

from spa_inattention import model as mc
from spa_inattention.calibration import default_grid_spec, default_model
from spa_inattention.exceptions import ConfigError
from spa_inattention.re_solver import solve_re
from spa_inattention.simulator import (
    PANEL_COLUMNS,
    ScenarioSpec,
    age_profiles,
    choice_prob_diff_map,
    read_panel,
    simulate_panel,
    summary_stats,
    write_panel,
)
from spa_inattention.statespace import Environment

SMALL = ScenarioSpec(households_per_cohort=60, seed=5)


@pytest.fixture(scope="module")
def panel_re(small_re):
    return simulate_panel(small_re, SMALL)


@pytest.fixture(scope="module")
def panel_ri(small_ri):
    return simulate_panel(small_ri, SMALL)


def check_invariants(panel, params):
    rel = np.abs(panel["consumption"] + panel["next_assets"] - panel["cash_on_hand"])
    assert np.all(rel <= 1e-9 * np.maximum(1.0, np.abs(panel["cash_on_hand"])))
    for _, g in panel.groupby("household_id"):
        spa = g["true_spa"].to_numpy()
        assert np.all(np.diff(spa) >= 0) and np.all(np.diff(spa) <= 1)
        rec = g["receiving"].to_numpy()
        assert np.all(np.diff(rec) >= 0)
        assert np.all(np.diff(spa[rec == 1]) == 0)
        aime = g.loc[g["age"] >= params.aime_freeze_age, "aime"].to_numpy()
        assert np.all(aime == aime[0]) if len(aime) else True
    assert panel.loc[panel["age"] >= params.age_work_end, "worked"].sum() == 0
    assert np.all(panel["consumption"] > 0)


def test_panel_invariants(panel_re, panel_ri, small_env):
    for panel in (panel_re, panel_ri):
        assert list(panel.columns) == PANEL_COLUMNS
        check_invariants(panel, small_env.params)


def test_same_seed_identical(small_re, small_ri, panel_re, panel_ri):
    pd.testing.assert_frame_equal(simulate_panel(small_re, SMALL), panel_re)
    pd.testing.assert_frame_equal(simulate_panel(small_ri, SMALL), panel_ri)


def test_households_share_draws_across_models(panel_re, panel_ri):
    a = panel_re[panel_re["age"] == 52][["household_id", "type", "assets", "income", "unemployed"]]
    b = panel_ri[panel_ri["age"] == 52][["household_id", "type", "assets", "income", "unemployed"]]
    pd.testing.assert_frame_equal(a.reset_index(drop=True), b.reset_index(drop=True))


def test_rational_beliefs_are_exact(panel_re):
    assert (panel_re["belief_mode"] == panel_re["true_spa"]).all()
    assert (panel_re["belief_true_prob"] == 1.0).all()


def test_immortal_panel_size(small_re):
    sc = ScenarioSpec(households_per_cohort=20, seed=1, mortality=False)
    panel = simulate_panel(small_re, sc)
    p = small_re.env.params
    assert len(panel) == 3 * 20 * len(p.ages)
    assert panel.groupby("household_id").size().eq(len(p.ages)).all()


def test_no_spa_risk_keeps_spa_at_60():
    env = Environment.build(default_model(p_spa_step=0.0), default_grid_spec(n_assets=8, n_aime=2))
    panel = simulate_panel(solve_re(env), ScenarioSpec(cohorts=((60, None),), households_per_cohort=30))
    assert (panel["true_spa"] == 60).all()


def test_invalid_path_rejected(small_re):
    n = len(small_re.env.params.ages)
    bad = tuple([60] * 5 + [62] * (n - 5))
    with pytest.raises(ConfigError):
        simulate_panel(small_re, ScenarioSpec(cohorts=((1, bad),), households_per_cohort=5))


def test_reform_path_followed(small_re):
    p = small_re.env.params
    path = tuple(min(60 + max(a - 55, 0), 66) for a in p.ages)
    panel = simulate_panel(small_re, ScenarioSpec(cohorts=((99, path),), households_per_cohort=20, mortality=False))
    first = panel.groupby("household_id")["true_spa"].apply(lambda s: s.iloc[-1])
    assert (first == 66).all()
    rec_age = panel[panel["receiving"] == 1].groupby("household_id")["age"].min()
    assert (rec_age == 66).all()


def test_round_trip_csv(panel_ri, tmp_path):
    path = tmp_path / "panel.csv"
    write_panel(panel_ri, path)
    assert path.read_text().startswith("# panel version")
    back = read_panel(path)
    pd.testing.assert_frame_equal(back, panel_ri, check_dtype=False, rtol=0, atol=0)


def test_summary_stats_examples():
    df = pd.DataFrame({"x": [1.0, 2, 3, 4, 100]})
    row = summary_stats(df, "x").iloc[0]
    assert row["mean"] == 22 and row["p50"] == 3
    const = summary_stats(pd.DataFrame({"x": [5.0] * 4}), "x").iloc[0]
    assert const["sd"] == 0 and np.isnan(const["skewness"]) and np.isnan(const["kurtosis"])
    with pytest.raises(ValueError):
        summary_stats(pd.DataFrame({"x": []}), "x")


def test_age_profiles(panel_re):
    prof = age_profiles(panel_re)
    assert list(prof.columns) == ["age", "participation_rate", "mean_assets", "n"]
    assert (prof.loc[prof["age"] >= 80, "participation_rate"] == 0).all()
    retired = panel_re.assign(worked=0)
    assert (age_profiles(retired)["participation_rate"] == 0).all()


def test_choice_map(small_ri, small_re, sol_re):
    m = choice_prob_diff_map(small_ri, small_re, 57)
    assert m["p_work_ri"].between(0, 1).all()
    np.testing.assert_allclose(m["diff"], m["p_work_ri"] - m["work_re"])
    later = choice_prob_diff_map(small_ri, small_re, 75)
    assert len(later) == 0
    with pytest.raises(ConfigError):
        choice_prob_diff_map(small_ri, sol_re, 57)


def test_moment_distance():
    from spa_inattention.simulator import moment_distance

    sim = pd.DataFrame({"age": [52, 53, 54], "participation_rate": [0.9, 0.8, 0.5]})
    tgt = pd.DataFrame({"age": [53, 54, 55], "participation_rate": [0.7, 0.5, 0.1]})
    assert moment_distance(sim, tgt) == pytest.approx(0.01)
    assert moment_distance(sim, tgt, weights={"participation_rate": 3.0}) == pytest.approx(0.03)
    assert moment_distance(sim, sim) == 0.0
    with pytest.raises(ValueError):
        moment_distance(sim, tgt.assign(age=[70, 71, 72]))
