"""One test per acceptance criterion, at the stated tolerances."""

import time

import numpy as np
import pandas as pd
import pytest

from spa_inattention import model as mc
from spa_inattention.beliefs import belief_error_stats
from spa_inattention.calibration import default_grid_spec, default_model
from spa_inattention.econometrics import ols_cluster, treatment_report
from spa_inattention.oracles import (
    LAMBDA_LADDER,
    brute_force_enumerate,
    direct_ri_oracle,
    fixed_point_route,
    lambda_ladder_info,
    tiny_re_instances,
    tiny_ri_instances,
)
from spa_inattention.re_solver import StatePoint, solve_re
from spa_inattention.ri_solver import entropy, solve_ri
from spa_inattention.simulator import ScenarioSpec, simulate_panel
from spa_inattention.statespace import Environment

# the treatment-pattern criteria compare population effects that differ by a
# few points; panels this size keep sampling noise well below the gaps
PATTERN_HOUSEHOLDS = 5000
PATTERN_SEEDS = (1, 2, 3)
BELIEF_AGE = 58


def _pattern_scenario(seed):
    return ScenarioSpec(seed=seed, mortality=False, households_per_cohort=PATTERN_HOUSEHOLDS, age_end=75)


@pytest.fixture(scope="module")
def panels_36k(sol_re, sol_ri):
    scenario = ScenarioSpec(mortality=False)
    t0 = time.perf_counter()
    panel_re = simulate_panel(sol_re, scenario)
    t_re = time.perf_counter() - t0
    t0 = time.perf_counter()
    panel_ri = simulate_panel(sol_ri, scenario)
    return panel_re, panel_ri, t_re, time.perf_counter() - t0


@pytest.fixture(scope="module")
def pattern_reports(sol_re, sol_ri):
    return {seed: treatment_report(simulate_panel(sol_re, _pattern_scenario(seed)),
                                   simulate_panel(sol_ri, _pattern_scenario(seed)))
            for seed in PATTERN_SEEDS}


@pytest.fixture(scope="module")
def costly_ri(env):
    t0 = time.perf_counter()
    sol = solve_ri(env, lam=1e9)
    return sol, time.perf_counter() - t0


def _effects(report):
    t = report.set_index(["model", "population"])
    return {
        "re_all": t.loc[("RE", "Whole Population")],
        "re_above": t.loc[("RE", "Above Median Asset in SPA-1")],
        "ri_above": t.loc[("RI", "Above Median Asset in SPA-1")],
    }


def test_1_re_oracle_equivalence():
    t0 = time.perf_counter()
    instances = tiny_re_instances()
    assert len(instances) >= 5
    for prob in instances:
        s = prob.state
        assert s.age + 3 >= prob.env.params.age_death and prob.env.A <= 3 and prob.env.Y <= 2
        sol = solve_re(prob.env)
        value = sol.value(StatePoint(s.asset_idx, s.income_idx, s.aime_idx, s.unemployed, s.spa,
                                     s.receiving, s.type_idx, s.age))
        assert abs(value - brute_force_enumerate(prob).value) <= 1e-10, prob.name
    assert time.perf_counter() - t0 < 10


def test_2_ri_oracle_equivalence():
    t0 = time.perf_counter()
    instances = tiny_ri_instances()
    assert len(instances) >= 5
    for prob in instances:
        assert prob.periods <= 2 and prob.z1.shape[0] <= 3 and prob.z1.shape[1] <= 3
        ref = direct_ri_oracle(prob)
        fp = fixed_point_route(prob)
        assert abs(float(fp.net_value) - ref.net_value) <= 1e-6, prob.name
        assert np.max(np.abs(fp.p - ref.p)) <= 1e-4, prob.name
    assert time.perf_counter() - t0 < 60


def test_3_fixed_point_consistency(env, timed_ri):
    sol, seconds = timed_ri
    p = env.params
    assert env.A == 30 and p.attention_cost == 0.001 and p.p_spa_step == 0.06
    assert (p.gamma, p.nu, p.beta, p.theta) == (2.32, 0.288, 0.986, 2.899e-2)
    assert sol.ri_ages == list(range(p.age_start, 69))
    for age in sol.ri_ages:
        assert np.max(sol.residual[age]) <= 1e-8
        info = sol.info_flow[age]
        assert np.all(info >= 0.0) and np.all(info <= entropy(sol.prior[age]))
    assert max(np.max(sol.info_flow[a]) for a in sol.ri_ages) > 0
    assert seconds < 600


def test_4_degeneration(env, costly_ri):
    t0 = time.perf_counter()
    flat = Environment.build(default_model(p_spa_step=0.0), default_grid_spec())
    re, ri = solve_re(flat), solve_ri(flat)
    np.testing.assert_array_equal(ri.policy_r, re.policy_r)
    np.testing.assert_array_equal(ri.policy_n, re.policy_n)
    sol, seconds = costly_ri
    assert sol.ri_ages
    for age in sol.ri_ages:
        assert np.max(sol.info_flow[age]) < 1e-10
    assert time.perf_counter() - t0 + seconds < 300


def test_5_lambda_monotonicity():
    info = lambda_ladder_info(LAMBDA_LADDER)
    assert LAMBDA_LADDER == (0.01, 0.1, 1.0, 10.0)
    assert all(b <= a for a, b in zip(info, info[1:]))
    assert any(b < a for a, b in zip(info, info[1:]))


def test_6_panel_invariants(panels_36k, env):
    p = env.params
    for panel, seconds in ((panels_36k[0], panels_36k[2]), (panels_36k[1], panels_36k[3])):
        window = panel[(panel["age"] >= 52) & (panel["age"] <= 75)]
        assert len(window) == 36_000 and window["household_id"].nunique() == 1_500
        gap = np.abs(panel["consumption"] + panel["next_assets"] - panel["cash_on_hand"])
        assert np.all(gap <= 1e-9 * np.abs(panel["cash_on_hand"]))
        g = panel.groupby("household_id")
        step = g["true_spa"].diff().dropna()
        assert step.isin([0, 1]).all()
        frozen = panel[panel["age"] >= p.aime_freeze_age]
        assert (frozen.groupby("household_id")["aime"].nunique() == 1).all()
        assert panel.loc[panel["age"] >= 80, "worked"].sum() == 0
        assert seconds < 60


def test_7_rational_expectations_pattern(pattern_reports):
    for seed, report in pattern_reports.items():
        e = _effects(report)
        assert e["re_all"]["treatment"] > 0 and e["re_all"]["p"] < 0.01, seed
        assert e["re_above"]["treatment"] < e["re_all"]["treatment"], seed


def test_8_inattention_raises_above_median_effect(pattern_reports):
    assert len(pattern_reports) >= 3
    for seed, report in pattern_reports.items():
        e = _effects(report)
        assert e["ri_above"]["treatment"] > e["re_above"]["treatment"], seed


def test_9_belief_share(panels_36k, env, costly_ri):
    p = env.params
    panel_re, panel_ri = panels_36k[0], panels_36k[1]
    _, share = belief_error_stats(panel_ri, BELIEF_AGE)
    print(f"share of {BELIEF_AGE}-year-olds within a year of their SPA: {share:.3f}")
    assert 0.55 <= share <= 0.85
    # free information: beliefs are the truth
    assert belief_error_stats(panel_re, BELIEF_AGE)[1] == 1.0
    # prohibitive cost: nobody learns, every mode is the prior mode
    blind = simulate_panel(costly_ri[0], ScenarioSpec(mortality=False, age_end=60))
    rows = blind[(blind["age"] == BELIEF_AGE) & (blind["receiving"] == 0)]
    prior_mode = mc.distribution_mode(mc.no_receipt_prior(BELIEF_AGE, p), p)
    assert (rows["belief_mode"] == prior_mode).all()
    expected = float(np.mean(np.abs(prior_mode - rows["true_spa"]) <= 1))
    assert belief_error_stats(blind, BELIEF_AGE)[1] == expected


def test_10_cluster_monte_carlo():
    t0 = time.perf_counter()
    n_groups, per_group, slope = 50, 20, 0.5
    hits = 0
    for seed in range(200):
        rng = np.random.default_rng(seed)
        g = np.repeat(np.arange(n_groups), per_group)
        x = rng.normal(size=n_groups)[g] + rng.normal(size=g.size)
        y = 1.0 + slope * x + rng.normal(size=n_groups)[g] + rng.normal(size=g.size)
        X = pd.DataFrame({"const": np.ones(g.size), "x": x})
        res = ols_cluster(X, y, g)["x"]
        hits += abs(res["coef"] - slope) <= 2 * res["se"]
    print(f"coverage {hits / 200:.3f}")
    assert hits / 200 >= 0.93
    assert time.perf_counter() - t0 < 120
