"""Monte Carlo panels of households under fixed SPA reform scenarios.

Each household gets its own random stream, derived from ``(seed, cohort,
household)``, so panels do not depend on batching or worker count. The
simulation evaluates choice-specific values at the household's actual
(off-grid) AIME; assets stay on the grid because choices are next-period
grid points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import stats

from . import model as mc
from .beliefs import bayes_step, modes
from .discretization import snap_down
from .exceptions import ConfigError
from .re_solver import SolutionRE
from .ri_solver import SolutionRI, choice_rule_from_default, ri_fixed_point
from .statespace import Batch, decision_values

PANEL_VERSION = 1
PANEL_COLUMNS = [
    "household_id", "cohort", "age", "type", "assets", "income", "unemployed", "worked",
    "consumption", "next_assets", "cash_on_hand", "aime", "receiving", "true_spa",
    "belief_mode", "belief_true_prob",
]
MAP_COLUMNS = ["age", "spa", "type", "income_idx", "unemployed", "aime_idx", "asset_idx",
               "p_work_ri", "work_re", "diff"]
PERCENTILES = (1, 5, 10, 25, 50, 75, 90, 95, 99)


@dataclass(frozen=True)
class ScenarioSpec:
    """Reform scenario: one realised SPA path per cohort.

    ``cohorts`` holds (label, path) pairs; a path is a tuple of SPA values for
    ages ``age_start`` .. ``age_death - 1`` or None for a constant SPA equal
    to the label. Initial assets come from ``init_assets_table`` ((value,
    weight) pairs) when given, else from an illustrative mixture: a share
    ``init_assets_zero_share`` with nothing and a lognormal for the rest.
    """

    cohorts: tuple = ((60, None), (61, None), (62, None))
    households_per_cohort: int = 500
    seed: int = 20240601
    mortality: bool = True
    age_end: int | None = None
    init_assets_median: float = 60_000.0
    init_assets_sigma: float = 1.5
    init_assets_zero_share: float = 0.3
    init_assets_table: tuple = field(default=())

    def __post_init__(self):
        if self.households_per_cohort < 1:
            raise ConfigError("need at least one household per cohort", "scenario.households")
        if not 0.0 <= self.init_assets_zero_share < 1.0:
            raise ConfigError("zero-asset share must lie in [0, 1)", "scenario.init_assets.zero_share")
        if self.init_assets_median <= 0.0 or self.init_assets_sigma < 0.0:
            raise ConfigError("initial asset lognormal needs median > 0 and sigma >= 0", "scenario.init_assets.median")

    def paths(self, params: mc.ModelParams) -> list:
        n = len(params.ages)
        out = []
        for label, path in self.cohorts:
            path = np.full(n, int(label)) if path is None else np.asarray(path, dtype=int)
            if len(path) != n:
                raise ConfigError(f"SPA path of cohort {label} must cover ages {params.age_start}-{params.age_death - 1}", "scenario.cohorts")
            steps = np.diff(path)
            if np.any(path < params.spa_init) or np.any(path > params.spa_cap) or np.any((steps != 0) & (steps != 1)):
                raise ConfigError(f"SPA path of cohort {label} is not a valid SPA process path", "scenario.cohorts")
            out.append((int(label), path))
        return out


def _inverse_cdf(probs, u):
    """Index drawn from each row of ``probs`` with uniforms ``u``."""
    cdf = np.cumsum(probs, axis=-1)
    idx = np.sum(u[:, None] > cdf / cdf[:, -1:], axis=1)
    return np.minimum(idx, probs.shape[-1] - 1)


def _household_draws(seed, cohort, n, n_ages):
    init = np.empty((n, 4))
    per_age = np.empty((n, n_ages, 4))
    for h in range(n):
        rng = np.random.default_rng(np.random.SeedSequence([seed, cohort, h]))
        init[h] = rng.random(4)
        per_age[h] = rng.random((n_ages, 4))
    return init, per_age


def _initial_assets(scenario: ScenarioSpec, u, grid):
    if scenario.init_assets_table:
        vals = np.array([v for v, _ in scenario.init_assets_table], dtype=float)
        w = np.array([w for _, w in scenario.init_assets_table], dtype=float)
        a = vals[_inverse_cdf(np.broadcast_to(w, (len(u), len(w))), u)]
    else:
        w0 = scenario.init_assets_zero_share
        rest = np.clip((u - w0) / (1.0 - w0), 1e-12, 1.0 - 1e-12)
        a = np.where(u < w0, 0.0, scenario.init_assets_median * np.exp(scenario.init_assets_sigma * stats.norm.ppf(rest)))
    return snap_down(np.minimum(a, grid.max), grid)


def simulate_panel(solution, scenario: ScenarioSpec) -> pd.DataFrame:
    """Simulate every cohort of ``scenario`` under an RE or RI solution."""
    env = solution.env
    p = env.params
    inattentive = isinstance(solution, SolutionRI)
    if not inattentive and not isinstance(solution, SolutionRE):
        raise ConfigError("solution must come from solve_re or solve_ri")
    ages = p.ages
    age_end = p.age_death - 1 if scenario.age_end is None else scenario.age_end
    if not p.age_start <= age_end < p.age_death:
        raise ConfigError("scenario.age_end outside the model's ages", "scenario.age_end")
    n = scenario.households_per_cohort
    P_spa = mc.spa_transition_matrix(p)
    spa_values = p.spa_values
    shares = np.array([t.population_share for t in env.model.types])
    lam = solution.lam if inattentive else None
    next_cache = {}

    frames = []
    for c, (label, path) in enumerate(scenario.paths(p)):
        init, draws = _household_draws(scenario.seed, c, n, len(ages))
        k = _inverse_cdf(np.broadcast_to(shares, (n, len(shares))), init[:, 0])
        iy = _inverse_cdf(np.stack([env.chains[j].initial for j in k]), init[:, 1])
        u = init[:, 2] < env.unemp_prob(p.age_start)[k, iy]
        ia = _initial_assets(scenario, init[:, 3], env.assets)
        factor = np.array([env.model.types[j].aime_init_factor for j in k])
        aime = factor * env.income[k, 0, iy]
        alive = np.ones(n, dtype=bool)
        spa = np.full(n, path[0])
        receiving = p.age_start >= spa
        belief = np.where(spa_values[None, :] == spa[:, None], 1.0, 0.0)
        if inattentive:
            belief[~receiving] = mc.no_receipt_prior(p.age_start, p)

        for i, age in enumerate(ages):
            age = int(age)
            if age > age_end or not alive.any():
                break
            if age not in next_cache:
                next_cache[age] = solution.next_values(age)
            nxt = next_cache[age]
            h = np.flatnonzero(alive)
            batch = Batch(k[h], iy[h], u[h], aime[h], ia[h])
            d = np.empty(len(h), dtype=int)
            like = np.ones((len(h), p.n_spa))

            rec = receiving[h]
            if rec.any():
                z = decision_values(env, age, batch.take(rec), nxt, True)
                d[rec] = np.argmax(z, axis=1)
            if (~rec).any():
                nr = ~rec
                valid = np.flatnonzero(env.valid_spa(age))
                z = decision_values(env, age, batch.take(nr), nxt, False, valid)
                j_true = np.searchsorted(valid, spa[h][nr] - p.spa_init)
                if inattentive and age in solution.support:
                    sup = solution.support[age]
                    pos = np.searchsorted(valid, sup)
                    fp = ri_fixed_point(z[:, pos, :], solution.prior[age][sup], lam)
                    rule = choice_rule_from_default(z[:, pos, :], fp.q, lam)
                    j_sup = np.searchsorted(sup, spa[h][nr] - p.spa_init)
                    rows = np.arange(nr.sum())
                    chosen = _inverse_cdf(rule[rows, j_sup], draws[h[nr], i, 2])
                    d[nr] = chosen
                    lk = np.zeros((nr.sum(), p.n_spa))
                    lk[:, sup] = rule[rows, :, chosen]
                    like[nr] = lk
                else:
                    d[nr] = np.argmax(z[np.arange(nr.sum()), j_true], axis=1)

            worked = (d % 2).astype(bool)
            a_next_idx = d // 2
            y = env.income[k[h], i, iy[h]]
            a_now = env.assets.points[ia[h]]
            coh = mc.cash_on_hand(a_now, age, worked, y, u[h], rec, env.has_db[k[h]], aime[h], p, env.model.db)
            a_next = env.assets.points[a_next_idx]
            cons = coh - a_next
            if np.any(cons <= 0):
                raise ConfigError(f"infeasible simulated choice at age {age}")
            frames.append(pd.DataFrame({
                "household_id": c * n + h,
                "cohort": label,
                "age": age,
                "type": np.array([env.model.types[j].type_id for j in k[h]]),
                "assets": a_now,
                "income": y,
                "unemployed": u[h].astype(int),
                "worked": worked.astype(int),
                "consumption": cons,
                "next_assets": a_next,
                "cash_on_hand": coh,
                "aime": aime[h],
                "receiving": rec.astype(int),
                "true_spa": spa[h],
                "belief_mode": modes(belief[h], spa_values),
                "belief_true_prob": belief[h, spa[h] - p.spa_init],
            }))

            if age == p.age_death - 1:
                break
            # transitions to age + 1
            nxt_age = age + 1
            ia[h] = a_next_idx
            aime[h] = mc.aime_update(aime[h], mc.work_year(age, p), worked, y, p)
            trans = env.transition[k[h], iy[h]]
            iy[h] = _inverse_cdf(trans, draws[h, i, 0])
            u[h] = draws[h, i, 1] < env.unemp_prob(nxt_age)[k[h], iy[h]]
            new_spa = np.where(receiving[h], spa[h], path[i + 1])
            nr = ~receiving[h]
            if inattentive and nr.any():
                out, _ = bayes_step(belief[h[nr]], like[nr], P_spa, spa_values, nxt_age, new_spa[nr])
                belief[h[nr]] = out
            spa[h] = new_spa
            receiving[h] = receiving[h] | (nxt_age >= spa[h])
            if not inattentive:
                belief[h] = np.where(spa_values[None, :] == spa[h][:, None], 1.0, 0.0)
            if scenario.mortality:
                alive[h] = draws[h, i, 3] < env.model.mortality(age)

    panel = pd.concat(frames, ignore_index=True)
    return panel.sort_values(["cohort", "household_id", "age"], kind="stable").reset_index(drop=True)[PANEL_COLUMNS]


def write_panel(panel: pd.DataFrame, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# panel version {PANEL_VERSION}\n")
        panel.to_csv(fh, index=False)


def read_panel(path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#", float_precision="round_trip")


def summary_stats(panel: pd.DataFrame, variable: str) -> pd.DataFrame:
    """Percentiles, mean, sd, skewness and kurtosis of one panel column."""
    if variable not in panel.columns:
        raise ValueError(f"unknown variable {variable!r}")
    x = panel[variable].to_numpy(dtype=float)
    if len(x) == 0:
        raise ValueError("empty panel")
    row = {f"p{q}": float(np.percentile(x, q)) for q in PERCENTILES}
    row["mean"] = float(np.mean(x))
    sd = float(np.std(x, ddof=1)) if len(x) > 1 else 0.0
    row["sd"] = sd
    if sd == 0.0:
        row["skewness"] = row["kurtosis"] = float("nan")
    else:
        row["skewness"] = float(stats.skew(x))
        row["kurtosis"] = float(stats.kurtosis(x, fisher=False))
    return pd.DataFrame([{"variable": variable, "n": len(x), **row}])


def age_profiles(panel: pd.DataFrame) -> pd.DataFrame:
    g = panel.groupby("age")
    return pd.DataFrame({
        "age": g.size().index.astype(int),
        "participation_rate": g["worked"].mean().to_numpy(),
        "mean_assets": g["assets"].mean().to_numpy(),
        "n": g.size().to_numpy(),
    })


def _same_grid(a, b) -> bool:
    ea, eb = a.env, b.env
    return (
        ea.w_shape == eb.w_shape
        and np.array_equal(ea.assets.points, eb.assets.points)
        and np.array_equal(ea.aime.points, eb.aime.points)
        and np.array_equal(ea.income, eb.income)
        and ea.params == eb.params
    )


def choice_prob_diff_map(solution_ri: SolutionRI, solution_re: SolutionRE, age: int) -> pd.DataFrame:
    """P_RI(work | W, spa) - 1[RE works at (W, spa)] over the grid, non-receiving households."""
    if not _same_grid(solution_ri, solution_re):
        raise ConfigError("RI and RE solutions must share parameters and grids")
    env = solution_re.env
    p = env.params
    t = env.age_index(age)
    spas = np.flatnonzero(env.valid_spa(age))
    n_w = int(np.prod(env.w_shape))
    work_ri = np.zeros((n_w, len(spas)))
    if age in solution_ri.support:
        rule = solution_ri.choice_rule(age)
        sup = solution_ri.support[age]
        work_ri[:, np.searchsorted(spas, sup)] = np.minimum(rule[:, :, 1::2].sum(axis=2), 1.0)
    ri_pol = solution_ri.policy_n[t].reshape(env.S, -1)
    re_pol = solution_re.policy_n[t].reshape(env.S, -1)
    idx = np.indices(env.w_shape).reshape(5, -1)
    frames = []
    for j, s in enumerate(spas):
        if not (age in solution_ri.support and s in solution_ri.support[age]):
            work_ri[:, j] = ri_pol[s] % 2
        frames.append(pd.DataFrame({
            "age": age, "spa": int(p.spa_values[s]), "type": idx[0], "income_idx": idx[1],
            "unemployed": idx[2], "aime_idx": idx[3], "asset_idx": idx[4],
            "p_work_ri": work_ri[:, j], "work_re": re_pol[s] % 2,
            "diff": work_ri[:, j] - re_pol[s] % 2,
        }))
    if not frames:  # everyone receives at this age
        return pd.DataFrame(columns=MAP_COLUMNS)
    return pd.concat(frames, ignore_index=True)


def moment_distance(simulated: pd.DataFrame, target: pd.DataFrame, columns=("participation_rate",),
                    weights=None) -> float:
    """Weighted squared distance between simulated and target age profiles.

    Both frames carry an ``age`` column plus the moment ``columns`` (as
    produced by :func:`age_profiles`); only ages present in both count.
    ``weights`` maps a column to its weight (default 1). A diagnostic only:
    nothing here fits parameters.
    """
    both = simulated.merge(target, on="age", suffixes=("_sim", "_target"))
    if len(both) == 0:
        raise ValueError("no common ages between simulated and target profiles")
    weights = weights or {}
    total = 0.0
    for col in columns:
        gap = both[f"{col}_sim"].to_numpy(float) - both[f"{col}_target"].to_numpy(float)
        total += weights.get(col, 1.0) * float(gap @ gap)
    return total
