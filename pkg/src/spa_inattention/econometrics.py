"""Pooled linear probability model of participation with household-clustered errors.

The treatment is being below the (true) state pension age; age and cohort
dummies absorb the common profiles, so the treatment is identified from
cohorts reaching different SPAs at the same age.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import stats

from .exceptions import ConfigError, RankError

POPULATIONS = ("all", "above_median_assets_at_spa_minus_1")
REPORT_COLUMNS = ["population", "n_obs", "n_clusters", "treatment", "se", "z", "p"]


@dataclass(frozen=True)
class RegressionSpec:
    dependent: str = "worked"
    age_dummies: bool = True
    cohort_dummies: bool = True
    extra_controls: tuple = ()
    cluster_by: str = "household_id"
    subpopulation: str = "all"
    age_min: int = 52
    age_max: int = 75

    def __post_init__(self):
        if self.subpopulation not in POPULATIONS:
            raise ConfigError(f"unknown subpopulation {self.subpopulation!r}", "regression.subpopulation")


@dataclass
class RegressionResult:
    columns: list
    coef: np.ndarray
    cov: np.ndarray
    n_obs: int
    n_clusters: int

    @property
    def se(self):
        return np.sqrt(np.diag(self.cov))

    @property
    def z(self):
        return self.coef / self.se

    @property
    def p(self):
        return 2.0 * stats.norm.sf(np.abs(self.z))

    def __getitem__(self, name):
        j = self.columns.index(name)
        return {"coef": self.coef[j], "se": self.se[j], "z": self.z[j], "p": self.p[j]}


def above_median_households(panel: pd.DataFrame) -> np.ndarray:
    """Households whose assets at age SPA - 1 exceed the whole-sample median."""
    at = panel[panel["age"] == panel["true_spa"] - 1]
    at = at.groupby("household_id")["assets"].first()
    med = np.median(at.to_numpy())
    return at.index[at.to_numpy() > med].to_numpy()


def _dummies(values, prefix):
    levels = np.unique(values)
    cols = {f"{prefix}_{lv}": (values == lv).astype(float) for lv in levels[1:]}
    return cols


def build_design(panel: pd.DataFrame, spec: RegressionSpec = RegressionSpec()):
    """(X frame, y, cluster ids) for the treatment regression."""
    needed = {spec.dependent, "age", "cohort", "true_spa", spec.cluster_by, *spec.extra_controls}
    missing = needed - set(panel.columns)
    if missing:
        raise ConfigError(f"panel lacks columns {sorted(missing)}")
    rows = panel[(panel["age"] >= spec.age_min) & (panel["age"] <= spec.age_max)]
    if spec.subpopulation != "all":
        keep = above_median_households(panel)
        rows = rows[rows["household_id"].isin(keep)]
    if len(rows) == 0:
        raise ValueError("no observations in the regression sample")
    age = rows["age"].to_numpy()
    cols = {"const": np.ones(len(rows)), "treatment": (age < rows["true_spa"].to_numpy()).astype(float)}
    if spec.age_dummies:
        cols.update(_dummies(age, "age"))
    if spec.cohort_dummies:
        cols.update(_dummies(rows["cohort"].to_numpy(), "cohort"))
    for name in spec.extra_controls:
        cols[name] = rows[name].to_numpy(dtype=float)
    X = pd.DataFrame(cols, index=rows.index)
    _check_rank(X)
    return X, rows[spec.dependent].to_numpy(dtype=float), rows[spec.cluster_by].to_numpy()


def _check_rank(X: pd.DataFrame):
    A = X.to_numpy()
    rank = np.linalg.matrix_rank(A)
    if rank == A.shape[1]:
        return
    # name the columns that add nothing to the span of the ones before them
    bad, kept = [], []
    for j, name in enumerate(X.columns):
        trial = kept + [j]
        if np.linalg.matrix_rank(A[:, trial]) < len(trial):
            bad.append(name)
        else:
            kept.append(j)
    raise RankError(f"design is rank deficient; collinear columns: {bad}", bad)


def ols_cluster(X, y, clusters) -> RegressionResult:
    """OLS with the cluster-robust sandwich and small-sample factor G/(G-1) (N-1)/(N-K)."""
    names = list(X.columns) if isinstance(X, pd.DataFrame) else [f"x{j}" for j in range(np.shape(X)[1])]
    A = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = A.shape
    if np.linalg.matrix_rank(A) < k:
        if isinstance(X, pd.DataFrame):
            _check_rank(X)
        raise RankError("design is rank deficient", names)
    codes, groups = pd.factorize(np.asarray(clusters))
    g = len(groups)
    if g < 2:
        raise ValueError("need at least two clusters")
    Q, R = np.linalg.qr(A)
    coef = np.linalg.solve(R, Q.T @ y)
    resid = y - A @ coef
    scores = np.zeros((g, k))
    np.add.at(scores, codes, A * resid[:, None])
    bread = np.linalg.inv(R.T @ R)
    meat = scores.T @ scores
    factor = g / (g - 1) * (n - 1) / (n - k)
    cov = factor * bread @ meat @ bread
    cov = (cov + cov.T) / 2.0
    return RegressionResult(names, coef, cov, n, g)


def treatment_effect(panel, spec: RegressionSpec = RegressionSpec()) -> RegressionResult:
    X, y, cl = build_design(panel, spec)
    return ols_cluster(X, y, cl)


def _report_rows(panel, base: RegressionSpec):
    rows = []
    for pop, label in (("all", "Whole Population"), (POPULATIONS[1], "Above Median Asset in SPA-1")):
        spec = RegressionSpec(**{**base.__dict__, "subpopulation": pop})
        res = treatment_effect(panel, spec)
        t = res["treatment"]
        rows.append({"population": label, "n_obs": res.n_obs, "n_clusters": res.n_clusters,
                     "treatment": t["coef"], "se": t["se"], "z": t["z"], "p": t["p"]})
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def treatment_table(panel, spec: RegressionSpec = RegressionSpec()) -> pd.DataFrame:
    """Whole-population and above-median rows for a single panel."""
    return _report_rows(panel, spec)


def treatment_report(panel_re, panel_ri, spec: RegressionSpec = RegressionSpec()) -> pd.DataFrame:
    """RE vs RI treatment effects side by side, one row per population and model."""
    keys = ["household_id", "cohort", "true_spa"]
    first_re = panel_re[panel_re["age"] == panel_re["age"].min()][keys].reset_index(drop=True)
    first_ri = panel_ri[panel_ri["age"] == panel_ri["age"].min()][keys].reset_index(drop=True)
    if not first_re.equals(first_ri):
        raise ConfigError("RE and RI panels come from different scenarios")
    re = _report_rows(panel_re, spec).assign(model="RE")
    ri = _report_rows(panel_ri, spec).assign(model="RI")
    return pd.concat([re, ri], ignore_index=True)[["model"] + REPORT_COLUMNS]
