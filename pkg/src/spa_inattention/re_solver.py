"""Backward induction for the full-information (rational expectations) model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError
from .parallel import map_chunks
from .statespace import (
    Batch,
    Environment,
    NextValues,
    decision_values,
    flow_matrix,
    terminal_values,
)


@dataclass(frozen=True)
class StatePoint:
    asset_idx: int
    income_idx: int
    aime_idx: int
    unemployed: bool
    spa: int
    receiving: bool
    type_idx: int
    age: int

    def batch(self, env: Environment) -> Batch:
        return Batch(
            np.array([self.type_idx]),
            np.array([self.income_idx]),
            np.array([self.unemployed]),
            np.array([env.aime.points[self.aime_idx]]),
            np.array([self.asset_idx]),
        )


@dataclass
class SolutionRE:
    """Value and policy tables indexed by age offset from ``age_start``.

    ``value_r[t]`` has the W-shape (K, Y, U, M, A); ``value_n[t]`` adds a
    leading SPA axis and is NaN for SPA values at or below the age. Policies
    hold decision indices (-1 where undefined). The last entry of the value
    arrays is the terminal bequest node.
    """

    env: Environment
    value_r: np.ndarray
    value_n: np.ndarray
    policy_r: np.ndarray
    policy_n: np.ndarray

    def value(self, state: StatePoint) -> float:
        t = self.env.age_index(state.age)
        w = (state.type_idx, state.income_idx, int(state.unemployed), state.aime_idx, state.asset_idx)
        if state.receiving:
            return float(self.value_r[t][w])
        return float(self.value_n[t][(state.spa - self.env.params.spa_init,) + w])

    def decision(self, state: StatePoint) -> tuple:
        """(next asset index, worked) chosen at ``state``."""
        t = self.env.age_index(state.age)
        w = (state.type_idx, state.income_idx, int(state.unemployed), state.aime_idx, state.asset_idx)
        if state.receiving:
            d = int(self.policy_r[t][w])
        else:
            d = int(self.policy_n[t][(state.spa - self.env.params.spa_init,) + w])
        return d // 2, bool(d % 2)

    def next_values(self, age: int) -> NextValues:
        t = self.env.age_index(age) + 1
        return NextValues.from_values(self.env, age, self.value_r[t], self.value_n[t])

    def to_frame(self):
        """Long table: one row per age and valid state."""
        return value_frame(self.env, self.value_r, self.value_n, self.policy_r, self.policy_n)


def value_frame(env: Environment, value_r, value_n, policy_r, policy_n):
    """Values and policies as a long table; policy columns are -1 where the choice is random."""
    import pandas as pd

    idx = np.indices(env.w_shape).reshape(5, -1)
    frames = []
    for t, age in enumerate(env.params.ages):
        for s in [None] + list(np.flatnonzero(env.valid_spa(age))):
            if s is None:
                val, pol, spa, rec = value_r[t].ravel(), policy_r[t].ravel(), -1, True
            else:
                val, pol = value_n[t][s].ravel(), policy_n[t][s].ravel()
                spa, rec = int(env.params.spa_values[s]), False
            pol = pol.astype(int)
            frames.append(
                pd.DataFrame(
                    {
                        "age": age,
                        "receiving": int(rec),
                        "spa": spa,
                        "type": idx[0],
                        "income_idx": idx[1],
                        "unemployed": idx[2],
                        "aime_idx": idx[3],
                        "asset_idx": idx[4],
                        "value": val,
                        "next_asset_idx": np.where(pol < 0, -1, pol // 2),
                        "work": np.where(pol < 0, -1, pol % 2),
                    }
                )
            )
    return pd.concat(frames, ignore_index=True)


def feasible_choices(env: Environment, state: StatePoint) -> set:
    """Decisions (next asset index, worked) with positive consumption."""
    flow = flow_matrix(env, state.age, state.batch(env), state.receiving)[0]
    ds = np.flatnonzero(np.isfinite(flow))
    if len(ds) == 0:
        raise ConfigError(f"no feasible decision at {state}")
    return {(int(d) // 2, bool(d % 2)) for d in ds}


def _maximise(z):
    if np.any(np.all(~np.isfinite(z), axis=-1)):
        raise ConfigError("a state has no feasible decision; raise transfers or the asset grid")
    pol = np.argmax(z, axis=-1)
    return np.take_along_axis(z, pol[..., None], axis=-1)[..., 0], pol


def bellman_step(env: Environment, age: int, value_r_next, value_n_next, workers: int = 1):
    """One backward-induction step: values and argmax policies at ``age``."""
    nxt = NextValues.from_values(env, age, value_r_next, value_n_next)
    batch = env.grid_batch()
    spas = np.flatnonzero(env.valid_spa(age))

    def block(rows):
        sub = batch.take(rows)
        vr, pr = _maximise(decision_values(env, age, sub, nxt, True))
        if len(spas):
            vn, pn = _maximise(decision_values(env, age, sub, nxt, False, spas))
        else:
            vn = np.empty((len(rows), 0))
            pn = np.empty((len(rows), 0), dtype=int)
        return vr, pr, vn, pn

    vr, pr, vn, pn = map_chunks(block, len(batch), workers)
    value_r = vr.reshape(env.w_shape)
    policy_r = pr.reshape(env.w_shape).astype(np.int16)
    value_n = np.full((env.S,) + env.w_shape, np.nan)
    policy_n = np.full((env.S,) + env.w_shape, -1, dtype=np.int16)
    for j, s in enumerate(spas):
        value_n[s] = vn[:, j].reshape(env.w_shape)
        policy_n[s] = pn[:, j].reshape(env.w_shape)
    return value_r, value_n, policy_r, policy_n


def solve_re(env: Environment, workers: int = 1) -> SolutionRE:
    """Backward induction from the death age down to the start age."""
    ages = env.params.ages
    n = len(ages)
    vr_T, vn_T = terminal_values(env)
    value_r = np.empty((n + 1,) + env.w_shape)
    value_n = np.empty((n + 1, env.S) + env.w_shape)
    policy_r = np.empty((n,) + env.w_shape, dtype=np.int16)
    policy_n = np.empty((n, env.S) + env.w_shape, dtype=np.int16)
    value_r[n], value_n[n] = vr_T, vn_T
    for t in range(n - 1, -1, -1):
        value_r[t], value_n[t], policy_r[t], policy_n[t] = bellman_step(
            env, int(ages[t]), value_r[t + 1], value_n[t + 1], workers
        )
    return SolutionRE(env, value_r, value_n, policy_r, policy_n)
