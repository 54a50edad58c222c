"""Discretised state space and choice-specific values.

The freely observed part of the state (a "W-point") is indexed by
``(type, income node, unemployed, AIME node, asset node)``. On top of it a
household is either receiving its state pension, in which case the SPA no
longer matters, or not receiving with a current SPA strictly above its age.

A decision is ``d = next_asset_index * 2 + work``; ordering decisions this
way makes ``argmax`` break ties toward lower saving, then leisure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import model as mc
from .discretization import Grid, MarkovChain, build_grid, discretize_ar1, interp_weights
from .exceptions import ConfigError


@dataclass(frozen=True)
class GridSpec:
    n_assets: int = 30
    asset_max: float = 600_000.0
    asset_curvature: float = 2.5
    n_income: int = 5
    n_aime: int = 3
    aime_max: float = 40_000.0
    aime_curvature: float = 1.0


@dataclass
class Environment:
    model: mc.Model
    assets: Grid
    aime: Grid
    chains: tuple
    income: np.ndarray  # (K, n_ages + 1, Y) income offers in levels, ages age_start..age_death
    unemp: np.ndarray  # (K, Y) probability of unemployment given the income node
    spec: GridSpec = field(default_factory=GridSpec)

    @classmethod
    def build(cls, model: mc.Model, spec: GridSpec = GridSpec(), chains=None) -> "Environment":
        if chains is None:
            chains = tuple(
                discretize_ar1(t.rho, max(t.sigma_eps, 1e-12), spec.n_income, t.sigma_init)
                for t in model.types
            )
        if any(ch.n != spec.n_income for ch in chains):
            raise ConfigError("every income chain needs income.n nodes", "income.n")
        assets = build_grid(0.0, spec.asset_max, spec.n_assets, spec.asset_curvature)
        aime = build_grid(0.0, spec.aime_max, spec.n_aime, spec.aime_curvature)
        p = model.params
        ages = np.arange(p.age_start, p.age_death + 1)
        income = np.stack(
            [
                np.exp(t.log_income_trend(ages)[:, None] + ch.nodes[None, :])
                for t, ch in zip(model.types, chains)
            ]
        )
        unemp = np.array([np.asarray(t.unemp_prob, dtype=float) for t in model.types])
        if unemp.shape != (len(model.types), spec.n_income):
            raise ConfigError("unemployment table length must equal income.n", "type.unemp")
        return cls(model, assets, aime, tuple(chains), income, unemp, spec)

    # ------------------------------------------------------------------ sizes

    @property
    def params(self) -> mc.ModelParams:
        return self.model.params

    @property
    def K(self):
        return len(self.model.types)

    @property
    def Y(self):
        return self.spec.n_income

    @property
    def M(self):
        return len(self.aime)

    @property
    def A(self):
        return len(self.assets)

    @property
    def D(self):
        return 2 * self.A

    @property
    def S(self):
        return self.params.n_spa

    @property
    def w_shape(self):
        return (self.K, self.Y, 2, self.M, self.A)

    @property
    def transition(self) -> np.ndarray:
        return np.stack([ch.transition for ch in self.chains])

    @property
    def has_db(self) -> np.ndarray:
        return np.array([t.has_db for t in self.model.types])

    def age_index(self, age: int) -> int:
        return int(age) - self.params.age_start

    def unemp_prob(self, age: int) -> np.ndarray:
        """P(u = 1 | type, income node) at ``age``; no unemployment past the work-end age."""
        if age >= self.params.age_work_end:
            return np.zeros_like(self.unemp)
        return self.unemp

    def grid_batch(self) -> "Batch":
        k, iy, u, im, ia = (g.ravel() for g in np.indices(self.w_shape))
        return Batch(k, iy, u.astype(bool), self.aime.points[im], ia)

    def decision_assets(self) -> np.ndarray:
        return np.repeat(np.arange(self.A), 2)

    def decision_work(self) -> np.ndarray:
        return np.tile([False, True], self.A)

    def valid_spa(self, age: int) -> np.ndarray:
        """Mask over SPA values a non-receiving household of this age can have."""
        return self.params.spa_values > age


@dataclass
class Batch:
    """A set of freely observed states, one entry per row."""

    k: np.ndarray
    iy: np.ndarray
    u: np.ndarray
    aime: np.ndarray
    ia: np.ndarray

    def __len__(self):
        return len(self.k)

    def take(self, rows) -> "Batch":
        return Batch(self.k[rows], self.iy[rows], self.u[rows], self.aime[rows], self.ia[rows])


# ---------------------------------------------------------------------- values


def terminal_values(env: Environment):
    """Bequest value of the entering assets at the death age, for both receipt classes."""
    beq = mc.bequest_utility(env.assets.points, env.params)
    vr = np.broadcast_to(beq, env.w_shape).copy()
    vn = np.broadcast_to(vr, (env.S,) + env.w_shape).copy()
    return vr, vn


def expected_next(env: Environment, age: int, v_next: np.ndarray) -> np.ndarray:
    """Integrate next-period values over income and unemployment.

    ``v_next`` has shape (K, Y', U', M', A'); the result (K, Y, M', A') is
    conditional on the current income node.
    """
    pu = env.unemp_prob(age + 1)  # (K, Y')
    ev_u = (1.0 - pu)[:, :, None, None] * v_next[:, :, 0] + pu[:, :, None, None] * v_next[:, :, 1]
    return np.einsum("kij,kjma->kima", env.transition, ev_u)


@dataclass
class NextValues:
    """Expected next-period values for each next-period receipt class."""

    receiving: np.ndarray  # (K, Y, M', A')
    not_receiving: np.ndarray  # (S, K, Y, M', A'), NaN where the class is impossible

    @classmethod
    def from_values(cls, env: Environment, age: int, vr_next, vn_next) -> "NextValues":
        er = expected_next(env, age, vr_next)
        en = np.full((env.S,) + er.shape, np.nan)
        for s in np.flatnonzero(env.valid_spa(age + 1)):
            if np.all(np.isnan(vn_next[s])):
                continue
            en[s] = expected_next(env, age, vn_next[s])
        return cls(er, en)


def flow_matrix(env: Environment, age: int, batch: Batch, receiving: bool) -> np.ndarray:
    """Flow utility of every decision, -inf where infeasible. Shape (B, D)."""
    p = env.params
    ai = env.age_index(age)
    y = env.income[batch.k, ai, batch.iy]
    has_db = env.has_db[batch.k]
    a = env.assets.points[batch.ia]
    coh = np.stack(
        [
            mc.cash_on_hand(a, age, w, y, batch.u, receiving, has_db, batch.aime, p, env.model.db)
            for w in (False, True)
        ],
        axis=1,
    )  # (B, 2)
    c = coh[:, None, :] - env.assets.points[None, :, None]  # (B, A', 2)
    lei = np.array([1.0, 1.0 - p.work_hours])
    with np.errstate(invalid="ignore", divide="ignore"):
        util = mc._crra_bundle(np.where(c > 0, c, 1.0), lei[None, None, :], p)
    ok = c > 0
    can_work = (~batch.u) & (age < p.age_work_end)
    ok[:, :, 1] &= can_work[:, None]
    return np.where(ok, util, -np.inf).reshape(len(batch), env.D)


def next_aime(env: Environment, age: int, batch: Batch) -> np.ndarray:
    """Next-period AIME for leisure and work, shape (B, 2)."""
    p = env.params
    y = env.income[batch.k, env.age_index(age), batch.iy]
    t = mc.work_year(age, p)
    return np.stack([mc.aime_update(batch.aime, t, w, y, p) for w in (False, True)], axis=1)


class ContinuationBuilder:
    """Survival-weighted discounted continuation for a batch at one age."""

    def __init__(self, env: Environment, age: int, batch: Batch, nxt: NextValues):
        self.env = env
        self.age = age
        self.batch = batch
        self.nxt = nxt
        lo, w = interp_weights(next_aime(env, age, batch), env.aime.points)
        self.lo, self.w = lo, w  # (B, 2)
        p = env.params
        self.survival = env.model.mortality(age)
        self.bequest = mc.bequest_utility(env.assets.points, p)
        self._cache = {}

    def _interp(self, ev):
        b = self.batch
        lo_vals = ev[b.k[:, None], b.iy[:, None], self.lo]  # (B, 2, A')
        hi_vals = ev[b.k[:, None], b.iy[:, None], self.lo + 1]
        out = (1.0 - self.w)[:, :, None] * lo_vals + self.w[:, :, None] * hi_vals
        return out.transpose(0, 2, 1).reshape(len(b), self.env.D)

    def next_class(self, key):
        """Interpolated expected value for 'R' or a next-period SPA index."""
        if key not in self._cache:
            ev = self.nxt.receiving if key == "R" else self.nxt.not_receiving[key]
            self._cache[key] = self._interp(ev)
        return self._cache[key]

    def discounted(self, expected):
        p = self.env.params
        beq = np.repeat(self.bequest, 2)[None, :]
        if self.survival == 1.0:
            return p.beta * expected
        if self.survival == 0.0:
            return np.broadcast_to(p.beta * beq, expected.shape)
        return p.beta * (self.survival * expected + (1.0 - self.survival) * beq)

    def receiving(self):
        return self.discounted(self.next_class("R"))

    def not_receiving(self, spa_index: int):
        """Continuation when currently not receiving with SPA = spa_values[spa_index]."""
        p = self.env.params
        spa = int(p.spa_values[spa_index])
        total = None
        for nxt_spa, prob in mc.spa_transition(spa, False, p).items():
            key = "R" if nxt_spa <= self.age + 1 else nxt_spa - p.spa_init
            term = prob * self.next_class(key)
            total = term if total is None else total + term
        return self.discounted(total)


def decision_values(env, age, batch, nxt, receiving, spa_indices=()):
    """Choice-specific values z(d, state).

    Returns (B, D) for receiving households, otherwise (B, len(spa_indices), D).
    """
    cont = ContinuationBuilder(env, age, batch, nxt)
    flow = flow_matrix(env, age, batch, receiving)
    if receiving:
        return flow + cont.receiving()
    return np.stack([flow + cont.not_receiving(s) for s in spa_indices], axis=1)
