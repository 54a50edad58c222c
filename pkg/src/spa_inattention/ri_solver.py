"""Rationally inattentive model solved as a dynamic logit with a default rule.

Within a period, at each freely observed state, the choice rule and the
default rule solve

    p(d | spa) = q(d) exp(z(d, spa) / lam) / sum_d' q(d') exp(z(d', spa) / lam)
    q(d)       = sum_spa mu(spa) p(d | spa)

and the value of each SPA state is ``lam * log sum_d q(d) exp(z(d, spa) / lam)``.
Only the SPA of households not yet receiving their pension is costly to
observe; everywhere else the period problem is a plain maximisation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import model as mc
from .exceptions import ConfigError, ConvergenceError, DomainError
from .parallel import map_chunks
from .re_solver import _maximise, value_frame
from .statespace import Environment, NextValues, decision_values, terminal_values

log = logging.getLogger(__name__)


def entropy(dist) -> float:
    dist = np.asarray(dist, dtype=float)
    nz = dist[dist > 0]
    return float(-np.sum(nz * np.log(nz)))


def mutual_information(p, mu, q=None):
    """I(SPA; decision) in nats for choice rule ``p`` (..., S, D) and prior ``mu``."""
    p = np.asarray(p, dtype=float)
    mu = np.asarray(mu, dtype=float)
    implied = np.einsum("...s,...sd->...d", mu, p)
    if q is None:
        q = implied
    q = np.asarray(q, dtype=float)
    q_b = np.broadcast_to(q[..., None, :], p.shape)
    if np.any((q_b == 0) & (p > 0)):
        raise DomainError("default rule puts zero mass on a decision the choice rule uses")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0) / np.where(q_b > 0, q_b, 1.0)), 0.0)
    out = np.einsum("...s,...s->...", mu, terms.sum(axis=-1))
    return np.maximum(out, 0.0) if np.ndim(out) else max(float(out), 0.0)


@dataclass
class FixedPointResult:
    p: np.ndarray  # (B, S, D)
    q: np.ndarray  # (B, D)
    value: np.ndarray  # (B, S)
    iterations: np.ndarray  # (B,)
    residual: np.ndarray  # (B,)  sup_d |q - sum_s mu p|
    gap: np.ndarray  # (B,)  upper bound on the distance to the optimal net value
    mu: np.ndarray  # (B, S) or (S,)

    @property
    def net_value(self):
        """Expected payoff net of the attention cost, sum_s mu(s) V(s)."""
        return np.einsum("...s,...s->...", self.mu, self.value)

    @property
    def info(self):
        return mutual_information(self.p, self.mu, self.q)


def _log_multipliers(logq, zl, logmu):
    """log Z_s and log c_d where c_d = sum_s mu_s exp(z_ds / lam) / Z_s."""
    L = logq[:, None, :] + zl
    logZ = logsumexp(L, axis=2)
    logc = logsumexp(logmu[:, :, None] + zl - logZ[:, :, None], axis=1)
    return L, logZ, logc


def ri_fixed_point(z, mu, lam, tol=1e-10, max_iter=10_000, q0=None):
    """Solve the default-rule fixed point at a batch of freely observed states.

    ``z`` is (B, S, D) or (S, D) with -inf marking infeasible decisions, ``mu``
    the (S,) or (B, S) prior over the costly state. The default rule is
    updated multiplicatively, q <- q * c**w with c_d = sum_s mu(s) p(d | s) / q(d);
    w = 1 is the plain update q <- sum_s mu(s) p(. | s). While successive
    multipliers keep pointing the same way the relaxation ``w`` doubles after
    each step that raises the objective and halves after a rejected one; it
    drops back to 1 as soon as they disagree. Iteration stops once the plain update changes q by
    at most ``tol`` in sup norm and the duality-gap bound
    lam * (max_d c_d - 1) is negligible.
    """
    if lam <= 0:
        raise DomainError("attention cost must be positive")
    z = np.asarray(z, dtype=float)
    single = z.ndim == 2
    if single:
        z = z[None]
    B, S, D = z.shape
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (B, S))
    if not np.allclose(mu.sum(axis=1), 1.0, atol=1e-10):
        raise DomainError("mu must sum to 1")
    feasible = np.isfinite(z[:, 0, :])
    if np.any(np.isfinite(z) != feasible[:, None, :]):
        raise DomainError("feasible decisions must coincide across SPA values")
    if np.any(~feasible.any(axis=1)):
        raise DomainError("a state has no feasible decision")

    with np.errstate(divide="ignore"):
        logmu = np.log(mu)
    zl = z / lam
    if q0 is None:
        logq = np.where(feasible, 0.0, -np.inf)
    else:
        with np.errstate(divide="ignore"):
            logq = np.where(feasible, np.log(np.asarray(q0, dtype=float)), -np.inf)
    logq = logq - logsumexp(logq, axis=1, keepdims=True)

    omega = np.ones(B)
    prev_dir = np.zeros((B, D))
    iterations = np.zeros(B, dtype=int)
    active = np.arange(B)
    converged = np.zeros(B, dtype=bool)
    floor = -690.0  # exp(floor) ~ 1e-300: feasible decisions never reach exactly zero
    for it in range(1, max_iter + 1):
        lq = logq[active]
        fa, mua = feasible[active], mu[active]
        L, logZ, logc = _log_multipliers(lq, zl[active], logmu[active])
        p = np.exp(L - logZ[:, :, None])
        q = np.exp(lq)
        logc = np.where(fa, logc, -np.inf)
        f = lam * np.einsum("bs,bs->b", mua, logZ)
        gap = lam * np.expm1(np.max(logc, axis=1))
        change = np.max(np.abs(np.einsum("bs,bsd->bd", mua, p) - q), axis=1)
        iterations[active] = it
        done = (change <= tol) & (gap <= tol * np.maximum(1.0, np.abs(f)) + 1e-14 * lam)
        converged[active[done]] = True
        keep = ~done
        active, lq, p, q, logc, fa, mua = (
            active[keep], lq[keep], p[keep], q[keep], logc[keep], fa[keep], mua[keep]
        )
        if len(active) == 0:
            break

        # over-relax only while consecutive multipliers point the same way;
        # a sign flip means the plain update is oscillating toward the optimum
        direction = np.where(fa, logc, 0.0)
        aligned = np.sum(q * direction * prev_dir[active], axis=1) > 0
        omega[active[~aligned]] = 1.0
        prev_dir[active] = direction

        # proposal q * c**w; its exact objective change, computed without cancellation
        x = omega[active][:, None] * direction
        em = np.where(fa, np.expm1(x), 0.0)
        den = 1.0 + np.sum(q * em, axis=1)
        num = np.einsum("bsd,bd->bs", p - q[:, None, :], em)
        df = lam * np.einsum("bs,bs->b", mua, np.log1p(num / den[:, None]))
        plain = omega[active] == 1.0
        accept = (df > 0) | plain
        new = np.where(fa, np.maximum(lq + x - np.log(den)[:, None], floor), -np.inf)
        new -= logsumexp(new, axis=1, keepdims=True)
        logq[active[accept]] = new[accept]
        grow = accept & (df > 0) & aligned
        omega[active[grow]] = np.minimum(omega[active[grow]] * 2.0, 1e15)
        omega[active[~grow]] = np.maximum(1.0, omega[active[~grow]] / 2.0)

    # final consistent pair from the last default rule
    L, logZ, logc = _log_multipliers(logq, zl, logmu)
    logp = L - logZ[:, :, None]
    p = np.exp(logp)
    q = np.exp(logq)
    residual = np.max(np.abs(q - np.einsum("bs,bsd->bd", mu, p)), axis=1)
    gap = lam * np.expm1(np.max(np.where(feasible, logc, -np.inf), axis=1))
    value = lam * logZ
    if not converged.all():
        worst = float(np.max(residual[~converged]))
        raise ConvergenceError(
            f"default-rule iteration did not converge in {max_iter} steps "
            f"({(~converged).sum()} states, residual {worst:.3e})",
            worst,
        )
    if single:
        return FixedPointResult(p[0], q[0], value[0], iterations[:1], residual[:1], gap[:1], mu[0])
    return FixedPointResult(p, q, value, iterations, residual, gap, mu)


def choice_rule_from_default(z, q, lam):
    """p(d | spa) implied by a default rule q: softmax of log q + z / lam."""
    with np.errstate(divide="ignore"):
        L = np.log(q)[..., None, :] + np.asarray(z) / lam
    return np.exp(L - logsumexp(L, axis=-1, keepdims=True))


def conditional_spa_weights(age: int, receiving: bool, params: mc.ModelParams, spa: int | None = None):
    """Distribution over the current SPA given the freely observed state.

    Receiving households know their SPA (degenerate at ``spa``); otherwise
    the no-receipt prior, supported on SPA values above the current age.
    """
    if receiving:
        dist = np.zeros(params.n_spa)
        if spa is not None:
            dist[spa - params.spa_init] = 1.0
        return dist
    if age >= params.spa_cap:
        raise DomainError("everyone receives the state pension from the SPA cap on")
    return mc.no_receipt_prior(age, params)


@dataclass
class SolutionRI:
    """Values for every age; default rules and information flows where attention binds.

    ``default_rule[age]`` is (n_W, D) over the grid W-points, in the
    ``Environment.grid_batch`` order; ``support[age]`` lists the SPA indices
    with positive prior mass at that age.
    """

    env: Environment
    lam: float
    value_r: np.ndarray
    value_n: np.ndarray
    policy_r: np.ndarray
    policy_n: np.ndarray
    prior: dict = field(default_factory=dict)
    support: dict = field(default_factory=dict)
    default_rule: dict = field(default_factory=dict)
    info_flow: dict = field(default_factory=dict)
    residual: dict = field(default_factory=dict)
    gap: dict = field(default_factory=dict)
    iterations: dict = field(default_factory=dict)

    @property
    def ri_ages(self):
        return sorted(self.default_rule)

    def next_values(self, age: int) -> NextValues:
        t = self.env.age_index(age) + 1
        return NextValues.from_values(self.env, age, self.value_r[t], self.value_n[t])

    def choice_rule(self, age: int) -> np.ndarray:
        """p(d | W, spa) on the grid, shape (n_W, len(support), D)."""
        env = self.env
        z = decision_values(env, age, env.grid_batch(), self.next_values(age), False, self.support[age])
        return choice_rule_from_default(z, self.default_rule[age], self.lam)

    def to_frame(self):
        """Values for every age and valid state; policy columns are -1 where the choice rule is random."""
        return value_frame(self.env, self.value_r, self.value_n, self.policy_r, self.policy_n)

    def info_frame(self):
        """Information flow, fixed-point residual and duality gap per attentive age and W-point."""
        import pandas as pd

        idx = np.indices(self.env.w_shape).reshape(5, -1)
        frames = [
            pd.DataFrame({"age": age, "type": idx[0], "income_idx": idx[1], "unemployed": idx[2],
                          "aime_idx": idx[3], "asset_idx": idx[4], "info_flow": self.info_flow[age],
                          "prior_entropy": entropy(self.prior[age]), "residual": self.residual[age],
                          "gap": self.gap[age], "iterations": self.iterations[age]})
            for age in self.ri_ages
        ]
        return pd.concat(frames, ignore_index=True)

    def default_frame(self, age: int):
        import pandas as pd

        idx = np.indices(self.env.w_shape).reshape(5, -1)
        cols = {"age": age, "type": idx[0], "income_idx": idx[1], "unemployed": idx[2],
                "aime_idx": idx[3], "asset_idx": idx[4], "info_flow": self.info_flow[age]}
        q = self.default_rule[age]
        for d in range(q.shape[1]):
            cols[f"q{d}"] = q[:, d]
        return pd.DataFrame(cols)

    def choice_frame(self, age: int):
        import pandas as pd

        p = self.choice_rule(age)
        idx = np.indices(self.env.w_shape).reshape(5, -1)
        frames = []
        for j, s in enumerate(self.support[age]):
            cols = {"age": age, "spa": int(self.env.params.spa_values[s]), "type": idx[0],
                    "income_idx": idx[1], "unemployed": idx[2], "aime_idx": idx[3], "asset_idx": idx[4],
                    "value": self.value_n[self.env.age_index(age)][s].ravel()}
            for d in range(p.shape[2]):
                cols[f"p{d}"] = p[:, j, d]
            frames.append(pd.DataFrame(cols))
        return pd.concat(frames, ignore_index=True)


def solve_ri(env: Environment, lam: float | None = None, workers: int = 1, tol=1e-10, max_iter=10_000) -> SolutionRI:
    """Backward induction with the default-rule fixed point wherever the SPA is uncertain."""
    p = env.params
    lam = p.attention_cost if lam is None else lam
    if not lam > 0:
        raise ConfigError("the inattentive model needs a positive attention cost", "model.lambda")
    ages = p.ages
    n = len(ages)
    value_r = np.empty((n + 1,) + env.w_shape)
    value_n = np.empty((n + 1, env.S) + env.w_shape)
    policy_r = np.empty((n,) + env.w_shape, dtype=np.int16)
    policy_n = np.full((n, env.S) + env.w_shape, -1, dtype=np.int16)
    value_r[n], value_n[n] = terminal_values(env)
    sol = SolutionRI(env, lam, value_r, value_n, policy_r, policy_n)
    batch = env.grid_batch()

    for t in range(n - 1, -1, -1):
        age = int(ages[t])
        nxt = NextValues.from_values(env, age, value_r[t + 1], value_n[t + 1])
        valid = np.flatnonzero(env.valid_spa(age))
        try:
            prior = conditional_spa_weights(age, False, p) if len(valid) else np.zeros(env.S)
        except DomainError:
            prior = np.zeros(env.S)  # nobody can still be waiting at this age
        support = np.flatnonzero(prior > 0)
        attentive = len(support) >= 2

        def block(rows):
            sub = batch.take(rows)
            vr, pr = _maximise(decision_values(env, age, sub, nxt, True))
            out = [vr, pr]
            if len(valid):
                zn = decision_values(env, age, sub, nxt, False, valid)
                vn, pn = _maximise(zn)
                out += [vn, pn]
                if attentive:
                    pos = np.searchsorted(valid, support)
                    fp = ri_fixed_point(zn[:, pos, :], prior[support], lam, tol, max_iter)
                    out += [fp.value, fp.q, fp.info, fp.residual, fp.gap, fp.iterations]
            return tuple(out)

        res = map_chunks(block, len(batch), workers)
        value_r[t] = res[0].reshape(env.w_shape)
        policy_r[t] = res[1].reshape(env.w_shape)
        value_n[t] = np.nan
        for j, s in enumerate(valid):
            value_n[t][s] = res[2][:, j].reshape(env.w_shape)
            policy_n[t][s] = res[3][:, j].reshape(env.w_shape)
        if attentive:
            for j, s in enumerate(support):
                value_n[t][s] = res[4][:, j].reshape(env.w_shape)
                policy_n[t][s] = -1
            sol.prior[age] = prior
            sol.support[age] = support
            sol.default_rule[age] = res[5]
            sol.info_flow[age] = res[6]
            sol.residual[age] = res[7]
            sol.gap[age] = res[8]
            sol.iterations[age] = res[9]
            log.info("age %d: max iterations %d, max residual %.2e", age, res[9].max(), res[7].max())
    return sol
