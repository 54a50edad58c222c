"""Independent reference solutions for tiny instances.

``brute_force_enumerate`` builds the full decision tree of a small model
straight from the scalar primitives in :mod:`model` and scores every
history-contingent plan. ``direct_ri_oracle`` maximises expected payoff minus
lam times mutual information directly over conditional choice probabilities,
without going through the default-rule fixed point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp, softmax

from . import model as mc
from .discretization import MarkovChain, interp_weights
from .exceptions import TooLargeError
from .statespace import Environment, GridSpec

MAX_PLANS = 1_000_000


# ---------------------------------------------------------------------------
# rational expectations: exhaustive plan enumeration


@dataclass
class TreeNode:
    """Decision node: each decision has a flow reward and a list of outcomes.

    An outcome is (probability, child node) or (probability, terminal value).
    """

    rewards: list
    outcomes: list
    labels: list = field(default_factory=list)


@dataclass(frozen=True)
class TinyState:
    age: int
    asset_idx: int
    income_idx: int
    unemployed: bool
    aime_idx: int
    spa: int
    receiving: bool
    type_idx: int = 0


@dataclass
class TinyProblem:
    """A small model instance plus the state its value is compared at."""

    name: str
    env: Environment
    state: TinyState


def _income(env: Environment, k: int, age: int, iy: int) -> float:
    t = env.model.types[k]
    return float(np.exp(t.log_income_trend(age) + env.chains[k].nodes[iy]))


def build_tree(env: Environment, state: TinyState):
    """Decision tree from ``state`` to the death age, built from scalar primitives.

    The AIME interpolation the solver uses enters as a lottery over the two
    bracketing AIME nodes; zero-probability branches are dropped.
    """
    p = env.params
    model = env.model
    assets = env.assets.points
    beta = p.beta

    def node(s: TinyState):
        if s.age >= p.age_death:
            return None
        t = model.types[s.type_idx]
        y = _income(env, s.type_idx, s.age, s.income_idx)
        aime = float(env.aime.points[s.aime_idx])
        a = float(assets[s.asset_idx])
        surv = model.mortality(s.age)
        rewards, outcomes, labels = [], [], []
        work_options = [False] if (s.unemployed or s.age >= p.age_work_end) else [False, True]
        for ia_next in range(len(assets)):
            for worked in work_options:
                coh = mc.cash_on_hand(a, s.age, worked, y, s.unemployed, s.receiving, t.has_db, aime, p, model.db)
                c = coh - assets[ia_next]
                if c <= 0:
                    continue
                r = mc.flow_utility(c, float(mc.leisure(worked, p)), p)
                outs = []
                if surv < 1.0:
                    outs.append((beta * (1.0 - surv), mc.bequest_utility(assets[ia_next], p)))
                if surv > 0.0:
                    nxt_aime = mc.aime_update(aime, mc.work_year(s.age, p), worked, y, p)
                    lo, w = interp_weights(np.array([nxt_aime]), env.aime.points)
                    aime_lottery = [(int(lo[0]), 1.0 - float(w[0])), (int(lo[0]) + 1, float(w[0]))]
                    spa_next = mc.spa_transition(s.spa, s.receiving, p)
                    trans = env.chains[s.type_idx].transition[s.income_idx]
                    for iy2, py in enumerate(trans):
                        pu = env.unemp_prob(s.age + 1)[s.type_idx, iy2]
                        for u2, pu2 in ((False, 1.0 - pu), (True, pu)):
                            for im2, pm in aime_lottery:
                                for spa2, ps in spa_next.items():
                                    prob = beta * surv * py * pu2 * pm * ps
                                    if prob == 0.0:
                                        continue
                                    child = TinyState(s.age + 1, ia_next, iy2, u2, im2, spa2,
                                                      s.receiving or spa2 <= s.age + 1, s.type_idx)
                                    sub = node(child)
                                    if sub is None:
                                        outs.append((prob, mc.bequest_utility(assets[ia_next], p)))
                                    else:
                                        outs.append((prob, sub))
                rewards.append(r)
                outcomes.append(outs)
                labels.append((ia_next, worked))
        return TreeNode(rewards, outcomes, labels)

    return node(state)


def count_plans(tree: TreeNode) -> int:
    """Number of history-contingent plans below ``tree``."""
    total = 0
    for outs in tree.outcomes:
        n = 1
        for _, child in outs:
            if isinstance(child, TreeNode):
                n *= count_plans(child)
        total += n
    return total


def _plan_values(tree: TreeNode) -> np.ndarray:
    """Expected discounted utility of every contingent plan (outer-sum enumeration)."""
    per_decision = []
    for r, outs in zip(tree.rewards, tree.outcomes):
        vals = np.array([r])
        for prob, child in outs:
            if isinstance(child, TreeNode):
                sub = _plan_values(child)
                vals = (vals[:, None] + prob * sub[None, :]).ravel()
            else:
                vals = vals + prob * child
        per_decision.append(vals)
    return np.concatenate(per_decision)


@dataclass
class EnumerationResult:
    value: float
    n_plans: int
    first_decision: tuple


def brute_force_enumerate(problem: TinyProblem, max_plans: int = MAX_PLANS) -> EnumerationResult:
    """Best expected discounted utility over all contingent plans from the start state."""
    tree = build_tree(problem.env, problem.state)
    n = count_plans(tree)
    if n > max_plans:
        raise TooLargeError(f"{problem.name}: {n} plans exceeds the limit of {max_plans}")
    vals = _plan_values(tree)
    best = int(np.argmax(vals))
    # map the flat plan index back to the first decision
    sizes = [_plan_count_decision(tree, j) for j in range(len(tree.rewards))]
    first = int(np.searchsorted(np.cumsum(sizes), best, side="right"))
    return EnumerationResult(float(vals[best]), n, tree.labels[first])


def _plan_count_decision(tree, j):
    n = 1
    for _, child in tree.outcomes[j]:
        if isinstance(child, TreeNode):
            n *= count_plans(child)
    return n


# ---------------------------------------------------------------------------
# tiny instances


def _tiny_model(types, mortality=None, **params):
    base = dict(age_start=78, age_work_end=80, age_death=81, age_entry=20, spa_init=60, spa_cap=70,
                aime_freeze_age=65, age_spouse_retire=65)
    base.update(params)
    p = mc.ModelParams(**base)
    mort = mortality if mortality is not None else mc.MortalityTable.immortal(p.age_death)
    return mc.Model(p, tuple(types), mc.DBPensionParams(), mort)


def _tiny_type(has_db=False, unemp=(0.0, 0.0), delta0=10.0):
    return mc.TypeProfile(1, has_db, delta0, 0.0, 0.0, 0.0, 0.1, 0.1, unemp, 1.0, 0.8)


def _tiny_env(model, chain, n_assets=3, asset_max=30_000.0, n_aime=2, aime_max=30_000.0):
    spec = GridSpec(n_assets=n_assets, asset_max=asset_max, asset_curvature=1.5,
                    n_income=chain.n, n_aime=n_aime, aime_max=aime_max)
    return Environment.build(model, spec, chains=(chain,) * len(model.types))


IDENTITY2 = MarkovChain(np.array([-0.1, 0.1]), np.eye(2), np.array([1.0, 0.0]))
STOCHASTIC2 = MarkovChain(np.array([-0.3, 0.3]), np.array([[0.7, 0.3], [0.4, 0.6]]), np.array([0.5, 0.5]))


def tiny_re_instances() -> list:
    """Shipped instances: at most 3 periods, 3 asset points and 2 income nodes."""
    gomp = mc.MortalityTable({**{a: 1.0 for a in range(0, 78)}, 78: 0.9, 79: 0.8, 80: 0.0, 81: 0.0})
    out = []

    m = _tiny_model([_tiny_type(has_db=True)], mortality=gomp)
    out.append(TinyProblem("deterministic-3-period", _tiny_env(m, IDENTITY2),
                           TinyState(78, 1, 0, False, 1, 60, True)))

    m = _tiny_model([_tiny_type()], age_start=79)
    out.append(TinyProblem("stochastic-income-2-period", _tiny_env(m, STOCHASTIC2),
                           TinyState(79, 1, 0, False, 0, 60, True)))

    m = _tiny_model([_tiny_type(unemp=(0.3, 0.1))], age_start=78, age_death=80, age_work_end=79,
                    mortality=None)
    out.append(TinyProblem("unemployment-risk-2-period", _tiny_env(m, STOCHASTIC2),
                           TinyState(78, 0, 1, False, 0, 60, True)))

    m = _tiny_model([_tiny_type(has_db=True)], age_start=62, age_work_end=63, age_death=64, spa_cap=64)
    out.append(TinyProblem("aime-lottery-2-period", _tiny_env(m, IDENTITY2, n_aime=3),
                           TinyState(62, 1, 1, False, 1, 63, False)))

    m = _tiny_model([_tiny_type()], age_start=67, age_work_end=69, age_death=70, p_spa_step=0.5)
    out.append(TinyProblem("stochastic-spa-3-period", _tiny_env(m, IDENTITY2),
                           TinyState(67, 1, 0, False, 0, 68, False)))

    m = _tiny_model([_tiny_type()])
    out.append(TinyProblem("one-period", _tiny_env(m, IDENTITY2),
                           TinyState(80, 2, 0, False, 0, 60, True)))
    return out


# ---------------------------------------------------------------------------
# rational inattention: direct optimisation over choice rules


MAX_RI_DECISIONS = 3
MAX_RI_STATES = 3


@dataclass
class TinyRIProblem:
    """One- or two-period inattention problem over a costly state.

    One period: ``z1`` (S, D1). Two periods: flow ``z1`` (S, D1), a state
    transition ``P`` (S, S2), second-period payoffs ``z2[d1]`` (S2, D2) for
    each first decision, and discount ``beta``. The second-period prior is
    ``mu @ P`` whatever the first decision.
    """

    name: str
    mu: np.ndarray
    z1: np.ndarray
    lam: float
    P: np.ndarray | None = None
    z2: tuple = ()
    beta: float = 1.0

    @property
    def periods(self) -> int:
        return 1 if self.P is None else 2


@dataclass
class OracleResult:
    net_value: float
    p: np.ndarray  # (S, D) first-period choice rule
    q: np.ndarray
    state_values: np.ndarray  # (S,) payoff net of the information cost, per state
    lattice_value: float
    stage2: list = field(default_factory=list)


def _objective(p, z, mu, lam):
    q = mu @ p
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(p > 0, np.log(np.where(p > 0, p, 1.0)) - np.log(np.where(q > 0, q, 1.0))[..., None, :], 0.0)
    per_state = np.sum(p * (z - lam * ratio), axis=-1)
    return per_state @ mu, per_state


def _simplex_lattice(D, step):
    n = int(round(1.0 / step))
    pts = [c for c in product(range(n + 1), repeat=D) if sum(c) == n]
    return np.array(pts, dtype=float) / n


def _solve_stage(z, mu, lam, step=0.1):
    """max over p (S, D) of sum_s mu_s sum_d p_sd (z_sd - lam log(p_sd / q_d))."""
    z = np.asarray(z, dtype=float)
    mu = np.asarray(mu, dtype=float)
    S, D = z.shape
    if S > MAX_RI_STATES or D > MAX_RI_DECISIONS:
        raise TooLargeError(f"direct oracle handles at most {MAX_RI_STATES} states x {MAX_RI_DECISIONS} decisions")
    if lam == 0.0:
        p = np.zeros((S, D))
        p[np.arange(S), np.argmax(z, axis=1)] = 1.0
        f, per = _objective(p, z, mu, 0.0)
        return p, float(f), per, float(f)

    # coarse global search on the product of simplex lattices
    rows = _simplex_lattice(D, step)
    combos = np.array(list(product(range(len(rows)), repeat=S)))
    P = rows[combos]  # (n, S, D)
    f_all, _ = _objective(P, z[None], mu, lam)
    best = P[int(np.argmax(f_all))]
    lattice = float(np.max(f_all))

    # polish: Newton steps on per-state logits with a finite-difference
    # Hessian of the analytic gradient
    theta = _polish(np.log(np.clip(best, 1e-3, None)), z, mu, lam)
    p = _rule(theta)
    f, per = _objective(p, z, mu, lam)
    return p, float(f), per, lattice


def _log_rule(theta):
    """log choice rule from reduced logits (S, D-1); the last decision's logit is 0."""
    full = np.concatenate([theta, np.zeros((theta.shape[0], 1))], axis=1)
    return full - logsumexp(full, axis=1, keepdims=True)


def _rule(theta):
    return np.exp(_log_rule(theta))


def _value_and_grad(theta, z, mu, lam):
    logp = _log_rule(theta)
    p = np.exp(logp)
    logq = logsumexp(np.log(mu)[:, None] + logp, axis=0)
    net = z - lam * (logp - logq[None, :])
    f = float(np.sum(mu[:, None] * p * net))
    g = mu[:, None] * net  # dF/dp
    grad = p * (g - np.sum(p * g, axis=1, keepdims=True))
    return f, grad[:, :-1]


def _polish(theta0, z, mu, lam):
    S, D = z.shape
    theta0 = theta0[:, :-1] - theta0[:, -1:]

    def neg(x):
        f, g = _value_and_grad(x.reshape(S, D - 1), z, mu, lam)
        return -f, -g.ravel()

    x = theta0.ravel()
    n, h = len(x), 1e-5
    for _ in range(500):
        f, g = neg(x)
        if np.max(np.abs(g)) < 1e-15:
            break
        H = np.empty((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            H[:, j] = (neg(x + e)[1] - neg(x - e)[1]) / (2 * h)
        H = (H + H.T) / 2.0
        if not np.all(np.isfinite(H)):
            break
        w, V = np.linalg.eigh(H)
        # saddle-free Newton: curvature magnitudes, so every step is a descent direction
        step = -V @ ((V.T @ g) / np.maximum(np.abs(w), 1e-12 * max(1.0, np.max(np.abs(w)))))
        moved = False
        for direction in (step, -g):
            t = 1.0
            while t > 1e-12:
                if neg(x + t * direction)[0] < f:
                    x = x + t * direction
                    moved = True
                    break
                t /= 2.0
            if moved:
                break
        if not moved:
            break
    return x.reshape(S, D - 1)


def direct_ri_oracle(problem: TinyRIProblem) -> OracleResult:
    """Maximise expected payoff minus lam * I(state; decision) directly.

    Two-period problems are composed backwards: each first decision's
    continuation problem is solved first, its per-state net values are
    carried back through ``P`` into the first-period payoffs.
    """
    mu = np.asarray(problem.mu, dtype=float)
    lam = problem.lam
    if problem.periods > 2:
        raise TooLargeError("direct oracle handles at most two periods")
    z1 = np.asarray(problem.z1, dtype=float)
    feas = np.isfinite(z1[0])
    stage2 = []
    if problem.periods == 2:
        mu2 = mu @ problem.P
        cont = np.zeros_like(z1)
        for d1 in np.flatnonzero(feas):
            z2 = np.asarray(problem.z2[d1], dtype=float)
            f2 = np.isfinite(z2[0])
            p2, _, per2, _ = _solve_stage(z2[:, f2], mu2, lam)
            stage2.append(per2)
            cont[:, d1] = problem.P @ per2
        z1 = z1 + problem.beta * cont
    p_f, f, per, lattice = _solve_stage(z1[:, feas], mu, lam)
    p = np.zeros(z1.shape)
    p[:, feas] = p_f
    return OracleResult(f, p, mu @ p, per, lattice, stage2)


def fixed_point_route(problem: TinyRIProblem, tol=1e-12):
    """Same problem through the default-rule fixed point, composed the same way."""
    from .ri_solver import ri_fixed_point

    mu = np.asarray(problem.mu, dtype=float)
    z1 = np.asarray(problem.z1, dtype=float)
    if problem.periods == 2:
        mu2 = mu @ problem.P
        cont = np.zeros_like(z1)
        for d1 in np.flatnonzero(np.isfinite(z1[0])):
            fp2 = ri_fixed_point(problem.z2[d1], mu2, problem.lam, tol=tol)
            cont[:, d1] = problem.P @ fp2.value
        z1 = z1 + problem.beta * cont
    return ri_fixed_point(z1, mu, problem.lam, tol=tol)


def tiny_ri_instances() -> list:
    """Shipped 1-2 period instances with at most 3 decisions and 3 SPA values."""
    out = [
        TinyRIProblem("2x2-symmetric", np.array([0.5, 0.5]), np.array([[1.0, 0.0], [0.0, 1.0]]), 0.5),
        TinyRIProblem("3x3-asymmetric", np.array([0.2, 0.5, 0.3]),
                      np.array([[1.0, 0.2, 0.5], [0.0, 0.9, 0.5], [0.3, 0.3, 0.6]]), 0.05),
        TinyRIProblem("3-spa-2-decisions", np.array([0.6, 0.3, 0.1]),
                      np.array([[0.4, 0.1], [0.0, 0.5], [-0.2, 0.8]]), 0.3),
        TinyRIProblem("two-period", np.array([0.6, 0.4]), np.array([[0.5, 0.0], [0.0, 0.5]]), 0.1,
                      P=np.array([[0.8, 0.2], [0.1, 0.9]]),
                      z2=(np.array([[1.0, 0.0, 0.5], [0.0, 1.2, 0.4]]),
                          np.array([[0.9, 0.1, 0.4], [0.1, 1.1, 0.5]])),
                      beta=0.95),
        model_ri_instance(),
    ]
    return out


def model_ri_instance() -> TinyRIProblem:
    """Choice-specific values of a small model household at 60 unsure whether its SPA is 61 or 62."""
    from .re_solver import solve_re
    from .statespace import Batch, decision_values

    model = _tiny_model([_tiny_type()], age_start=60, age_work_end=61, age_death=63, spa_cap=62,
                        p_spa_step=0.02)
    env = _tiny_env(model, IDENTITY2, asset_max=10_000.0)
    sol = solve_re(env)
    age = 60
    # unemployed, so the three asset choices are the only options
    batch = Batch(np.array([0]), np.array([0]), np.array([True]), env.aime.points[[0]], np.array([1]))
    spas = np.flatnonzero(env.valid_spa(age))
    z = decision_values(env, age, batch, sol.next_values(age), False, spas)[0]
    mu = mc.no_receipt_prior(age, env.params)[spas]
    return TinyRIProblem("model-age-60", mu, z[:, np.isfinite(z[0])], 3e-4)


# ---------------------------------------------------------------------------
# verification suite


@dataclass
class CheckResult:
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tolerance)


LAMBDA_LADDER = (0.01, 0.1, 1.0, 10.0)


def lambda_ladder_info(lams=LAMBDA_LADDER):
    """Mutual information of the 2x2 toy at each attention cost."""
    from .ri_solver import ri_fixed_point

    z = np.array([[1.0, 0.0], [0.0, 1.0]])
    mu = np.array([0.5, 0.5])
    return [float(ri_fixed_point(z, mu, lam, tol=1e-13).info) for lam in lams]


def oracle_suite(tol_scale: float = 1.0) -> list:
    """Every tiny-instance equivalence check, with residuals and tolerances."""
    from .re_solver import StatePoint, solve_re

    out = []
    for prob in tiny_re_instances():
        s = prob.state
        sol = solve_re(prob.env)
        v = sol.value(StatePoint(s.asset_idx, s.income_idx, s.aime_idx, s.unemployed, s.spa,
                                 s.receiving, s.type_idx, s.age))
        ref = brute_force_enumerate(prob).value
        out.append(CheckResult(f"re:{prob.name}", abs(v - ref), 1e-10 * tol_scale))
    for prob in tiny_ri_instances():
        ref = direct_ri_oracle(prob)
        fp = fixed_point_route(prob)
        out.append(CheckResult(f"ri-value:{prob.name}", abs(float(fp.net_value) - ref.net_value), 1e-6 * tol_scale))
        out.append(CheckResult(f"ri-rule:{prob.name}", float(np.max(np.abs(fp.p - ref.p))), 1e-4 * tol_scale))
    info = lambda_ladder_info()
    rises = max(0.0, max(b - a for a, b in zip(info, info[1:])))
    strict = any(b < a for a, b in zip(info, info[1:]))
    out.append(CheckResult("ri:lambda-ladder-monotone", rises if strict else np.inf, 0.0))
    return out
