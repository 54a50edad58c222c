"""Structural primitives of the retirement model.

Preferences, budget accounting, average-earnings (AIME) accumulation, the
defined-benefit pension, mortality and the stochastic state pension age
(SPA) process. Everything here is a pure function of its inputs.

Monetary quantities are in pounds per year. Distributions over the SPA are
numpy vectors indexed by ``spa - spa_init``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, DomainError


@dataclass(frozen=True)
class ModelParams:
    """Structural parameters shared by all household types.

    Preference values default to the estimated ones; prices, transfers and
    the bequest shifter are illustrative stand-ins (2012 UK levels for the
    state pension and job seekers allowance).
    """

    gamma: float = 2.320
    nu: float = 0.288
    beta: float = 0.986
    theta: float = 2.899e-2
    bequest_shift: float = 5000.0
    attention_cost: float = 0.001
    r: float = 0.02
    work_hours: float = 0.30
    benefit: float = 3692.0
    state_pension: float = 5587.0
    spouse_income: float = 12000.0
    p_spa_step: float = 0.06
    age_start: int = 52
    age_work_end: int = 80
    age_death: int = 105
    age_spouse_retire: int = 65
    age_entry: int = 20
    spa_init: int = 60
    spa_cap: int = 70
    aime_freeze_age: int = 65
    spouse_age_offset: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not 0.0 < self.nu < 1.0:
            raise ConfigError(f"nu must lie in (0, 1), got {self.nu}", "model.nu")
        if not self.gamma > 0.0 or self.gamma == 1.0:
            raise ConfigError(f"gamma must be positive and != 1, got {self.gamma}", "model.gamma")
        if not 0.0 < self.beta <= 1.0:
            raise ConfigError(f"beta must lie in (0, 1], got {self.beta}", "model.beta")
        if self.theta < 0.0:
            raise ConfigError("theta must be >= 0", "model.theta")
        if self.bequest_shift < 0.0:
            raise ConfigError("bequest_shift must be >= 0", "model.bequest_shift")
        if self.attention_cost < 0.0:
            raise ConfigError("attention cost must be >= 0", "model.lambda")
        if not 0.0 < self.work_hours < 1.0:
            raise ConfigError("work_hours must lie in (0, 1)", "model.work_hours")
        if not 0.0 <= self.p_spa_step <= 1.0:
            raise ConfigError("SPA step probability must lie in [0, 1]", "spa.p_step")
        if not self.age_entry < self.age_start < self.age_work_end < self.age_death:
            raise ConfigError(
                "ages must satisfy entry < start < work_end < death", "age.start"
            )
        if not self.spa_init <= self.spa_cap <= self.age_death:
            raise ConfigError("SPA bounds must satisfy init <= cap <= death", "spa.cap")
        if self.spa_init <= self.age_entry:
            raise ConfigError("initial SPA must exceed the entry age", "spa.init")

    @property
    def spa_values(self) -> np.ndarray:
        return np.arange(self.spa_init, self.spa_cap + 1)

    @property
    def n_spa(self) -> int:
        return self.spa_cap - self.spa_init + 1

    @property
    def ages(self) -> np.ndarray:
        """Decision ages; ``age_death`` itself is the terminal bequest node."""
        return np.arange(self.age_start, self.age_death)


@dataclass(frozen=True)
class TypeProfile:
    type_id: int
    has_db: bool
    delta0: float
    delta1: float
    delta2: float
    rho: float
    sigma_eps: float
    sigma_init: float
    unemp_prob: tuple
    population_share: float
    aime_init_factor: float = 0.8

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ConfigError("rho must lie in [0, 1)", f"type.{self.type_id}.rho")
        if self.sigma_eps < 0 or self.sigma_init < 0:
            raise ConfigError("dispersion must be >= 0", f"type.{self.type_id}.sigma_eps")
        probs = np.asarray(self.unemp_prob, dtype=float)
        if np.any(probs < 0) or np.any(probs > 1):
            raise ConfigError(
                "unemployment probabilities must lie in [0, 1]", f"type.{self.type_id}.unemp"
            )

    def log_income_trend(self, age):
        return self.delta0 + self.delta1 * age + self.delta2 * np.square(age)


@dataclass(frozen=True)
class DBPensionParams:
    db1: float = 0.5914
    db2: float = -4.232e-6

    @property
    def aime_kink(self) -> float:
        """Kink point db1 / (2 db2); infinite when db2 == 0."""
        if self.db2 == 0.0:
            return np.inf
        return self.db1 / (2.0 * self.db2)


@dataclass(frozen=True)
class MortalityTable:
    """One-period survival probabilities indexed by age."""

    survival: dict = field(default_factory=dict)

    def __post_init__(self):
        for age, s in self.survival.items():
            if not 0.0 <= s <= 1.0:
                raise ConfigError(f"survival at age {age} outside [0, 1]", "mortality")

    @classmethod
    def gompertz(cls, age_death=105, base_hazard=0.006, growth=0.095, start_age=60):
        """Survival 1 before ``start_age``, Gompertz hazard afterwards, 0 at death age."""
        table = {}
        for age in range(0, age_death + 1):
            if age >= age_death:
                table[age] = 0.0
            elif age < start_age:
                table[age] = 1.0
            else:
                hazard = base_hazard * np.exp(growth * (age - start_age))
                table[age] = float(max(0.0, 1.0 - min(hazard, 1.0)))
        return cls(table)

    @classmethod
    def immortal(cls, age_death=105):
        return cls({age: (0.0 if age >= age_death else 1.0) for age in range(age_death + 1)})

    def __call__(self, age: int) -> float:
        return self.survival.get(int(age), 1.0)


@dataclass(frozen=True)
class Model:
    """Bundle of everything that defines the structural model."""

    params: ModelParams
    types: tuple
    db: DBPensionParams
    mortality: MortalityTable

    def __post_init__(self):
        shares = np.array([t.population_share for t in self.types], dtype=float)
        if len(self.types) == 0 or abs(shares.sum() - 1.0) > 1e-12 or np.any(shares < 0):
            raise ConfigError("type population shares must be >= 0 and sum to 1", "type")
        if self.mortality(self.params.age_death) != 0.0:
            raise ConfigError("survival at the death age must be 0", "mortality")

    def type_index(self, type_id: int) -> int:
        for k, t in enumerate(self.types):
            if t.type_id == type_id:
                return k
        raise KeyError(type_id)


# --------------------------------------------------------------------------
# preferences


def flow_utility(c, l, params: ModelParams):
    """Within-period utility (c**nu * l**(1-nu))**(1-gamma) / (1-gamma)."""
    c = np.asarray(c, dtype=float)
    if np.any(~(c > 0.0)):
        raise DomainError("consumption must be strictly positive")
    out = _crra_bundle(c, np.asarray(l, dtype=float), params)
    return float(out) if out.ndim == 0 else out


def _crra_bundle(c, l, params):
    g = 1.0 - params.gamma
    return (c**params.nu * l ** (1.0 - params.nu)) ** g / g


def bequest_utility(a, params: ModelParams):
    """Warm-glow value theta * (a + K)**(nu (1-gamma)) / (1-gamma) of assets left at death."""
    a = np.asarray(a, dtype=float)
    if np.any(a < 0) or np.any(a + params.bequest_shift <= 0):
        raise DomainError("bequest requires a >= 0 and a + K > 0")
    if params.theta == 0.0:
        out = np.zeros_like(a)
    else:
        g = 1.0 - params.gamma
        out = params.theta * (a + params.bequest_shift) ** (params.nu * g) / g
    return float(out) if out.ndim == 0 else out


def leisure(worked, params: ModelParams):
    return np.where(worked, 1.0 - params.work_hours, 1.0)


# --------------------------------------------------------------------------
# pensions and earnings


def db_pension(aime, db: DBPensionParams):
    """Defined-benefit pension as a function of average earnings.

    Quadratic below the kink db1/(2 db2) and flat above it. A non-positive
    kink (db2 <= 0 with db1 >= 0) never binds.
    """
    aime = np.asarray(aime, dtype=float)
    if np.any(aime < 0):
        raise DomainError("AIME must be non-negative")
    kink = db.aime_kink
    quad = db.db1 * aime - db.db2 * aime**2
    if np.isfinite(kink) and kink > 0:
        capped = db.db1 * kink - db.db2 * kink**2
        out = np.where(aime < kink, quad, capped)
    else:
        out = quad
    return float(out) if np.ndim(out) == 0 else out


def work_year(age, params: ModelParams):
    """Year counter used by the AIME running average (1 at the entry age)."""
    return np.asarray(age) - params.age_entry + 1


def aime_update(aime_prev, work_year_index, worked, y, params: ModelParams):
    """Running average of earnings; frozen from ``aime_freeze_age`` on."""
    t = np.asarray(work_year_index)
    if np.any(t < 1):
        raise DomainError("work-year index starts at 1")
    aime_prev = np.asarray(aime_prev, dtype=float)
    age = t + params.age_entry - 1
    updated = (aime_prev * (t - 1) + np.where(worked, y, 0.0)) / t
    out = np.where(age >= params.aime_freeze_age, aime_prev, updated)
    return float(out) if out.ndim == 0 else out


def income_terms(a, age, worked, y, unemployed, receiving, has_db, aime, params, db):
    """Individual resource terms entering cash on hand."""
    worked = np.asarray(worked, dtype=bool)
    age = np.asarray(age)
    rest = ~worked
    spouse_age = age + params.spouse_age_offset
    return {
        "assets": (1.0 + params.r) * np.asarray(a, dtype=float),
        "labor": np.where(worked, y, 0.0),
        "benefit": np.where(rest & np.asarray(unemployed, dtype=bool), params.benefit, 0.0),
        "state_pension": np.where(receiving, params.state_pension, 0.0),
        "spouse": np.where(
            spouse_age < params.age_spouse_retire, params.spouse_income, params.state_pension
        ),
        "db_pension": np.where(
            rest & (age >= params.aime_freeze_age) & np.asarray(has_db, dtype=bool),
            db_pension(np.maximum(aime, 0.0), db),
            0.0,
        ),
    }


def cash_on_hand(a, age, worked, y, unemployed, receiving, has_db, aime, params, db):
    """Resources available for consumption and saving this period."""
    if np.any(np.asarray(a) < 0):
        raise DomainError("assets must be non-negative")
    terms = income_terms(a, age, worked, y, unemployed, receiving, has_db, aime, params, db)
    total = (
        terms["assets"]
        + terms["labor"]
        + terms["benefit"]
        + terms["state_pension"]
        + terms["spouse"]
        + terms["db_pension"]
    )
    return float(total) if np.ndim(total) == 0 else total


# --------------------------------------------------------------------------
# state pension age process


def spa_transition(spa: int, receiving: bool, params: ModelParams) -> dict:
    """Next-period SPA distribution: up one year w.p. p_spa_step below the cap."""
    if not params.spa_init <= spa <= params.spa_cap:
        raise DomainError(f"SPA {spa} outside [{params.spa_init}, {params.spa_cap}]")
    p = params.p_spa_step
    if receiving or spa >= params.spa_cap or p == 0.0:
        return {int(spa): 1.0}
    if p == 1.0:
        return {int(spa) + 1: 1.0}
    return {int(spa): 1.0 - p, int(spa) + 1: p}


def spa_transition_matrix(params: ModelParams) -> np.ndarray:
    """Row-stochastic matrix of the unfrozen SPA process on ``spa_values``."""
    n = params.n_spa
    P = np.zeros((n, n))
    for i, spa in enumerate(params.spa_values):
        for nxt, prob in spa_transition(int(spa), False, params).items():
            P[i, nxt - params.spa_init] += prob
    return P


def no_receipt_prior(age: int, params: ModelParams) -> np.ndarray:
    """Belief over the current SPA of someone who has not started receiving.

    Starts from certainty at ``spa_init`` on entering the labour force and
    propagates the SPA process forward, conditioning every year on the
    pension not having started (SPA strictly above the age reached).
    """
    if not params.age_entry <= age <= params.spa_cap - 1:
        raise DomainError(f"age {age} outside [{params.age_entry}, {params.spa_cap - 1}]")
    P = spa_transition_matrix(params)
    spa = params.spa_values
    dist = np.zeros(params.n_spa)
    dist[0] = 1.0
    for year in range(params.age_entry + 1, age + 1):
        dist = dist @ P
        dist[spa <= year] = 0.0
        total = dist.sum()
        if total <= 0.0:
            raise DomainError(f"no-receipt event has zero probability at age {year}")
        dist /= total
    return dist


def distribution_mode(dist: np.ndarray, params: ModelParams) -> int:
    """Most likely SPA; ties go to the lower age."""
    return int(params.spa_values[int(np.argmax(dist))])
