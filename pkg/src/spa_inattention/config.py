"""Flat ``key = value`` run configuration.

Lines are ``key = value``; ``#`` starts a comment. Every key is checked
against :data:`SCHEMA`; unknown keys and malformed values raise
:class:`ConfigError` naming the key. Household types are given as
``type.<id>.<field>``; when no type keys are present the built-in
illustrative types are used.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import calibration
from .exceptions import ConfigError
from .model import DBPensionParams, Model, ModelParams, MortalityTable, TypeProfile
from .simulator import ScenarioSpec
from .statespace import GridSpec

REQUIRED = object()


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _ints(text: str) -> tuple:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _words(text: str) -> tuple:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _optional_int(text: str):
    return None if text.strip().lower() in ("", "none") else int(text)


_P = ModelParams()
_G = GridSpec()
_S = ScenarioSpec()

# key -> (parser, default)
SCHEMA = {
    "model.gamma": (float, REQUIRED),
    "model.nu": (float, REQUIRED),
    "model.beta": (float, REQUIRED),
    "model.theta": (float, REQUIRED),
    "model.lambda": (float, REQUIRED),
    "model.bequest_shift": (float, _P.bequest_shift),
    "model.r": (float, _P.r),
    "model.work_hours": (float, _P.work_hours),
    "model.benefit": (float, _P.benefit),
    "model.state_pension": (float, _P.state_pension),
    "model.spouse_income": (float, _P.spouse_income),
    "model.spouse_age_offset": (int, _P.spouse_age_offset),
    "spa.p_step": (float, REQUIRED),
    "spa.init": (int, _P.spa_init),
    "spa.cap": (int, _P.spa_cap),
    "age.start": (int, _P.age_start),
    "age.work_end": (int, _P.age_work_end),
    "age.death": (int, _P.age_death),
    "age.spouse_retire": (int, _P.age_spouse_retire),
    "age.entry": (int, _P.age_entry),
    "age.aime_freeze": (int, _P.aime_freeze_age),
    "db.db1": (float, DBPensionParams().db1),
    "db.db2": (float, DBPensionParams().db2),
    "mortality.kind": (str, "gompertz"),
    "mortality.base_hazard": (float, 0.006),
    "mortality.growth": (float, 0.095),
    "mortality.start_age": (int, 60),
    "grid.assets.n": (int, REQUIRED),
    "grid.assets.max": (float, _G.asset_max),
    "grid.assets.curvature": (float, _G.asset_curvature),
    "grid.aime.n": (int, _G.n_aime),
    "grid.aime.max": (float, _G.aime_max),
    "grid.aime.curvature": (float, _G.aime_curvature),
    "income.n": (int, _G.n_income),
    "ri.tol": (float, 1e-10),
    "ri.max_iter": (int, 10_000),
    "scenario.cohorts": (_ints, (60, 61, 62)),
    "scenario.households": (int, _S.households_per_cohort),
    "scenario.mortality": (_bool, _S.mortality),
    "scenario.age_end": (_optional_int, None),
    "scenario.init_assets.median": (float, _S.init_assets_median),
    "scenario.init_assets.sigma": (float, _S.init_assets_sigma),
    "scenario.init_assets.zero_share": (float, _S.init_assets_zero_share),
    "regression.age_min": (int, 52),
    "regression.age_max": (int, 75),
    "regression.controls": (_words, ()),
    "output.dir": (str, "output"),
    "output.choice_rule_ages": (_ints, (57,)),
    "seed": (int, REQUIRED),
}

TYPE_FIELDS = {
    "has_db": _bool,
    "delta0": float,
    "delta1": float,
    "delta2": float,
    "rho": float,
    "sigma_eps": float,
    "sigma_init": float,
    "unemp": _floats,
    "share": float,
    "aime_init_factor": float,
}

# keys that do not change the solved model
NON_MODEL_PREFIXES = ("scenario.", "regression.", "output.", "seed")


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class RunConfig:
    values: dict
    types: dict = field(default_factory=dict)  # type id -> {field: value}

    # ----------------------------------------------------------- loading

    @classmethod
    def parse(cls, text: str, source: str = "<config>") -> "RunConfig":
        raw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key in raw:
                raise ConfigError(f"{source}:{lineno}: duplicate key {key}", key)
            raw[key] = value
        return cls.from_mapping(raw)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} not found")
        return cls.parse(path.read_text(), str(path))

    @classmethod
    def from_mapping(cls, raw: dict) -> "RunConfig":
        values, types = {}, {}
        for key, text in raw.items():
            if key.startswith("type."):
                parts = key.split(".")
                if len(parts) != 3 or parts[2] not in TYPE_FIELDS or not parts[1].isdigit():
                    raise ConfigError(f"unknown key {key}", key)
                try:
                    types.setdefault(int(parts[1]), {})[parts[2]] = TYPE_FIELDS[parts[2]](str(text))
                except ValueError as exc:
                    raise ConfigError(f"bad value for {key}: {exc}", key) from None
                continue
            if key not in SCHEMA:
                raise ConfigError(f"unknown key {key}", key)
            parser, _ = SCHEMA[key]
            try:
                values[key] = parser(str(text))
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}", key) from None
        for key, (_, default) in SCHEMA.items():
            if key not in values:
                if default is REQUIRED:
                    raise ConfigError(f"missing required key {key}", key)
                values[key] = default
        for tid, fields in types.items():
            missing = sorted(set(TYPE_FIELDS) - {"aime_init_factor"} - set(fields))
            if missing:
                raise ConfigError(f"type {tid} lacks {missing[0]}", f"type.{tid}.{missing[0]}")
        cfg = cls(values, types)
        cfg.model()  # validates parameter ranges
        return cfg

    # ----------------------------------------------------------- dumping

    def lines(self) -> list:
        out = [f"{k} = {_format(self.values[k])}" for k in sorted(self.values)]
        for tid in sorted(self.types):
            for name in sorted(self.types[tid]):
                out.append(f"type.{tid}.{name} = {_format(self.types[tid][name])}")
        return out

    def dump(self) -> str:
        return "\n".join(self.lines()) + "\n"

    def hash(self) -> str:
        return hashlib.sha256(self.dump().encode()).hexdigest()

    def model_hash(self) -> str:
        """Hash of the keys that define the solved model (not scenario/output keys)."""
        keep = [ln for ln in self.lines() if not ln.startswith(NON_MODEL_PREFIXES)]
        return hashlib.sha256("\n".join(keep).encode()).hexdigest()

    def with_values(self, **updates) -> "RunConfig":
        vals = dict(self.values)
        for k, v in updates.items():
            vals[k.replace("__", ".")] = v
        return RunConfig(vals, self.types)

    def __getitem__(self, key):
        return self.values[key]

    # ----------------------------------------------------------- objects

    def params(self) -> ModelParams:
        v = self.values
        return ModelParams(
            gamma=v["model.gamma"], nu=v["model.nu"], beta=v["model.beta"], theta=v["model.theta"],
            bequest_shift=v["model.bequest_shift"], attention_cost=v["model.lambda"], r=v["model.r"],
            work_hours=v["model.work_hours"], benefit=v["model.benefit"],
            state_pension=v["model.state_pension"], spouse_income=v["model.spouse_income"],
            p_spa_step=v["spa.p_step"], age_start=v["age.start"], age_work_end=v["age.work_end"],
            age_death=v["age.death"], age_spouse_retire=v["age.spouse_retire"], age_entry=v["age.entry"],
            spa_init=v["spa.init"], spa_cap=v["spa.cap"], aime_freeze_age=v["age.aime_freeze"],
            spouse_age_offset=v["model.spouse_age_offset"],
        )

    def type_profiles(self) -> tuple:
        if not self.types:
            return calibration.DEFAULT_TYPES
        out = []
        for tid in sorted(self.types):
            f = self.types[tid]
            out.append(TypeProfile(
                tid, f["has_db"], f["delta0"], f["delta1"], f["delta2"], f["rho"], f["sigma_eps"],
                f["sigma_init"], tuple(f["unemp"]), f["share"], f.get("aime_init_factor", 0.8),
            ))
        return tuple(out)

    def mortality(self, params: ModelParams) -> MortalityTable:
        kind = self.values["mortality.kind"]
        if kind == "gompertz":
            return MortalityTable.gompertz(params.age_death, self.values["mortality.base_hazard"],
                                           self.values["mortality.growth"], self.values["mortality.start_age"])
        if kind == "immortal":
            return MortalityTable.immortal(params.age_death)
        raise ConfigError(f"unknown mortality kind {kind!r}", "mortality.kind")

    def model(self) -> Model:
        p = self.params()
        return Model(p, self.type_profiles(), DBPensionParams(self.values["db.db1"], self.values["db.db2"]),
                     self.mortality(p))

    def grid_spec(self) -> GridSpec:
        v = self.values
        return GridSpec(
            n_assets=v["grid.assets.n"], asset_max=v["grid.assets.max"],
            asset_curvature=v["grid.assets.curvature"], n_income=v["income.n"], n_aime=v["grid.aime.n"],
            aime_max=v["grid.aime.max"], aime_curvature=v["grid.aime.curvature"],
        )

    def scenario(self) -> ScenarioSpec:
        v = self.values
        return ScenarioSpec(
            cohorts=tuple((c, None) for c in v["scenario.cohorts"]),
            households_per_cohort=v["scenario.households"], seed=v["seed"],
            mortality=v["scenario.mortality"], age_end=v["scenario.age_end"],
            init_assets_median=v["scenario.init_assets.median"],
            init_assets_sigma=v["scenario.init_assets.sigma"],
            init_assets_zero_share=v["scenario.init_assets.zero_share"],
        )


def default_config_text() -> str:
    """The shipped example configuration."""
    from importlib.resources import files

    return files("spa_inattention").joinpath("default.conf").read_text()


def default_config() -> RunConfig:
    return RunConfig.parse(default_config_text(), "default.conf")


def defaults_match_calibration() -> bool:
    """The shipped config reproduces the in-code calibration (used by tests)."""
    cfg = default_config()
    return cfg.params() == replace(ModelParams()) and cfg.type_profiles() == calibration.DEFAULT_TYPES
