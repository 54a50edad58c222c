"""Save and reload solved models as plain ``.npy`` arrays (byte-for-byte reproducible)."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .exceptions import ConfigError
from .re_solver import SolutionRE
from .ri_solver import SolutionRI
from .statespace import Environment

_ARRAYS = ("value_r", "value_n", "policy_r", "policy_n")


def save_solution(sol, directory) -> list:
    """Write ``sol`` under ``directory``; returns the written paths."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in _ARRAYS:
        path = d / f"{name}.npy"
        np.save(path, getattr(sol, name), allow_pickle=False)
        paths.append(path)
    meta = {"kind": "RE"}
    if isinstance(sol, SolutionRI):
        meta = {"kind": "RI", "lam": sol.lam, "ages": sol.ri_ages}
        for age in sol.ri_ages:
            for name in ("prior", "support", "default_rule", "info_flow", "residual", "gap", "iterations"):
                path = d / f"{name}_{age}.npy"
                np.save(path, getattr(sol, name)[age], allow_pickle=False)
                paths.append(path)
    path = d / "meta.json"
    path.write_text(json.dumps(meta, sort_keys=True))
    paths.append(path)
    return paths


def load_solution(directory, env: Environment):
    d = Path(directory)
    if not (d / "meta.json").exists():
        raise FileNotFoundError(f"no solution at {d}")
    meta = json.loads((d / "meta.json").read_text())
    arrays = {name: np.load(d / f"{name}.npy") for name in _ARRAYS}
    if arrays["value_r"].shape[1:] != env.w_shape:
        raise ConfigError(f"solution at {d} does not match the configured grids")
    if meta["kind"] == "RE":
        return SolutionRE(env, **arrays)
    sol = SolutionRI(env, meta["lam"], **arrays)
    for age in meta["ages"]:
        for name in ("prior", "support", "default_rule", "info_flow", "residual", "gap", "iterations"):
            getattr(sol, name)[age] = np.load(d / f"{name}_{age}.npy")
    return sol
