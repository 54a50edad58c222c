"""Rational-expectations and rationally inattentive retirement models with uncertain state pension age."""

__version__ = "0.1.0"

from .model import ModelParams, TypeProfile, DBPensionParams, MortalityTable, Model  # noqa: E402
from .statespace import Environment, GridSpec  # noqa: E402
from .re_solver import SolutionRE, solve_re  # noqa: E402
from .ri_solver import SolutionRI, solve_ri, ri_fixed_point, mutual_information  # noqa: E402
from .simulator import ScenarioSpec, simulate_panel  # noqa: E402
from .calibration import default_model, default_grid_spec  # noqa: E402

__all__ = [
    "ModelParams", "TypeProfile", "DBPensionParams", "MortalityTable", "Model", "Environment",
    "GridSpec", "SolutionRE", "solve_re", "SolutionRI", "solve_ri", "ri_fixed_point",
    "mutual_information", "ScenarioSpec", "simulate_panel", "default_model", "default_grid_spec",
]
