"""Default calibration.

Preference and DB-pension parameters, the attention cost, the SPA step
probability and the asset grid size are the estimated/reported ones. The
earnings process, unemployment tables, type shares, transfers, interest
rate, bequest shifter, mortality and initial conditions are illustrative
placeholders, not estimates.
"""

from __future__ import annotations

from dataclasses import replace

from .model import DBPensionParams, Model, ModelParams, MortalityTable, TypeProfile
from .statespace import GridSpec

# low education / high education x without / with DB pension
DEFAULT_TYPES = (
    TypeProfile(1, False, 7.55, 0.09, -0.001, 0.95, 0.12, 0.30,
                (0.12, 0.08, 0.05, 0.03, 0.02), 0.35, 0.8),
    TypeProfile(2, True, 7.55, 0.09, -0.001, 0.95, 0.12, 0.30,
                (0.10, 0.06, 0.04, 0.03, 0.02), 0.15, 0.8),
    TypeProfile(3, False, 7.95, 0.09, -0.001, 0.95, 0.12, 0.30,
                (0.08, 0.05, 0.03, 0.02, 0.01), 0.25, 0.8),
    TypeProfile(4, True, 7.95, 0.09, -0.001, 0.95, 0.12, 0.30,
                (0.06, 0.04, 0.03, 0.02, 0.01), 0.25, 0.8),
)


def default_model(**overrides) -> Model:
    params = replace(ModelParams(), **overrides)
    return Model(
        params=params,
        types=DEFAULT_TYPES,
        db=DBPensionParams(),
        mortality=MortalityTable.gompertz(params.age_death),
    )


def default_grid_spec(**overrides) -> GridSpec:
    return replace(GridSpec(), **overrides)
