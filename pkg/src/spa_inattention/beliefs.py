"""Posterior beliefs over the state pension age.

A household that has not started receiving its pension holds a distribution
over SPA values above its age. Each period the chosen action acts as the
signal: the belief is reweighted by the choice rule's likelihood, pushed
through the SPA process, and conditioned on whether the pension starts next
year (which is observed for free).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model as mc
from .exceptions import DomainError


@dataclass(frozen=True)
class Belief:
    """``dist`` over ``params.spa_values``; degenerate at ``spa`` once receiving."""

    receiving: bool
    dist: np.ndarray
    age: int

    def mode(self, params: mc.ModelParams) -> int:
        return mc.distribution_mode(self.dist, params)

    @property
    def spa(self) -> int | None:
        if not self.receiving:
            return None
        return int(np.argmax(self.dist))

    @classmethod
    def received(cls, spa: int, age: int, params: mc.ModelParams) -> "Belief":
        dist = np.zeros(params.n_spa)
        dist[spa - params.spa_init] = 1.0
        return cls(True, dist, age)


def initial_belief(params: mc.ModelParams, age: int | None = None) -> Belief:
    """Belief of a household entering the model without a pension."""
    age = params.age_start if age is None else age
    return Belief(False, mc.no_receipt_prior(age, params), age)


def bayes_step(dist, likelihood, transition, spa_values, next_age, receipt_spa=None):
    """Vectorised update for a batch of non-receiving beliefs.

    ``dist`` and ``likelihood`` are (B, S). ``receipt_spa`` (B,) holds the
    realised SPA of households that start receiving at ``next_age``, and any
    value (ignored) for the rest. Returns the next distributions and the
    mask of households that observed receipt.
    """
    post = dist * likelihood
    total = post.sum(axis=1, keepdims=True)
    if np.any(total <= 0):
        raise DomainError("observed action has zero probability under every SPA value")
    post = post / total
    prop = post @ transition
    received = np.zeros(len(dist), dtype=bool) if receipt_spa is None else np.asarray(receipt_spa) <= next_age
    out = np.where(spa_values[None, :] > next_age, prop, 0.0)
    mass = out.sum(axis=1, keepdims=True)
    stay = ~received
    if np.any(mass[stay] <= 0):
        raise DomainError("no-receipt observation has zero probability under the belief")
    out[stay] = out[stay] / mass[stay]
    if np.any(received):
        out[received] = 0.0
        out[received, np.asarray(receipt_spa)[received] - spa_values[0]] = 1.0
    return out, received


def update_belief(belief: Belief, likelihood, params: mc.ModelParams, receipt_spa: int | None = None) -> Belief:
    """Posterior after the period's action, one SPA step, and next year's receipt news.

    ``likelihood`` is p(action | W, spa) over ``params.spa_values``; its
    entries off the belief's support are ignored. ``receipt_spa`` is the
    realised SPA if the pension starts next year, else None.
    """
    if belief.receiving:
        return Belief(True, belief.dist, belief.age + 1)
    next_age = belief.age + 1
    rs = np.array([receipt_spa if receipt_spa is not None else params.spa_cap + 1])
    out, got = bayes_step(
        belief.dist[None, :],
        np.asarray(likelihood, dtype=float)[None, :],
        mc.spa_transition_matrix(params),
        params.spa_values,
        next_age,
        rs,
    )
    return Belief(bool(got[0]), out[0], next_age)


def modes(dist, spa_values) -> np.ndarray:
    """Posterior modes of (B, S) beliefs, ties to the lower SPA."""
    return spa_values[np.argmax(dist, axis=1)]


def belief_error_stats(panel, age: int | None = 58):
    """Histogram of (reported SPA - true SPA) and the share within a year.

    Uses rows of non-receiving households; ``age=None`` pools all ages.
    Returns (histogram frame with error_years/count/share, share within one
    year).
    """
    import pandas as pd

    rows = panel[~panel["receiving"].astype(bool)]
    if age is not None:
        rows = rows[rows["age"] == age]
    if len(rows) == 0:
        raise ValueError("no non-receiving observations for the belief statistics")
    err = (rows["belief_mode"] - rows["true_spa"]).astype(int)
    counts = err.value_counts().sort_index()
    hist = pd.DataFrame({"error_years": counts.index.astype(int), "count": counts.values})
    hist["share"] = hist["count"] / hist["count"].sum()
    within = float(np.mean(np.abs(err) <= 1))
    return hist, within
