"""Agents as Gaussian mixtures with one component per label."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import Answer, RunStreams, SiloLabel, SystemConfig
from .synthetic import draw_archetypes


@dataclass(frozen=True, eq=False)
class GmmAgentState:
    pseudo_counts: np.ndarray  # (L,)
    means: np.ndarray  # (L, d)
    sigma: float
    learning_rate: float
    decay: float = 0.0


def respond_gmm(state: GmmAgentState, rng: np.random.Generator) -> Answer:
    alpha = state.pseudo_counts
    total = alpha.sum()
    if not total > 0:
        raise ValueError("pseudo-counts are all zero")
    # inverse-CDF draw; one uniform then d normals, in that order
    u = rng.random()
    c = int(np.searchsorted(np.cumsum(alpha) / total, u, side="right"))
    c = min(c, len(alpha) - 1)
    while alpha[c] == 0:  # guards float rounding at the top of the CDF
        c -= 1
    noise = rng.standard_normal(state.means.shape[1])
    return Answer(SiloLabel(c), state.means[c] + state.sigma * noise)


def update_gmm(state: GmmAgentState, payload: Answer) -> GmmAgentState:
    """Add one pseudo-count to the payload's component and pull its mean toward the payload."""
    lab = payload.label.id
    L = len(state.pseudo_counts)
    if not 0 <= lab < L:
        raise ValueError(f"payload label {lab} outside [0, {L})")
    if payload.embedding.shape != state.means.shape[1:]:
        raise ValueError("payload embedding dimension mismatch")
    alpha = state.pseudo_counts * (1.0 - state.decay) if state.decay else state.pseudo_counts.copy()
    alpha[lab] += 1.0
    means = state.means.copy()
    means[lab] = means[lab] + state.learning_rate * (payload.embedding - means[lab])
    return GmmAgentState(alpha, means, state.sigma, state.learning_rate, state.decay)


class GmmBackend:
    kind = "gmm"

    def __init__(self, config: SystemConfig):
        self.config = config

    def initialize(self, config: SystemConfig, streams: RunStreams) -> list[GmmAgentState]:
        params = config.backend.params
        arch = draw_archetypes(config.L, config.d, params["rho"], streams.get("corpus"))
        states = []
        for i in range(config.n):
            rng = streams.get("init", i)
            means = arch.means + params["sigma_init"] * rng.standard_normal(arch.means.shape)
            alpha = np.full(config.L, params["alpha0"], dtype=np.float64)
            states.append(GmmAgentState(alpha, means, params["sigma"], params["eta"], params["decay"]))
        return states

    def respond(self, state: GmmAgentState, rng: np.random.Generator) -> Answer:
        return respond_gmm(state, rng)

    def update(self, state: GmmAgentState, payload: Answer, tick: int) -> GmmAgentState:
        return update_gmm(state, payload)
