"""Synthetic retrieval agent: labelled embeddings around fixed per-label archetypes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..core import AgentDatabase, Answer, ConfigError, RunStreams, SiloLabel, SystemConfig


@dataclass(frozen=True, eq=False)
class LabelArchetypes:
    means: np.ndarray  # (L, d)
    separation: float


@dataclass(frozen=True, eq=False)
class SyntheticAgentState:
    database: AgentDatabase
    policy: str
    sigma_gen: float
    query_vector: np.ndarray
    n_labels: int


def _sphere(rng: np.random.Generator, size: int, d: int, radius: float) -> np.ndarray:
    x = rng.standard_normal((size, d))
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return radius * x / norms


def draw_archetypes(L: int, d: int, rho: float, rng: np.random.Generator, max_tries: int = 100) -> LabelArchetypes:
    """Draw L distinct points uniformly on the sphere of radius rho."""
    if d == 1 and L > 2:
        raise ConfigError("d=1 admits at most 2 distinct archetypes", "L")
    for _ in range(max_tries):
        means = _sphere(rng, L, d, rho)
        if len(np.unique(means, axis=0)) == L:
            return LabelArchetypes(means, rho)
    raise RuntimeError("could not draw distinct archetypes")


def init_corpus(config: SystemConfig, streams: RunStreams) -> tuple[LabelArchetypes, list[SyntheticAgentState]]:
    params = config.backend.params
    sigma_init = params["sigma_init"]
    if sigma_init < 0:
        raise ConfigError("must be >= 0", "backend.sigma_init")
    L, d, C = config.L, config.d, params["capacity"]
    corpus_rng = streams.get("corpus")
    arch = draw_archetypes(L, d, params["rho"], corpus_rng)
    query = _sphere(corpus_rng, 1, d, params["rho"])[0]

    weights = params.get("label_weights")
    probs = None if weights is None else np.asarray(weights, dtype=np.float64) / sum(weights)
    states = []
    for i in range(config.n):
        rng = streams.get("init", i)
        labels = rng.choice(L, size=C, p=probs)
        emb = arch.means[labels] + sigma_init * rng.standard_normal((C, d))
        db = AgentDatabase(labels, emb, np.zeros(C, dtype=np.int64), C)
        states.append(SyntheticAgentState(db, params["policy"], params["sigma_gen"], query, L))
    return arch, states


def respond_synthetic(state: SyntheticAgentState, rng: np.random.Generator) -> Answer:
    db = state.database
    if len(db) == 0:
        raise RuntimeError("respond called on an empty database")
    if state.policy == "majority-centroid":
        label, centre = _kernels.majority_centroid(db.labels, db.embeddings, state.n_labels)
    else:
        idx = _kernels.nearest_item(db.embeddings, state.query_vector)
        label, centre = int(db.labels[idx]), db.embeddings[idx]
    # noise is drawn even when sigma_gen == 0 so streams stay aligned
    noise = rng.standard_normal(db.dim)
    return Answer(SiloLabel(label), centre + state.sigma_gen * noise)


def update_synthetic(state: SyntheticAgentState, payload: Answer, tick: int) -> SyntheticAgentState:
    if payload.embedding.shape != (state.database.dim,):
        raise ValueError(
            f"payload embedding has shape {payload.embedding.shape}, expected ({state.database.dim},)"
        )
    if not 0 <= payload.label.id < state.n_labels:
        raise ValueError(f"payload label {payload.label.id} outside [0, {state.n_labels})")
    db = state.database.append(payload.label.id, payload.embedding, tick)
    return SyntheticAgentState(db, state.policy, state.sigma_gen, state.query_vector, state.n_labels)


class SyntheticBackend:
    kind = "synthetic"

    def __init__(self, config: SystemConfig):
        self.config = config
        self.archetypes: LabelArchetypes | None = None

    def initialize(self, config: SystemConfig, streams: RunStreams) -> list[SyntheticAgentState]:
        self.archetypes, states = init_corpus(config, streams)
        return states

    def respond(self, state: SyntheticAgentState, rng: np.random.Generator) -> Answer:
        return respond_synthetic(state, rng)

    def update(self, state: SyntheticAgentState, payload: Answer, tick: int) -> SyntheticAgentState:
        return update_synthetic(state, payload, tick)
