"""One system run: measurement, snapshot, then k-NN partner interactions per tick."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from . import _kernels
from .backends import AgentBackend, make_backend
from .core import Answer, ConfigError, RunStreams, SystemConfig, SystemSnapshot, Trajectory
from .metrics import entropy, silo_tally, stability


class SimulationError(RuntimeError):
    def __init__(self, message: str, tick: int, agent: int | None = None):
        self.tick = tick
        self.agent = agent
        where = f"tick {tick}" + ("" if agent is None else f", agent {agent}")
        super().__init__(f"{where}: {message}")

    @property
    def retryable(self) -> bool:
        return bool(getattr(self.__cause__, "retryable", False))


def distance_matrix(answers: Sequence[Answer]) -> np.ndarray:
    """Pairwise L2 distances between answer embeddings."""
    X = np.stack([np.asarray(a.embedding, dtype=np.float64) for a in answers])
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite embedding component")
    return _kernels.pairwise_distances(np.ascontiguousarray(X))


def _check_k(n: int, k: int) -> None:
    if not 1 <= k <= n - 1:
        raise ValueError(f"k={k} outside [1, {n - 1}]")


def k_nearest(D: np.ndarray, i: int, k: int) -> np.ndarray:
    """The k agents closest to i (ties to lower index), in ascending index order."""
    n = D.shape[0]
    _check_k(n, k)
    if not 0 <= i < n:
        raise IndexError(f"agent {i} outside [0, {n})")
    row = D[i].copy()
    row[i] = np.inf
    return np.sort(np.argsort(row, kind="stable")[:k])


def all_k_nearest(D: np.ndarray, k: int) -> np.ndarray:
    _check_k(D.shape[0], k)
    return _kernels.knn(np.ascontiguousarray(D), k)


@dataclass(frozen=True, eq=False)
class InteractionPlan:
    partners: np.ndarray  # (n,) partner index per agent
    mirrored: np.ndarray  # (n,) bool
    payloads: tuple[Answer, ...]
    neighbors: np.ndarray  # (n, k) k-NN sets used for the draw


def plan_interactions(
    answers: Sequence[Answer],
    D: np.ndarray,
    p: float,
    k: int,
    rngs: Sequence[np.random.Generator],
    order: Sequence[int] | None = None,
) -> InteractionPlan:
    """Pick a partner uniformly among each agent's k nearest neighbours, then a mirror flag.

    Each agent draws exactly two variates from its own stream (partner, then
    Bernoulli(p)), even when the partner ends up unused.
    """
    n = len(answers)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    nbrs = all_k_nearest(D, k)
    partners = np.empty(n, dtype=np.int64)
    mirrored = np.empty(n, dtype=bool)
    payloads: list[Answer | None] = [None] * n
    for i in (range(n) if order is None else order):
        rng = rngs[i]
        j = int(nbrs[i, rng.integers(k)])
        mirror = rng.random() < p
        partners[i] = j
        mirrored[i] = mirror
        payloads[i] = answers[i] if mirror else answers[j]
    return InteractionPlan(partners, mirrored, tuple(payloads), nbrs)


@dataclass(frozen=True, eq=False)
class StepResult:
    states: list[Any]
    snapshot: SystemSnapshot
    answers: tuple[Answer, ...]
    distances: np.ndarray
    plan: InteractionPlan | None


class AgentStreams:
    """Per-agent respond and interaction generators for one run."""

    def __init__(self, streams: RunStreams, n: int):
        self.respond = streams.per_agent("respond", n)
        self.interact = streams.per_agent("interact", n)


def make_snapshot(t: int, answers: Sequence[Answer], prev_labels: Sequence[int] | None, keep_embeddings: bool = False) -> SystemSnapshot:
    labels = tuple(a.label.id for a in answers)
    counts, count, _unknown = silo_tally(labels)
    stab = None if prev_labels is None else stability(prev_labels, labels)
    ent = entropy(counts) if counts else 0.0
    emb = np.stack([a.embedding for a in answers]) if keep_embeddings else None
    return SystemSnapshot(t, labels, counts, count, stab, ent, emb)


def step_system(
    backend: AgentBackend,
    states: Sequence[Any],
    t: int,
    config: SystemConfig,
    streams: AgentStreams,
    prev_labels: Sequence[int] | None,
    keep_embeddings: bool = False,
    order: Sequence[int] | None = None,
) -> StepResult:
    """Measure every agent, emit the snapshot, then (t >= 1) apply all updates synchronously."""
    if not 0 <= t <= config.T:
        raise ValueError(f"tick {t} outside [0, {config.T}]")
    n = len(states)
    idx = range(n) if order is None else order
    answers: list[Answer | None] = [None] * n
    for i in idx:
        try:
            answers[i] = backend.respond(states[i], streams.respond[i])
        except Exception as exc:
            raise SimulationError(str(exc), t, i) from exc

    try:
        D = distance_matrix(answers)
    except ValueError as exc:
        raise SimulationError(str(exc), t) from exc
    snap = make_snapshot(t, answers, None if t == 0 else prev_labels, keep_embeddings)

    if t == 0:
        return StepResult(list(states), snap, tuple(answers), D, None)

    plan = plan_interactions(answers, D, config.p_float, config.k, streams.interact, order)
    new_states: list[Any] = [None] * n
    for i in idx:
        try:
            new_states[i] = backend.update(states[i], plan.payloads[i], t)
        except Exception as exc:
            raise SimulationError(str(exc), t, i) from exc
    return StepResult(new_states, snap, tuple(answers), D, plan)


def run_system(
    config: SystemConfig,
    backend: AgentBackend | None = None,
    keep_embeddings: bool = False,
) -> Trajectory:
    """Run ticks 0..T from the config's seed and return the full trajectory."""
    backend = backend if backend is not None else make_backend(config)
    run_streams = RunStreams(config.seed)
    try:
        states = list(backend.initialize(config, run_streams))
    except ConfigError:
        raise
    except Exception as exc:
        raise SimulationError(f"initialisation failed: {exc}", 0) from exc
    if len(states) != config.n:
        raise SimulationError(f"backend produced {len(states)} agents, expected {config.n}", 0)
    streams = AgentStreams(run_streams, config.n)

    snapshots = []
    prev = None
    for t in range(config.T + 1):
        res = step_system(backend, states, t, config, streams, prev, keep_embeddings)
        states = res.states
        prev = res.snapshot.labels
        snapshots.append(res.snapshot)
    return Trajectory(config, snapshots)
