"""Behavioural contract every agent backend satisfies."""

from __future__ import annotations

from typing import Any, Protocol, Sequence, runtime_checkable

import numpy as np

from ..core import Answer, RunStreams, SystemConfig


@runtime_checkable
class AgentBackend(Protocol):
    """An agent implementation the engine can drive.

    ``respond`` must not mutate ``state``; ``update`` must be a deterministic
    function of ``(state, payload, tick)`` and return the new state.
    """

    kind: str

    def initialize(self, config: SystemConfig, streams: RunStreams) -> Sequence[Any]: ...

    def respond(self, state: Any, rng: np.random.Generator) -> Answer: ...

    def update(self, state: Any, payload: Answer, tick: int) -> Any: ...


class BackendError(RuntimeError):
    retryable = False


class BackendTransportError(BackendError):
    """Network or service failure talking to an external model; safe to retry."""

    retryable = True
