from __future__ import annotations

from ..core import SystemConfig
from .base import AgentBackend, BackendError, BackendTransportError
from .gmm import GmmAgentState, GmmBackend
from .llm import LlmAgentState, LlmBackend, ServiceClient, extract_label, load_names
from .synthetic import LabelArchetypes, SyntheticAgentState, SyntheticBackend, draw_archetypes, init_corpus

_REGISTRY = {
    "synthetic": SyntheticBackend,
    "gmm": GmmBackend,
    "llm": LlmBackend,
}


def make_backend(config: SystemConfig) -> AgentBackend:
    return _REGISTRY[config.backend.kind](config)


__all__ = [
    "AgentBackend",
    "BackendError",
    "BackendTransportError",
    "GmmAgentState",
    "GmmBackend",
    "LabelArchetypes",
    "LlmAgentState",
    "LlmBackend",
    "ServiceClient",
    "SyntheticAgentState",
    "SyntheticBackend",
    "draw_archetypes",
    "extract_label",
    "init_corpus",
    "load_names",
    "make_backend",
]
