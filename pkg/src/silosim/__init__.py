"""Deterministic simulator of mirroring agents that form silos.

Agents answer a fixed question each tick. Each agent then takes one payload
into its knowledge base: with probability ``p`` its own answer (mirroring),
otherwise the answer of a partner drawn uniformly from its ``k`` nearest
neighbours in embedding space.
"""

from .core import (
    UNKNOWN,
    UNKNOWN_LABEL,
    AgentDatabase,
    Answer,
    BackendConfig,
    ClassifierParams,
    ConfigError,
    DatabaseItem,
    RunStreams,
    SiloLabel,
    StreamTag,
    SystemConfig,
    SystemSnapshot,
    Trajectory,
    config_to_json,
    derive_seed,
    load_config,
    parse_config,
)
from .engine import distance_matrix, k_nearest, plan_interactions, run_system, step_system
from .metrics import ClassificationReport, Pattern, classify, entropy, silo_tally, stability

__version__ = "0.1.0"

__all__ = [
    "UNKNOWN",
    "UNKNOWN_LABEL",
    "AgentDatabase",
    "Answer",
    "BackendConfig",
    "ClassificationReport",
    "ClassifierParams",
    "ConfigError",
    "DatabaseItem",
    "Pattern",
    "RunStreams",
    "SiloLabel",
    "StreamTag",
    "SystemConfig",
    "SystemSnapshot",
    "Trajectory",
    "classify",
    "config_to_json",
    "derive_seed",
    "distance_matrix",
    "entropy",
    "k_nearest",
    "load_config",
    "parse_config",
    "plan_interactions",
    "run_system",
    "silo_tally",
    "stability",
    "step_system",
]
