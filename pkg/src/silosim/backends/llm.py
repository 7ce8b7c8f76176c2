"""Bridge to an external chat model plus embedding service.

The services are reached over plain JSON-over-HTTP. Request bodies:

* chat: ``{"model": ..., "messages": [{"role": "system", "content": <context>},
  {"role": "user", "content": <question>}]}``
* embedding: ``{"model": ..., "input": <text>}``

Replies in the OpenAI (``choices[0].message.content`` /
``data[0].embedding``) and Ollama (``message.content`` / ``embedding`` /
``embeddings[0]``) shapes are both accepted.
"""

from __future__ import annotations

import json
import logging
import re
import urllib.error
import urllib.request
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import _kernels
from ..core import UNKNOWN, AgentDatabase, Answer, ConfigError, RunStreams, SiloLabel, SystemConfig
from .base import BackendError, BackendTransportError

log = logging.getLogger(__name__)

_TEMPLATES = (
    "The {name} opens its petals like a quiet sunrise.",
    "A single {name} can brighten the dullest garden.",
    "Nothing rivals the delicate colour of a {name} in spring.",
    "The {name} sways gracefully in the evening breeze.",
    "Dew on a {name} sparkles like scattered jewels.",
    "The fragrance of the {name} lingers long after dusk.",
)


def load_names(path: str | Path) -> tuple[str, ...]:
    """One lowercase flower name per line; order is significant."""
    names = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        name = line.strip().lower()
        if name:
            names.append(name)
    if not names:
        raise ConfigError("name list is empty", "backend.names_file")
    return tuple(names)


@lru_cache(maxsize=4096)
def _name_pattern(name: str) -> re.Pattern:
    words = r"\s+".join(re.escape(w) for w in name.split())
    # whole word, allowing a plural suffix: "primroses" matches "primrose" but not "rose"
    return re.compile(rf"\b{words}(?:e?s)?\b", re.IGNORECASE)


def extract_label(text: str, names: Sequence[str]) -> SiloLabel | None:
    """Return the first name (in ``names`` order) occurring as a whole word in ``text``."""
    for idx, name in enumerate(names):
        if _name_pattern(name).search(text):
            return SiloLabel(idx, name)
    return None


class ServiceClient:
    def __init__(self, chat_url: str, embed_url: str, chat_model: str, embed_model: str, timeout: float = 60.0):
        self.chat_url = chat_url
        self.embed_url = embed_url
        self.chat_model = chat_model
        self.embed_model = embed_model
        self.timeout = timeout

    def _post(self, url: str, body: dict) -> dict:
        req = urllib.request.Request(
            url,
            data=json.dumps(body).encode("utf-8"),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            raise BackendTransportError(f"{url} returned HTTP {exc.code}") from exc
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise BackendTransportError(f"{url} unreachable: {exc}") from exc
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise BackendError(f"{url} sent a non-JSON reply") from exc

    def chat(self, context: str, question: str) -> str:
        reply = self._post(
            self.chat_url,
            {
                "model": self.chat_model,
                "messages": [
                    {"role": "system", "content": context},
                    {"role": "user", "content": question},
                ],
            },
        )
        try:
            if "choices" in reply:
                return reply["choices"][0]["message"]["content"]
            return reply["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"unexpected chat reply shape: {sorted(reply)}") from exc

    def embed(self, text: str) -> np.ndarray:
        reply = self._post(self.embed_url, {"model": self.embed_model, "input": text})
        try:
            if "data" in reply:
                vec = reply["data"][0]["embedding"]
            elif "embeddings" in reply:
                vec = reply["embeddings"][0]
            else:
                vec = reply["embedding"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"unexpected embedding reply shape: {sorted(reply)}") from exc
        out = np.asarray(vec, dtype=np.float64)
        if out.ndim != 1 or not np.all(np.isfinite(out)):
            raise BackendError("embedding is not a finite vector")
        return out


@dataclass(frozen=True, eq=False)
class LlmAgentState:
    database: AgentDatabase
    names: tuple[str, ...]
    question: str
    question_embedding: np.ndarray


def synthetic_sentences(names: Sequence[str], size: int, rng: np.random.Generator) -> list[str]:
    out = []
    for _ in range(size):
        name = names[int(rng.integers(len(names)))]
        tmpl = _TEMPLATES[int(rng.integers(len(_TEMPLATES)))]
        out.append(tmpl.format(name=name))
    return out


class LlmBackend:
    kind = "llm"

    def __init__(self, config: SystemConfig, client: ServiceClient | None = None):
        self.config = config
        p = config.backend.params
        self.client = client or ServiceClient(p["chat_url"], p["embed_url"], p["chat_model"], p["embed_model"], p["timeout"])
        self._embed_cache: dict[str, np.ndarray] = {}

    def _embed(self, text: str) -> np.ndarray:
        vec = self._embed_cache.get(text)
        if vec is None:
            vec = self.client.embed(text)
            if vec.shape != (self.config.d,):
                raise BackendError(f"embedding service returned dimension {vec.shape[0]}, config says d={self.config.d}")
            self._embed_cache[text] = vec
        return vec

    def _label(self, text: str, names: Sequence[str]) -> SiloLabel:
        label = extract_label(text, names)
        if label is None:
            log.warning("no flower name found in %r; recording unknown label", text[:80])
            return UNKNOWN
        return label

    def initialize(self, config: SystemConfig, streams: RunStreams) -> list[LlmAgentState]:
        p = config.backend.params
        names = load_names(p["names_file"])
        if len(names) != config.L:
            raise ConfigError(f"name list has {len(names)} names but L={config.L}", "L")
        C = p["capacity"]
        if p["corpus_file"]:
            corpus = [s.strip() for s in Path(p["corpus_file"]).read_text(encoding="utf-8").splitlines() if s.strip()]
            if not corpus:
                raise ConfigError("corpus file is empty", "backend.corpus_file")
        else:
            corpus = synthetic_sentences(names, max(4 * C, 50), streams.get("corpus"))
        q_emb = self._embed(p["question"])
        states = []
        for i in range(config.n):
            rng = streams.get("init", i)
            picks = rng.choice(len(corpus), size=C, replace=len(corpus) < C)
            texts = tuple(corpus[j] for j in picks)
            labels = [self._label(t, names).id for t in texts]
            emb = np.stack([self._embed(t) for t in texts])
            db = AgentDatabase(labels, emb, np.zeros(C, dtype=np.int64), C, texts)
            states.append(LlmAgentState(db, names, p["question"], q_emb))
        return states

    def respond(self, state: LlmAgentState, rng: np.random.Generator) -> Answer:
        db = state.database
        idx = _kernels.nearest_item(db.embeddings, state.question_embedding)
        reply = self.client.chat(db.texts[idx], state.question)
        return Answer(self._label(reply, state.names), self._embed(reply), reply)

    def update(self, state: LlmAgentState, payload: Answer, tick: int) -> LlmAgentState:
        if payload.text is None:
            raise ValueError("LLM agents store sentences; payload has no text")
        db = state.database.append(payload.label.id, payload.embedding, tick, payload.text)
        return LlmAgentState(db, state.names, state.question, state.question_embedding)
