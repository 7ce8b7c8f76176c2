"""Domain types, configuration schema and seed derivation shared by every module."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import struct
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

UNKNOWN_LABEL = -1


class ConfigError(ValueError):
    """Invalid or malformed configuration. ``field`` names the offending key path."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class SiloLabel:
    id: int
    name: str | None = None

    def __eq__(self, other: object) -> bool:
        if isinstance(other, SiloLabel):
            return self.id == other.id
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.id)

    @property
    def is_unknown(self) -> bool:
        return self.id == UNKNOWN_LABEL


UNKNOWN = SiloLabel(UNKNOWN_LABEL, "unknown")


@dataclass(frozen=True, eq=False)
class Answer:
    label: SiloLabel
    embedding: np.ndarray
    text: str | None = None


@dataclass(frozen=True, eq=False)
class DatabaseItem:
    label: SiloLabel
    embedding: np.ndarray
    text: str | None
    inserted_at: int


class AgentDatabase:
    """Bounded FIFO knowledge base, stored column-wise oldest first.

    Instances are treated as immutable; :meth:`append` returns a new database.
    """

    __slots__ = ("labels", "embeddings", "inserted_at", "texts", "capacity")

    def __init__(
        self,
        labels: np.ndarray,
        embeddings: np.ndarray,
        inserted_at: np.ndarray,
        capacity: int,
        texts: tuple[str, ...] | None = None,
    ):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        labels = np.asarray(labels, dtype=np.int64)
        embeddings = np.asarray(embeddings, dtype=np.float64)
        inserted_at = np.asarray(inserted_at, dtype=np.int64)
        if embeddings.ndim != 2 or len(labels) != len(embeddings) or len(labels) != len(inserted_at):
            raise ValueError("labels, embeddings and inserted_at must align")
        if len(labels) > capacity:
            raise ValueError("database larger than its capacity")
        if len(inserted_at) > 1 and np.any(np.diff(inserted_at) < 0):
            raise ValueError("inserted_at must be non-decreasing")
        if texts is not None and len(texts) != len(labels):
            raise ValueError("texts must align with labels")
        self.labels = labels
        self.embeddings = embeddings
        self.inserted_at = inserted_at
        self.capacity = int(capacity)
        self.texts = texts
        for arr in (self.labels, self.embeddings, self.inserted_at):
            arr.flags.writeable = False

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def items(self) -> list[DatabaseItem]:
        return [
            DatabaseItem(
                SiloLabel(int(lab)),
                self.embeddings[i],
                None if self.texts is None else self.texts[i],
                int(self.inserted_at[i]),
            )
            for i, lab in enumerate(self.labels)
        ]

    def append(self, label: int, embedding: np.ndarray, tick: int, text: str | None = None) -> AgentDatabase:
        embedding = np.asarray(embedding, dtype=np.float64)
        if embedding.shape != (self.dim,):
            raise ValueError(f"embedding dimension {embedding.shape} does not match database dimension {self.dim}")
        if len(self) and tick < self.inserted_at[-1]:
            raise ValueError("insertion tick goes backwards")
        drop = 1 if len(self) >= self.capacity else 0
        texts = None
        if self.texts is not None:
            texts = self.texts[drop:] + (text if text is not None else "",)
        return AgentDatabase(
            np.append(self.labels[drop:], label),
            np.vstack([self.embeddings[drop:], embedding[None, :]]),
            np.append(self.inserted_at[drop:], tick),
            self.capacity,
            texts,
        )


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class ClassifierParams:
    m: int | None = None
    W: int | None = None
    eps_entropy_const: float = 1e-9
    delta_entropy_approx: float = 0.1
    eps_min: float = 1e-12

    def __post_init__(self):
        if self.m is not None and self.m < 1:
            raise ConfigError("m must be >= 1", "classifier.m")
        if self.W is not None and self.W < 2:
            raise ConfigError("W must be >= 2", "classifier.W")
        for name in ("eps_entropy_const", "delta_entropy_approx", "eps_min"):
            if not getattr(self, name) > 0:
                raise ConfigError("tolerance must be > 0", f"classifier.{_CLASSIFIER_KEYS_REV[name]}")

    def resolved(self, T: int) -> ClassifierParams:
        """Fill in the T-dependent defaults: m = max(1, T // 10), W = 2m."""
        m = self.m if self.m is not None else max(1, T // 10)
        W = self.W if self.W is not None else max(2, 2 * m)
        return dataclasses.replace(self, m=m, W=W)


_CLASSIFIER_KEYS = {
    "m": "m",
    "W": "W",
    "epsEntropyConst": "eps_entropy_const",
    "deltaEntropyApprox": "delta_entropy_approx",
    "epsMin": "eps_min",
}
_CLASSIFIER_KEYS_REV = {v: k for k, v in _CLASSIFIER_KEYS.items()}

_REQUIRED = object()

# kind -> {param: (accepted types, default)}; float defaults of None are resolved from rho.
BACKEND_PARAMS: dict[str, dict[str, tuple[tuple[type, ...], Any]]] = {
    "synthetic": {
        "capacity": ((int,), 10),
        "policy": ((str,), "majority-centroid"),
        "rho": ((float,), 1.0),
        "sigma_init": ((float, type(None)), None),
        "sigma_gen": ((float, type(None)), None),
        "label_weights": ((list, type(None)), None),
    },
    "gmm": {
        "rho": ((float,), 1.0),
        "sigma_init": ((float, type(None)), None),
        "sigma": ((float, type(None)), None),
        "eta": ((float,), 0.1),
        "alpha0": ((float,), 1.0),
        "decay": ((float,), 0.0),
    },
    "llm": {
        "chat_url": ((str,), _REQUIRED),
        "embed_url": ((str,), _REQUIRED),
        "chat_model": ((str,), "llama2:7b-chat"),
        "embed_model": ((str,), "nomic-embed-text:v1.5"),
        "names_file": ((str,), _REQUIRED),
        "corpus_file": ((str, type(None)), None),
        "capacity": ((int,), 10),
        "question": ((str,), "Describe the prettiest flower in a single sentence."),
        "timeout": ((float,), 60.0),
    },
}

POLICIES = ("majority-centroid", "nearest-to-query")


def _coerce(value: Any, types: tuple[type, ...], where: str) -> Any:
    if isinstance(value, bool):
        raise ConfigError(f"expected {'/'.join(t.__name__ for t in types)}, got bool", where)
    if isinstance(value, Decimal):
        value = float(value)
    if float in types and isinstance(value, int):
        value = float(value)
    if not isinstance(value, types):
        names = "/".join("null" if t is type(None) else t.__name__ for t in types)
        raise ConfigError(f"expected {names}, got {type(value).__name__}", where)
    if isinstance(value, float) and not np.isfinite(value):
        raise ConfigError("must be finite", where)
    return value


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "synthetic"
    params: Mapping[str, Any] = field(default_factory=dict)

    @classmethod
    def build(cls, kind: str, params: Mapping[str, Any] | None = None) -> BackendConfig:
        """Validate ``params`` for ``kind`` and fill every default."""
        if kind not in BACKEND_PARAMS:
            raise ConfigError(f"unknown backend kind {kind!r}; expected one of {sorted(BACKEND_PARAMS)}", "backend.kind")
        schema = BACKEND_PARAMS[kind]
        params = dict(params or {})
        unknown = sorted(set(params) - set(schema))
        if unknown:
            raise ConfigError(f"unknown key(s) {unknown}", f"backend.{unknown[0]}")
        out: dict[str, Any] = {}
        for name, (types, default) in schema.items():
            where = f"backend.{name}"
            if name in params:
                out[name] = _coerce(params[name], types, where)
            elif default is _REQUIRED:
                raise ConfigError("required key missing", where)
            else:
                out[name] = default
        rho = out.get("rho")
        for name, frac in (("sigma_init", 0.25), ("sigma_gen", 0.05), ("sigma", 0.05)):
            if name in out and out[name] is None:
                out[name] = frac * rho
        for name in ("rho",):
            if name in out and not out[name] > 0:
                raise ConfigError("must be > 0", f"backend.{name}")
        for name in ("sigma_init", "sigma_gen", "sigma", "decay"):
            if name in out and out[name] < 0:
                raise ConfigError("must be >= 0", f"backend.{name}")
        if "capacity" in out and out["capacity"] < 1:
            raise ConfigError("must be >= 1", "backend.capacity")
        if kind == "synthetic":
            if out["policy"] not in POLICIES:
                raise ConfigError(f"expected one of {list(POLICIES)}", "backend.policy")
            if out["label_weights"] is not None:
                w = [_coerce(x, (float,), "backend.label_weights") for x in out["label_weights"]]
                if any(x < 0 for x in w) or sum(w) <= 0:
                    raise ConfigError("weights must be non-negative with a positive sum", "backend.label_weights")
                out["label_weights"] = w
        if kind == "gmm":
            if not 0 < out["eta"] <= 1:
                raise ConfigError("must be in (0, 1]", "backend.eta")
            if not out["alpha0"] > 0:
                raise ConfigError("must be > 0", "backend.alpha0")
            if not out["decay"] < 1:
                raise ConfigError("must be < 1", "backend.decay")
        return cls(kind, out)


@dataclass(frozen=True)
class SystemConfig:
    n: int = 30
    T: int = 80
    p: Decimal = Decimal("0.2")
    k: int = 15
    d: int = 8
    L: int = 8
    backend: BackendConfig = field(default_factory=lambda: BackendConfig.build("synthetic"))
    seed: int = 0
    classifier: ClassifierParams = field(default_factory=ClassifierParams)

    def __post_init__(self):
        if not isinstance(self.p, Decimal):
            object.__setattr__(self, "p", parse_p(self.p))
        if self.n < 2:
            raise ConfigError("n must be >= 2", "n")
        if self.T < 0:
            raise ConfigError("T must be >= 0", "T")
        if not Decimal(0) <= self.p <= Decimal(1):
            raise ConfigError("p must lie in [0, 1]", "p")
        if not 1 <= self.k <= self.n - 1:
            raise ConfigError(f"k must lie in [1, n-1] = [1, {self.n - 1}]", "k")
        if self.d < 1:
            raise ConfigError("d must be >= 1", "d")
        if self.L < 1:
            raise ConfigError("L must be >= 1", "L")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer", "seed")
        weights = self.backend.params.get("label_weights")
        if weights is not None and len(weights) != self.L:
            raise ConfigError(f"expected {self.L} weights", "backend.label_weights")

    @property
    def p_float(self) -> float:
        return float(self.p)

    @property
    def p_text(self) -> str:
        return str(self.p)

    @property
    def classifier_resolved(self) -> ClassifierParams:
        return self.classifier.resolved(self.T)

    def replace(self, **changes: Any) -> SystemConfig:
        return dataclasses.replace(self, **changes)


def parse_p(value: Any) -> Decimal:
    if isinstance(value, bool):
        raise ConfigError("expected a decimal number", "p")
    if isinstance(value, float):
        value = repr(value)
    try:
        p = Decimal(str(value).strip())
    except (InvalidOperation, ValueError):
        raise ConfigError(f"not a decimal number: {value!r}", "p") from None
    if not p.is_finite():
        raise ConfigError("must be finite", "p")
    return p


_TOP_KEYS = ("n", "T", "p", "k", "d", "L", "backend", "seed", "classifier")


def config_from_dict(raw: Mapping[str, Any]) -> SystemConfig:
    if not isinstance(raw, Mapping):
        raise ConfigError("top level must be a JSON object")
    unknown = sorted(set(raw) - set(_TOP_KEYS))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown}", unknown[0])
    kw: dict[str, Any] = {}
    for name in ("n", "T", "k", "d", "L", "seed"):
        if name in raw:
            kw[name] = _coerce(raw[name], (int,), name)
    if "p" in raw:
        if not isinstance(raw["p"], (int, Decimal, float, str)) or isinstance(raw["p"], bool):
            raise ConfigError("expected a decimal number", "p")
        kw["p"] = parse_p(raw["p"])
    if "backend" in raw:
        b = raw["backend"]
        if not isinstance(b, Mapping):
            raise ConfigError("expected an object", "backend")
        if "kind" not in b:
            raise ConfigError("required key missing", "backend.kind")
        kind = _coerce(b["kind"], (str,), "backend.kind")
        kw["backend"] = BackendConfig.build(kind, {k: v for k, v in b.items() if k != "kind"})
    if "classifier" in raw:
        c = raw["classifier"]
        if not isinstance(c, Mapping):
            raise ConfigError("expected an object", "classifier")
        unknown = sorted(set(c) - set(_CLASSIFIER_KEYS))
        if unknown:
            raise ConfigError(f"unknown key(s) {unknown}", f"classifier.{unknown[0]}")
        ckw = {}
        for key, attr in _CLASSIFIER_KEYS.items():
            if key not in c or c[key] is None:
                continue
            types = (int,) if key in ("m", "W") else (float,)
            ckw[attr] = _coerce(c[key], types, f"classifier.{key}")
        kw["classifier"] = ClassifierParams(**ckw)
    return SystemConfig(**kw)


def parse_config(text: str) -> SystemConfig:
    try:
        raw = json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc.msg} (column {exc.colno})", line=exc.lineno) from None
    return config_from_dict(raw)


def load_config(path: str | Path) -> SystemConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)


_P_MARK = "\x00p\x00"


def config_to_dict(cfg: SystemConfig) -> dict[str, Any]:
    classifier = {
        key: getattr(cfg.classifier, attr)
        for key, attr in _CLASSIFIER_KEYS.items()
        if getattr(cfg.classifier, attr) is not None
    }
    return {
        "n": cfg.n,
        "T": cfg.T,
        "p": cfg.p,
        "k": cfg.k,
        "d": cfg.d,
        "L": cfg.L,
        "backend": {"kind": cfg.backend.kind, **cfg.backend.params},
        "seed": cfg.seed,
        "classifier": classifier,
    }


def config_to_json(cfg: SystemConfig) -> str:
    """Canonical serialization; p is written from its decimal text, never via float."""
    d = config_to_dict(cfg)
    d["p"] = _P_MARK
    text = json.dumps(d, indent=2)
    return text.replace(json.dumps(_P_MARK), cfg.p_text) + "\n"


# ---------------------------------------------------------------------------
# seeds and random streams

@dataclass(frozen=True)
class StreamTag:
    p: str = ""
    k: int = 0
    replicate: int = 0
    role: str = ""
    agent_id: int | None = None
    tick: int | None = None

    def encode(self) -> bytes:
        def text(s: str) -> bytes:
            b = s.encode("utf-8")
            return struct.pack("<I", len(b)) + b

        def opt(v: int | None) -> bytes:
            return b"\x00" + bytes(8) if v is None else b"\x01" + struct.pack("<q", v)

        return b"".join(
            [
                text(self.p),
                struct.pack("<q", self.k),
                struct.pack("<q", self.replicate),
                text(self.role),
                opt(self.agent_id),
                opt(self.tick),
            ]
        )


def derive_seed(master: int, tag: StreamTag) -> int:
    """Map (master seed, stream tag) to an independent 64-bit seed via BLAKE2b."""
    h = hashlib.blake2b(struct.pack("<Q", master % 2**64) + tag.encode(), digest_size=8, person=b"silosim-seed")
    return int.from_bytes(h.digest(), "little")


def make_rng(seed: int) -> np.random.Generator:
    # Philox is counter-based; one generator per derived stream.
    return np.random.Generator(np.random.Philox(seed))


class RunStreams:
    """Named random streams for one system run, all derived from the run seed."""

    def __init__(self, seed: int):
        self.seed = seed

    def get(self, role: str, agent_id: int | None = None, tick: int | None = None) -> np.random.Generator:
        return make_rng(derive_seed(self.seed, StreamTag(role=role, agent_id=agent_id, tick=tick)))

    def per_agent(self, role: str, n: int) -> list[np.random.Generator]:
        return [self.get(role, i) for i in range(n)]


# ---------------------------------------------------------------------------
# snapshots and trajectories

@dataclass(frozen=True)
class SystemSnapshot:
    t: int
    labels: tuple[int, ...]
    silo_counts: Mapping[int, int]
    silo_count: int
    stability: float | None
    entropy: float
    embeddings: np.ndarray | None = field(default=None, compare=False, repr=False)

    def to_json(self, with_embeddings: bool = False) -> str:
        d: dict[str, Any] = {
            "t": self.t,
            "labels": list(self.labels),
            "silo_counts": {str(k): v for k, v in sorted(self.silo_counts.items())},
            "silo_count": self.silo_count,
            "stability": self.stability,
            "entropy": self.entropy,
        }
        if with_embeddings and self.embeddings is not None:
            d["embeddings"] = self.embeddings.tolist()
        return json.dumps(d, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> SystemSnapshot:
        emb = d.get("embeddings")
        return cls(
            t=int(d["t"]),
            labels=tuple(int(x) for x in d["labels"]),
            silo_counts={int(k): int(v) for k, v in d["silo_counts"].items()},
            silo_count=int(d["silo_count"]),
            stability=None if d["stability"] is None else float(d["stability"]),
            entropy=float(d["entropy"]),
            embeddings=None if emb is None else np.asarray(emb, dtype=np.float64),
        )


@dataclass(frozen=True)
class Trajectory:
    config: SystemConfig | None
    snapshots: Sequence[SystemSnapshot]

    def __post_init__(self):
        for i, snap in enumerate(self.snapshots):
            if snap.t != i:
                raise ValueError(f"snapshot {i} has t={snap.t}; ticks must be contiguous from 0")
            if (snap.stability is None) != (i == 0):
                raise ValueError("stability must be absent exactly at t=0")

    @property
    def T(self) -> int:
        return len(self.snapshots) - 1

    def to_jsonl(self, with_embeddings: bool = False) -> str:
        return "".join(s.to_json(with_embeddings) + "\n" for s in self.snapshots)

    def write(self, path: str | Path, with_embeddings: bool = False) -> None:
        Path(path).write_text(self.to_jsonl(with_embeddings), encoding="utf-8")

    @classmethod
    def read(cls, path: str | Path, config: SystemConfig | None = None) -> Trajectory:
        snaps = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    snaps.append(SystemSnapshot.from_dict(json.loads(line)))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise ValueError(f"{path}:{lineno}: bad snapshot record ({exc})") from None
        return cls(config, snaps)
