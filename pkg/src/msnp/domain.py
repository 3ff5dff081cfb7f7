"""
Core value types shared by the predictor, trust and simulation modules.

Everything here is an immutable value (frozen dataclasses, frozensets), so
instances can be shared freely between threads and used as dict keys.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

PeerId = str

APPRENTICE = 0.6
JOURNEYER = 0.8
MASTER = 1.0

RATING_LEVELS: tuple[float, ...] = (APPRENTICE, JOURNEYER, MASTER)
LEVEL_NAMES: dict[str, float] = {
    "apprentice": APPRENTICE,
    "journeyer": JOURNEYER,
    "master": MASTER,
}


class OntologyError(ValueError):
    """Malformed ontology or a reference to a type the ontology lacks."""


def check_peer_id(pid: PeerId) -> PeerId:
    if not isinstance(pid, str) or not pid:
        raise ValueError(f"peer id must be a non-empty string, got {pid!r}")
    return pid


def rating_level(value: Union[float, str]) -> float:
    """Normalise a rating given as a level word or a number to 0.6/0.8/1.0."""
    if isinstance(value, str):
        key = value.strip().lower()
        if key in LEVEL_NAMES:
            return LEVEL_NAMES[key]
        try:
            value = float(key)
        except ValueError:
            raise ValueError(f"unknown rating level {value!r}") from None
    for level in RATING_LEVELS:
        if abs(float(value) - level) < 1e-9:
            return level
    raise ValueError(f"rating {value!r} is not one of {RATING_LEVELS}")


def nearest_level(score: float) -> float:
    """Snap an averaged score to the closest rating level (ties go up)."""
    best = RATING_LEVELS[0]
    for level in RATING_LEVELS:
        if abs(score - level) <= abs(score - best) + 1e-12:
            best = level
    return best


# ---------------------------------------------------------------------------
# Semantic types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SemanticType:
    name: str
    parent: Optional[str] = None

    def __post_init__(self):
        if not self.name:
            raise OntologyError("semantic type needs a name")


class Ontology:
    """A rooted tree of semantic types; matching is subsumption along parents."""

    def __init__(self, types: Iterable[SemanticType]):
        parents: dict[str, Optional[str]] = {}
        for t in types:
            if t.name in parents:
                raise OntologyError(f"duplicate type {t.name!r}")
            parents[t.name] = t.parent or None
        roots = [n for n, p in parents.items() if p is None]
        if len(roots) != 1:
            raise OntologyError(f"ontology needs exactly one root, found {roots}")
        for name, parent in parents.items():
            if parent is not None and parent not in parents:
                raise OntologyError(f"{name!r} has dangling parent {parent!r}")
        # every chain must reach the root, otherwise there is a cycle
        for name in parents:
            seen = set()
            node: Optional[str] = name
            while node is not None:
                if node in seen:
                    raise OntologyError(f"cycle through {node!r}")
                seen.add(node)
                node = parents[node]
        self._parents = parents
        self.root = roots[0]

    def __contains__(self, name) -> bool:
        return _type_name(name) in self._parents

    def __len__(self) -> int:
        return len(self._parents)

    def __iter__(self):
        return iter(self.types())

    def types(self) -> list[SemanticType]:
        return [SemanticType(n, p) for n, p in self._parents.items()]

    def get(self, name: str) -> SemanticType:
        if name not in self._parents:
            raise OntologyError(f"unknown semantic type {name!r}")
        return SemanticType(name, self._parents[name])

    def ancestors(self, name: str) -> list[str]:
        """Chain from `name` up to the root, inclusive."""
        if name not in self._parents:
            raise OntologyError(f"unknown semantic type {name!r}")
        chain = []
        node: Optional[str] = name
        while node is not None:
            chain.append(node)
            node = self._parents[node]
        return chain

    def children(self, name: str) -> list[str]:
        return sorted(n for n, p in self._parents.items() if p == name)

    def matches(self, required, offered) -> bool:
        req, off = _type_name(required), _type_name(offered)
        if req not in self._parents:
            raise OntologyError(f"unknown semantic type {req!r}")
        return req in self.ancestors(off)

    def dump(self) -> str:
        return "".join(f"{n}\t{p or ''}\n" for n, p in self._parents.items())


def _type_name(t) -> str:
    return t.name if isinstance(t, SemanticType) else str(t)


def type_matches(required, offered, ontology: Ontology) -> bool:
    """True iff `offered` is `required` or one of its descendants."""
    return ontology.matches(required, offered)


def load_ontology(path: Union[str, os.PathLike]) -> Ontology:
    """Read a `child<TAB>parent` file; the root line has an empty parent."""
    types = []
    with open(path, encoding="utf8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) > 2 or not parts[0].strip():
                raise OntologyError(f"{path}:{lineno}: expected 'child<TAB>parent'")
            parent = parts[1].strip() if len(parts) == 2 else ""
            types.append(SemanticType(parts[0].strip(), parent or None))
    return Ontology(types)


def default_ontology() -> Ontology:
    """Small service ontology used by the simulator and demos."""
    pairs = [
        ("Service", None),
        ("Media", "Service"),
        ("Photo", "Media"),
        ("Video", "Media"),
        ("Music", "Media"),
        ("Information", "Service"),
        ("Weather", "Information"),
        ("Transport", "Information"),
        ("Food", "Service"),
        ("Restaurant", "Food"),
        ("Bazaar", "Food"),
    ]
    return Ontology(SemanticType(n, p) for n, p in pairs)


# ---------------------------------------------------------------------------
# Services
# ---------------------------------------------------------------------------

DEFAULT_SDM_BYTES = 6 * 1024
DEFAULT_OWL_BYTES = 12 * 1024


@dataclass(frozen=True)
class ServiceDescription:
    provider: PeerId
    services: tuple[tuple[str, SemanticType], ...]
    sdm_bytes: int = DEFAULT_SDM_BYTES
    owl_bytes: int = DEFAULT_OWL_BYTES
    cached_sdm_available: bool = False

    def __post_init__(self):
        check_peer_id(self.provider)
        object.__setattr__(self, "services", tuple(self.services))
        names = [s for s, _ in self.services]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate service names in description of {self.provider}")
        if self.sdm_bytes < 0 or self.owl_bytes < 0:
            raise ValueError("document sizes must be non-negative")

    @property
    def total_bytes(self) -> int:
        return self.sdm_bytes + self.owl_bytes

    def offers(self, required, ontology: Ontology) -> bool:
        return any(ontology.matches(required, st) for _, st in self.services)


# ---------------------------------------------------------------------------
# Context
# ---------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class ContextValue:
    ctype: str
    value: str

    def __str__(self):
        return f"{self.ctype}={self.value}"

    @classmethod
    def parse(cls, text: str) -> "ContextValue":
        ctype, sep, value = text.partition("=")
        if not sep or not ctype.strip() or not value.strip():
            raise ValueError(f"expected 'ctype=value', got {text!r}")
        return cls(ctype.strip(), value.strip())


@dataclass(frozen=True)
class InterpretingRule:
    """Maps a raw reading in [input_min, input_max] to an interpreted value.

    `ordering` is "numeric" or "lexicographic" and decides how raw values
    are compared against the bounds.
    """

    ctype: str
    input_min: object
    input_max: object
    output: str
    ordering: str = "lexicographic"

    def __post_init__(self):
        if self.ordering not in ("numeric", "lexicographic"):
            raise ValueError(f"unknown ordering {self.ordering!r}")
        lo, hi = self._key(self.input_min), self._key(self.input_max)
        if lo > hi:
            raise ValueError(f"rule for {self.ctype}: input_min > input_max")

    def _key(self, v):
        return float(v) if self.ordering == "numeric" else str(v)

    def covers(self, ctype: str, raw) -> bool:
        if ctype != self.ctype:
            return False
        try:
            key = self._key(raw)
        except (TypeError, ValueError):
            return False
        return self._key(self.input_min) <= key <= self._key(self.input_max)


def interpret_context(raw: tuple[str, object], rules: Sequence[InterpretingRule]) -> Optional[ContextValue]:
    ctype, value = raw
    for rule in rules:
        if rule.covers(ctype, value):
            return ContextValue(ctype, rule.output)
    return None


# ---------------------------------------------------------------------------
# Queries and rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Query:
    """A historical request. Identity (equality, hashing) is the qid alone."""

    qid: str
    stype: Optional[SemanticType] = field(default=None, compare=False)
    parameters: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if not self.qid:
            raise ValueError("query id must be non-empty")
        object.__setattr__(self, "parameters", tuple(self.parameters))

    def __str__(self):
        return self.qid


@dataclass(frozen=True)
class QueryRecord:
    query: Query
    contexts: frozenset

    def __post_init__(self):
        ctx = frozenset(self.contexts)
        object.__setattr__(self, "contexts", ctx)
        ctypes = [c.ctype for c in ctx]
        if len(ctypes) != len(set(ctypes)):
            raise ValueError(f"record for {self.query.qid} has two values for one context type")

    @classmethod
    def of(cls, qid: str, **contexts: str) -> "QueryRecord":
        return cls(Query(qid), frozenset(ContextValue(k, v) for k, v in contexts.items()))

    def context_map(self) -> dict[str, str]:
        return {c.ctype: c.value for c in self.contexts}


@dataclass(frozen=True)
class ImportanceRule:
    ctype: str
    qid: Optional[str] = None
    weight: float = 0.0

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("importance weight must be >= 0")


@dataclass(frozen=True)
class FilterRule:
    qid: str
    ignored_ctypes: frozenset

    def __post_init__(self):
        object.__setattr__(self, "ignored_ctypes", frozenset(self.ignored_ctypes))
        if not self.ignored_ctypes:
            raise ValueError("filter rule must ignore at least one context type")


def contexts_of(mapping: Mapping[str, str]) -> frozenset:
    return frozenset(ContextValue(k, v) for k, v in mapping.items())
