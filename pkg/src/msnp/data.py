"""
Dataset ingestion and generation.

* Advogato-style trust graphs (`rater ratee level` lines, or the
  `"a" -> "b" [level="Master"];` dot encoding) and their conversion to
  reputation data;
* the five-type synthetic query-record generator used for the prediction
  experiments;
* two-context sequence datasets (`location,action,object` CSV).
"""

from __future__ import annotations

import csv
import logging
import os
import re
import warnings
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from msnp.domain import (
    MASTER,
    ContextValue,
    Query,
    QueryRecord,
    check_peer_id,
    rating_level,
)
from msnp.trust import (
    InteractionRecord,
    ProviderRating,
    Rate,
    RecommendedReference,
    ReputationData,
)

log = logging.getLogger(__name__)


class DataError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Trust graphs
# ---------------------------------------------------------------------------

@dataclass
class TrustGraph:
    """Directed rated edges, at most one per (rater, ratee)."""

    edges: dict = field(default_factory=dict)  # (rater, ratee) -> level
    malformed: int = 0

    @classmethod
    def from_edges(cls, edges: Iterable[tuple]) -> "TrustGraph":
        g = cls()
        for rater, ratee, level in edges:
            g.edges[(check_peer_id(rater), check_peer_id(ratee))] = rating_level(level)
        return g

    def __len__(self):
        return len(self.edges)

    def __eq__(self, other):
        return isinstance(other, TrustGraph) and self.edges == other.edges

    def edge_list(self) -> list:
        return [(u, v, lvl) for (u, v), lvl in self.edges.items()]

    def level(self, rater, ratee) -> Optional[float]:
        return self.edges.get((rater, ratee))

    def out_edges(self) -> dict:
        out: dict = {}
        for (u, v), lvl in self.edges.items():
            out.setdefault(u, {})[v] = lvl
        return out

    def raters(self) -> list:
        return sorted({u for u, _ in self.edges})

    def nodes(self) -> list:
        return sorted({n for e in self.edges for n in e})

    def out_degree(self) -> dict:
        deg: dict = {}
        for u, _ in self.edges:
            deg[u] = deg.get(u, 0) + 1
        return deg


_DOT_EDGE = re.compile(r'^\s*"?([^"\s]+)"?\s*->\s*"?([^"\s]+)"?\s*\[\s*level\s*=\s*"?(\w+(?:\.\d+)?)"?\s*\]\s*;?\s*$')
_DOT_SKIP = re.compile(r"^\s*(digraph\b.*\{|\}|//.*|\w+\s*\[.*\]\s*;?)\s*$")


def load_trust_graph(path: Union[str, os.PathLike]) -> TrustGraph:
    """Read a trust graph. Later duplicates of an edge replace earlier ones."""
    try:
        f = open(path, encoding="utf8")
    except OSError as exc:
        raise DataError(f"cannot read trust graph {path}: {exc}") from None
    g = TrustGraph()
    duplicates = 0
    with f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            m = _DOT_EDGE.match(line)
            if m:
                parts = list(m.groups())
            elif _DOT_SKIP.match(line):
                continue
            else:
                parts = line.split()
            if len(parts) != 3:
                g.malformed += 1
                continue
            try:
                level = rating_level(parts[2])
            except ValueError:
                g.malformed += 1
                continue
            key = (parts[0], parts[1])
            if key in g.edges:
                duplicates += 1
            g.edges[key] = level
    if duplicates:
        warnings.warn(f"{path}: {duplicates} duplicate edge(s), last occurrence kept", stacklevel=2)
    if g.malformed:
        log.warning("%s: skipped %d malformed line(s)", path, g.malformed)
    if not g.edges:
        raise DataError(f"{path}: no valid edges")
    return g


def save_trust_graph(g: TrustGraph, path: Union[str, os.PathLike]) -> None:
    names = {0.6: "apprentice", 0.8: "journeyer", 1.0: "master"}
    with open(path, "w", encoding="utf8") as f:
        for (u, v), lvl in g.edges.items():
            f.write(f"{u} {v} {names[lvl]}\n")


def filter_min_ratings(g: TrustGraph, min_ratings: int = 10) -> TrustGraph:
    """Drop the out-edges of every rater with fewer than `min_ratings` ratings.

    One pass only: ratees that lose their own out-edges are not revisited.
    """
    deg = g.out_degree()
    keep = {u for u, d in deg.items() if d >= min_ratings}
    return TrustGraph({e: lvl for e, lvl in g.edges.items() if e[0] in keep})


def classify_friends(g: TrustGraph) -> dict:
    """peer -> (friends, non_friends); friends rated each other Master."""
    out = g.out_edges()
    result = {}
    for u, rated in out.items():
        friends = {v for v, lvl in rated.items()
                   if lvl == MASTER and out.get(v, {}).get(u) == MASTER and v != u}
        result[u] = (friends, set(rated) - friends)
    for v in g.nodes():
        result.setdefault(v, (set(), set()))
    return result


StypeAssignment = Mapping[str, tuple]  # ratee -> (sname, stype)


def single_stype_assignment(g: TrustGraph, stype: str = "Reputation", sname: str = "profile") -> dict:
    return {v: (sname, stype) for v in g.nodes()}


def random_stype_assignment(g: TrustGraph, n_types: int, seed: int = 0, sname: str = "profile") -> dict:
    rng = np.random.default_rng(seed)
    nodes = g.nodes()
    picks = rng.integers(n_types, size=len(nodes))
    return {v: (sname, f"Type{int(k) + 1}") for v, k in zip(nodes, picks)}


def trust_graph_to_rds(g: TrustGraph, stype_assignment: Optional[StypeAssignment] = None,
                       friends: Optional[Mapping] = None) -> list:
    """One RD per rater: a rating and an interaction per out-edge, and per
    service type a reference to every friend who gave a Master rating to a
    provider of that type."""
    if stype_assignment is None:
        stype_assignment = single_stype_assignment(g)
    if friends is None:
        friends = classify_friends(g)
    out = g.out_edges()
    for v in {v for _, v in g.edges}:
        if v not in stype_assignment:
            raise DataError(f"ratee {v!r} has no service assignment")

    master_types: dict = {}
    for u, rated in out.items():
        master_types[u] = {stype_assignment[v][1] for v, lvl in rated.items() if lvl == MASTER}

    rds = []
    for u in sorted(out):
        spr, ir = [], []
        for t, (v, lvl) in enumerate(out[u].items()):
            sname, stype = stype_assignment[v]
            spr.append(ProviderRating(v, (Rate(sname, stype, lvl),)))
            ir.append(InteractionRecord(v, sname, stype, t))
        refs: dict = {}
        for f in friends.get(u, (set(),))[0]:
            for stype in master_types.get(f, ()):
                refs.setdefault(stype, set()).add(f)
        rr = [RecommendedReference(st, ids) for st, ids in sorted(refs.items())]
        rds.append(ReputationData(u, spr, rr, ir))
    return rds


def planted_trust_graph(n_users: int = 600, community_size: int = 30, expert_fraction: float = 0.2,
                        expert_degree: int = 28, novice_degree: int = 10,
                        expert_accuracy: float = 0.95, novice_accuracy: float = 0.2,
                        quality_p=(0.4, 0.2, 0.4), expert_quality_p=(0.05, 0.15, 0.8),
                        seed: int = 0) -> tuple:
    """Synthetic graph where experienced raters report each peer's planted
    quality and everyone else is mostly noise.

    Users live in communities and rate members of their own community.
    Experts rate many peers and report the truth with `expert_accuracy`;
    novices rate few and report it with `novice_accuracy`, otherwise a
    uniform random level. Experts are themselves mostly good peers
    (`expert_quality_p`), so accurate raters tend to befriend and reference
    them. Returns (graph, quality, experts).
    """
    rng = np.random.default_rng(seed)
    levels = np.array([0.6, 0.8, 1.0])
    users = [f"u{i:04d}" for i in range(n_users)]
    experts = {u for u in users if rng.random() < expert_fraction}
    quality = {u: float(levels[rng.choice(3, p=expert_quality_p if u in experts else quality_p)])
               for u in users}
    edges = []
    for start in range(0, n_users, community_size):
        members = users[start:start + community_size]
        for u in members:
            others = [v for v in members if v != u]
            degree = min(len(others), expert_degree if u in experts else novice_degree)
            acc = expert_accuracy if u in experts else novice_accuracy
            for j in sorted(rng.choice(len(others), size=degree, replace=False)):
                v = others[j]
                lvl = quality[v] if rng.random() < acc else float(levels[rng.integers(3)])
                edges.append((u, v, lvl))
    return TrustGraph.from_edges(edges), quality, experts


# ---------------------------------------------------------------------------
# Synthetic query records
# ---------------------------------------------------------------------------

DIMENSIONS = ("CL", "CT", "CA", "CW", "CP")


def _span(prefix: str, lo: int, hi: int) -> tuple:
    return tuple(f"{prefix}{i}" for i in range(lo, hi + 1))


@dataclass(frozen=True)
class GeneratorRow:
    qid: str
    cells: tuple  # ((dimension, (value, ...)), ...); one value means fixed

    def values(self, dim: str) -> tuple:
        return dict(self.cells)[dim]


@dataclass(frozen=True)
class GeneratorSpec:
    rows: tuple
    dimensions: tuple = DIMENSIONS

    def __post_init__(self):
        if not self.rows:
            raise DataError("generator spec needs at least one row")
        for row in self.rows:
            cells = dict(row.cells)
            if set(cells) != set(self.dimensions):
                raise DataError(f"row {row.qid} must name exactly {self.dimensions}")
            if any(len(v) == 0 for v in cells.values()):
                raise DataError(f"row {row.qid} has an empty value range")


def _row(qid, **cells) -> GeneratorRow:
    return GeneratorRow(qid, tuple((d, tuple(cells[d])) for d in DIMENSIONS))


TABLE1 = GeneratorSpec((
    _row("Q1", CL=("L1",), CT=("T1",), CA=_span("A", 1, 5), CW=_span("W", 1, 5), CP=_span("P", 1, 5)),
    _row("Q2", CL=_span("L", 1, 5), CT=("T2",), CA=("A2",), CW=_span("W", 1, 5), CP=_span("P", 1, 5)),
    _row("Q3", CL=_span("L", 1, 5), CT=_span("T", 1, 5), CA=("A3",), CW=("W3",), CP=_span("P", 1, 5)),
    _row("Q4", CL=_span("L", 1, 5), CT=_span("T", 1, 5), CA=_span("A", 1, 5), CW=("W4",), CP=("P4",)),
    _row("Q5", CL=("L5",), CT=_span("T", 1, 5), CA=_span("A", 1, 5), CW=_span("W", 1, 5), CP=("P5",)),
))


def generate_records(spec: GeneratorSpec = TABLE1, n: int = 100, seed: int = 0) -> list:
    """`n` records: a uniformly drawn row type, then each cell fixed or drawn uniformly."""
    if n < 1:
        raise DataError("need n >= 1 records")
    rng = np.random.default_rng(seed)
    records = []
    for _ in range(n):
        row = spec.rows[rng.integers(len(spec.rows))]
        ctx = []
        for dim, values in row.cells:
            ctx.append(ContextValue(dim, values[rng.integers(len(values))] if len(values) > 1 else values[0]))
        records.append(QueryRecord(Query(row.qid), frozenset(ctx)))
    return records


# ---------------------------------------------------------------------------
# Sequence datasets
# ---------------------------------------------------------------------------

SEQUENCE_COLUMNS = ("location", "action", "object")


def load_sequence_dataset(path: Union[str, os.PathLike]) -> list:
    """Each row becomes a record whose query is the object and whose context
    is {location, action}."""
    try:
        f = open(path, newline="", encoding="utf8")
    except OSError as exc:
        raise DataError(f"cannot read sequence dataset {path}: {exc}") from None
    with f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file")
        missing = [c for c in SEQUENCE_COLUMNS if c not in [h.strip() for h in reader.fieldnames]]
        if missing:
            raise DataError(f"{path}: missing column(s) {missing}")
        records = []
        for row in reader:
            row = {k.strip(): (v or "").strip() for k, v in row.items() if k}
            if not any(row.values()):
                continue
            if not all(row[c] for c in SEQUENCE_COLUMNS):
                raise DataError(f"{path}: incomplete row {row}")
            records.append(QueryRecord(
                Query(row["object"]),
                frozenset({ContextValue("location", row["location"]),
                           ContextValue("action", row["action"])}),
            ))
    if not records:
        raise DataError(f"{path}: no records")
    return records


# (location, action) -> object; every pair determines its object
SEQUENCE_ACTIVITIES = (
    ("livingroom", "sitting", "HiFi"),
    ("livingroom", "lying", "TV"),
    ("kitchen", "cooking", "Stove"),
    ("kitchen", "washing", "Sink"),
    ("bedroom", "lying", "Lamp"),
    ("bathroom", "washing", "Shower"),
    ("office", "sitting", "Computer"),
    ("hall", "standing", "Door"),
)


def make_sequence_fixture(n: int = 200, seed: int = 7) -> list:
    """Rows (location, action, object) of a deterministic activity sequence."""
    rng = np.random.default_rng(seed)
    picks = rng.integers(len(SEQUENCE_ACTIVITIES), size=n)
    return [SEQUENCE_ACTIVITIES[int(k)] for k in picks]


def write_sequence_csv(rows: Iterable[tuple], path: Union[str, os.PathLike]) -> None:
    with open(path, "w", newline="", encoding="utf8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(SEQUENCE_COLUMNS)
        w.writerows(rows)


def sequence_fixture_path():
    """Path of the bundled 200-row two-context fixture."""
    return resources.files("msnp") / "resources" / "sequence_200.csv"
