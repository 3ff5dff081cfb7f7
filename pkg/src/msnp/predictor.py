"""
Context-aware prediction of the user's preferred query.

Scores every historical query against the current context set with an
averaged naive-Bayes posterior. Per-context terms can be re-weighted with
importance rules and dropped per query with filter rules. A user-defined
override for an exact context set always wins.
"""

from __future__ import annotations

import csv
import os
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence, Union

from msnp.domain import (
    ContextValue,
    FilterRule,
    ImportanceRule,
    Query,
    QueryRecord,
)


class PredictionError(ValueError):
    pass


class UnknownQueryError(PredictionError):
    pass


class ColdStartError(PredictionError):
    """No history and no manual override for the current context."""


class NoInformativeContextError(PredictionError):
    """Every current context is either filtered or never observed."""


# ---------------------------------------------------------------------------
# Probability primitives
# ---------------------------------------------------------------------------

def candidate_queries(records: Iterable[QueryRecord]) -> set:
    return {r.query for r in records}


def p_context_given_query(c: ContextValue, q: Query, records: Sequence[QueryRecord]) -> float:
    with_q = [r for r in records if r.query == q]
    if not with_q:
        raise UnknownQueryError(f"unknown query {q.qid!r}")
    return sum(1 for r in with_q if c in r.contexts) / len(with_q)


def p_query(q: Query, records: Sequence[QueryRecord]) -> float:
    if not records:
        raise PredictionError("p_query needs at least one record")
    return sum(1 for r in records if r.query == q) / len(records)


def p_context(c: ContextValue, records: Sequence[QueryRecord]) -> float:
    """Marginal of `c`, summed over distinct queries (law of total probability)."""
    if not records:
        raise PredictionError("p_context needs at least one record")
    return sum(
        p_context_given_query(c, q, records) * p_query(q, records)
        for q in candidate_queries(records)
    )


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Prediction:
    ranking: tuple  # ((Query, score), ...) best first

    @property
    def top(self) -> Query:
        return self.ranking[0][0]

    def scores(self) -> dict[str, float]:
        return {q.qid: s for q, s in self.ranking}


@dataclass(frozen=True)
class PredictionModel:
    records: tuple = ()
    importance_rules: tuple = ()
    filter_rules: tuple = ()
    manual_override: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "importance_rules", tuple(self.importance_rules))
        object.__setattr__(self, "filter_rules", tuple(self.filter_rules))
        override = {frozenset(k): v for k, v in dict(self.manual_override).items()}
        object.__setattr__(self, "manual_override", override)

    # counts are derived lazily; the instance is immutable so they never go stale
    @cached_property
    def _query_counts(self) -> Counter:
        return Counter(r.query for r in self.records)

    @cached_property
    def _pair_counts(self) -> Counter:
        return Counter((r.query, c) for r in self.records for c in r.contexts)

    @cached_property
    def queries(self) -> tuple:
        return tuple(sorted(self._query_counts, key=lambda q: q.qid))

    @cached_property
    def _ignored(self) -> dict:
        ignored: dict[str, set] = {}
        for rule in self.filter_rules:
            ignored.setdefault(rule.qid, set()).update(rule.ignored_ctypes)
        return ignored

    @cached_property
    def _weights(self) -> tuple[dict, dict]:
        global_w: dict[str, float] = {}
        specific: dict[tuple, float] = {}
        for rule in self.importance_rules:
            if rule.qid is None:
                global_w[rule.ctype] = rule.weight
            else:
                specific[(rule.ctype, rule.qid)] = rule.weight
        return global_w, specific

    def weight(self, ctype: str, qid: str) -> float:
        global_w, specific = self._weights
        if (ctype, qid) in specific:
            return specific[(ctype, qid)]
        return global_w.get(ctype, 0.0)

    def p_context_given_query(self, c: ContextValue, q: Query) -> float:
        n = self._query_counts.get(q, 0)
        if n == 0:
            raise UnknownQueryError(f"unknown query {q.qid!r}")
        return self._pair_counts.get((q, c), 0) / n

    def p_query(self, q: Query) -> float:
        return self._query_counts.get(q, 0) / len(self.records)

    def p_context(self, c: ContextValue) -> float:
        return sum(self.p_context_given_query(c, q) * self.p_query(q) for q in self.queries)

    def posterior(self, c: ContextValue, q: Query) -> float:
        return self.p_context_given_query(c, q) * self.p_query(q) / self.p_context(c)

    def predict(self, current: Iterable[ContextValue]) -> Prediction:
        current = frozenset(current)
        if current in self.manual_override:
            q = self.manual_override[current]
            if not isinstance(q, Query):
                q = Query(str(q))
            return Prediction(((q, 1.0),))
        if not self.records:
            raise ColdStartError("no query records and no manual override for this context")

        marginal = {c: self.p_context(c) for c in current}
        observed = {c for c, pc in marginal.items() if pc > 0}
        scored = []
        informative = False
        for q in self.queries:
            ignored = self._ignored.get(q.qid, ())
            ctx = sorted(c for c in observed if c.ctype not in ignored)
            if ctx:
                informative = True
            weights = [self.weight(c.ctype, q.qid) for c in ctx]
            denom = len(ctx) + sum(w for w in weights if w != 0)
            score = 0.0
            for c, w in zip(ctx, weights):
                likelihood = self.p_context_given_query(c, q) * self.p_query(q)
                score += likelihood / marginal[c] * (1.0 + w) / denom
            scored.append((q, score))
        if not informative:
            raise NoInformativeContextError(
                "all current contexts are filtered or unseen in the history")
        scored.sort(key=lambda item: (-item[1], item[0].qid))
        return Prediction(tuple(scored))


def predict(current: Iterable[ContextValue], model: PredictionModel) -> Prediction:
    return model.predict(current)


def evaluate_accuracy(records: Sequence[QueryRecord], training_fraction: float,
                      seed: Optional[int] = None, **model_kwargs) -> float:
    """Top-1 accuracy with the first fraction of records as history.

    The split is chronological; `seed` is accepted for signature symmetry with
    the generators and does not influence the split. Test records whose
    context is entirely unseen count as misses.
    """
    if not 0 < training_fraction < 1:
        raise PredictionError("training fraction must be in (0, 1)")
    n_train = int(training_fraction * len(records) + 1e-9)
    if n_train == 0 or n_train == len(records):
        raise PredictionError(
            f"degenerate split: {n_train} of {len(records)} records for training")
    model = PredictionModel(records[:n_train], **model_kwargs)
    test = records[n_train:]
    hits = 0
    for rec in test:
        try:
            pred = model.predict(rec.contexts)
        except NoInformativeContextError:
            continue
        hits += pred.top == rec.query
    return hits / len(test)


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def format_contexts(contexts: Iterable[ContextValue]) -> str:
    return ";".join(str(c) for c in sorted(contexts))


def parse_contexts(text: str) -> frozenset:
    text = text.strip()
    if not text:
        return frozenset()
    return frozenset(ContextValue.parse(part) for part in text.split(";") if part.strip())


def save_records(records: Iterable[QueryRecord], path: Union[str, os.PathLike]) -> None:
    with open(path, "w", newline="", encoding="utf8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["qid", "contexts"])
        for r in records:
            w.writerow([r.query.qid, format_contexts(r.contexts)])


def load_records(path: Union[str, os.PathLike]) -> list[QueryRecord]:
    """Read a `qid,contexts` CSV where contexts look like `CL=L1;CT=T1`."""
    records = []
    with open(path, newline="", encoding="utf8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["qid", "contexts"]:
            raise PredictionError(f"{path}: expected header 'qid,contexts'")
        for lineno, row in enumerate(reader, 2):
            if not row or not "".join(row).strip():
                continue
            if len(row) != 2:
                raise PredictionError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                records.append(QueryRecord(Query(row[0].strip()), parse_contexts(row[1])))
            except ValueError as exc:
                raise PredictionError(f"{path}:{lineno}: {exc}") from None
    return records


@dataclass
class RuleSet:
    importance: list = field(default_factory=list)
    filters: list = field(default_factory=list)
    overrides: dict = field(default_factory=dict)

    def model(self, records) -> PredictionModel:
        return PredictionModel(records, self.importance, self.filters, self.overrides)


def load_rules(path: Union[str, os.PathLike]) -> RuleSet:
    """Parse a rules file.

    One `key = value` per line, `#` starts a comment::

        importance = location,2.0          # global weight for a context type
        importance = location,Q3,1.5       # weight for one query
        filter = Q2:weather;temperature    # ignore these types when scoring Q2
        override = location=Home;time=Evening -> Q4
    """
    rules = RuleSet()
    with open(path, encoding="utf8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = (s.strip() for s in line.partition("="))
            if not sep:
                raise PredictionError(f"{path}:{lineno}: expected 'key = value'")
            try:
                if key == "importance":
                    parts = [p.strip() for p in value.split(",")]
                    if len(parts) == 2:
                        rules.importance.append(ImportanceRule(parts[0], None, float(parts[1])))
                    elif len(parts) == 3:
                        rules.importance.append(ImportanceRule(parts[0], parts[1], float(parts[2])))
                    else:
                        raise ValueError("importance needs 'ctype[,qid],weight'")
                elif key == "filter":
                    qid, sep2, ctypes = value.partition(":")
                    if not sep2:
                        raise ValueError("filter needs 'qid:ctype1;ctype2'")
                    names = {c.strip() for c in ctypes.split(";") if c.strip()}
                    rules.filters.append(FilterRule(qid.strip(), names))
                elif key == "override":
                    ctx, sep2, qid = value.partition("->")
                    if not sep2 or not qid.strip():
                        raise ValueError("override needs 'ctype=value;... -> qid'")
                    rules.overrides[parse_contexts(ctx)] = Query(qid.strip())
                else:
                    raise ValueError(f"unknown key {key!r}")
            except ValueError as exc:
                raise PredictionError(f"{path}:{lineno}: {exc}") from None
    return rules
