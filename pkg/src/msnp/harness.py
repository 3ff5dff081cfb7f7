"""
Experiment orchestration: discovery sweeps, prediction accuracy curves and
the trust scheme comparison.

Every experiment returns an ExperimentReport whose rows have a fixed schema
per experiment label. Reports are pure functions of their inputs and seeds;
parallel execution only changes wall-clock time, never the rows.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from msnp.data import (
    GeneratorSpec,
    TrustGraph,
    classify_friends,
    filter_min_ratings,
    generate_records,
    single_stype_assignment,
    trust_graph_to_rds,
)
from msnp.domain import nearest_level
from msnp.predictor import evaluate_accuracy
from msnp.simnet import SimConfig, SimResult, run_model
from msnp.trust import (
    AVERAGING_SCHEMES,
    PUBLIC_SCHEMES,
    Scheme,
    TrustError,
    TrustVerdict,
    cpi,
    stype_experience,
    trust_af,
    trust_afoaf,
    trust_hef,
    trust_hefhef,
    trust_msf,
    trust_public,
)

ROW_FIELDS = {
    "discovery_sweep": ("n_providers", "model", "seeds", "makespan_ms", "makespan_std",
                        "cpu_ms", "ram_bytes_peak", "messages", "timed_out"),
    "discovery_runs": ("n_providers", "model", "seed", "makespan_ms", "cpu_ms",
                       "ram_bytes_peak", "messages", "n_discovered", "n_matched", "timed_out"),
    "prediction_curve": ("n_records", "training_fraction", "seeds", "accuracy_mean", "accuracy_std"),
    "trust_comparison": ("scheme", "comparable", "correct", "accuracy", "mean_transactions", "cpi"),
}


@dataclass
class ExperimentReport:
    experiment: str
    rows: list
    config_echo: dict = field(default_factory=dict)
    seed_list: tuple = ()
    raw_rows: list = field(default_factory=list)

    def __post_init__(self):
        fields = ROW_FIELDS[self.experiment]
        for row in self.rows:
            if tuple(row) != fields:
                raise ValueError(f"row {row} does not follow the {self.experiment} schema")

    @property
    def fields(self) -> tuple:
        return ROW_FIELDS[self.experiment]

    def write_csv(self, path: Union[str, os.PathLike], rows: Optional[list] = None,
                  fields: Optional[Sequence[str]] = None) -> None:
        """CSV with the config echo as leading `# key = value` lines."""
        rows = self.rows if rows is None else rows
        fields = self.fields if fields is None else fields
        with open(path, "w", newline="", encoding="utf8") as f:
            f.write(f"# experiment = {self.experiment}\n")
            for key, value in self.config_echo.items():
                f.write(f"# {key} = {_fmt(value)}\n")
            f.write(f"# seeds = {','.join(str(s) for s in self.seed_list)}\n")
            w = csv.writer(f, lineterminator="\n")
            w.writerow(fields)
            for row in rows:
                w.writerow([_fmt(row[k]) for k in fields])

    def to_json(self) -> str:
        doc = {
            "experiment": self.experiment,
            "config": self.config_echo,
            "seeds": list(self.seed_list),
            "rows": self.rows,
        }
        return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False, default=str) + "\n"

    def write_json(self, path: Union[str, os.PathLike]) -> None:
        with open(path, "w", encoding="utf8") as f:
            f.write(self.to_json())

    def table(self) -> str:
        """Fixed-width text rendering for terminals."""
        cells = [list(self.fields)] + [[_fmt(r[k]) for k in self.fields] for r in self.rows]
        widths = [max(len(row[i]) for row in cells) for i in range(len(self.fields))]
        return "\n".join("  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells) + "\n"


def _fmt(value) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("MSNP_SIM_THREADS", "1")))
    except ValueError:
        return 1


def _run_cell(args) -> SimResult:
    model, config, hybrid_fraction = args
    if model == "hybrid":
        return run_model(model, config, prefpush_support_fraction=hybrid_fraction)
    return run_model(model, config)


# ---------------------------------------------------------------------------
# Discovery sweep
# ---------------------------------------------------------------------------

def exp_discovery_sweep(config_base: SimConfig, n_values: Sequence[int], models: Sequence[str],
                        seeds: Sequence[int] = tuple(range(10)),
                        hybrid_fraction: float = 0.5) -> ExperimentReport:
    """Mean makespan and resource proxies for every (n, model) cell.

    Per-seed results are kept in `raw_rows`. Cells run in a process pool
    when MSNP_SIM_THREADS > 1; the reduction order is fixed.
    """
    if not n_values:
        raise ValueError("n_values must not be empty")
    if not models or not seeds:
        raise ValueError("models and seeds must not be empty")
    cells = [(n, m, s) for n in n_values for m in models for s in seeds]
    jobs = [(m, config_base.replace(n_providers=int(n), seed=int(s)), hybrid_fraction)
            for n, m, s in cells]
    workers = _workers()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]

    raw = []
    for (n, m, s), res in zip(cells, results):
        r = res.row()
        raw.append({"n_providers": int(n), "model": m, "seed": int(s),
                    **{k: r[k] for k in ROW_FIELDS["discovery_runs"][3:]}})
    rows = []
    for n in n_values:
        for m in models:
            group = [r for r in raw if r["n_providers"] == n and r["model"] == m]
            span = np.array([r["makespan_ms"] for r in group])
            rows.append({
                "n_providers": int(n),
                "model": m,
                "seeds": len(group),
                "makespan_ms": float(span.mean()),
                "makespan_std": float(span.std()),
                "cpu_ms": float(np.mean([r["cpu_ms"] for r in group])),
                "ram_bytes_peak": float(np.mean([r["ram_bytes_peak"] for r in group])),
                "messages": float(np.mean([r["messages"] for r in group])),
                "timed_out": sum(r["timed_out"] for r in group),
            })
    echo = {k: v for k, v in config_base.as_dict().items() if k not in ("n_providers", "seed")}
    echo.update(n_values=",".join(str(n) for n in n_values), models=",".join(models))
    if "hybrid" in models:
        echo["hybrid_fraction"] = hybrid_fraction
    return ExperimentReport("discovery_sweep", rows, echo, tuple(int(s) for s in seeds), raw)


def best_model_per_n(report: ExperimentReport) -> dict:
    """n -> model with the lowest mean makespan (ties by model name)."""
    best = {}
    for row in report.rows:
        key = (row["makespan_ms"], row["model"])
        n = row["n_providers"]
        if n not in best or key < best[n]:
            best[n] = key
    return {n: m for n, (_, m) in best.items()}


# ---------------------------------------------------------------------------
# Prediction curves
# ---------------------------------------------------------------------------

RecordsSource = Union[GeneratorSpec, Sequence, Callable[[int, int], list]]


def exp_prediction_curve(records_source: RecordsSource, training_fractions: Sequence[float],
                         seeds: Sequence[int], n_values: Optional[Sequence[int]] = None,
                         **model_kwargs) -> ExperimentReport:
    """Mean and standard deviation of top-1 accuracy per (record count, fraction).

    `records_source` is a generator spec (records drawn per seed), a callable
    `(n, seed) -> records`, or a fixed record list (seeds then only repeat
    the same split).
    """
    fractions = [float(f) for f in training_fractions]
    if not fractions or any(not 0 < f < 1 for f in fractions):
        raise ValueError("training fractions must lie in (0, 1)")
    if not seeds:
        raise ValueError("need at least one seed")
    if isinstance(records_source, GeneratorSpec):
        spec = records_source
        draw = lambda n, s: generate_records(spec, n, s)
        n_values = list(n_values or [100])
        label = "generator"
    elif callable(records_source):
        draw = records_source
        n_values = list(n_values or [100])
        label = "callable"
    else:
        fixed = list(records_source)
        draw = lambda n, s: fixed
        n_values = [len(fixed)]
        label = "fixed"

    rows = []
    for n in n_values:
        datasets = [draw(n, s) for s in seeds]
        for f in fractions:
            acc = np.array([evaluate_accuracy(d, f, **model_kwargs) for d in datasets])
            rows.append({
                "n_records": int(n),
                "training_fraction": f,
                "seeds": len(acc),
                "accuracy_mean": float(acc.mean()),
                "accuracy_std": float(acc.std()),
            })
    echo = {"source": label, "n_values": ",".join(str(n) for n in n_values),
            "fractions": ",".join(f"{f:g}" for f in fractions)}
    return ExperimentReport("prediction_curve", rows, echo, tuple(int(s) for s in seeds))


# ---------------------------------------------------------------------------
# Trust scheme comparison
# ---------------------------------------------------------------------------

@dataclass
class _Tally:
    comparable: int = 0
    correct: int = 0
    transactions: int = 0


class TransactionInvariantError(AssertionError):
    pass


def _check(ok: bool, scheme: Scheme, verdict: TrustVerdict, expected: int):
    if not ok:
        raise TransactionInvariantError(
            f"{scheme}: reported {verdict.transactions} transactions, expected {expected}")


def exp_trust_comparison(graph: TrustGraph, schemes: Sequence[Union[Scheme, str]] = tuple(Scheme),
                         min_ratings: int = 10, stype_assignment=None) -> ExperimentReport:
    """Predict every requester's recorded rating of each non-friend with each scheme.

    The requester's own rating of the target is withheld. Pairs where a
    scheme has no recommender are incomparable for that scheme and left out
    of its row. Averaging schemes are snapped to the nearest rating level
    before the exact-match comparison.
    """
    schemes = [Scheme(s) for s in schemes]
    g = filter_min_ratings(graph, min_ratings)
    if not len(g):
        raise ValueError("graph is empty after filtering")
    friends = classify_friends(g)
    assignment = stype_assignment or single_stype_assignment(g)
    rds = {rd.owner: rd for rd in trust_graph_to_rds(g, assignment, friends)}
    friend_lists = {u: [rds[f] for f in sorted(friends[u][0]) if f in rds] for u in rds}

    def fetch(peer):
        return friend_lists.get(peer, [])

    tallies = {s: _Tally() for s in schemes}
    for u in sorted(rds):
        own_friends = friend_lists[u]
        non_friends = sorted(v for v in friends[u][1])
        for v in non_friends:
            actual = g.level(u, v)
            sname, stype = assignment[v]
            requester_rd = rds[u].without(v)
            proximal = [rds[x] for x in non_friends if x != v and x in rds]
            for scheme in schemes:
                try:
                    verdict = _evaluate(scheme, u, v, sname, stype, requester_rd,
                                        own_friends, fetch, proximal)
                except TrustError:
                    continue
                _check_transactions(scheme, verdict, own_friends, fetch, proximal, stype)
                score = verdict.score
                if scheme in AVERAGING_SCHEMES:
                    score = nearest_level(score)
                t = tallies[scheme]
                t.comparable += 1
                t.correct += abs(score - actual) < 1e-9
                t.transactions += verdict.transactions

    rows = []
    for scheme in schemes:
        t = tallies[scheme]
        if t.comparable == 0:
            rows.append({"scheme": scheme.value, "comparable": 0, "correct": 0,
                         "accuracy": None, "mean_transactions": None, "cpi": None})
            continue
        acc = t.correct / t.comparable
        mean_tx = t.transactions / t.comparable
        rows.append({
            "scheme": scheme.value,
            "comparable": t.comparable,
            "correct": t.correct,
            "accuracy": acc,
            "mean_transactions": mean_tx,
            "cpi": cpi(acc, mean_tx) if mean_tx >= 1 else None,
        })
    echo = {"min_ratings": min_ratings, "raters": len(rds), "edges": len(g),
            "schemes": ",".join(s.value for s in schemes)}
    return ExperimentReport("trust_comparison", rows, echo, ())


def _evaluate(scheme, u, v, sname, stype, requester_rd, own_friends, fetch, proximal) -> TrustVerdict:
    if scheme is Scheme.AF:
        return trust_af(u, v, sname, own_friends)
    if scheme is Scheme.AFOAF:
        return trust_afoaf(u, v, sname, own_friends, fetch)
    if scheme is Scheme.HEF:
        return trust_hef(u, v, sname, stype, own_friends, requester_rd=requester_rd)
    if scheme is Scheme.HEFHEF:
        return trust_hefhef(u, v, sname, stype, own_friends, fetch)
    if scheme is Scheme.MSF:
        return trust_msf(requester_rd, v, sname, own_friends)
    return trust_public(u, v, sname, stype, proximal, scheme)


def _check_transactions(scheme, verdict, own_friends, fetch, proximal, stype):
    if scheme in (Scheme.HEF, Scheme.MSF):
        _check(verdict.transactions == 1, scheme, verdict, 1)
    elif scheme is Scheme.AF:
        _check(verdict.transactions == len(own_friends), scheme, verdict, len(own_friends))
    elif scheme is Scheme.AFOAF:
        expected = sum(len(fetch(f.owner)) for f in own_friends)
        _check(verdict.transactions == expected, scheme, verdict, expected)
    elif scheme is Scheme.HEFHEF:
        hef = min(own_friends, key=lambda rd: (-stype_experience(rd, stype), rd.owner))
        expected = len(fetch(hef.owner))
        _check(verdict.transactions == expected, scheme, verdict, expected)
    elif scheme in PUBLIC_SCHEMES:
        _check(verdict.transactions == len(proximal), scheme, verdict, len(proximal))


def accuracy_of(report: ExperimentReport, scheme: Union[Scheme, str]) -> Optional[float]:
    name = Scheme(scheme).value
    for row in report.rows:
        if row["scheme"] == name:
            return row["accuracy"]
    raise KeyError(name)


def parse_seeds(text: str) -> tuple:
    """`"5"` means seeds 0..4; `"3,7,11"` lists them explicitly."""
    text = text.strip()
    if "," in text:
        seeds = tuple(int(s) for s in text.split(",") if s.strip())
    else:
        count = int(text)
        if count < 1:
            raise ValueError("seed count must be >= 1")
        seeds = tuple(range(count))
    if not seeds:
        raise ValueError("no seeds given")
    return seeds
