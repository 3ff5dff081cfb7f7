"""
Deterministic discrete-event simulation of the discovery process models.

One requester looks for providers of a semantic type among `n_providers`
agents, a `matched_fraction` of which offer it. Four models are simulated:

pull
    The requester fetches SDM+OWL from every announced provider in turn,
    parses and matches each one itself, and trust-checks the matches.
push
    Providers react to the requester's announcement after a random delay,
    fetch its SDM and push their own SDM+OWL; the requester parses and
    matches every arrival.
prefpush
    Providers ask the requester for its preferred type, match it on their
    side, and only matching providers push their SDM. The requester only
    runs the trust check.
hybrid
    PrefPush for the providers that support it (they say so in their
    announcement), pull for the rest, sharing the requester's CPU.

Latency model: a message takes rtt/2 plus size/bandwidth; requester-side CPU
work (serving requests, parsing, matching, trust) runs serially in FIFO order
on one simulated core. The CPU proxy is the accumulated busy time, the RAM
proxy is the peak of retained metadata bytes. Invocation after the trust
check is not part of the makespan and is not simulated.
"""

from __future__ import annotations

import dataclasses
import enum
import heapq
import itertools
import os
from importlib import resources
from collections import deque
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from msnp.domain import (
    Ontology,
    SemanticType,
    ServiceDescription,
    default_ontology,
)


class SimError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    n_providers: int = 50
    matched_fraction: float = 0.2
    sdm_bytes: int = 6144
    owl_bytes: int = 12288
    rtt_ms: float = 20.0
    bandwidth_bytes_per_ms: float = 1000.0
    parse_ms_per_kb: float = 2.0
    match_ms: float = 4.0
    trust_ms: float = 10.0
    serve_ms: float = 1.0
    announce_window_ms: float = 5000.0
    arrival_interval_ms: float = 0.0
    arrivals_per_interval: int = 5
    cached_sdm_fraction: float = 0.0
    cached_links: int = 5
    discovery_timeout_ms: float = 600_000.0
    required_type: str = "Media"
    seed: int = 0

    def __post_init__(self):
        positive = ("rtt_ms", "bandwidth_bytes_per_ms", "parse_ms_per_kb", "match_ms",
                    "discovery_timeout_ms")
        for name in positive:
            if not getattr(self, name) > 0:
                raise SimError(f"{name} must be > 0")
        for name in ("trust_ms", "serve_ms", "announce_window_ms", "arrival_interval_ms",
                     "sdm_bytes", "owl_bytes", "n_providers"):
            if getattr(self, name) < 0:
                raise SimError(f"{name} must be >= 0")
        if not 0 < self.matched_fraction < 1:
            raise SimError("matched_fraction must be in (0, 1)")
        if not 0 <= self.cached_sdm_fraction <= 1:
            raise SimError("cached_sdm_fraction must be in [0, 1]")
        if self.arrivals_per_interval < 1 or self.cached_links < 0:
            raise SimError("arrivals_per_interval must be >= 1 and cached_links >= 0")

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def parse_ms(self, nbytes: int) -> float:
        return self.parse_ms_per_kb * nbytes / 1024

    def transfer_ms(self, nbytes: int) -> float:
        return self.rtt_ms / 2 + nbytes / self.bandwidth_bytes_per_ms


def load_sim_config(path: Union[str, os.PathLike], base: Optional[SimConfig] = None) -> SimConfig:
    """Read `key = value` lines (`#` comments) over the defaults."""
    base = base or SimConfig()
    types = {f.name: type(getattr(base, f.name)) for f in dataclasses.fields(SimConfig)}
    changes = {}
    with open(path, encoding="utf8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = (s.strip() for s in line.partition("="))
            if not sep or key not in types:
                raise SimError(f"{path}:{lineno}: unknown or malformed setting {line!r}")
            try:
                kind = types[key]
                if kind is int:
                    number = float(value)
                    if not number.is_integer():
                        raise ValueError
                    changes[key] = int(number)
                else:
                    changes[key] = kind(value)
            except ValueError:
                raise SimError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return base.replace(**changes)


def default_config_path():
    return resources.files("msnp") / "resources" / "default_sim.conf"


def default_sim_config() -> SimConfig:
    """The shipped, calibrated configuration."""
    with resources.as_file(default_config_path()) as path:
        return load_sim_config(path)


def save_sim_config(config: SimConfig, path: Union[str, os.PathLike]) -> None:
    with open(path, "w", encoding="utf8") as f:
        for key, value in config.as_dict().items():
            f.write(f"{key} = {value}\n")


def staggered_schedule(config: Optional[SimConfig] = None, seconds: int = 100, per_second: int = 5) -> SimConfig:
    """Providers joining in batches of `per_second` every second."""
    config = config or SimConfig()
    return config.replace(n_providers=seconds * per_second, arrival_interval_ms=1000.0,
                          arrivals_per_interval=per_second)


# ---------------------------------------------------------------------------
# Events and results
# ---------------------------------------------------------------------------

class EventKind(str, enum.Enum):
    ANNOUNCE = "Announce"
    FETCH_SDM = "FetchSdm"
    SDM_ARRIVED = "SdmArrived"
    MATCH_DONE = "MatchDone"
    ADVERTISE_PUSH = "AdvertisePush"
    PREF_REQUEST = "PrefRequest"
    PREF_REPLY = "PrefReply"
    TRUST_DONE = "TrustDone"
    INVOKE = "Invoke"


@dataclass(frozen=True)
class SimEvent:
    time_ms: float
    kind: EventKind
    src: str
    dst: str
    payload_bytes: int = 0


@dataclass(frozen=True)
class SimResult:
    model: str
    makespan_ms: float
    cpu_ms: float
    ram_bytes_peak: int
    messages: int
    discovered: frozenset
    matched: frozenset
    timed_out: bool = False
    events: int = 0

    def row(self) -> dict:
        return {
            "model": self.model,
            "makespan_ms": self.makespan_ms,
            "cpu_ms": self.cpu_ms,
            "ram_bytes_peak": self.ram_bytes_peak,
            "messages": self.messages,
            "n_discovered": len(self.discovered),
            "n_matched": len(self.matched),
            "timed_out": self.timed_out,
        }


@dataclass(frozen=True)
class Provider:
    pid: str
    description: ServiceDescription
    matched: bool
    arrival_ms: float
    react_ms: float
    prefpush: bool = True


REQUESTER = "requester"


def build_population(config: SimConfig, prefpush_fraction: float = 1.0,
                     ontology: Optional[Ontology] = None) -> list:
    """Providers with their offered types, arrival and reaction times.

    Each concern draws from its own child stream of the seed, so changing
    the PrefPush support fraction leaves the rest of the population intact.
    """
    if not 0 <= prefpush_fraction <= 1:
        raise SimError("prefpush support fraction must be in [0, 1]")
    ontology = ontology or default_ontology()
    required = config.required_type
    if required not in ontology:
        raise SimError(f"required type {required!r} is not in the ontology")
    matching = sorted(n for n in (t.name for t in ontology) if ontology.matches(required, n))
    other = sorted(n for n in (t.name for t in ontology)
                   if not ontology.matches(required, n) and not ontology.matches(n, required))
    if not other:
        raise SimError(f"ontology has no type unrelated to {required!r}")

    n = config.n_providers
    rng_pop, rng_react, rng_support, rng_cache = (
        np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(4))

    if config.arrival_interval_ms > 0:
        batches = [list(range(i, min(i + config.arrivals_per_interval, n)))
                   for i in range(0, n, config.arrivals_per_interval)]
    else:
        batches = [list(range(n))] if n else []
    matched = set()
    for batch in batches:
        k = max(1, int(len(batch) * config.matched_fraction + 0.5))
        matched.update(int(batch[j]) for j in rng_pop.permutation(len(batch))[:k])

    react = rng_react.uniform(0.0, config.announce_window_ms, size=n)
    support = rng_support.random(n) < prefpush_fraction
    cached = rng_cache.random(n) < config.cached_sdm_fraction
    offered = [matching[int(rng_pop.integers(len(matching)))] if i in matched
               else other[int(rng_pop.integers(len(other)))] for i in range(n)]

    providers = []
    width = max(3, len(str(n)))
    for i in range(n):
        pid = f"p{i:0{width}d}"
        arrival = (i // config.arrivals_per_interval) * config.arrival_interval_ms
        desc = ServiceDescription(
            pid, ((f"svc-{offered[i].lower()}", ontology.get(offered[i])),),
            sdm_bytes=config.sdm_bytes, owl_bytes=config.owl_bytes,
            cached_sdm_available=bool(cached[i]),
        )
        providers.append(Provider(pid, desc, desc.offers(required, ontology), float(arrival),
                                  float(arrival + react[i]), bool(support[i])))
    return providers


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------

class _Simulation:
    def __init__(self, config: SimConfig, providers: list, modes: dict, trace: bool = False):
        self.cfg = config
        self.providers = {p.pid: p for p in providers}
        self.order = [p.pid for p in sorted(providers, key=lambda p: (p.arrival_ms, p.pid))]
        self.modes = modes
        self._heap: list = []
        self._seq = itertools.count()
        self.now = 0.0
        self.cpu_free = 0.0
        self.cpu_ms = 0.0
        self.ram = 0
        self.ram_peak = 0
        self.messages = 0
        self.processed = 0
        self.discovered: dict = {}
        self.trace: Optional[list] = [] if trace else None
        # pull state
        self.pull_backlog: deque = deque()
        self.pull_seen: set = set()
        self.pull_busy = False
        self.pull_remaining = 0

    # -- primitives --------------------------------------------------------
    def at(self, t: float, kind: EventKind, src: str, dst: str, payload: int, handler, *args):
        if t < self.now:
            raise SimError("event scheduled in the past")
        heapq.heappush(self._heap, (t, next(self._seq), SimEvent(t, kind, src, dst, payload), handler, args))

    def send(self, kind: EventKind, src: str, dst: str, payload: int, handler, *args):
        self.messages += 1
        self.at(self.now + self.cfg.transfer_ms(payload), kind, src, dst, payload, handler, *args)

    def cpu(self, duration: float, kind: EventKind, src: str, handler, *args):
        start = max(self.now, self.cpu_free)
        self.cpu_free = start + duration
        self.cpu_ms += duration
        self.at(self.cpu_free, kind, src, REQUESTER, 0, handler, *args)

    def hold(self, nbytes: int):
        self.ram += nbytes
        self.ram_peak = max(self.ram_peak, self.ram)

    def run(self) -> bool:
        """Process events in time order; returns True if the timeout cut the run."""
        last = 0.0
        while self._heap:
            t, _, event, handler, args = self._heap[0]
            if t > self.cfg.discovery_timeout_ms:
                return True
            heapq.heappop(self._heap)
            if t < last:
                raise SimError("event queue went back in time")
            last = self.now = t
            self.processed += 1
            if self.trace is not None:
                self.trace.append(event)
            handler(event, *args)
        return False

    # -- shared requester steps -------------------------------------------
    def _trust(self, pid: str):
        self.cpu(self.cfg.trust_ms, EventKind.TRUST_DONE, pid, self._trusted, pid)

    def _trusted(self, event, pid):
        self.discovered[pid] = self.now

    # -- pull --------------------------------------------------------------
    def _announce(self, event, pid):
        self.pull_backlog.append(pid)
        self._pull_next()

    def _pull_next(self):
        if self.pull_busy:
            return
        while self.pull_backlog and self.pull_backlog[0] in self.pull_seen:
            self.pull_backlog.popleft()
        if not self.pull_backlog:
            return
        pid = self.pull_backlog.popleft()
        self.pull_seen.add(pid)
        self.pull_busy = True
        self.send(EventKind.FETCH_SDM, REQUESTER, pid, 0, self._pull_request, [pid])

    def _pull_request(self, event, pids):
        nbytes = sum(self.providers[p].description.total_bytes for p in pids)
        self.send(EventKind.SDM_ARRIVED, event.dst, REQUESTER, nbytes, self._pull_arrived, pids)

    def _pull_arrived(self, event, pids):
        self.pull_remaining = len(pids)
        for pid in pids:
            desc = self.providers[pid].description
            self.hold(desc.total_bytes)  # kept for the requester's own cached-SDM service
            cost = self.cfg.parse_ms(desc.total_bytes) + self.cfg.match_ms
            self.cpu(cost, EventKind.MATCH_DONE, pid, self._pull_matched, pid)

    def _pull_matched(self, event, pid):
        prov = self.providers[pid]
        if prov.matched:
            self._trust(pid)
        self.pull_remaining -= 1
        if self.pull_remaining:
            return
        self.pull_busy = False
        if prov.description.cached_sdm_available and self.cfg.cached_links:
            links = [p for p in self.order
                     if self.modes[p] == "pull" and p not in self.pull_seen
                     and self.providers[p].arrival_ms <= self.now][: self.cfg.cached_links]
            if links:
                self.pull_seen.update(links)
                self.pull_busy = True
                self.send(EventKind.FETCH_SDM, REQUESTER, pid, 0, self._pull_request, links)
                return
        self._pull_next()

    # -- push --------------------------------------------------------------
    def _push_start(self, event, pid):
        self.send(EventKind.FETCH_SDM, pid, REQUESTER, 0, self._push_serve, pid)

    def _push_serve(self, event, pid):
        self.cpu(self.cfg.serve_ms, EventKind.FETCH_SDM, pid, self._push_reply, pid)

    def _push_reply(self, event, pid):
        self.send(EventKind.SDM_ARRIVED, REQUESTER, pid, self.cfg.sdm_bytes, self._push_advertise, pid)

    def _push_advertise(self, event, pid):
        desc = self.providers[pid].description
        self.send(EventKind.ADVERTISE_PUSH, pid, REQUESTER, desc.total_bytes, self._push_arrived, pid)

    def _push_arrived(self, event, pid):
        desc = self.providers[pid].description
        self.hold(desc.total_bytes)
        cost = self.cfg.parse_ms(desc.total_bytes) + self.cfg.match_ms
        self.cpu(cost, EventKind.MATCH_DONE, pid, self._push_matched, pid)

    def _push_matched(self, event, pid):
        desc = self.providers[pid].description
        if self.providers[pid].matched:
            self.ram -= desc.owl_bytes
            self._trust(pid)
        else:
            self.ram -= desc.total_bytes

    # -- prefpush ------------------------------------------------------------
    def _pref_start(self, event, pid):
        self.send(EventKind.PREF_REQUEST, pid, REQUESTER, 0, self._pref_serve, pid)

    def _pref_serve(self, event, pid):
        self.cpu(self.cfg.serve_ms, EventKind.PREF_REQUEST, pid, self._pref_reply, pid)

    def _pref_reply(self, event, pid):
        self.send(EventKind.PREF_REPLY, REQUESTER, pid, self.cfg.sdm_bytes, self._pref_provider_match, pid)

    def _pref_provider_match(self, event, pid):
        # provider-side matchmaking runs on the provider, not on the requester
        self.at(self.now + self.cfg.match_ms, EventKind.MATCH_DONE, pid, pid, 0, self._pref_decide, pid)

    def _pref_decide(self, event, pid):
        if self.providers[pid].matched:
            self.send(EventKind.ADVERTISE_PUSH, pid, REQUESTER, self.cfg.sdm_bytes, self._pref_arrived, pid)

    def _pref_arrived(self, event, pid):
        self.hold(self.cfg.sdm_bytes)
        self._trust(pid)

    # -- driver --------------------------------------------------------------
    def start(self):
        starters = {"pull": self._announce, "push": self._push_start, "prefpush": self._pref_start}
        for pid in self.order:
            prov = self.providers[pid]
            mode = self.modes[pid]
            t = prov.arrival_ms if mode == "pull" else prov.react_ms
            self.at(t, EventKind.ANNOUNCE, pid, REQUESTER, 0, starters[mode], pid)


def _simulate(model: str, config: SimConfig, modes_for, prefpush_fraction: float = 1.0,
              ontology: Optional[Ontology] = None, trace: bool = False):
    providers = build_population(config, prefpush_fraction, ontology)
    modes = {p.pid: modes_for(p) for p in providers}
    sim = _Simulation(config, providers, modes, trace=trace)
    sim.start()
    timed_out = sim.run()
    matched = frozenset(p.pid for p in providers if p.matched)
    discovered = frozenset(sim.discovered)
    timed_out = timed_out and discovered != matched
    if timed_out:
        makespan = config.discovery_timeout_ms
    else:
        makespan = max(sim.discovered.values(), default=0.0)
    result = SimResult(model, float(makespan), float(sim.cpu_ms), int(sim.ram_peak), sim.messages,
                       discovered, matched, timed_out, sim.processed)
    return (result, sim.trace) if trace else result


def _required(config: SimConfig, stype) -> SimConfig:
    if stype is None:
        return config
    name = stype.name if isinstance(stype, SemanticType) else str(stype)
    return config.replace(required_type=name)


def run_pull(config: SimConfig, required_type=None, ontology: Optional[Ontology] = None,
             trace: bool = False):
    return _simulate("pull", _required(config, required_type), lambda p: "pull",
                     0.0, ontology, trace)


def run_push(config: SimConfig, required_type=None, ontology: Optional[Ontology] = None,
             trace: bool = False):
    return _simulate("push", _required(config, required_type), lambda p: "push",
                     1.0, ontology, trace)


def run_prefpush(config: SimConfig, predicted_type=None, ontology: Optional[Ontology] = None,
                 trace: bool = False):
    return _simulate("prefpush", _required(config, predicted_type), lambda p: "prefpush",
                     1.0, ontology, trace)


def run_hybrid(config: SimConfig, predicted_type=None, prefpush_support_fraction: float = 0.5,
               ontology: Optional[Ontology] = None, trace: bool = False):
    return _simulate("hybrid", _required(config, predicted_type),
                     lambda p: "prefpush" if p.prefpush else "pull",
                     prefpush_support_fraction, ontology, trace)


MODELS = {
    "pull": run_pull,
    "push": run_push,
    "prefpush": run_prefpush,
    "hybrid": run_hybrid,
}


def run_model(model: str, config: SimConfig, **kwargs) -> SimResult:
    try:
        runner = MODELS[model]
    except KeyError:
        raise SimError(f"unknown discovery model {model!r}; choose from {sorted(MODELS)}") from None
    return runner(config, **kwargs)
