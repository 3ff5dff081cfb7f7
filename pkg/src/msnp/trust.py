"""
Reputation data and trustworthy-recommender selection.

A participant's reputation data (RD) holds the ratings it gave to providers,
the peers it recommends per service type, and its interaction log. From a
set of RDs the requester picks recommenders:

* friend schemes: all friends (AF), all friends-of-friends (AFOAF), the
  highest-experience friend (HEF), that friend's most experienced friend
  (HEFHEF) and the most similar friend (MSF);
* public schemes over proximal strangers: plain average (naive), most
  experienced (exp_only), most credible (credit_only) and the combined
  credibility/experience score (proposed).

Every verdict carries the number of runtime RD fetches it needed. Friend RDs
replicated ahead of time are free; only up-to-date fetches are counted.
"""

from __future__ import annotations

import enum
import json
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from msnp.domain import PeerId, check_peer_id, rating_level


class TrustError(ValueError):
    pass


class NoRecommender(TrustError):
    """Nobody eligible has rated the provider's service."""


class FallThrough(NoRecommender):
    """A friend-based stage found no recommender; try the next stage.

    `transactions` records the fetches already spent by the failed stage.
    """

    def __init__(self, msg: str, transactions: int = 0):
        super().__init__(msg)
        self.transactions = transactions


class InsufficientOverlap(TrustError):
    pass


class UndefinedCorrelation(TrustError):
    pass


class Scheme(str, enum.Enum):
    AF = "af"
    AFOAF = "afoaf"
    HEF = "hef"
    HEFHEF = "hefhef"
    MSF = "msf"
    NAIVE = "naive"
    EXP_ONLY = "exp_only"
    CREDIT_ONLY = "credit_only"
    PROPOSED = "proposed"

    def __str__(self):
        return self.value


FRIEND_SCHEMES = (Scheme.AF, Scheme.AFOAF, Scheme.HEF, Scheme.HEFHEF, Scheme.MSF)
PUBLIC_SCHEMES = (Scheme.PROPOSED, Scheme.NAIVE, Scheme.EXP_ONLY, Scheme.CREDIT_ONLY)
AVERAGING_SCHEMES = (Scheme.AF, Scheme.AFOAF, Scheme.NAIVE)


def _stype(t) -> str:
    return getattr(t, "name", t)


# ---------------------------------------------------------------------------
# Reputation data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InteractionRecord:
    provider: PeerId
    sname: str
    stype: str
    timestamp: int = 0

    def __post_init__(self):
        object.__setattr__(self, "stype", _stype(self.stype))
        if self.timestamp < 0:
            raise ValueError("timestamp must be >= 0")

    def to_dict(self) -> dict:
        return {"provider": self.provider, "sname": self.sname,
                "stype": self.stype, "timestamp": self.timestamp}

    @classmethod
    def from_dict(cls, d: dict) -> "InteractionRecord":
        return cls(d["provider"], d["sname"], d["stype"], int(d.get("timestamp", 0)))


@dataclass(frozen=True)
class Rate:
    sname: str
    stype: str
    rate: float

    def __post_init__(self):
        object.__setattr__(self, "stype", _stype(self.stype))
        object.__setattr__(self, "rate", rating_level(self.rate))


@dataclass(frozen=True)
class ProviderRating:
    provider: PeerId
    rates: tuple

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(self.rates))


@dataclass(frozen=True)
class RecommendedReference:
    stype: str
    ids: frozenset

    def __post_init__(self):
        object.__setattr__(self, "stype", _stype(self.stype))
        object.__setattr__(self, "ids", frozenset(self.ids))
        if not self.ids:
            raise ValueError(f"empty recommended reference for {self.stype}")


@dataclass(frozen=True)
class ReputationData:
    owner: PeerId
    spr: tuple = ()
    rr: tuple = ()
    ir: tuple = ()

    def __post_init__(self):
        check_peer_id(self.owner)
        for name in ("spr", "rr", "ir"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        seen = set()
        for pr in self.spr:
            for r in pr.rates:
                if (pr.provider, r.sname) in seen:
                    raise ValueError(f"{self.owner}: duplicate rating of {pr.provider}/{r.sname}")
                seen.add((pr.provider, r.sname))
        stypes = [ref.stype for ref in self.rr]
        if len(stypes) != len(set(stypes)):
            raise ValueError(f"{self.owner}: more than one RR entry per service type")
        used = {ir.provider for ir in self.ir}
        for pr in self.spr:
            if pr.provider not in used:
                raise ValueError(f"{self.owner} rated {pr.provider} without an interaction record")

    @cached_property
    def ratings(self) -> dict:
        """(provider, sname) -> rate"""
        return {(pr.provider, r.sname): r.rate for pr in self.spr for r in pr.rates}

    @cached_property
    def _by_provider(self) -> dict:
        out: dict = {}
        for (provider, sname), rate in self.ratings.items():
            out.setdefault(provider, {})[sname] = rate
        return out

    @cached_property
    def _rr(self) -> dict:
        return {ref.stype: ref.ids for ref in self.rr}

    def rating(self, provider: PeerId, sname: Optional[str] = None) -> Optional[float]:
        if sname is not None:
            return self.ratings.get((provider, sname))
        rates = self._by_provider.get(provider)
        if not rates:
            return None
        return rates[min(rates)]

    def has_rated(self, provider: PeerId, sname: Optional[str] = None) -> bool:
        return self.rating(provider, sname) is not None

    def rating_count(self) -> int:
        return len(self.ratings)

    def recommended(self, stype) -> frozenset:
        return self._rr.get(_stype(stype), frozenset())

    def without(self, provider: PeerId) -> "ReputationData":
        """Copy with every rating of and interaction with `provider` removed."""
        spr = [pr for pr in self.spr if pr.provider != provider]
        ir = [r for r in self.ir if r.provider != provider]
        return ReputationData(self.owner, spr, self.rr, ir)

    def to_dict(self) -> dict:
        return {
            "owner": self.owner,
            "spr": [
                {"provider": pr.provider,
                 "rates": [{"sname": r.sname, "stype": r.stype, "rate": r.rate} for r in pr.rates]}
                for pr in self.spr
            ],
            "rr": [{"stype": ref.stype, "ids": sorted(ref.ids)} for ref in self.rr],
            "ir": [r.to_dict() for r in self.ir],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReputationData":
        missing = {"owner", "spr", "rr", "ir"} - set(d)
        if missing:
            raise TrustError(f"RD is missing keys {sorted(missing)}")
        spr = [
            ProviderRating(p["provider"], [Rate(r["sname"], r["stype"], r["rate"]) for r in p["rates"]])
            for p in d["spr"]
        ]
        rr = [RecommendedReference(e["stype"], e["ids"]) for e in d["rr"]]
        ir = [InteractionRecord.from_dict(e) for e in d["ir"]]
        return cls(d["owner"], spr, rr, ir)


def load_rd(path: Union[str, os.PathLike]) -> ReputationData:
    with open(path, encoding="utf8") as f:
        return ReputationData.from_dict(json.load(f))


def save_rd(rd: ReputationData, path: Union[str, os.PathLike]) -> None:
    with open(path, "w", encoding="utf8") as f:
        json.dump(rd.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


@dataclass(frozen=True)
class PscList:
    """Consumers a provider says it has served, with their interaction logs."""

    provider: PeerId
    entries: tuple = ()  # ((cid, (InteractionRecord, ...)), ...)

    def __post_init__(self):
        entries = tuple((cid, tuple(irs)) for cid, irs in self.entries)
        cids = [cid for cid, _ in entries]
        if len(cids) != len(set(cids)):
            raise ValueError(f"duplicate consumer ids in PSC of {self.provider}")
        object.__setattr__(self, "entries", entries)

    @property
    def cids(self) -> frozenset:
        return frozenset(cid for cid, _ in self.entries)

    def to_list(self) -> list:
        return [{"cid": cid, "interactions": [r.to_dict() for r in irs]} for cid, irs in self.entries]


def load_psc(path: Union[str, os.PathLike], provider: PeerId) -> PscList:
    with open(path, encoding="utf8") as f:
        data = json.load(f)
    if not isinstance(data, list):
        raise TrustError(f"{path}: PSC file must hold a JSON list")
    entries = [(e["cid"], [InteractionRecord.from_dict(r) for r in e.get("interactions", [])])
               for e in data]
    return PscList(provider, entries)


def save_psc(psc: PscList, path: Union[str, os.PathLike]) -> None:
    with open(path, "w", encoding="utf8") as f:
        json.dump(psc.to_list(), f, indent=2)
        f.write("\n")


@dataclass(frozen=True)
class TrustVerdict:
    score: float
    recommenders: tuple
    transactions: int
    scheme: Scheme

    def __post_init__(self):
        object.__setattr__(self, "recommenders", tuple(self.recommenders))
        if self.transactions < 0:
            raise ValueError("transactions must be >= 0")


# ---------------------------------------------------------------------------
# Similarity and plausibility
# ---------------------------------------------------------------------------

def rating_similarity(a: ReputationData, b: ReputationData) -> float:
    """Pearson-style correlation of two raters over the services both rated.

    Deviations are taken from each rater's mean over *all* of its ratings,
    not only the common ones.
    """
    ra, rb = a.ratings, b.ratings
    common = sorted(ra.keys() & rb.keys())
    if len(common) < 2:
        raise InsufficientOverlap(f"{a.owner} and {b.owner} share {len(common)} rated services")
    mean_a = math.fsum(ra.values()) / len(ra)
    mean_b = math.fsum(rb.values()) / len(rb)
    da = [ra[s] - mean_a for s in common]
    db = [rb[s] - mean_b for s in common]
    ssa = math.fsum(x * x for x in da)
    ssb = math.fsum(y * y for y in db)
    if ssa < 1e-15 or ssb < 1e-15:
        raise UndefinedCorrelation(f"constant ratings between {a.owner} and {b.owner}")
    r = math.fsum(x * y for x, y in zip(da, db)) / math.sqrt(ssa * ssb)
    return max(-1.0, min(1.0, r))


class PscPlausibility(str, enum.Enum):
    USABLE = "usable"
    SUSPICIOUS = "suspicious"
    NEW_PARTICIPANT = "new_participant"


def check_psc_plausibility(
    psc: Optional[PscList],
    provider: PeerId,
    friends: Iterable[PeerId],
    known_rds: Sequence[ReputationData],
    stype=None,
    high_credibility: Optional[Iterable[PeerId]] = None,
    quantile: float = 0.75,
) -> PscPlausibility:
    """Decide whether a provider's consumer list can be relied on.

    With no list, a provider that appears anywhere in the known RDs has a
    history it is hiding. A list is only usable if it names a friend or a
    highly credible stranger; by default those are strangers whose
    credibility for `stype` is positive and at least the `quantile` of the
    known population.
    """
    if psc is None:
        seen = any(rd.has_rated(provider) for rd in known_rds if rd.owner != provider)
        own = [rd for rd in known_rds if rd.owner == provider]
        if seen or any(rd.ir for rd in own):
            return PscPlausibility.SUSPICIOUS
        return PscPlausibility.NEW_PARTICIPANT

    friends = set(friends)
    if psc.cids & friends:
        return PscPlausibility.USABLE
    if high_credibility is None:
        high_credibility = set()
        if stype is not None:
            strangers = [rd for rd in known_rds if rd.owner not in friends and rd.owner != provider]
            if strangers:
                cr = {rd.owner: credibility(rd.owner, stype, [o for o in known_rds if o.owner != rd.owner])
                      for rd in strangers}
                cut = float(np.quantile(list(cr.values()), quantile))
                high_credibility = {p for p, v in cr.items() if v > 0 and v >= cut}
    if psc.cids & set(high_credibility):
        return PscPlausibility.USABLE
    return PscPlausibility.SUSPICIOUS


def dishonesty_flag(provider_psc: PscList, rater_rd: ReputationData, provider: PeerId) -> bool:
    """Rater claims to have rated the provider but the provider never listed it."""
    return rater_rd.has_rated(provider) and rater_rd.owner not in provider_psc.cids


# ---------------------------------------------------------------------------
# Friend schemes
# ---------------------------------------------------------------------------

def _mean(values) -> float:
    values = list(values)
    return math.fsum(values) / len(values)


def _raters(rds, provider, sname, exclude=()):
    return [rd for rd in rds if rd.owner not in exclude and rd.has_rated(provider, sname)]


def trust_af(requester: PeerId, provider: PeerId, sname: Optional[str],
             friends_rd: Sequence[ReputationData]) -> TrustVerdict:
    raters = _raters(friends_rd, provider, sname, exclude={requester, provider})
    if not raters:
        raise NoRecommender(f"no friend of {requester} rated {provider}")
    return TrustVerdict(
        _mean(rd.rating(provider, sname) for rd in raters),
        sorted(rd.owner for rd in raters),
        len(friends_rd),
        Scheme.AF,
    )


FoafFetcher = Callable[[PeerId], Sequence[ReputationData]]


def trust_afoaf(requester: PeerId, provider: PeerId, sname: Optional[str],
                friends_rd: Sequence[ReputationData], foaf_rd_fetcher: FoafFetcher) -> TrustVerdict:
    fetched = 0
    foaf: dict = {}
    for friend in friends_rd:
        rds = foaf_rd_fetcher(friend.owner)
        fetched += len(rds)
        for rd in rds:
            foaf.setdefault(rd.owner, rd)
    raters = _raters(foaf.values(), provider, sname, exclude={requester, provider})
    if not raters:
        raise NoRecommender(f"no friend-of-friend of {requester} rated {provider}")
    return TrustVerdict(
        _mean(rd.rating(provider, sname) for rd in raters),
        sorted(rd.owner for rd in raters),
        fetched,
        Scheme.AFOAF,
    )


def trust_hef(requester: PeerId, provider: PeerId, sname: Optional[str], stype,
              friends_rd_replicated: Sequence[ReputationData],
              psc: Optional[PscList] = None,
              requester_rd: Optional[ReputationData] = None) -> TrustVerdict:
    """Single most experienced friend who has used the provider.

    Friends with experience come from the provider's consumer list when one
    is given, otherwise from the replicated friend RDs. If the requester has
    recommended references for `stype`, only those friends qualify. Raises
    FallThrough when nobody is left.
    """
    mfid = _raters(friends_rd_replicated, provider, sname, exclude={requester, provider})
    if psc is not None:
        mfid = [rd for rd in mfid if rd.owner in psc.cids]
    if requester_rd is not None and requester_rd.recommended(stype):
        refs = requester_rd.recommended(stype)
        mfid = [rd for rd in mfid if rd.owner in refs]
    if not mfid:
        raise FallThrough(f"no experienced friend of {requester} for {provider}")
    best = min(mfid, key=lambda rd: (-rd.rating_count(), rd.owner))
    return TrustVerdict(best.rating(provider, sname), [best.owner], 1, Scheme.HEF)


def trust_hefhef(requester: PeerId, provider: PeerId, sname: Optional[str], stype,
                 friends_rd_replicated: Sequence[ReputationData],
                 foaf_rd_fetcher: FoafFetcher) -> TrustVerdict:
    """Most experienced friend of the requester's most experienced friend."""
    friends = [rd for rd in friends_rd_replicated if rd.owner != requester]
    if not friends:
        raise FallThrough(f"{requester} has no friends")
    hef = min(friends, key=lambda rd: (-stype_experience(rd, stype), rd.owner))
    fetched = list(foaf_rd_fetcher(hef.owner))
    candidates = _raters(fetched, provider, sname, exclude={requester, provider})
    if not candidates:
        raise FallThrough(f"no friend of {hef.owner} rated {provider}", transactions=len(fetched))
    best = min(candidates, key=lambda rd: (-stype_experience(rd, stype), rd.owner))
    return TrustVerdict(best.rating(provider, sname), [best.owner], len(fetched), Scheme.HEFHEF)


def trust_msf(requester_rd: ReputationData, provider: PeerId, sname: Optional[str],
              friends_rd_replicated: Sequence[ReputationData]) -> TrustVerdict:
    scored = []
    for rd in _raters(friends_rd_replicated, provider, sname,
                      exclude={requester_rd.owner, provider}):
        try:
            scored.append((rating_similarity(requester_rd, rd), rd))
        except (InsufficientOverlap, UndefinedCorrelation):
            continue
    if not scored:
        raise NoRecommender(f"no comparable friend of {requester_rd.owner} rated {provider}")
    sim, best = min(scored, key=lambda item: (-item[0], item[1].owner))
    return TrustVerdict(best.rating(provider, sname), [best.owner], 1, Scheme.MSF)


# ---------------------------------------------------------------------------
# Public schemes
# ---------------------------------------------------------------------------

def credibility(p: PeerId, stype, crrd: Sequence[ReputationData]) -> int:
    """Number of other peers listing `p` in their references for `stype`."""
    if any(rd.owner == p for rd in crrd):
        raise ValueError(f"credibility of {p} must be computed without its own RD")
    return sum(1 for rd in crrd if p in rd.recommended(stype))


def stype_experience(p_rd: ReputationData, stype) -> int:
    name = _stype(stype)
    return sum(1 for ir in p_rd.ir if ir.stype == name)


def _credibilities(candidates: Sequence[ReputationData], stype) -> dict:
    name = _stype(stype)
    counts = {rd.owner: 0 for rd in candidates}
    for rd in candidates:
        for pid in rd.recommended(name):
            if pid in counts and pid != rd.owner:
                counts[pid] += 1
    return counts


def trust_scores(candidates: Sequence[ReputationData], stype) -> dict:
    """Recommender trust of every candidate: mean of normalised credibility
    and normalised experience, a term being 0 when its population sum is 0."""
    cr = _credibilities(candidates, stype)
    ex = {rd.owner: stype_experience(rd, stype) for rd in candidates}
    cr_sum, ex_sum = sum(cr.values()), sum(ex.values())
    out = {}
    for pid in cr:
        a = cr[pid] / cr_sum if cr_sum else 0.0
        b = ex[pid] / ex_sum if ex_sum else 0.0
        out[pid] = (a + b) / 2
    return out


def recommender_trust_score(phi: PeerId, candidates: Sequence[ReputationData], stype) -> float:
    scores = trust_scores(candidates, stype)
    if phi not in scores:
        raise ValueError(f"{phi} is not among the candidates")
    return scores[phi]


def trust_public(requester: PeerId, provider: PeerId, sname: Optional[str], stype,
                 proximal_rds: Sequence[ReputationData],
                 scheme: Union[Scheme, str] = Scheme.PROPOSED) -> TrustVerdict:
    scheme = Scheme(scheme)
    if scheme not in PUBLIC_SCHEMES:
        raise ValueError(f"{scheme} is not a public scheme")
    for rd in proximal_rds:
        if rd.owner in (provider, requester):
            raise ValueError(f"proximal RDs must exclude the provider and requester ({rd.owner})")
    mpr = _raters(proximal_rds, provider, sname)
    if not mpr:
        raise NoRecommender(f"no proximal peer rated {provider}")
    n = len(proximal_rds)
    if scheme is Scheme.NAIVE:
        return TrustVerdict(_mean(rd.rating(provider, sname) for rd in mpr),
                            sorted(rd.owner for rd in mpr), n, scheme)
    if scheme is Scheme.EXP_ONLY:
        key = {rd.owner: stype_experience(rd, stype) for rd in mpr}
    elif scheme is Scheme.CREDIT_ONLY:
        cr = _credibilities(proximal_rds, stype)
        key = {rd.owner: cr[rd.owner] for rd in mpr}
    else:
        tr = trust_scores(proximal_rds, stype)
        key = {rd.owner: tr[rd.owner] for rd in mpr}
    best = min(mpr, key=lambda rd: (-key[rd.owner], rd.owner))
    return TrustVerdict(best.rating(provider, sname), [best.owner], n, scheme)


# ---------------------------------------------------------------------------
# Full selection chain
# ---------------------------------------------------------------------------

def resolve_trust(requester_rd: ReputationData, provider: PeerId, sname: Optional[str], stype,
                  friends_rd_replicated: Sequence[ReputationData],
                  foaf_rd_fetcher: FoafFetcher,
                  proximal_rds: Sequence[ReputationData],
                  psc: Optional[PscList] = None,
                  public_scheme: Union[Scheme, str] = Scheme.PROPOSED) -> TrustVerdict:
    """Experienced friend, then friend-of-friend, then the public."""
    requester = requester_rd.owner
    try:
        return trust_hef(requester, provider, sname, stype, friends_rd_replicated, psc, requester_rd)
    except FallThrough:
        pass
    try:
        return trust_hefhef(requester, provider, sname, stype, friends_rd_replicated, foaf_rd_fetcher)
    except FallThrough:
        pass
    return trust_public(requester, provider, sname, stype, proximal_rds, public_scheme)


def cpi(accuracy: float, transactions: float) -> float:
    """Cost-performance index: accuracy per runtime transaction."""
    if transactions < 1:
        raise ValueError("cpi needs at least one transaction")
    return accuracy / transactions
