import collections

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msnp.simnet import (
    EventKind,
    SimConfig,
    SimError,
    build_population,
    default_sim_config,
    load_sim_config,
    run_hybrid,
    run_model,
    run_prefpush,
    run_pull,
    run_push,
    save_sim_config,
    staggered_schedule,
)

BASE = SimConfig()
DOC = BASE.sdm_bytes + BASE.owl_bytes


def one_provider(**kw):
    return BASE.replace(n_providers=1, trust_ms=0.0, **kw)


def test_pull_single_provider_latency():
    cfg = one_provider()
    r = run_pull(cfg)
    expected = cfg.rtt_ms + DOC / cfg.bandwidth_bytes_per_ms + cfg.parse_ms(DOC) + cfg.match_ms
    assert r.makespan_ms == pytest.approx(expected, abs=1e-9)
    assert r.discovered == r.matched and len(r.matched) == 1


def test_push_single_provider_latency():
    cfg = one_provider(announce_window_ms=0.0, serve_ms=0.0)
    r = run_push(cfg)
    fetch = cfg.rtt_ms + cfg.sdm_bytes / cfg.bandwidth_bytes_per_ms
    push = cfg.rtt_ms / 2 + DOC / cfg.bandwidth_bytes_per_ms
    assert r.makespan_ms == pytest.approx(fetch + push + cfg.parse_ms(DOC) + cfg.match_ms, abs=1e-9)


def test_prefpush_single_provider_latency():
    cfg = BASE.replace(n_providers=1, announce_window_ms=0.0, serve_ms=0.0)
    r = run_prefpush(cfg, "Media")
    pref = cfg.rtt_ms + cfg.sdm_bytes / cfg.bandwidth_bytes_per_ms
    push = cfg.rtt_ms / 2 + cfg.sdm_bytes / cfg.bandwidth_bytes_per_ms
    assert r.makespan_ms == pytest.approx(pref + cfg.match_ms + push + cfg.trust_ms, abs=1e-9)
    assert r.cpu_ms == cfg.trust_ms


@pytest.mark.parametrize("model", ["pull", "push", "prefpush", "hybrid"])
def test_no_providers(model):
    r = run_model(model, BASE.replace(n_providers=0))
    assert r.makespan_ms == 0 and r.discovered == frozenset() and not r.timed_out


def test_pull_beats_push_at_fifty():
    cfg = BASE.replace(n_providers=50)
    assert run_pull(cfg).makespan_ms < run_push(cfg).makespan_ms


def test_large_population_ordering():
    cfg = BASE.replace(n_providers=500, seed=3)
    pull, push, pref = run_pull(cfg), run_push(cfg), run_prefpush(cfg)
    assert pref.makespan_ms < push.makespan_ms < pull.makespan_ms
    assert push.cpu_ms > pref.cpu_ms
    assert pull.ram_bytes_peak >= push.ram_bytes_peak >= pref.ram_bytes_peak


def test_hybrid_degenerate_fractions():
    cfg = BASE.replace(n_providers=120, seed=4)
    pull, pref = run_pull(cfg), run_prefpush(cfg)
    h0, h1 = run_hybrid(cfg, prefpush_support_fraction=0.0), run_hybrid(cfg, prefpush_support_fraction=1.0)
    for a, b in ((h0, pull), (h1, pref)):
        ra, rb = a.row(), b.row()
        ra.pop("model"), rb.pop("model")
        assert ra == rb
        assert a.discovered == b.discovered


def test_hybrid_between_extremes():
    cfg = BASE.replace(n_providers=200, seed=1)
    half = run_hybrid(cfg, "Media", 0.5)
    assert run_prefpush(cfg).makespan_ms <= half.makespan_ms <= run_pull(cfg).makespan_ms
    with pytest.raises(SimError):
        run_hybrid(cfg, prefpush_support_fraction=1.5)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["pull", "push", "prefpush", "hybrid"]), st.integers(0, 80), st.integers(0, 10**6),
       st.floats(0.0, 1.0))
def test_invariants(model, n, seed, cached):
    cfg = BASE.replace(n_providers=n, seed=seed, cached_sdm_fraction=cached)
    result, trace = run_model(model, cfg, trace=True)
    again = run_model(model, cfg)
    assert result == again  # bit-identical
    assert result.discovered == result.matched  # complete without timeout
    times = [e.time_ms for e in trace]
    assert times == sorted(times) and all(t >= 0 for t in times)
    assert result.events == len(trace)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 150), st.integers(0, 10**6))
def test_message_and_resource_orderings(n, seed):
    cfg = BASE.replace(n_providers=n, seed=seed)
    push, pref, pull = run_push(cfg), run_prefpush(cfg), run_pull(cfg)
    assert pref.messages <= push.messages
    assert push.cpu_ms > pref.cpu_ms
    assert pull.ram_bytes_peak >= push.ram_bytes_peak >= pref.ram_bytes_peak
    assert pull.messages == 2 * n and push.messages == 3 * n
    assert pref.messages == 2 * n + len(pref.matched)


def test_cached_sdm_no_double_fetch():
    cfg = BASE.replace(n_providers=60, cached_sdm_fraction=1.0, cached_links=4)
    result, trace = run_pull(cfg, trace=True)
    parsed = collections.Counter(e.src for e in trace if e.kind is EventKind.MATCH_DONE)
    assert set(parsed) == {f"p{i:03d}" for i in range(60)}
    assert set(parsed.values()) == {1}
    assert result.messages < 2 * 60
    assert result.discovered == result.matched
    assert result.makespan_ms < run_pull(cfg.replace(cached_sdm_fraction=0.0)).makespan_ms


def test_timeout_flagged():
    cfg = BASE.replace(n_providers=100, discovery_timeout_ms=1.0)
    r = run_pull(cfg)
    assert r.timed_out and r.discovered == frozenset()
    assert r.makespan_ms == cfg.discovery_timeout_ms
    partial = run_pull(BASE.replace(n_providers=100, discovery_timeout_ms=3000.0))
    assert partial.timed_out and partial.discovered < partial.matched


def test_matched_fraction_and_types():
    providers = build_population(BASE.replace(n_providers=100))
    assert sum(p.matched for p in providers) == 20
    with pytest.raises(SimError):
        build_population(BASE.replace(required_type="Nope"))


def test_staggered_schedule_batches():
    cfg = staggered_schedule(BASE)
    providers = build_population(cfg)
    assert len(providers) == 500
    arrivals = collections.Counter(p.arrival_ms for p in providers)
    assert len(arrivals) == 100 and set(arrivals.values()) == {5}
    per_batch = collections.Counter(p.arrival_ms for p in providers if p.matched)
    assert set(per_batch.values()) == {1}


def test_config_validation():
    with pytest.raises(SimError):
        SimConfig(rtt_ms=0)
    with pytest.raises(SimError):
        SimConfig(matched_fraction=1.0)
    with pytest.raises(SimError):
        SimConfig(n_providers=-1)


def test_config_file_round_trip(tmp_path):
    cfg = BASE.replace(n_providers=77, rtt_ms=12.5, required_type="Photo")
    path = tmp_path / "sim.conf"
    save_sim_config(cfg, path)
    assert load_sim_config(path) == cfg
    path.write_text("bogus = 1\n")
    with pytest.raises(SimError):
        load_sim_config(path)
    path.write_text("n_providers = 2.5\n")
    with pytest.raises(SimError):
        load_sim_config(path)


def test_shipped_config_is_the_default():
    assert default_sim_config() == SimConfig()


def test_unknown_model():
    with pytest.raises(SimError):
        run_model("gossip", BASE)
