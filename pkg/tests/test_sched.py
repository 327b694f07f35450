import random
from dataclasses import replace
from fractions import Fraction

import pytest

from contentcast.catalog import (
    CacheSpec, ContentObject, ServiceRequest, bandwidth_lower_bound, bandwidth_upper_bound, size_map,
)
from contentcast.delivery import DeliveryPlan, PacketRef
from contentcast.errors import ConfigError, PlanExceedsBandwidth
from contentcast.sched import (
    ConvergedConfig, all_served, min_broadcast_bandwidth, min_unicast_bandwidth, plan_broadcast_all,
    plan_converged, plan_unicast, simulate, users_per_cell,
)
from contentcast.workload import TraceConfig, ZipfParams, generate_trace, make_catalog, trial_seed, zipf_pmf

from conftest import has_shared_object, random_scenario


def cat(*sizes):
    return [ContentObject(i, s) for i, s in enumerate(sizes)]


def req(u, t, *objs):
    return ServiceRequest(u, t, frozenset(objs))


def sim(plan, reqs, catalog, cache, bb, bc, T):
    return simulate(plan, reqs, catalog, cache, broadcast_bw_hz=bb, cellular_bw_hz=bc, horizon_s=T)


# unicast ------------------------------------------------------------------------

def test_unicast_exact_fit():
    catalog = cat(100)
    reqs = [req(0, 10, 0)]
    plan = plan_unicast(reqs, catalog, 10)
    assert len(plan.unicast_actions) == 1
    a = plan.unicast_actions[0]
    assert (a.start_s, a.duration_s) == (0, 10)
    assert not plan.cache_directives
    rep = sim(plan, reqs, catalog, CacheSpec(0), 0, 10, 10)
    assert rep.satisfied == 1 and rep.content_rate == 1


def test_unicast_sends_shared_object_twice():
    catalog = cat(50)
    reqs = [req(0, 10, 0), req(1, 10, 0)]
    plan = plan_unicast(reqs, catalog, 10)
    assert [(a.user_id, a.object_id) for a in plan.unicast_actions] == [(0, 0), (1, 0)]
    rep = sim(plan, reqs, catalog, CacheSpec(0), 0, 10, 10)
    assert rep.unicast_bits == 100 and rep.satisfied == 2


def test_unicast_bit_accounting():
    rnd = random.Random(21)
    for _ in range(200):
        catalog, reqs, T = random_scenario(rnd, equal_deadlines=False)
        sizes = size_map(catalog)
        bc = Fraction(rnd.randint(1, 40))
        plan = plan_unicast(reqs, catalog, bc)
        rep = sim(plan, reqs, catalog, CacheSpec(0), 0, bc, T)
        served = sum(r.package_bits(sizes) for r in reqs if r.user_id in rep.satisfied_users)
        assert rep.unicast_bits == rep.unicast_delivered_bits == served
        assert rep.cache_hit_bits == 0
        assert rep.peak_cellular_load_hz <= bc


def test_unicast_rejection_maximises_served_count():
    # a big early package would block two small ones; dropping it serves two
    catalog = cat(10, 2, 2)
    reqs = [req(0, 10, 0), req(1, 11, 1), req(2, 12, 2)]
    rep = sim(plan_unicast(reqs, catalog, 1), reqs, catalog, CacheSpec(0), 0, 1, 12)
    assert rep.satisfied == 2


def test_unicast_served_count_matches_brute_force():
    import itertools
    rnd = random.Random(22)
    for _ in range(150):
        catalog, reqs, T = random_scenario(rnd, equal_deadlines=False, max_users=5)
        sizes = size_map(catalog)
        bc = Fraction(rnd.randint(1, 10))
        rep = sim(plan_unicast(reqs, catalog, bc), reqs, catalog, CacheSpec(0), 0, bc, T)
        best = 0
        for n in range(len(reqs) + 1):
            for sub in itertools.combinations(sorted(reqs, key=lambda r: r.request_time_s), n):
                t, ok = Fraction(0), True
                for r in sub:
                    t += Fraction(r.package_bits(sizes)) / bc
                    ok &= t <= r.request_time_s
                if ok:
                    best = max(best, n)
        assert rep.satisfied == best


# broadcast ------------------------------------------------------------------------

def test_broadcast_all_finishes_at_horizon():
    catalog = cat(100, 200, 300)
    plan = plan_broadcast_all(catalog, 60, 10)
    assert max(a.end_s for a in plan.broadcast_actions) == 10
    assert [a.start_s for a in plan.broadcast_actions] == [0, Fraction(5, 3), 5]
    reqs = [req(0, 10, 0, 2), req(1, 10, 1)]
    rep = sim(plan, reqs, catalog, CacheSpec.infinite(), 60, 1, 10)
    assert rep.satisfied == 2 and rep.unicast_bits == 0


def test_broadcast_below_lower_bound_misses():
    catalog = cat(100, 200, 300)
    reqs = [req(0, 10, 2)]
    plan = plan_broadcast_all(catalog, 59, 10)
    assert sim(plan, reqs, catalog, CacheSpec.infinite(), 59, 1, 10).satisfied == 0


def test_broadcast_small_cache_overflows():
    # everyone caches everything: occupancy reaches 600 bits at t=10
    catalog = cat(100, 200, 300)
    plan = plan_broadcast_all(catalog, 60, 10)
    reqs = [req(0, 10, 0)]
    assert sim(plan, reqs, catalog, CacheSpec(599), 60, 1, 10).satisfied == 0
    assert sim(plan, reqs, catalog, CacheSpec(600), 60, 1, 10).satisfied == 1


def test_empty_plan():
    catalog = cat(10)
    rep = sim(DeliveryPlan(), [req(0, 5, 0)], catalog, CacheSpec.infinite(), 1, 1, 5)
    assert rep.satisfied == 0 and rep.content_rate == 0 and rep.delivered_bits == 0


def test_simulate_rejects_overloaded_plan():
    catalog = cat(100)
    plan = plan_unicast([req(0, 10, 0)], catalog, 20)
    with pytest.raises(PlanExceedsBandwidth):
        sim(plan, [req(0, 10, 0)], catalog, CacheSpec(0), 0, 10, 10)


# bound attainment -------------------------------------------------------------------

def test_broadcast_attains_catalog_over_horizon():
    rnd = random.Random(23)
    for _ in range(200):
        catalog, reqs, T = random_scenario(rnd, equal_deadlines=True, force_shared=True)
        b = min_broadcast_bandwidth(catalog, reqs)
        assert b == bandwidth_lower_bound(catalog, T)
        rep = sim(plan_broadcast_all(catalog, b, T), reqs, catalog, CacheSpec.infinite(), b, 1, T)
        assert rep.satisfied == len(reqs)
        sizes = size_map(catalog)
        assert rep.content_rate == Fraction(sum(r.package_bits(sizes) for r in reqs)) / ((b + 1) * T)
        low = b * Fraction(999_999, 1_000_000)
        assert sim(plan_broadcast_all(catalog, low, T), reqs, catalog, CacheSpec.infinite(), low, 1, T).satisfied < len(reqs)


def test_unicast_attains_packages_over_horizon():
    rnd = random.Random(24)
    for _ in range(200):
        catalog, reqs, T = random_scenario(rnd, equal_deadlines=True, force_shared=True)
        b = min_unicast_bandwidth(reqs, catalog)
        assert b == bandwidth_upper_bound(reqs, catalog, T)
        rep = simulate(plan_unicast(reqs, catalog, b), reqs, catalog, CacheSpec.infinite(),
                       broadcast_bw_hz=0, cellular_bw_hz=b, horizon_s=T)
        assert rep.satisfied == len(reqs)
        assert rep.content_rate == 1
        low = b * Fraction(999_999, 1_000_000)
        rep = simulate(plan_unicast(reqs, catalog, low), reqs, catalog, CacheSpec.infinite(),
                       broadcast_bw_hz=0, cellular_bw_hz=low, horizon_s=T)
        assert rep.satisfied < len(reqs)


def test_min_bandwidths_with_staggered_deadlines():
    rnd = random.Random(25)
    for _ in range(200):
        catalog, reqs, T = random_scenario(rnd, equal_deadlines=False)
        for b, planner, bb in [
            (min_broadcast_bandwidth(catalog, reqs), lambda b: plan_broadcast_all(catalog, b, T), True),
            (min_unicast_bandwidth(reqs, catalog), lambda b: plan_unicast(reqs, catalog, b), False),
        ]:
            for scale, full in [(1, True), (Fraction(999, 1000), False)]:
                x = b * scale
                rep = simulate(planner(x), reqs, catalog, CacheSpec.infinite(),
                               broadcast_bw_hz=x if bb else 0, cellular_bw_hz=1 if bb else x, horizon_s=T)
                assert (rep.satisfied == len(reqs)) == full


def test_broadcast_beats_unicast_iff_sharing():
    rnd = random.Random(26)
    for shared in (True, False):
        for _ in range(200):
            catalog, reqs, T = random_scenario(rnd, force_shared=shared)
            lo = bandwidth_lower_bound(catalog, T)
            hi = bandwidth_upper_bound(reqs, catalog, T)
            assert has_shared_object(reqs) == shared
            assert (lo < hi) == shared and (lo == hi) == (not shared)


# converged -------------------------------------------------------------------------

def test_converged_without_broadcast_is_unicast():
    rnd = random.Random(27)
    for _ in range(100):
        catalog, reqs, T = random_scenario(rnd, equal_deadlines=False)
        pop = [1 / len(catalog)] * len(catalog)
        cfg = ConvergedConfig(broadcast_bw_hz=0, cellular_bw_hz=7)
        assert plan_converged(reqs, catalog, pop, cfg) == plan_unicast(reqs, catalog, 7)


def test_converged_full_push_needs_no_unicast():
    rnd = random.Random(28)
    for _ in range(100):
        catalog, reqs, T = random_scenario(rnd, equal_deadlines=True)
        sizes = size_map(catalog)
        w = [rnd.random() + 0.01 for _ in catalog]
        pop = [x / sum(w) for x in w]
        bb = bandwidth_lower_bound(catalog, T) * rnd.choice([1, 2, 3])
        cfg = ConvergedConfig(broadcast_bw_hz=bb, cellular_bw_hz=1)
        plan = plan_converged(reqs, catalog, pop, cfg)
        assert not plan.unicast_actions
        rep = sim(plan, reqs, catalog, cfg.cache, bb, 1, T)
        assert rep.satisfied == len(reqs) and rep.unicast_bits == 0
        assert rep.cache_hit_bits == sum(r.package_bits(sizes) for r in reqs)


def test_converged_pushes_popular_prefix():
    catalog = cat(10, 10, 10, 10)
    pop = [0.1, 0.4, 0.3, 0.2]
    cfg = ConvergedConfig(broadcast_bw_hz=2, cellular_bw_hz=1, push_period_s=10)
    plan = plan_converged([req(0, 20, 0)], catalog, pop, cfg)
    first = [a.item for a in plan.broadcast_actions if a.start_s < 10]
    assert first == [1, 2]
    assert {d.item for d in plan.cache_directives} == {1, 2}
    # rebroadcast every period
    assert [a.start_s for a in plan.broadcast_actions] == [0, 5, 10, 15]


def test_converged_respects_cache():
    catalog = cat(10, 10, 10)
    pop = [0.5, 0.3, 0.2]
    cfg = ConvergedConfig(broadcast_bw_hz=100, cellular_bw_hz=1, cache=CacheSpec(15))
    plan = plan_converged([req(0, 20, 0)], catalog, pop, cfg)
    assert {d.item for d in plan.cache_directives} == {0}


def test_conservation():
    rnd = random.Random(29)
    for _ in range(200):
        catalog, reqs, T = random_scenario(rnd, equal_deadlines=False)
        sizes = size_map(catalog)
        w = [rnd.random() + 0.01 for _ in catalog]
        pop = [x / sum(w) for x in w]
        cfg = ConvergedConfig(
            broadcast_bw_hz=Fraction(rnd.randint(0, 30)), cellular_bw_hz=Fraction(rnd.randint(1, 30)),
            cache=rnd.choice([CacheSpec.infinite(), CacheSpec(rnd.randint(0, 800))]),
            push_period_s=rnd.choice([None, T / 2, T / 3]),
            pet_enabled=rnd.random() < 0.3, pet_packets=rnd.randint(1, 8),
            pet_cache=rnd.choice(["packets", "segments"]))
        plan = plan_converged(reqs, catalog, pop, cfg)
        rep = sim(plan, reqs, catalog, cfg.cache, cfg.broadcast_bw_hz, cfg.cellular_bw_hz, T)
        served = sum(r.package_bits(sizes) for r in reqs if r.user_id in rep.satisfied_users)
        assert rep.cache_hit_bits + rep.unicast_delivered_bits == served == rep.delivered_bits
        assert rep.content_rate * (cfg.broadcast_bw_hz + cfg.cellular_bw_hz) * T == served


def test_converged_dominates_unicast_at_equal_bandwidth():
    rnd = random.Random(30)
    checked = 0
    for _ in range(300):
        catalog, reqs, T = random_scenario(rnd, equal_deadlines=False, force_shared=True)
        w = [rnd.random() + 0.01 for _ in catalog]
        pop = [x / sum(w) for x in w]
        bb, bc = Fraction(rnd.randint(1, 20)), Fraction(rnd.randint(1, 20))
        cfg = ConvergedConfig(broadcast_bw_hz=bb, cellular_bw_hz=bc)
        conv = sim(plan_converged(reqs, catalog, pop, cfg), reqs, catalog, cfg.cache, bb, bc, T)
        uni = sim(plan_unicast(reqs, catalog, bb + bc), reqs, catalog, CacheSpec(0), 0, bb + bc, T)
        if conv.satisfied_users == uni.satisfied_users:
            checked += 1
            assert conv.content_rate >= uni.content_rate
    assert checked > 50


def test_pet_push_serves_popular_objects():
    catalog = cat(64, 64, 64)
    pop = [0.6, 0.3, 0.1]
    cfg = ConvergedConfig(broadcast_bw_hz=1000, cellular_bw_hz=1, pet_enabled=True, pet_packets=4,
                          pet_cache="segments")
    reqs = [req(0, 5, 0), req(1, 5, 1), req(2, 5, 2)]
    plan = plan_converged(reqs, catalog, pop, cfg)
    assert plan.pet_groups and not plan.unicast_actions
    assert all(isinstance(a.item, PacketRef) for a in plan.broadcast_actions)
    rep = sim(plan, reqs, catalog, cfg.cache, 1000, 1, 5)
    assert rep.satisfied == 3


def test_pet_popular_object_decodes_first():
    catalog = cat(64, 64)
    cfg = ConvergedConfig(broadcast_bw_hz=1, cellular_bw_hz=Fraction(1, 10**6), pet_enabled=True,
                          pet_packets=4, rho_floor=0.5, pet_cache="segments")
    plan = plan_converged([req(0, 200, 0)], catalog, [0.7, 0.3], cfg)
    # k = 2 and 4 packets of 48 bits each: object 0 after 96 s, object 1 after 192 s
    early = [req(0, 96, 0), req(1, 96, 1)]
    rep = sim(plan, early, catalog, cfg.cache, 1, Fraction(1, 10**6), 200)
    assert rep.satisfied_users == {0}
    late = [req(0, 192, 0), req(1, 192, 1)]
    assert sim(plan, late, catalog, cfg.cache, 1, Fraction(1, 10**6), 200).satisfied == 2


def test_pet_packet_cache_mode():
    catalog = cat(64, 64)
    cfg = ConvergedConfig(broadcast_bw_hz=100, cellular_bw_hz=1, pet_enabled=True, pet_packets=4, rho_floor=0.5)
    reqs = [req(0, 10, 0), req(1, 10, 1)]
    plan = plan_converged(reqs, catalog, [0.7, 0.3], cfg)
    assert all(isinstance(d.item, PacketRef) for d in plan.cache_directives)
    assert sim(plan, reqs, catalog, cfg.cache, 100, 1, 10).satisfied == 2


def test_config_json():
    cfg = ConvergedConfig(broadcast_bw_hz=3, cellular_bw_hz=4, cache=CacheSpec(100), pet_enabled=True,
                          push_period_s=5)
    assert ConvergedConfig.from_json(cfg.to_json()) == cfg
    with pytest.raises(ConfigError):
        ConvergedConfig.from_json({"bogus": 1})
    with pytest.raises(ConfigError):
        ConvergedConfig(cellular_bw_hz=0)
    with pytest.raises(ConfigError):
        ConvergedConfig(broadcast_bw_hz=-1)
    with pytest.raises(ConfigError):
        plan_converged([req(0, 5, 0)], cat(1), [1.0], ConvergedConfig(broadcast_bw_hz=1, push_period_s=6))


# Monte Carlo and capacity --------------------------------------------------------------

SMALL = dict(n_items=20, object_bits=10, horizon_s=20.0, t0=5.0)


def small_setup(s, bb, bc=4, cache=None):
    catalog = make_catalog(SMALL["object_bits"], SMALL["n_items"])
    cfg = ConvergedConfig(broadcast_bw_hz=bb, cellular_bw_hz=bc, push_period_s=SMALL["t0"],
                          cache=cache or CacheSpec.infinite())
    params = ZipfParams(s, SMALL["n_items"])
    tc = TraceConfig(1, SMALL["horizon_s"], seed=11, earliest_request_s=SMALL["t0"])
    return catalog, cfg, params, tc


def test_concentration_cuts_unicast_bits():
    totals = {}
    for s in (0.5, 1.0):
        catalog, cfg, params, tc = small_setup(s, 8, bc=1000)
        total = 0
        for i in range(100):
            _, rep = all_served(cfg, params, replace(tc, n_users=30, seed=trial_seed(3, i)), catalog)
            total += rep.unicast_bits
        totals[s] = total
    assert totals[1.0] < totals[0.5]


def test_capacity_monotone_in_broadcast():
    ks = []
    for bb in (0, 4, 8, 16):
        catalog, cfg, params, tc = small_setup(1.0, bb)
        ks.append(users_per_cell(cfg, params, tc, 20, catalog=catalog, k_max=512))
    assert ks == sorted(ks)
    assert ks[-1] > ks[0]


def test_capacity_monotone_in_cellular_and_cache():
    catalog, cfg, params, tc = small_setup(1.0, 4)
    by_bc = [users_per_cell(replace(cfg, cellular_bw_hz=b), params, tc, 20, catalog=catalog, k_max=512)
             for b in (2, 4, 8)]
    assert by_bc == sorted(by_bc)
    by_m = [users_per_cell(replace(cfg, cache=CacheSpec(m)), params, tc, 20, catalog=catalog, k_max=512)
            for m in (0, 10, 30, 100)]
    assert by_m == sorted(by_m)


def test_capacity_larger_for_concentrated_popularity():
    k = {}
    for s in (0.5, 1.0):
        catalog, cfg, params, tc = small_setup(s, 8)
        k[s] = users_per_cell(cfg, params, tc, 20, catalog=catalog, k_max=512)
    assert k[1.0] >= k[0.5]


def test_capacity_unbounded_when_broadcast_covers_catalog():
    catalog, cfg, params, tc = small_setup(1.0, 0, bc=Fraction(1, 10**6))
    # whole catalog (200 bits) fits in one 5 s push period at 40 Hz
    cfg = replace(cfg, broadcast_bw_hz=40)
    assert users_per_cell(cfg, params, tc, 10, catalog=catalog, k_max=256) == 256


def test_capacity_search_matches_linear_scan():
    catalog, cfg, params, tc = small_setup(0.5, 4)
    trials = 10
    k = users_per_cell(cfg, params, tc, trials, catalog=catalog, k_max=512)
    seeds = [trial_seed(tc.seed, i) for i in range(trials)]

    def ok(n):
        wins = sum(all_served(cfg, params, replace(tc, n_users=n, seed=s), catalog)[0] for s in seeds)
        return wins >= 0.95 * trials

    assert ok(k) and not ok(k + 1)
