"""Delivery planners and the capacity search over the converged network.

Three planners build :class:`DeliveryPlan` objects: pure unicast, broadcast
of the whole catalog, and the converged planner that pushes the most popular
objects over broadcast and unicasts the residual on the cellular pool. The
broadcast and cellular pools are independent bandwidths.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

from . import pet
from .catalog import CacheSpec, ContentObject, ServiceRequest, size_map, validate_requests
from .delivery import (BROADCAST, CELLULAR, BroadcastAction, CacheDirective, DeliveryPlan, PacketRef,
                       PetGroup, UnicastAction, replay)
from .errors import ConfigError
from .workload import TraceConfig, ZipfParams, generate_trace, trial_seed, zipf_pmf

PET_ENCODING_ID = 0


@dataclass(frozen=True)
class ConvergedConfig:
    broadcast_bw_hz: float = 0
    cellular_bw_hz: float = 1
    cache: CacheSpec = field(default_factory=CacheSpec.infinite)
    pet_enabled: bool = False
    rho_floor: float = 0.25
    push_period_s: float | None = None  # None: one period spanning the horizon
    pet_packets: int = 8
    pet_cache: str = "packets"  # or "segments"
    link_rate_bps_per_hz: float = 1

    def __post_init__(self):
        if not self.broadcast_bw_hz >= 0:
            raise ConfigError("broadcast_bw_hz must be non-negative")
        if not self.cellular_bw_hz > 0:
            raise ConfigError("cellular_bw_hz must be positive")
        if self.push_period_s is not None and not self.push_period_s > 0:
            raise ConfigError("push_period_s must be positive")
        if not 0 < self.rho_floor <= 1:
            raise ConfigError("rho_floor must lie in (0, 1]")
        if self.pet_cache not in ("packets", "segments"):
            raise ConfigError(f"pet_cache must be 'packets' or 'segments', got {self.pet_cache!r}")
        if not self.link_rate_bps_per_hz > 0:
            raise ConfigError("link_rate_bps_per_hz must be positive")

    def to_json(self) -> dict:
        return {
            "broadcast_bw_hz": self.broadcast_bw_hz,
            "cellular_bw_hz": self.cellular_bw_hz,
            "cache_bits": self.cache.to_json(),
            "pet_enabled": self.pet_enabled,
            "rho_floor": self.rho_floor,
            "push_period_s": self.push_period_s,
            "pet_packets": self.pet_packets,
            "pet_cache": self.pet_cache,
            "link_rate": self.link_rate_bps_per_hz,
        }

    @classmethod
    def from_json(cls, d: dict) -> "ConvergedConfig":
        known = {"broadcast_bw_hz", "cellular_bw_hz", "cache_bits", "pet_enabled", "rho_floor",
                 "push_period_s", "pet_packets", "pet_cache", "link_rate"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        kw = {k: d[k] for k in known - {"cache_bits", "link_rate"} if k in d}
        if "cache_bits" in d:
            kw["cache"] = CacheSpec.from_json(d["cache_bits"])
        if "link_rate" in d:
            kw["link_rate_bps_per_hz"] = d["link_rate"]
        return cls(**kw)


@dataclass(frozen=True)
class SimReport:
    content_rate: Fraction
    satisfied: int
    n_users: int
    cache_hit_bits: int
    broadcast_bits: int
    unicast_bits: int
    unicast_delivered_bits: int
    delivered_bits: int
    peak_cellular_load_hz: Fraction
    satisfied_users: frozenset[int] = frozenset()

    def to_json(self) -> dict:
        return {
            "content_rate": float(self.content_rate),
            "satisfied": self.satisfied,
            "n_users": self.n_users,
            "cache_hit_bits": self.cache_hit_bits,
            "broadcast_bits": self.broadcast_bits,
            "unicast_bits": self.unicast_bits,
            "unicast_delivered_bits": self.unicast_delivered_bits,
            "delivered_bits": self.delivered_bits,
            "peak_cellular_load_hz": float(self.peak_cellular_load_hz),
        }


def _rate(bw_hz, link_rate) -> Fraction:
    return Fraction(bw_hz) * Fraction(link_rate)


def _edf_unicast(jobs: list[tuple[float, int, int, list[int]]], sizes, rate: Fraction) -> list[UnicastAction]:
    """Earliest-deadline-first with Moore-Hodgson rejection.

    ``jobs`` are (deadline, seq, user_id, object_ids). Jobs that cannot finish
    by their deadline are dropped (largest first), which maximizes the number
    of jobs served on a single link; survivors go back to back from t=0.
    """
    if rate <= 0 or not jobs:
        return []
    jobs = sorted(jobs, key=lambda j: (j[0], j[1]))
    heap: list[tuple[Fraction, int]] = []
    total = Fraction(0)
    keep = set()
    for deadline, seq, _, objs in jobs:
        p = sum(sizes[o] for o in objs) / rate
        heapq.heappush(heap, (-p, -seq))
        keep.add(seq)
        total += p
        if total > deadline:
            neg_p, neg_seq = heapq.heappop(heap)
            keep.discard(-neg_seq)
            total += neg_p
    out = []
    cursor = Fraction(0)
    for _, seq, user, objs in jobs:
        if seq not in keep:
            continue
        for o in sorted(objs):
            dur = sizes[o] / rate
            out.append(UnicastAction(user, o, cursor, dur, CELLULAR))
            cursor += dur
    return out


def plan_unicast(requests: Sequence[ServiceRequest], catalog: Sequence[ContentObject], cellular_bw_hz,
                 link_rate=1) -> DeliveryPlan:
    """Every package unicast separately, earliest deadline first, no caching."""
    sizes = size_map(catalog)
    jobs = [(r.request_time_s, i, r.user_id, list(r.object_ids)) for i, r in enumerate(requests)]
    return DeliveryPlan(unicast_actions=_edf_unicast(jobs, sizes, _rate(cellular_bw_hz, link_rate)))


def plan_broadcast_all(catalog: Sequence[ContentObject], broadcast_bw_hz, horizon_s,
                       link_rate=1) -> DeliveryPlan:
    """Broadcast each object once, back to back from t=0, cached by everyone."""
    if not horizon_s > 0:
        raise ConfigError("horizon must be positive")
    rate = _rate(broadcast_bw_hz, link_rate)
    if rate <= 0:
        return DeliveryPlan()
    actions, directives = [], []
    cursor = Fraction(0)
    for obj in sorted(catalog, key=lambda o: o.id):
        dur = obj.size_bits / rate
        actions.append(BroadcastAction(obj.id, cursor, dur, BROADCAST))
        cursor += dur
        directives.append(CacheDirective(None, obj.id, cursor))
    return DeliveryPlan(broadcast_actions=actions, cache_directives=directives)


def _push_list(order: list[int], sizes, popularity, cfg: ConvergedConfig, budget_bits: Fraction):
    """Longest popularity-ordered prefix that fits the period budget and cache.

    Returns (object ids, PET layout or None, packets each user caches).
    """
    cache = cfg.cache
    pushed: list[int] = []
    layout = None
    cached_packets = 0
    for obj in order:
        if popularity[obj] <= 0:
            break
        cand = pushed + [obj]
        if not cfg.pet_enabled:
            bits = sum(sizes[o] for o in cand)
            if bits > budget_bits or not cache.fits(bits):
                break
            pushed = cand
            continue
        share = math.fsum(popularity[o] for o in cand)
        profile = pet.assign_priorities([popularity[o] / share for o in cand], cfg.rho_floor)
        lay = pet.pet_layout([sizes[o] for o in cand], profile, cfg.pet_packets, cand)
        packet_bits = 8 * lay.packet_symbols
        if lay.n_packets * packet_bits > budget_bits:
            break
        if cfg.pet_cache == "segments":
            if not cache.fits(sum(sizes[o] for o in cand)):
                break
            m = lay.n_packets
        else:
            m = lay.n_packets if cache.is_infinite else min(lay.n_packets, cache.capacity_bits // packet_bits)
            if any(s.k > m for s in lay.segments):
                break
        pushed, layout, cached_packets = cand, lay, m
    return pushed, layout, cached_packets


def plan_converged(requests: Sequence[ServiceRequest], catalog: Sequence[ContentObject],
                   popularity: Sequence[float], cfg: ConvergedConfig, horizon_s=None) -> DeliveryPlan:
    """Push the most popular objects each period, unicast whatever is missing.

    ``popularity[i]`` is the request probability of object id ``i``. The
    horizon defaults to the latest request time.
    """
    sizes = size_map(catalog)
    if len(popularity) != len(sizes):
        raise ConfigError(f"{len(popularity)} popularities for {len(sizes)} objects")
    if horizon_s is None:
        if not requests:
            return DeliveryPlan()
        horizon_s = max(r.request_time_s for r in requests)
    T = Fraction(horizon_s)
    period = T if cfg.push_period_s is None else Fraction(cfg.push_period_s)
    if period > T:
        raise ConfigError(f"push period {cfg.push_period_s} exceeds horizon {horizon_s}")
    lr = cfg.link_rate_bps_per_hz
    b_rate = _rate(cfg.broadcast_bw_hz, lr)
    c_rate = _rate(cfg.cellular_bw_hz, lr)
    if b_rate == 0:
        return plan_unicast(requests, catalog, cfg.cellular_bw_hz, lr)

    order = sorted(sizes, key=lambda o: (-popularity[o], o))
    pushed, layout, cached_packets = _push_list(order, sizes, popularity, cfg, b_rate * period)

    if layout is None:
        items = [(o, sizes[o]) for o in pushed]
    else:
        items = [(PacketRef(PET_ENCODING_ID, i), 8 * layout.packet_symbols) for i in range(layout.n_packets)]
    actions = []
    first_end: dict = {}
    n_periods = math.ceil(T / period) if items else 0
    for p in range(n_periods):
        cursor = p * period
        for item, bits in items:
            dur = bits / b_rate
            if cursor + dur > T:
                break
            actions.append(BroadcastAction(item, cursor, dur, BROADCAST))
            cursor += dur
            first_end.setdefault(item, cursor)

    directives = []
    ready: dict[int, Fraction] = {}
    groups = ()
    if layout is None:
        for o in pushed:
            directives.append(CacheDirective(None, o, first_end[o]))
            ready[o] = first_end[o]
    else:
        groups = (PetGroup(PET_ENCODING_ID, layout),)
        for s in layout.segments:
            ready[s.segment_id] = first_end[PacketRef(PET_ENCODING_ID, s.k - 1)]
        if cfg.pet_cache == "segments":
            directives = [CacheDirective(None, o, t) for o, t in ready.items()]
        else:
            directives = [CacheDirective(None, PacketRef(PET_ENCODING_ID, i), first_end[PacketRef(PET_ENCODING_ID, i)])
                          for i in range(cached_packets)]

    jobs = []
    for i, r in enumerate(requests):
        t = r.request_time_s
        residual = [o for o in r.object_ids if not (o in ready and ready[o] <= t)]
        if residual:
            jobs.append((t, i, r.user_id, residual))
    return DeliveryPlan(
        broadcast_actions=actions,
        unicast_actions=_edf_unicast(jobs, sizes, c_rate),
        cache_directives=directives,
        pet_groups=groups,
    )


def simulate(plan: DeliveryPlan, requests: Sequence[ServiceRequest], catalog: Sequence[ContentObject],
             cache: CacheSpec, *, broadcast_bw_hz, cellular_bw_hz, horizon_s, link_rate=1) -> SimReport:
    """Replay ``plan`` on independent broadcast and cellular pools.

    Content rate is delivered bits over (B_b + B_c) x T.
    """
    sizes = size_map(catalog)
    validate_requests(requests, sizes, horizon_s)
    out = replay(plan, requests, sizes, cache,
                 caps={BROADCAST: _rate(broadcast_bw_hz, link_rate), CELLULAR: _rate(cellular_bw_hz, link_rate)})
    resource = (Fraction(broadcast_bw_hz) + Fraction(cellular_bw_hz)) * Fraction(horizon_s)
    users = out.satisfied_users | out.unsatisfied_users
    return SimReport(
        content_rate=Fraction(out.delivered_bits) / resource if resource else Fraction(0),
        satisfied=len(out.satisfied_users),
        n_users=len(users),
        cache_hit_bits=out.cache_hit_bits,
        broadcast_bits=out.broadcast_bits,
        unicast_bits=out.unicast_bits,
        unicast_delivered_bits=out.unicast_delivered_bits,
        delivered_bits=out.delivered_bits,
        peak_cellular_load_hz=out.peak_rate.get(CELLULAR, Fraction(0)) / Fraction(link_rate),
        satisfied_users=out.satisfied_users,
    )


def min_broadcast_bandwidth(catalog: Sequence[ContentObject], requests: Sequence[ServiceRequest],
                            link_rate=1) -> Fraction:
    """Smallest B_b at which :func:`plan_broadcast_all` meets every deadline."""
    end: dict[int, int] = {}
    acc = 0
    for obj in sorted(catalog, key=lambda o: o.id):
        acc += obj.size_bits
        end[obj.id] = acc
    need = Fraction(0)
    for r in requests:
        need = max(need, Fraction(max(end[o] for o in r.object_ids)) / Fraction(r.request_time_s))
    return need / Fraction(link_rate)


def min_unicast_bandwidth(requests: Sequence[ServiceRequest], catalog: Sequence[ContentObject],
                          link_rate=1) -> Fraction:
    """Smallest B_c at which :func:`plan_unicast` serves every package (EDF demand bound)."""
    sizes = size_map(catalog)
    acc = 0
    need = Fraction(0)
    for r in sorted(requests, key=lambda r: r.request_time_s):
        acc += r.package_bits(sizes)
        need = max(need, Fraction(acc) / Fraction(r.request_time_s))
    return need / Fraction(link_rate)


def all_served(cfg: ConvergedConfig, params: ZipfParams, trace_cfg: TraceConfig,
               catalog: Sequence[ContentObject], popularity=None) -> tuple[bool, SimReport]:
    """Plan and simulate one trace; True when every user is served."""
    popularity = zipf_pmf(params) if popularity is None else popularity
    reqs = generate_trace(catalog, params, trace_cfg)
    plan = plan_converged(reqs, catalog, popularity, cfg, horizon_s=trace_cfg.horizon_s)
    rep = simulate(plan, reqs, catalog, cfg.cache, broadcast_bw_hz=cfg.broadcast_bw_hz,
                   cellular_bw_hz=cfg.cellular_bw_hz, horizon_s=trace_cfg.horizon_s,
                   link_rate=cfg.link_rate_bps_per_hz)
    return rep.satisfied == rep.n_users, rep


def users_per_cell(cfg: ConvergedConfig, params: ZipfParams, trace_cfg: TraceConfig, confidence_trials: int, *,
                   catalog: Sequence[ContentObject], k_max: int = 1024, threshold: float = 0.95) -> int:
    """Largest K served in full in at least ``threshold`` of the seeded trials.

    Trial i uses seed ``trial_seed(trace_cfg.seed, i)`` and the first K users
    of that trial's trace, so success is monotone in K and the doubling then
    bisection search is exact. Returns ``k_max`` if even that many pass.
    """
    if confidence_trials < 1:
        raise ConfigError("confidence_trials must be positive")
    popularity = zipf_pmf(params)
    need = math.ceil(threshold * confidence_trials)
    seeds = [trial_seed(trace_cfg.seed, i) for i in range(confidence_trials)]
    memo: dict[int, bool] = {0: True}

    def passes(k: int) -> bool:
        if k not in memo:
            ok = bad = 0
            for s in seeds:
                served, _ = all_served(cfg, params, replace(trace_cfg, n_users=k, seed=s), catalog, popularity)
                if served:
                    ok += 1
                    if ok >= need:
                        break
                else:
                    bad += 1
                    if bad > confidence_trials - need:
                        break
            memo[k] = ok >= need
        return memo[k]

    lo, k = 0, 1
    while True:
        if k >= k_max:
            if passes(k_max):
                return k_max
            hi = k_max
            break
        if not passes(k):
            hi = k
            break
        lo, k = k, 2 * k
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if passes(mid):
            lo = mid
        else:
            hi = mid
    return lo
