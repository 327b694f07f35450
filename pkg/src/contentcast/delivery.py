"""Delivery plans and the event replay that judges them.

A plan is a set of timed transmissions plus explicit cache directives.
Broadcast actions are heard by every user but only retained where a cache
directive admits the item; unicast actions deliver one object to one user and
do not occupy that user's cache.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence, Union

from .catalog import CacheSpec, ServiceRequest
from .errors import ConfigError, PlanExceedsBandwidth, UnknownObjectId
from .pet import PetLayout

BROADCAST = "broadcast"
CELLULAR = "cellular"


@dataclass(frozen=True)
class PacketRef:
    encoding_id: int
    index: int


Item = Union[int, PacketRef]


@dataclass(frozen=True)
class BroadcastAction:
    item: Item
    start_s: Fraction
    duration_s: Fraction
    channel: str = BROADCAST

    @property
    def end_s(self) -> Fraction:
        return self.start_s + self.duration_s


@dataclass(frozen=True)
class UnicastAction:
    user_id: int
    object_id: int
    start_s: Fraction
    duration_s: Fraction
    channel: str = CELLULAR

    @property
    def end_s(self) -> Fraction:
        return self.start_s + self.duration_s


@dataclass(frozen=True)
class CacheDirective:
    """Keep ``item`` in ``user_id``'s cache over [admit_at_s, evict_at_s).

    ``user_id=None`` applies the directive to every user (blind push).
    """

    user_id: int | None
    item: Item
    admit_at_s: Fraction
    evict_at_s: Fraction | None = None


@dataclass(frozen=True)
class PetGroup:
    """A PET encoding carried by the plan; segment ids are object ids."""

    encoding_id: int
    layout: PetLayout


@dataclass(frozen=True)
class DeliveryPlan:
    broadcast_actions: tuple[BroadcastAction, ...] = ()
    unicast_actions: tuple[UnicastAction, ...] = ()
    cache_directives: tuple[CacheDirective, ...] = ()
    pet_groups: tuple[PetGroup, ...] = ()

    def __post_init__(self):
        for name in ("broadcast_actions", "unicast_actions", "cache_directives", "pet_groups"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    def summary(self) -> dict:
        return {
            "broadcast_actions": len(self.broadcast_actions),
            "unicast_actions": len(self.unicast_actions),
            "cache_directives": len(self.cache_directives),
            "pet_groups": len(self.pet_groups),
        }


@dataclass(frozen=True)
class ReplayOutcome:
    satisfied_users: frozenset[int]
    unsatisfied_users: frozenset[int]
    overflowed_users: frozenset[int]
    delivered_bits: int
    cache_hit_bits: int
    unicast_delivered_bits: int
    broadcast_bits: int
    unicast_bits: int
    peak_rate: Mapping[str, Fraction] = field(default_factory=dict)


def _bits(item: Item, sizes: Mapping[int, int], groups: Mapping[int, PetGroup]) -> int:
    if isinstance(item, PacketRef):
        g = groups.get(item.encoding_id)
        if g is None or not 0 <= item.index < g.layout.n_packets:
            raise UnknownObjectId(f"plan references unknown packet {item}")
        return 8 * g.layout.packet_symbols
    if item not in sizes:
        raise UnknownObjectId(f"plan references unknown object {item}")
    return sizes[item]


def _peak(events: list[tuple[Fraction, Fraction]]) -> Fraction:
    # releases sort before acquisitions at equal instants
    events.sort(key=lambda e: (e[0], e[1] > 0))
    cur = peak = Fraction(0)
    for _, d in events:
        cur += d
        if cur > peak:
            peak = cur
    return peak


def replay(plan: DeliveryPlan, requests: Sequence[ServiceRequest], sizes: Mapping[int, int],
           cache: CacheSpec, caps: Mapping[str | None, Fraction]) -> ReplayOutcome:
    """Replay ``plan`` and decide which users are served by their deadlines.

    ``caps`` maps a channel name to its rate limit in bit/s; the key ``None``
    instead caps the sum over all channels.
    """
    groups = {g.encoding_id: g for g in plan.pet_groups}
    for g in plan.pet_groups:
        for s in g.layout.segments:
            if s.segment_id not in sizes:
                raise UnknownObjectId(f"PET group {g.encoding_id} carries unknown object {s.segment_id}")

    # transmissions and rate limits
    events: dict[str, list] = defaultdict(list)
    bcast_done: dict[Item, Fraction] = {}
    broadcast_bits = unicast_bits = 0
    for a in plan.broadcast_actions:
        bits = _bits(a.item, sizes, groups)
        broadcast_bits += bits
        start, dur = Fraction(a.start_s), Fraction(a.duration_s)
        if start < 0:
            raise ConfigError(f"broadcast of {a.item} starts before t=0")
        if dur <= 0:
            raise PlanExceedsBandwidth(f"broadcast of {a.item} has non-positive duration")
        rate = bits / dur
        events[a.channel] += [(start, rate), (start + dur, -rate)]
        end = start + dur
        if a.item not in bcast_done or end < bcast_done[a.item]:
            bcast_done[a.item] = end
    unicast_done: dict[tuple[int, int], Fraction] = {}
    for a in plan.unicast_actions:
        bits = _bits(a.object_id, sizes, groups)
        unicast_bits += bits
        start, dur = Fraction(a.start_s), Fraction(a.duration_s)
        if start < 0:
            raise ConfigError(f"unicast to user {a.user_id} starts before t=0")
        if dur <= 0:
            raise PlanExceedsBandwidth(f"unicast to user {a.user_id} has non-positive duration")
        rate = bits / dur
        events[a.channel] += [(start, rate), (start + dur, -rate)]
        key = (a.user_id, a.object_id)
        end = start + dur
        if key not in unicast_done or end < unicast_done[key]:
            unicast_done[key] = end

    peak_rate = {ch: _peak(list(ev)) for ch, ev in events.items()}
    if None in caps:
        total = _peak([e for ev in events.values() for e in ev])
        if total > caps[None]:
            raise PlanExceedsBandwidth(f"aggregate rate {float(total)} b/s exceeds {float(caps[None])} b/s")
    else:
        for ch, p in peak_rate.items():
            if p > caps.get(ch, 0):
                raise PlanExceedsBandwidth(f"{ch} rate {float(p)} b/s exceeds {float(caps.get(ch, 0))} b/s")

    # earliest instant each object can be rebuilt from broadcast PET packets
    decode_time: dict[int, Fraction] = {}
    for g in plan.pet_groups:
        done = sorted(t for item, t in bcast_done.items()
                      if isinstance(item, PacketRef) and item.encoding_id == g.encoding_id)
        for s in g.layout.segments:
            if len(done) >= s.k:
                t = done[s.k - 1]
                if s.segment_id not in decode_time or t < decode_time[s.segment_id]:
                    decode_time[s.segment_id] = t

    def received_by(item: Item, t: Fraction) -> bool:
        done = bcast_done.get(item)
        if done is not None and done <= t:
            return True
        if not isinstance(item, PacketRef):
            dt = decode_time.get(item)
            return dt is not None and dt <= t
        return False

    # cache directives: occupancy and effective holdings
    held: dict[tuple[int | None, Item], list[tuple[Fraction, Fraction | None]]] = defaultdict(list)
    occupancy: dict[int | None, list] = defaultdict(list)
    for d in plan.cache_directives:
        bits = _bits(d.item, sizes, groups)
        admit = Fraction(d.admit_at_s)
        evict = None if d.evict_at_s is None else Fraction(d.evict_at_s)
        if evict is not None and evict <= admit:
            continue
        occupancy[d.user_id].append((admit, bits))
        if evict is not None:
            occupancy[d.user_id].append((evict, -bits))
        if received_by(d.item, admit):
            held[(d.user_id, d.item)].append((admit, evict))

    users = sorted({r.user_id for r in requests})
    overflowed = set()
    if not cache.is_infinite:
        cap = cache.capacity_bits
        shared_peak = _peak(list(occupancy.get(None, [])))
        for u in users:
            own = occupancy.get(u)
            p = _peak(occupancy.get(None, []) + own) if own else shared_peak
            if p > cap:
                overflowed.add(u)

    def holds(u: int, item: Item, t) -> bool:
        for key in ((u, item), (None, item)):
            for admit, evict in held.get(key, ()):
                if admit <= t and (evict is None or t < evict):
                    return True
        return False

    def cached(u: int, obj: int, t) -> bool:
        if holds(u, obj, t):
            return True
        for g in plan.pet_groups:
            for s in g.layout.segments:
                if s.segment_id != obj:
                    continue
                n = sum(holds(u, PacketRef(g.encoding_id, i), t) for i in range(g.layout.n_packets))
                if n >= s.k:
                    return True
        return False

    req_ok: dict[int, bool] = {u: u not in overflowed for u in users}
    per_req = []
    for r in requests:
        t = r.request_time_s
        hit = uni = 0
        ok = True
        for o in r.object_ids:
            if cached(r.user_id, o, t):
                hit += sizes[o]
            else:
                done = unicast_done.get((r.user_id, o))
                if done is not None and done <= t:
                    uni += sizes[o]
                else:
                    ok = False
        per_req.append((r.user_id, hit, uni))
        if not ok:
            req_ok[r.user_id] = False

    satisfied = frozenset(u for u in users if req_ok[u])
    delivered = hits = uni_bits = 0
    for u, hit, uni in per_req:
        if u in satisfied:
            delivered += hit + uni
            hits += hit
            uni_bits += uni
    return ReplayOutcome(
        satisfied_users=satisfied,
        unsatisfied_users=frozenset(users) - satisfied,
        overflowed_users=frozenset(overflowed),
        delivered_bits=delivered,
        cache_hit_bits=hits,
        unicast_delivered_bits=uni_bits,
        broadcast_bits=broadcast_bits,
        unicast_bits=unicast_bits,
        peak_rate=peak_rate,
    )
