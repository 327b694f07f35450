"""Contents, service requests, and the content-rate metric.

Bits are integers throughout. Bandwidths and times may be int, float or
Fraction; every quotient is taken over ``Fraction`` so that
``content_rate * B * T == delivered_bits`` holds exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, EmptyRequest, NonPositiveHorizon, UnknownObjectId

if TYPE_CHECKING:
    from .delivery import DeliveryPlan


@dataclass(frozen=True)
class ContentObject:
    id: int
    size_bits: int

    def __post_init__(self):
        if self.id < 0:
            raise ConfigError(f"object id {self.id} is negative")
        if self.size_bits < 1:
            raise ConfigError(f"object {self.id}: size_bits must be >= 1, got {self.size_bits}")


@dataclass(frozen=True)
class ServiceRequest:
    user_id: int
    request_time_s: float
    object_ids: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "object_ids", frozenset(self.object_ids))
        if not self.object_ids:
            raise EmptyRequest(f"user {self.user_id}: request has no objects")
        if not self.request_time_s > 0:
            raise ConfigError(f"user {self.user_id}: request time must be positive")

    def package_bits(self, sizes: Mapping[int, int]) -> int:
        """|y_k|: the union of the requested objects."""
        try:
            return sum(sizes[o] for o in self.object_ids)
        except KeyError as e:
            raise UnknownObjectId(f"user {self.user_id} requests unknown object {e.args[0]}") from None


class _Infinite(Enum):
    INF = "inf"

    def __repr__(self):
        return "INF"


INF = _Infinite.INF


@dataclass(frozen=True)
class CacheSpec:
    capacity_bits: int | _Infinite = 0

    def __post_init__(self):
        if self.capacity_bits is not INF and self.capacity_bits < 0:
            raise ConfigError("cache capacity must be non-negative")

    @classmethod
    def infinite(cls) -> "CacheSpec":
        return cls(INF)

    @property
    def is_infinite(self) -> bool:
        return self.capacity_bits is INF

    def fits(self, bits) -> bool:
        return self.is_infinite or bits <= self.capacity_bits

    def to_json(self):
        return "inf" if self.is_infinite else self.capacity_bits

    @classmethod
    def from_json(cls, v) -> "CacheSpec":
        if v == "inf":
            return cls.infinite()
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"cache_bits must be an integer or \"inf\", got {v!r}")
        return cls(v)


@dataclass(frozen=True)
class WirelessBudget:
    bandwidth_hz: float
    horizon_s: float
    link_rate_bps_per_hz: float = 1

    def __post_init__(self):
        for name in ("bandwidth_hz", "horizon_s", "link_rate_bps_per_hz"):
            v = getattr(self, name)
            if not v > 0:
                raise ConfigError(f"{name} must be strictly positive, got {v!r}")

    @property
    def resource(self) -> Fraction:
        return Fraction(self.bandwidth_hz) * Fraction(self.horizon_s)


@dataclass(frozen=True)
class DiversityMatrix:
    bits: np.ndarray

    def __post_init__(self):
        b = np.array(self.bits, dtype=bool)
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    @property
    def rows(self) -> int:
        return self.bits.shape[0]

    @property
    def cols(self) -> int:
        return self.bits.shape[1]

    def request_sets(self) -> list[frozenset[int]]:
        return [frozenset(np.flatnonzero(row).tolist()) for row in self.bits]

    def __eq__(self, other):
        return isinstance(other, DiversityMatrix) and np.array_equal(self.bits, other.bits)

    __hash__ = None


@dataclass(frozen=True)
class ContentRateReport:
    delivered_bits: int
    content_rate: Fraction
    satisfied_users: frozenset[int]
    unsatisfied_users: frozenset[int] = field(default_factory=frozenset)

    def to_json(self) -> dict:
        return {
            "delivered_bits": self.delivered_bits,
            "content_rate": float(self.content_rate),
            "satisfied_users": sorted(self.satisfied_users),
            "unsatisfied_users": sorted(self.unsatisfied_users),
        }


def size_map(catalog: Iterable[ContentObject]) -> dict[int, int]:
    sizes: dict[int, int] = {}
    for obj in catalog:
        if obj.id in sizes:
            raise ConfigError(f"duplicate object id {obj.id}")
        sizes[obj.id] = obj.size_bits
    return sizes


def validate_catalog(catalog: Sequence[ContentObject]) -> dict[int, int]:
    sizes = size_map(catalog)
    if sorted(sizes) != list(range(len(sizes))):
        raise ConfigError("catalog ids must be dense in [0, L)")
    return sizes


def validate_requests(requests: Sequence[ServiceRequest], sizes: Mapping[int, int],
                      horizon_s=None) -> int:
    """Check ids against the catalog and user ids for density; returns K."""
    users = set()
    for r in requests:
        missing = r.object_ids - sizes.keys()
        if missing:
            raise UnknownObjectId(f"user {r.user_id} requests unknown object {min(missing)}")
        if horizon_s is not None and r.request_time_s > horizon_s:
            raise ConfigError(f"user {r.user_id}: request time {r.request_time_s} beyond horizon {horizon_s}")
        users.add(r.user_id)
    if sorted(users) != list(range(len(users))):
        raise ConfigError("user ids must be dense in [0, K)")
    return len(users)


def build_diversity_matrix(requests: Sequence[ServiceRequest],
                           catalog: Sequence[ContentObject]) -> DiversityMatrix:
    sizes = validate_catalog(catalog)
    k = validate_requests(requests, sizes)
    z = np.zeros((k, len(sizes)), dtype=bool)
    for r in requests:
        z[r.user_id, sorted(r.object_ids)] = True
    return DiversityMatrix(z)


def horizon_of(requests: Iterable[ServiceRequest]):
    """T as the latest request time."""
    return max(r.request_time_s for r in requests)


def content_rate(satisfied: Sequence[ServiceRequest], budget: WirelessBudget,
                 sizes: Mapping[int, int] | Sequence[ContentObject] | None = None) -> ContentRateReport:
    """Delivered package bits per unit of B x T.

    ``sizes`` may be omitted only for an empty ``satisfied`` list.
    """
    if sizes is not None and not isinstance(sizes, Mapping):
        sizes = size_map(sizes)
    delivered = sum(r.package_bits(sizes) for r in satisfied) if satisfied else 0
    return ContentRateReport(
        delivered_bits=delivered,
        content_rate=Fraction(delivered) / budget.resource,
        satisfied_users=frozenset(r.user_id for r in satisfied),
    )


def _positive_horizon(horizon_s) -> Fraction:
    if not horizon_s > 0 or (isinstance(horizon_s, float) and math.isinf(horizon_s)):
        raise NonPositiveHorizon(f"horizon must be positive and finite, got {horizon_s!r}")
    return Fraction(horizon_s)


def bandwidth_lower_bound(catalog: Sequence[ContentObject], horizon_s) -> Fraction:
    """Bandwidth to broadcast every object once within the horizon."""
    t = _positive_horizon(horizon_s)
    if not catalog:
        raise ConfigError("catalog is empty")
    return Fraction(sum(o.size_bits for o in catalog)) / t


def bandwidth_upper_bound(requests: Sequence[ServiceRequest], catalog: Sequence[ContentObject],
                          horizon_s) -> Fraction:
    """Bandwidth to unicast every package separately within the horizon."""
    t = _positive_horizon(horizon_s)
    sizes = size_map(catalog)
    return Fraction(sum(r.package_bits(sizes) for r in requests)) / t


def requested_subset(requests: Sequence[ServiceRequest], catalog: Sequence[ContentObject]) -> list[ContentObject]:
    wanted = set().union(*(r.object_ids for r in requests)) if requests else set()
    return [o for o in catalog if o.id in wanted]


def check_achievable(plan: "DeliveryPlan", requests: Sequence[ServiceRequest],
                     catalog: Sequence[ContentObject], cache: CacheSpec,
                     budget: WirelessBudget) -> ContentRateReport:
    """Judge a plan on a single shared channel of ``budget.bandwidth_hz``.

    Raises PlanExceedsBandwidth if the plan's aggregate rate ever exceeds
    B x link_rate. A user whose cache overflows is reported unsatisfied.
    """
    from .delivery import replay

    sizes = size_map(catalog)
    validate_requests(requests, sizes, budget.horizon_s)
    out = replay(plan, requests, sizes, cache,
                 caps={None: Fraction(budget.bandwidth_hz) * Fraction(budget.link_rate_bps_per_hz)})
    return ContentRateReport(
        delivered_bits=out.delivered_bits,
        content_rate=Fraction(out.delivered_bits) / budget.resource,
        satisfied_users=out.satisfied_users,
        unsatisfied_users=out.unsatisfied_users,
    )
