"""Zipf catalogs and seeded request traces.

Randomness comes from a single generator, ``numpy.random.Philox`` (the
Philox-4x64 counter-based PRNG) keyed by the trace seed. Each user consumes
a fixed-size row of uniforms, so the first K users of a trace are identical
whatever the total number of users. This prefix property is what lets the
capacity search treat "all users served" as monotone in K.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .catalog import ContentObject, ServiceRequest
from .errors import ConfigError, TooFewObjects, ZeroItems

PRNG_NAME = "philox4x64"


@dataclass(frozen=True)
class ZipfParams:
    exponent_s: float
    n_items: int

    def __post_init__(self):
        if not self.exponent_s >= 0:
            raise ConfigError(f"Zipf exponent must be >= 0, got {self.exponent_s!r}")
        if self.n_items < 1:
            raise ZeroItems("Zipf distribution needs at least one item")


@dataclass(frozen=True)
class TraceConfig:
    n_users: int
    horizon_s: float
    requests_per_user: int = 1
    objects_per_request: int = 1
    seed: int = 0
    earliest_request_s: float = 0.0

    def __post_init__(self):
        if self.n_users < 0:
            raise ConfigError("n_users must be non-negative")
        if not self.horizon_s > 0:
            raise ConfigError("horizon_s must be positive")
        if self.requests_per_user < 1 or self.objects_per_request < 1:
            raise ConfigError("requests_per_user and objects_per_request must be positive")
        if not 0 <= self.earliest_request_s < self.horizon_s:
            raise ConfigError("earliest_request_s must lie in [0, horizon_s)")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")


def zipf_pmf(params: ZipfParams) -> list[float]:
    """p_i proportional to 1/i^s; index 0 is the most popular item."""
    if params.n_items < 1:
        raise ZeroItems("Zipf distribution needs at least one item")
    w = [1.0 / (i ** params.exponent_s) for i in range(1, params.n_items + 1)]
    total = math.fsum(w)
    return [x / total for x in w]


def make_catalog(sizes_bits: int | Sequence[int], n_items: int | None = None) -> list[ContentObject]:
    """Catalog with ids 0..L-1 in popularity-rank order."""
    if isinstance(sizes_bits, int):
        if n_items is None:
            raise ConfigError("n_items required with a scalar size")
        sizes_bits = [sizes_bits] * n_items
    return [ContentObject(i, int(b)) for i, b in enumerate(sizes_bits)]


def rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def trial_seed(seed: int, trial: int) -> int:
    """Independent 64-bit seed for trial ``trial`` of a base seed."""
    return int(np.random.SeedSequence([seed, trial]).generate_state(1, np.uint64)[0])


def generate_trace(catalog: Sequence[ContentObject], params: ZipfParams,
                   cfg: TraceConfig) -> list[ServiceRequest]:
    """Seeded trace of ``cfg.n_users * cfg.requests_per_user`` requests.

    Times are uniform on (t0, T] with t0 = ``cfg.earliest_request_s``
    (0 by default). Objects within one request are drawn by Zipf
    weight without replacement, using exponential keys ``E_i / p_i`` and
    taking the m smallest (equivalent to successive weighted draws).
    """
    if len(catalog) != params.n_items:
        raise ConfigError(f"catalog has {len(catalog)} objects but Zipf covers {params.n_items}")
    m = cfg.objects_per_request
    if m > params.n_items:
        raise TooFewObjects(f"{m} objects per request from a catalog of {params.n_items}")
    L, R, K = params.n_items, cfg.requests_per_user, cfg.n_users
    p = np.asarray(zipf_pmf(params))
    u = rng(cfg.seed).random((K, R * (1 + L)))
    t0 = cfg.earliest_request_s
    # 1 - u lies in (0, 1], so times stay strictly after t0 (and after 0)
    times = np.minimum(t0 + (cfg.horizon_s - t0) * (1.0 - u[:, :R]), cfg.horizon_s)
    keys = -np.log1p(-u[:, R:].reshape(K, R, L)) / p
    picks = np.argsort(keys, axis=2, kind="stable")[:, :, :m]
    ids = [o.id for o in catalog]
    out = []
    for k in range(K):
        for r in range(R):
            out.append(ServiceRequest(k, float(times[k, r]), frozenset(ids[j] for j in picks[k, r].tolist())))
    return out


def request_frequencies(requests: Sequence[ServiceRequest], n_items: int) -> list[float]:
    """Empirical share of requests naming each object id."""
    counts = [0] * n_items
    for r in requests:
        for o in r.object_ids:
            counts[o] += 1
    total = sum(counts)
    return [c / total if total else 0.0 for c in counts]
