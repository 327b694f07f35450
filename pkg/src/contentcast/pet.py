"""Priority Encoding Transmission over GF(2^8).

L prioritized segments are spread over N packets of Gamma byte symbols each.
Segment l is cut into blocks of k_l = ceil(rho_l * N) symbols; each block is
expanded by a systematic MDS code to N symbols, one per packet, so any k_l
packets recover the segment and fewer never do.

Packet layout inside each payload::

    | seg 0 slots | seg 1 slots | ... |   (slot b of seg l = block b's symbol)
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import gf256
from .errors import BadDistribution, BadPriority, CorruptPacket, DuplicateIndex, FieldLimit, Infeasible

MAGIC = b"PE"
WIRE_VERSION = 1
HEADER = struct.Struct(">2sBBBI")
MAX_PACKETS = 255


@dataclass(frozen=True)
class PriorityProfile:
    rhos: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "rhos", tuple(self.rhos))
        for r in self.rhos:
            if not (0 < r <= 1) or math.isnan(r):
                raise BadPriority(f"priority index {r!r} outside (0, 1]")

    def __len__(self):
        return len(self.rhos)


@dataclass(frozen=True)
class SegmentSlot:
    segment_id: int
    size_bits: int
    k: int
    slots_offset: int
    slots_len: int

    @property
    def symbols(self) -> int:
        return -(-self.size_bits // 8)

    @property
    def blocks(self) -> int:
        return self.slots_len


@dataclass(frozen=True)
class PetLayout:
    n_packets: int
    packet_symbols: int
    segments: tuple[SegmentSlot, ...]

    def segment(self, segment_id: int) -> SegmentSlot:
        for s in self.segments:
            if s.segment_id == segment_id:
                return s
        raise KeyError(segment_id)

    def to_json(self) -> dict:
        return {
            "n": self.n_packets,
            "gamma": self.packet_symbols,
            "segments": [
                {"id": s.segment_id, "size_bits": s.size_bits, "k": s.k,
                 "slots_offset": s.slots_offset, "slots_len": s.slots_len}
                for s in self.segments
            ],
        }

    @classmethod
    def from_json(cls, d: dict) -> "PetLayout":
        segs = tuple(
            SegmentSlot(int(s["id"]), int(s["size_bits"]), int(s["k"]),
                        int(s["slots_offset"]), int(s["slots_len"]))
            for s in d["segments"]
        )
        layout = cls(int(d["n"]), int(d["gamma"]), segs)
        _check_layout(layout)
        return layout

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class PetPacket:
    index: int
    payload: bytes

    def to_bytes(self, layout: PetLayout) -> bytes:
        if len(self.payload) != layout.packet_symbols:
            raise CorruptPacket(f"packet {self.index}: payload {len(self.payload)} != gamma {layout.packet_symbols}")
        return HEADER.pack(MAGIC, WIRE_VERSION, self.index, layout.n_packets,
                           layout.packet_symbols) + bytes(self.payload)

    @classmethod
    def from_bytes(cls, raw: bytes) -> tuple["PetPacket", int]:
        """Parse one wire packet; returns the packet and the N it declares."""
        if len(raw) < HEADER.size:
            raise CorruptPacket("truncated header")
        magic, version, index, n, gamma = HEADER.unpack_from(raw)
        if magic != MAGIC:
            raise CorruptPacket(f"bad magic {magic!r}")
        if version != WIRE_VERSION:
            raise CorruptPacket(f"unsupported version {version}")
        payload = raw[HEADER.size:]
        if len(payload) != gamma:
            raise CorruptPacket(f"packet {index}: payload {len(payload)} != gamma {gamma}")
        if index >= n:
            raise CorruptPacket(f"packet index {index} >= N={n}")
        return cls(index, bytes(payload)), n


class _NotYetDecodable:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "NotYetDecodable"

    def __bool__(self):
        return False


NotYetDecodable = _NotYetDecodable()


def threshold(rho: float, n_packets: int) -> int:
    # exact rational product, so 0.3 * 10 gives 3 rather than ceil(3.0000000000000004)
    return math.ceil(Fraction(rho) * n_packets)


def _check_n(n_packets: int) -> None:
    if n_packets > MAX_PACKETS:
        raise FieldLimit(f"N={n_packets} exceeds {MAX_PACKETS} (GF(256) code length)")
    if n_packets < 1:
        raise FieldLimit(f"N={n_packets} must be at least 1")


def _check_layout(layout: PetLayout) -> None:
    _check_n(layout.n_packets)
    end = 0
    for s in sorted(layout.segments, key=lambda s: s.slots_offset):
        if s.slots_offset < end:
            raise CorruptPacket(f"segment {s.segment_id} slots overlap")
        if not 1 <= s.k <= layout.n_packets:
            raise CorruptPacket(f"segment {s.segment_id}: k={s.k} outside [1, N]")
        if s.slots_len * s.k < s.symbols:
            raise CorruptPacket(f"segment {s.segment_id}: slots too short")
        end = s.slots_offset + s.slots_len
    if end > layout.packet_symbols:
        raise CorruptPacket("segment slots exceed packet size")


def pet_layout(segment_sizes_bits: Sequence[int], profile: PriorityProfile, n_packets: int,
               segment_ids: Sequence[int] | None = None) -> PetLayout:
    """Minimal-Gamma layout; segments are packed in input order."""
    _check_n(n_packets)
    if len(segment_sizes_bits) != len(profile):
        raise BadPriority(f"{len(profile)} priorities for {len(segment_sizes_bits)} segments")
    ids = list(range(len(segment_sizes_bits))) if segment_ids is None else list(segment_ids)
    segs = []
    offset = 0
    for sid, bits, rho in zip(ids, segment_sizes_bits, profile.rhos):
        if bits < 1:
            raise ValueError(f"segment {sid} has non-positive size {bits}")
        k = threshold(rho, n_packets)
        if k > n_packets:
            raise Infeasible(f"segment {sid}: k={k} > N={n_packets}")
        slots = -(-(-(-bits // 8)) // k)
        segs.append(SegmentSlot(sid, int(bits), k, offset, slots))
        offset += slots
    return PetLayout(n_packets, offset, tuple(segs))


def pet_feasible(segment_sizes_bits: Sequence[int], profile: PriorityProfile, n_packets: int) -> int:
    """Smallest packet size Gamma (in symbols) that carries every segment."""
    return pet_layout(segment_sizes_bits, profile, n_packets).packet_symbols


def pet_encode(segments: Sequence[bytes], profile: PriorityProfile,
               n_packets: int) -> tuple[PetLayout, list[PetPacket]]:
    layout = pet_layout([8 * len(s) for s in segments], profile, n_packets)
    n = n_packets
    out = np.zeros((n, layout.packet_symbols), dtype=np.uint8)
    for seg, data in zip(layout.segments, segments):
        padded = np.zeros(seg.slots_len * seg.k, dtype=np.uint8)
        padded[:len(data)] = np.frombuffer(bytes(data), dtype=np.uint8)
        # column b is source block b
        blocks = padded.reshape(seg.slots_len, seg.k).T
        coded = gf256.matmul(gf256.systematic_generator(n, seg.k), blocks)
        out[:, seg.slots_offset:seg.slots_offset + seg.slots_len] = coded
    return layout, [PetPacket(i, out[i].tobytes()) for i in range(n)]


def decodable_segments(layout: PetLayout, n_distinct: int) -> list[int]:
    """Segment ids recoverable from any ``n_distinct`` distinct packets."""
    return [s.segment_id for s in layout.segments if n_distinct >= s.k]


def pet_decode(layout: PetLayout, packets: Iterable[PetPacket]) -> dict[int, bytes | _NotYetDecodable]:
    packets = list(packets)
    by_index: dict[int, bytes] = {}
    for p in packets:
        if len(p.payload) != layout.packet_symbols:
            raise CorruptPacket(f"packet {p.index}: payload {len(p.payload)} != gamma {layout.packet_symbols}")
        if not 0 <= p.index < layout.n_packets:
            raise CorruptPacket(f"packet index {p.index} outside [0, {layout.n_packets})")
        if p.index in by_index:
            raise DuplicateIndex(f"packet index {p.index} repeated")
        by_index[p.index] = p.payload
    have = sorted(by_index)
    result: dict[int, bytes | _NotYetDecodable] = {}
    for seg in layout.segments:
        if len(have) < seg.k:
            result[seg.segment_id] = NotYetDecodable
            continue
        rows = tuple(have[:seg.k])
        recv = np.array(
            [np.frombuffer(by_index[i], dtype=np.uint8)[seg.slots_offset:seg.slots_offset + seg.slots_len]
             for i in rows], dtype=np.uint8)
        blocks = gf256.matmul(gf256.decoding_matrix(layout.n_packets, seg.k, rows), recv)
        result[seg.segment_id] = blocks.T.reshape(-1)[:seg.symbols].tobytes()
    return result


def assign_priorities(popularities: Sequence[float], rho_floor: float) -> PriorityProfile:
    """Rank-linear map from popularity to priority index.

    Distinct popularity values are ranked densely from most popular (rank 0)
    to least popular (rank D-1); rank r maps to
    ``rho_floor + (1 - rho_floor) * r / (D - 1)``. A single popularity class
    maps to 1.0.
    """
    if not 0 < rho_floor <= 1:
        raise BadDistribution(f"rho_floor {rho_floor!r} outside (0, 1]")
    pops = [float(p) for p in popularities]
    if not pops:
        raise BadDistribution("empty popularity vector")
    if any(p < 0 or math.isnan(p) for p in pops):
        raise BadDistribution("negative popularity")
    if abs(math.fsum(pops) - 1.0) > 1e-9:
        raise BadDistribution(f"popularities sum to {math.fsum(pops)!r}, not 1")
    levels = sorted(set(pops), reverse=True)
    if len(levels) == 1:
        return PriorityProfile(tuple(1.0 for _ in pops))
    rank = {p: i for i, p in enumerate(levels)}
    top = len(levels) - 1
    # interpolate from the top so the least popular level lands on exactly 1.0
    return PriorityProfile(tuple(1.0 - (1 - rho_floor) * (top - rank[p]) / top for p in pops))
