"""Bidirectional TCP connection reconstruction.

Packets are grouped by a direction-agnostic 4-tuple key, split into sessions
by inter-packet gaps, stripped of retransmissions, and ordered by sequence
number per direction.  No TCP state machine is emulated.
"""

from __future__ import annotations

import ipaddress
import struct
from collections import defaultdict
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Iterator

from .ingest import PacketRecord

Endpoint = tuple[str, int]

SEQ_MOD = 1 << 32
DEFAULT_SESSION_GAP = 300.0


def _endpoint_order(ep: Endpoint) -> tuple[int, int]:
    return (int(ipaddress.IPv4Address(ep[0])), ep[1])


@dataclass(frozen=True)
class ConnectionKey:
    endpoint_a: Endpoint
    endpoint_b: Endpoint
    session_index: int | None = None

    def __post_init__(self):
        if _endpoint_order(self.endpoint_a) > _endpoint_order(self.endpoint_b):
            raise ValueError("endpoint_a must not sort after endpoint_b")

    def with_session(self, index: int) -> "ConnectionKey":
        return ConnectionKey(self.endpoint_a, self.endpoint_b, index)

    def sort_key(self):
        return (_endpoint_order(self.endpoint_a), _endpoint_order(self.endpoint_b),
                -1 if self.session_index is None else self.session_index)


@dataclass
class ReassembledStream:
    key: ConnectionKey
    initiator: Endpoint
    bytes_a_to_b: bytes
    bytes_b_to_a: bytes
    first_ts: int
    last_ts: int
    packet_count: int
    dedup_removed: int = 0
    gaps_a_to_b: int = 0
    gaps_b_to_a: int = 0

    @property
    def responder(self) -> Endpoint:
        a, b = self.key.endpoint_a, self.key.endpoint_b
        return b if self.initiator == a else a

    @property
    def initiator_bytes(self) -> bytes:
        """Bytes sent by the initiator (the scanner, for telescope traffic)."""
        if self.initiator == self.key.endpoint_a:
            return self.bytes_a_to_b
        return self.bytes_b_to_a

    @property
    def has_payload(self) -> bool:
        return bool(self.bytes_a_to_b or self.bytes_b_to_a)


def canonical_key(record: PacketRecord) -> ConnectionKey:
    a, b = record.src, record.dst
    if _endpoint_order(a) > _endpoint_order(b):
        a, b = b, a
    return ConnectionKey(a, b)


def sessionize(records: list[PacketRecord], gap: float = DEFAULT_SESSION_GAP) -> list[list[PacketRecord]]:
    """Split time-sorted packets of one key wherever the gap exceeds ``gap`` seconds."""
    groups: list[list[PacketRecord]] = []
    gap_ns = gap * 1_000_000_000
    prev_ts = None
    for rec in records:
        if prev_ts is None or rec.timestamp - prev_ts > gap_ns:
            groups.append([])
        groups[-1].append(rec)
        prev_ts = rec.timestamp
    return groups


def dedup_retransmissions(packets: Iterable[PacketRecord]) -> tuple[list[PacketRecord], int]:
    """Keep the first packet per (direction, seq, ack, payload_len); return kept and dropped count."""
    seen = set()
    kept = []
    removed = 0
    for pkt in packets:
        ident = (pkt.src, pkt.dst, pkt.seq, pkt.ack, pkt.payload_len)
        if ident in seen:
            removed += 1
            continue
        seen.add(ident)
        kept.append(pkt)
    return kept, removed


def _signed_offset(seq: int, base: int) -> int:
    d = (seq - base) % SEQ_MOD
    return d - SEQ_MOD if d >= SEQ_MOD // 2 else d


def _time_order(packets: list[PacketRecord]) -> list[PacketRecord]:
    return sorted(packets, key=lambda p: (p.timestamp, p.seq, p.payload_len, p.payload))


def _assemble_direction(packets: list[PacketRecord]) -> tuple[bytes, int]:
    """Place one direction's payloads by relative sequence number.

    Overlaps keep the bytes written first in time; holes between placed
    ranges are closed without padding and counted.
    """
    ordered = _time_order(packets)
    syn = next((p for p in ordered if p.tcp_flags & 0x02), None)
    data = [p for p in ordered if p.payload]
    if not data:
        return b"", 0
    base = (syn.seq + 1) % SEQ_MOD if syn is not None else data[0].seq

    # written: sorted, disjoint [start, end) intervals with their bytes
    written: list[tuple[int, int, bytes]] = []
    for pkt in data:
        # payload carried on a SYN starts one past its sequence number
        start = _signed_offset(pkt.seq + (1 if pkt.tcp_flags & 0x02 else 0), base)
        pieces = [(start, start + pkt.payload_len)]
        for ws, we, _ in written:
            nxt = []
            for ps, pe in pieces:
                if we <= ps or ws >= pe:
                    nxt.append((ps, pe))
                    continue
                if ps < ws:
                    nxt.append((ps, ws))
                if we < pe:
                    nxt.append((we, pe))
            pieces = nxt
        for ps, pe in pieces:
            written.append((ps, pe, pkt.payload[ps - start:pe - start]))
        written.sort(key=lambda w: w[0])

    gaps = sum(1 for prev, cur in zip(written, written[1:]) if cur[0] > prev[1])
    return b"".join(w[2] for w in written), gaps


def reassemble(group: list[PacketRecord], dedup_removed: int = 0) -> ReassembledStream:
    if not group:
        raise ValueError("cannot reassemble an empty packet group")
    key = canonical_key(group[0])
    ordered = _time_order(group)
    syn = next((p for p in ordered if p.is_syn), None)
    initiator = (syn or ordered[0]).src

    a_to_b = [p for p in group if p.src == key.endpoint_a and p.dst == key.endpoint_b]
    b_to_a = [p for p in group if not (p.src == key.endpoint_a and p.dst == key.endpoint_b)]
    if key.endpoint_a == key.endpoint_b:
        b_to_a = []
    bytes_ab, gaps_ab = _assemble_direction(a_to_b)
    bytes_ba, gaps_ba = _assemble_direction(b_to_a)
    return ReassembledStream(
        key=key,
        initiator=initiator,
        bytes_a_to_b=bytes_ab,
        bytes_b_to_a=bytes_ba,
        first_ts=ordered[0].timestamp,
        last_ts=ordered[-1].timestamp,
        packet_count=len(group),
        dedup_removed=dedup_removed,
        gaps_a_to_b=gaps_ab,
        gaps_b_to_a=gaps_ba,
    )


def reassemble_all(records: Iterable[PacketRecord], gap: float = DEFAULT_SESSION_GAP) -> list[ReassembledStream]:
    """Group, sessionize, dedup and reassemble every connection in ``records``.

    Streams come back ordered by (first_ts, key) so output is independent of
    input order.
    """
    by_key: dict[ConnectionKey, list[PacketRecord]] = defaultdict(list)
    for rec in records:
        by_key[canonical_key(rec)].append(rec)
    streams = []
    for key, recs in by_key.items():
        recs.sort(key=lambda p: p.timestamp)
        for index, group in enumerate(sessionize(recs, gap)):
            kept, removed = dedup_retransmissions(group)
            stream = reassemble(kept, removed)
            stream.key = key.with_session(index)
            streams.append(stream)
    streams.sort(key=lambda s: (s.first_ts, s.key.sort_key()))
    return streams


# -- debug dump ------------------------------------------------------------
# File: b"JSTR" + u16 version, then per stream:
#   u32 ip_a, u16 port_a, u32 ip_b, u16 port_b, u32 session_index,
#   u32 initiator_ip, u16 initiator_port, u64 first_ts, u64 last_ts,
#   u32 packet_count, u32 dedup_removed, u32 len_ab, u32 len_ba, bytes_ab, bytes_ba
# All integers big-endian.

_DUMP_MAGIC = b"JSTR"
_DUMP_HDR = struct.Struct("!IHIHIIHQQIIII")


def dump_streams(streams: Iterable[ReassembledStream], fp: BinaryIO) -> None:
    fp.write(_DUMP_MAGIC + struct.pack("!H", 1))
    for s in streams:
        ip = lambda ep: int(ipaddress.IPv4Address(ep[0]))  # noqa: E731
        fp.write(_DUMP_HDR.pack(
            ip(s.key.endpoint_a), s.key.endpoint_a[1], ip(s.key.endpoint_b), s.key.endpoint_b[1],
            s.key.session_index or 0, ip(s.initiator), s.initiator[1], s.first_ts, s.last_ts,
            s.packet_count, s.dedup_removed, len(s.bytes_a_to_b), len(s.bytes_b_to_a),
        ))
        fp.write(s.bytes_a_to_b)
        fp.write(s.bytes_b_to_a)


def load_streams(fp: BinaryIO) -> Iterator[ReassembledStream]:
    head = fp.read(6)
    if head[:4] != _DUMP_MAGIC:
        raise ValueError("not a stream dump")
    while True:
        raw = fp.read(_DUMP_HDR.size)
        if not raw:
            return
        if len(raw) < _DUMP_HDR.size:
            raise ValueError("truncated stream dump")
        (ia, pa, ib, pb, idx, ii, pi, first, last, count, removed, lab, lba) = _DUMP_HDR.unpack(raw)
        ab, ba = fp.read(lab), fp.read(lba)
        if len(ab) != lab or len(ba) != lba:
            raise ValueError("truncated stream dump")
        addr = lambda v: str(ipaddress.IPv4Address(v))  # noqa: E731
        yield ReassembledStream(
            key=ConnectionKey((addr(ia), pa), (addr(ib), pb), idx),
            initiator=(addr(ii), pi),
            bytes_a_to_b=ab, bytes_b_to_a=ba,
            first_ts=first, last_ts=last, packet_count=count, dedup_removed=removed,
        )
