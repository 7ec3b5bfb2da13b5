"""Capture ingest: classic pcap reading, offline geolocation, daily partitions.

Only TCP over IPv4 is retained.  Everything else in a capture file is counted
as skipped so that ``emitted + skipped == packets in file`` always holds.
"""

from __future__ import annotations

import bisect
import csv
import ipaddress
import logging
import re
import struct
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone, tzinfo
from pathlib import Path
from typing import Iterable, Iterator

log = logging.getLogger(__name__)

# magic -> (byte order, timestamp fraction units per second)
PCAP_MAGICS = {
    b"\xd4\xc3\xb2\xa1": ("<", 1_000_000),
    b"\xa1\xb2\xc3\xd4": (">", 1_000_000),
    b"\x4d\x3c\xb2\xa1": ("<", 1_000_000_000),
    b"\xa1\xb2\x3c\x4d": (">", 1_000_000_000),
}

LINKTYPE_NULL = 0
LINKTYPE_ETHERNET = 1
LINKTYPE_RAW = 101
LINKTYPE_LINUX_SLL = 113
LINKTYPE_IPV4 = 228

ETHERTYPE_IPV4 = 0x0800
ETHERTYPE_VLAN = (0x8100, 0x88A8, 0x9100)

TCP_FIN = 0x01
TCP_SYN = 0x02
TCP_RST = 0x04
TCP_PSH = 0x08
TCP_ACK = 0x10


class CaptureError(Exception):
    """Capture file is unreadable or not a pcap file."""


class GeoTableError(ValueError):
    """Geolocation table failed validation at load time."""


@dataclass(frozen=True)
class PacketRecord:
    timestamp: int  # ns since epoch
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    tcp_flags: int
    seq: int
    ack: int
    payload: bytes = b""

    def __post_init__(self):
        if self.timestamp <= 0:
            raise ValueError(f"timestamp must be positive, got {self.timestamp}")
        for port in (self.src_port, self.dst_port):
            if not 0 <= port <= 0xFFFF:
                raise ValueError(f"port out of range: {port}")
        if not 0 <= self.tcp_flags <= 0xFF:
            raise ValueError(f"tcp_flags out of range: {self.tcp_flags}")
        if not (0 <= self.seq <= 0xFFFFFFFF and 0 <= self.ack <= 0xFFFFFFFF):
            raise ValueError("seq/ack must be 32-bit unsigned")

    @property
    def payload_len(self) -> int:
        return len(self.payload)

    @property
    def src(self) -> tuple[str, int]:
        return (self.src_ip, self.src_port)

    @property
    def dst(self) -> tuple[str, int]:
        return (self.dst_ip, self.dst_port)

    @property
    def is_syn(self) -> bool:
        """Initial SYN (SYN set, ACK clear)."""
        return bool(self.tcp_flags & TCP_SYN) and not self.tcp_flags & TCP_ACK


@dataclass
class CaptureStats:
    packets: int = 0
    emitted: int = 0
    skipped_non_ipv4: int = 0
    skipped_non_tcp: int = 0
    skipped_malformed: int = 0
    truncated: bool = False

    @property
    def skipped(self) -> int:
        return self.skipped_non_ipv4 + self.skipped_non_tcp + self.skipped_malformed

    def merge(self, other: "CaptureStats") -> None:
        self.packets += other.packets
        self.emitted += other.emitted
        self.skipped_non_ipv4 += other.skipped_non_ipv4
        self.skipped_non_tcp += other.skipped_non_tcp
        self.skipped_malformed += other.skipped_malformed
        self.truncated = self.truncated or other.truncated


class _Skip(Exception):
    def __init__(self, reason: str):
        self.reason = reason


def _ipv4_from_frame(frame: bytes, linktype: int, order: str) -> bytes:
    """Strip the link layer and return the IPv4 datagram, or raise _Skip."""
    if linktype == LINKTYPE_ETHERNET:
        if len(frame) < 14:
            raise _Skip("malformed")
        ethertype = int.from_bytes(frame[12:14], "big")
        offset = 14
        while ethertype in ETHERTYPE_VLAN:
            if len(frame) < offset + 4:
                raise _Skip("malformed")
            ethertype = int.from_bytes(frame[offset + 2:offset + 4], "big")
            offset += 4
        if ethertype != ETHERTYPE_IPV4:
            raise _Skip("non_ipv4")
        return frame[offset:]
    if linktype in (LINKTYPE_RAW, LINKTYPE_IPV4):
        return frame
    if linktype == LINKTYPE_LINUX_SLL:
        if len(frame) < 16:
            raise _Skip("malformed")
        if int.from_bytes(frame[14:16], "big") != ETHERTYPE_IPV4:
            raise _Skip("non_ipv4")
        return frame[16:]
    if linktype == LINKTYPE_NULL:
        if len(frame) < 4:
            raise _Skip("malformed")
        # host byte order of the writer; AF_INET is 2 everywhere
        family = struct.unpack(order + "I", frame[:4])[0]
        if family != 2:
            raise _Skip("non_ipv4")
        return frame[4:]
    raise _Skip("non_ipv4")


def parse_frame(frame: bytes, linktype: int, timestamp: int, order: str = "<") -> PacketRecord:
    """Decode one link-layer frame into a PacketRecord (raises _Skip)."""
    ip = _ipv4_from_frame(frame, linktype, order)
    if len(ip) < 20 or ip[0] >> 4 != 4:
        raise _Skip("non_ipv4" if ip and ip[0] >> 4 != 4 else "malformed")
    ihl = (ip[0] & 0x0F) * 4
    total_len = int.from_bytes(ip[2:4], "big")
    if ihl < 20 or len(ip) < ihl:
        raise _Skip("malformed")
    if ip[9] != 6:
        raise _Skip("non_tcp")
    frag = int.from_bytes(ip[6:8], "big")
    if frag & 0x1FFF:
        # non-first fragment: no TCP header present
        raise _Skip("malformed")
    # total_len bounds the datagram (drops ethernet padding); 0 means TSO
    end = min(len(ip), total_len) if total_len >= ihl else len(ip)
    tcp = ip[ihl:end]
    if len(tcp) < 20:
        raise _Skip("malformed")
    data_off = (tcp[12] >> 4) * 4
    if data_off < 20 or len(tcp) < data_off:
        raise _Skip("malformed")
    if timestamp <= 0:
        raise _Skip("malformed")
    src_port, dst_port, seq, ack = struct.unpack("!HHII", tcp[:12])
    return PacketRecord(
        timestamp=timestamp,
        src_ip=str(ipaddress.IPv4Address(ip[12:16])),
        dst_ip=str(ipaddress.IPv4Address(ip[16:20])),
        src_port=src_port,
        dst_port=dst_port,
        tcp_flags=tcp[13],
        seq=seq,
        ack=ack,
        payload=bytes(tcp[data_off:]),
    )


class CaptureReader:
    """Iterate the TCP/IPv4 packets of a classic pcap file in file order.

    Counters in ``stats`` are final once iteration is exhausted.  A truncated
    final record is logged, dropped, and ends the stream cleanly.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.stats = CaptureStats()
        try:
            with open(self.path, "rb") as fp:
                header = fp.read(24)
        except OSError as exc:
            raise CaptureError(f"cannot read capture {self.path}: {exc}") from exc
        if len(header) < 24 or header[:4] not in PCAP_MAGICS:
            raise CaptureError(f"{self.path}: not a pcap file (bad magic {header[:4].hex()})")
        self.byte_order, self.ts_units = PCAP_MAGICS[header[:4]]
        self.linktype = struct.unpack(self.byte_order + "I", header[20:24])[0] & 0x0FFFFFFF

    def __iter__(self) -> Iterator[PacketRecord]:
        rec_hdr = struct.Struct(self.byte_order + "IIII")
        scale = 1_000_000_000 // self.ts_units
        try:
            fp = open(self.path, "rb")
        except OSError as exc:
            raise CaptureError(f"cannot read capture {self.path}: {exc}") from exc
        with fp:
            fp.seek(24)
            while True:
                hdr = fp.read(rec_hdr.size)
                if not hdr:
                    return
                if len(hdr) < rec_hdr.size:
                    self._truncated("record header")
                    return
                ts_sec, ts_frac, incl_len, _orig_len = rec_hdr.unpack(hdr)
                frame = fp.read(incl_len)
                if len(frame) < incl_len:
                    self._truncated("packet data")
                    return
                self.stats.packets += 1
                timestamp = ts_sec * 1_000_000_000 + ts_frac * scale
                try:
                    record = parse_frame(frame, self.linktype, timestamp, self.byte_order)
                except _Skip as skip:
                    setattr(self.stats, "skipped_" + skip.reason,
                            getattr(self.stats, "skipped_" + skip.reason) + 1)
                    continue
                self.stats.emitted += 1
                yield record

    def _truncated(self, what: str) -> None:
        self.stats.truncated = True
        log.warning("%s: truncated %s at end of file, final packet dropped", self.path, what)


def read_capture(path: str | Path) -> CaptureReader:
    """Open a capture; iterate the returned reader for PacketRecords."""
    return CaptureReader(path)


def write_capture(path: str | Path, records: Iterable[PacketRecord], nanosecond: bool = False) -> None:
    """Write records as an Ethernet pcap (little-endian). Used for fixtures and exports."""
    magic = b"\x4d\x3c\xb2\xa1" if nanosecond else b"\xd4\xc3\xb2\xa1"
    units = 1_000_000_000 if nanosecond else 1_000_000
    with open(path, "wb") as fp:
        fp.write(magic + struct.pack("<HHiIII", 2, 4, 0, 0, 262144, LINKTYPE_ETHERNET))
        for rec in records:
            frame = build_frame(rec)
            sec, frac = divmod(rec.timestamp, 1_000_000_000)
            frac = frac * units // 1_000_000_000
            fp.write(struct.pack("<IIII", sec, frac, len(frame), len(frame)))
            fp.write(frame)


def build_frame(rec: PacketRecord) -> bytes:
    tcp = struct.pack("!HHIIBBHHH", rec.src_port, rec.dst_port, rec.seq, rec.ack,
                      5 << 4, rec.tcp_flags, 65535, 0, 0) + rec.payload
    ip = struct.pack("!BBHHHBBH4s4s", 0x45, 0, 20 + len(tcp), 0, 0x4000, 64, 6, 0,
                     ipaddress.IPv4Address(rec.src_ip).packed,
                     ipaddress.IPv4Address(rec.dst_ip).packed)
    eth = b"\x00\x11\x22\x33\x44\x55" + b"\x66\x77\x88\x99\xaa\xbb" + b"\x08\x00"
    return eth + ip + tcp


# -- geolocation -----------------------------------------------------------

_CC_RE = re.compile(r"^[A-Z]{2}$")


@dataclass(frozen=True)
class GeoInfo:
    country_code: str = "ZZ"
    asn: int = 0

    def __post_init__(self):
        if not _CC_RE.match(self.country_code):
            raise ValueError(f"bad country code {self.country_code!r}")
        if self.asn < 0:
            raise ValueError(f"bad asn {self.asn}")


UNKNOWN_GEO = GeoInfo("ZZ", 0)


def _ip_int(value) -> int:
    """Range bound given as an integer or a dotted quad."""
    if isinstance(value, str) and "." in value:
        return int(ipaddress.IPv4Address(value.strip()))
    return int(value)


@dataclass
class GeoTable:
    """Sorted, non-overlapping inclusive IPv4 ranges mapped to GeoInfo."""

    starts: list[int] = field(default_factory=list)
    ends: list[int] = field(default_factory=list)
    infos: list[GeoInfo] = field(default_factory=list)

    @classmethod
    def from_rows(cls, rows: Iterable[tuple[int, int, str, int]]) -> "GeoTable":
        parsed = []
        for n, row in enumerate(rows, 1):
            try:
                start, end, cc, asn = row
                start, end, asn = _ip_int(start), _ip_int(end), int(asn)
                info = GeoInfo(str(cc).strip(), asn)
            except (TypeError, ValueError) as exc:
                raise GeoTableError(f"row {n}: {exc}") from exc
            if not (0 <= start <= end <= 0xFFFFFFFF):
                raise GeoTableError(f"row {n}: bad range {start}-{end}")
            parsed.append((start, end, info))
        parsed.sort(key=lambda r: r[0])
        for prev, cur in zip(parsed, parsed[1:]):
            if cur[0] <= prev[1]:
                raise GeoTableError(f"overlapping ranges {prev[0]}-{prev[1]} and {cur[0]}-{cur[1]}")
        table = cls()
        for start, end, info in parsed:
            table.starts.append(start)
            table.ends.append(end)
            table.infos.append(info)
        return table

    @classmethod
    def load(cls, path: str | Path) -> "GeoTable":
        """Load a headerless CSV of ``range_start,range_end,country_code,asn``.

        Bounds are inclusive and may be integers or dotted quads.
        """
        try:
            with open(path, newline="") as fp:
                rows = []
                for n, row in enumerate(csv.reader(fp), 1):
                    if not row or (len(row) == 1 and not row[0].strip()):
                        continue
                    if len(row) != 4:
                        raise GeoTableError(f"{path}: row {n}: expected 4 columns, got {len(row)}")
                    rows.append([c.strip() for c in row])
        except OSError as exc:
            raise GeoTableError(f"cannot read geolocation table {path}: {exc}") from exc
        return cls.from_rows(rows)

    def lookup(self, ip: str | int) -> GeoInfo:
        value = int(ipaddress.IPv4Address(ip))
        i = bisect.bisect_right(self.starts, value) - 1
        if i >= 0 and value <= self.ends[i]:
            return self.infos[i]
        return UNKNOWN_GEO

    def __len__(self) -> int:
        return len(self.starts)


def enrich_geo(ip: str | int, db: GeoTable) -> GeoInfo:
    return db.lookup(ip)


# -- daily partitions ------------------------------------------------------

_OFFSET_RE = re.compile(r"^(?:UTC|GMT)?([+-])(\d{1,2}):?(\d{2})?$")


def parse_tz(text: str | tzinfo | None) -> tzinfo:
    """Accept ``UTC``, ``+05:30``, ``-0800``, ``UTC+5`` or an IANA zone name."""
    if text is None:
        return timezone.utc
    if isinstance(text, tzinfo):
        return text
    text = text.strip()
    if text.upper() in ("UTC", "Z", "GMT", ""):
        return timezone.utc
    m = _OFFSET_RE.match(text.upper())
    if m:
        sign = -1 if m.group(1) == "-" else 1
        delta = timedelta(hours=int(m.group(2)), minutes=int(m.group(3) or 0))
        return timezone(sign * delta)
    from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

    try:
        return ZoneInfo(text)
    except (ZoneInfoNotFoundError, ValueError) as exc:
        raise ValueError(f"unknown timezone {text!r}") from exc


def local_date(timestamp_ns: int, tz: tzinfo) -> date:
    sec = timestamp_ns // 1_000_000_000
    return datetime.fromtimestamp(sec, tz).date()


@dataclass
class DailyPartition:
    date: date
    records: list[PacketRecord]


def partition_daily(records: Iterable[PacketRecord], tz: str | tzinfo | None = None) -> list[DailyPartition]:
    tz = parse_tz(tz)
    days: dict[date, list[PacketRecord]] = defaultdict(list)
    for rec in records:
        days[local_date(rec.timestamp, tz)].append(rec)
    return [DailyPartition(d, days[d]) for d in sorted(days)]
