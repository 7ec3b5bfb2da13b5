"""Detection record schema: one JSON object per line."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from datetime import date
from pathlib import Path
from typing import Iterable, Iterator

log = logging.getLogger(__name__)

RECORD_FIELDS = (
    "ts", "date", "src_ip", "src_port", "dst_ip", "dst_port", "src_country", "src_asn",
    "expressions", "endpoints", "obfuscated", "weak_only", "severity",
    "printable_ratio", "transform_count", "byte_length", "matched_candidate",
)


@dataclass
class EndpointRecord:
    host: str
    is_ip: bool
    port: int
    scheme: str
    path: str
    host_country: str = "ZZ"
    host_asn: int = 0


@dataclass
class DetectionRecord:
    ts: int
    date: date
    src_ip: str
    src_port: int
    dst_ip: str
    dst_port: int
    src_country: str
    src_asn: int
    expressions: list[str]
    endpoints: list[EndpointRecord]
    obfuscated: bool
    weak_only: bool
    severity: str
    printable_ratio: float
    transform_count: int
    byte_length: int
    matched_candidate: int

    def to_json(self) -> str:
        obj = {
            "ts": self.ts,
            "date": self.date.isoformat(),
            "src_ip": self.src_ip,
            "src_port": self.src_port,
            "dst_ip": self.dst_ip,
            "dst_port": self.dst_port,
            "src_country": self.src_country,
            "src_asn": self.src_asn,
            "expressions": list(self.expressions),
            "endpoints": [asdict(ep) for ep in self.endpoints],
            "obfuscated": self.obfuscated,
            "weak_only": self.weak_only,
            "severity": self.severity,
            "printable_ratio": round(self.printable_ratio, 6),
            "transform_count": self.transform_count,
            "byte_length": self.byte_length,
            "matched_candidate": self.matched_candidate,
        }
        return json.dumps(obj, ensure_ascii=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "DetectionRecord":
        obj = json.loads(line)
        missing = [f for f in RECORD_FIELDS if f not in obj]
        if missing:
            raise ValueError(f"record missing fields: {', '.join(missing)}")
        if obj["severity"] not in ("L1", "L2", "L3", "L4", "L5"):
            raise ValueError(f"bad severity {obj['severity']!r}")
        return cls(
            ts=int(obj["ts"]),
            date=date.fromisoformat(obj["date"]),
            src_ip=obj["src_ip"],
            src_port=int(obj["src_port"]),
            dst_ip=obj["dst_ip"],
            dst_port=int(obj["dst_port"]),
            src_country=obj["src_country"] or "ZZ",
            src_asn=int(obj["src_asn"] or 0),
            expressions=list(obj["expressions"]),
            endpoints=[EndpointRecord(**ep) for ep in obj["endpoints"]],
            obfuscated=bool(obj["obfuscated"]),
            weak_only=bool(obj["weak_only"]),
            severity=obj["severity"],
            printable_ratio=float(obj["printable_ratio"]),
            transform_count=int(obj["transform_count"]),
            byte_length=int(obj["byte_length"]),
            matched_candidate=int(obj["matched_candidate"]),
        )


def write_records(path: str | Path, records: Iterable[DetectionRecord]) -> int:
    n = 0
    with open(path, "w", newline="\n") as fp:
        for rec in records:
            fp.write(rec.to_json() + "\n")
            n += 1
    return n


def iter_records(path: str | Path, errors: list[str] | None = None) -> Iterator[DetectionRecord]:
    """Yield records; malformed lines are logged, collected in ``errors`` and skipped."""
    with open(path) as fp:
        for lineno, line in enumerate(fp, 1):
            if not line.strip():
                continue
            try:
                yield DetectionRecord.from_json(line)
            except (ValueError, TypeError, KeyError) as exc:
                msg = f"{path}:{lineno}: {exc}"
                log.warning("skipping malformed record %s", msg)
                if errors is not None:
                    errors.append(msg)


def load_records(paths: Iterable[str | Path]) -> tuple[list[DetectionRecord], list[str]]:
    errors: list[str] = []
    records = [rec for p in paths for rec in iter_records(p, errors)]
    return records, errors
