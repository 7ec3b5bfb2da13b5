"""End-to-end run: ingest -> reassemble -> decode -> detect -> classify -> export."""

from __future__ import annotations

import csv
import json
import logging
import time
from collections import Counter
from dataclasses import dataclass, field, fields
from pathlib import Path

from .decode import DecodeConfig
from .detect import DEFAULT_VERIFICATION_HOSTS, SeverityRules, Severity, analyze
from .ingest import CaptureReader, CaptureStats, GeoTable, UNKNOWN_GEO, local_date, parse_tz
from .reassembly import DEFAULT_SESSION_GAP, reassemble_all
from .records import DetectionRecord, EndpointRecord, write_records
from .temporal import DEFAULT_THRESHOLD

log = logging.getLogger(__name__)

INCOMPLETE_MARKER = "INCOMPLETE"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    inputs: list[Path] = field(default_factory=list)
    geo_db: Path | None = None
    tz: str = "UTC"
    session_gap: float = DEFAULT_SESSION_GAP
    max_depth: int = 5
    placeholder_iterations: int = 16
    base64_min_run: int = 16
    jndi_weight: float = 2.0
    ldap_weight: float = 1.0
    l2_hosts: tuple[str, ...] = DEFAULT_VERIFICATION_HOSTS
    threshold: float = DEFAULT_THRESHOLD
    out: Path = Path("out")
    figures: bool = True

    def validate(self) -> None:
        for name in ("session_gap", "max_depth", "placeholder_iterations", "base64_min_run",
                     "jndi_weight", "ldap_weight", "threshold"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.threshold > 100:
            raise ConfigError("threshold is a percentage and must be <= 100")
        try:
            parse_tz(self.tz)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def decode_config(self) -> DecodeConfig:
        return DecodeConfig(max_depth=self.max_depth, placeholder_iterations=self.placeholder_iterations,
                            base64_min_run=self.base64_min_run, jndi_weight=self.jndi_weight,
                            ldap_weight=self.ldap_weight)

    @property
    def rules(self) -> SeverityRules:
        return SeverityRules(verification_hosts=tuple(self.l2_hosts))


# key in the flat config file -> converter
_CONFIG_KEYS = {
    "input": lambda v: [Path(p.strip()) for p in v.split(",") if p.strip()],
    "geo_db": lambda v: Path(v) if v else None,
    "tz": str,
    "session_gap": float,
    "max_depth": int,
    "placeholder_iterations": int,
    "base64_min_run": int,
    "jndi_weight": float,
    "ldap_weight": float,
    "l2_hosts": lambda v: tuple(h.strip() for h in v.split(",") if h.strip()),
    "threshold": float,
    "out": Path,
    "figures": lambda v: v.strip().lower() in ("1", "true", "yes", "on"),
}


def load_config_file(path: str | Path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path) as fp:
        for lineno, line in enumerate(fp, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown or malformed entry {line!r}")
            try:
                values["inputs" if key == "input" else key] = _CONFIG_KEYS[key](value.strip())
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    return values


def make_config(file_values: dict | None = None, **overrides) -> RunConfig:
    """Defaults, then config-file values, then non-None overrides."""
    cfg = RunConfig()
    known = {f.name for f in fields(RunConfig)}
    for source in (file_values or {}, overrides):
        for key, value in source.items():
            if value is None or key not in known:
                continue
            setattr(cfg, key, value)
    cfg.inputs = [Path(p) for p in cfg.inputs]
    cfg.out = Path(cfg.out)
    cfg.validate()
    return cfg


@dataclass
class RunSummary:
    files: int = 0
    packets_read: int = 0
    packets_skipped: int = 0
    skipped_non_ipv4: int = 0
    skipped_non_tcp: int = 0
    skipped_malformed: int = 0
    truncated_files: int = 0
    connections: int = 0
    payload_connections: int = 0
    detections: int = 0
    detections_by_tier: dict = field(default_factory=lambda: {"direct": 0, "fragmented": 0, "weak": 0})
    obfuscated: int = 0
    severity: dict = field(default_factory=lambda: {s.value: 0 for s in Severity})
    stage_seconds: dict = field(default_factory=dict)
    status: str = "ok"

    def add_capture(self, stats: CaptureStats) -> None:
        self.files += 1
        self.packets_read += stats.packets
        self.packets_skipped += stats.skipped
        self.skipped_non_ipv4 += stats.skipped_non_ipv4
        self.skipped_non_tcp += stats.skipped_non_tcp
        self.skipped_malformed += stats.skipped_malformed
        self.truncated_files += int(stats.truncated)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def format(self) -> str:
        sev = " ".join(f"{k}={v}" for k, v in self.severity.items())
        tiers = " ".join(f"{k}={v}" for k, v in self.detections_by_tier.items())
        return (
            f"files={self.files} packets={self.packets_read} skipped={self.packets_skipped} "
            f"(non_ipv4={self.skipped_non_ipv4} non_tcp={self.skipped_non_tcp} malformed={self.skipped_malformed})\n"
            f"connections={self.connections} payload_connections={self.payload_connections}\n"
            f"detections={self.detections} obfuscated={self.obfuscated} tiers: {tiers}\n"
            f"severity: {sev}"
        )


class _Timer:
    def __init__(self, sink: dict, name: str):
        self.sink, self.name = sink, name

    def __enter__(self):
        self.start = time.perf_counter()

    def __exit__(self, *exc):
        self.sink[self.name] = round(self.sink.get(self.name, 0.0) + time.perf_counter() - self.start, 6)


def run_pipeline(config: RunConfig) -> tuple[RunSummary, list[DetectionRecord]]:
    """Process every input capture and write artifacts into ``config.out``.

    Files written: ``detections.jsonl``, ``daily_incidence.csv``,
    ``severity.csv`` and ``summary.json``.  An ``INCOMPLETE`` marker exists
    in the output directory for as long as the run has not finished.
    """
    config.validate()
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / INCOMPLETE_MARKER
    marker.write_text("run in progress or failed; outputs in this directory are partial\n")

    summary = RunSummary()
    timings = summary.stage_seconds
    tz = parse_tz(config.tz)

    with _Timer(timings, "geo"):
        geo = GeoTable.load(config.geo_db) if config.geo_db else GeoTable()

    records = []
    with _Timer(timings, "ingest"):
        for path in config.inputs:
            reader = CaptureReader(path)
            records.extend(reader)
            summary.add_capture(reader.stats)

    with _Timer(timings, "reassemble"):
        streams = reassemble_all(records, config.session_gap)
    summary.connections = len(streams)

    decode_cfg, rules = config.decode_config, config.rules
    detections: list[DetectionRecord] = []
    with _Timer(timings, "decode_detect"):
        for stream in streams:
            payload = stream.initiator_bytes
            if not payload:
                continue
            summary.payload_connections += 1
            src, dst = stream.initiator, stream.responder
            verdict = analyze(payload, decode_cfg, rules, dst_ip=dst[0])
            result = verdict.detection
            if result is None:
                continue
            summary.detections += 1
            summary.detections_by_tier[result.tier] += 1
            summary.obfuscated += int(result.obfuscated)
            summary.severity[result.severity.value] += 1
            src_geo = geo.lookup(src[0])
            endpoints = []
            for ep in result.endpoints:
                host_geo = geo.lookup(ep.host) if ep.is_ip_literal else UNKNOWN_GEO
                endpoints.append(EndpointRecord(ep.host, ep.is_ip_literal, ep.port, ep.scheme, ep.path,
                                                host_geo.country_code, host_geo.asn))
            detections.append(DetectionRecord(
                ts=stream.first_ts,
                date=local_date(stream.first_ts, tz),
                src_ip=src[0], src_port=src[1], dst_ip=dst[0], dst_port=dst[1],
                src_country=src_geo.country_code, src_asn=src_geo.asn,
                expressions=[e.normalized or _verbatim(e) for e in result.expressions],
                endpoints=endpoints,
                obfuscated=result.obfuscated,
                weak_only=result.weak_only,
                severity=result.severity.value,
                printable_ratio=result.printable_ratio,
                transform_count=result.valid_transform_count,
                byte_length=result.byte_length,
                matched_candidate=result.matched_candidate,
            ))

    with _Timer(timings, "export"):
        write_records(out / "detections.jsonl", detections)
        daily = Counter(d.date for d in detections)
        with open(out / "daily_incidence.csv", "w", newline="") as fp:
            w = csv.writer(fp, lineterminator="\n")
            w.writerow(["date", "detections"])
            for day in sorted(daily):
                w.writerow([day.isoformat(), daily[day]])
        with open(out / "severity.csv", "w", newline="") as fp:
            w = csv.writer(fp, lineterminator="\n")
            w.writerow(["severity", "count"])
            for level, n in summary.severity.items():
                w.writerow([level, n])
    (out / "summary.json").write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n")
    marker.unlink()
    return summary, detections


def _verbatim(expr) -> str:
    scheme = f"{expr.raw_scheme}://" if expr.raw_scheme else ""
    return f"${{jndi:{scheme}{expr.endpoint_text}}}"
