"""Infrastructure views over detection records.

Callback-host timelines, lifetime x volume matrices, scanner reuse summaries,
cumulative unique counts, share tables and scanner/host country cross-tabs.
Buckets are left-closed, right-open with the last bucket open-ended;
quantiles use linear interpolation between order statistics.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date
from typing import Any, Hashable, Iterable, Sequence

import numpy as np

DIMENSIONS = ("scanner_country", "host_country", "dst_port", "protocol", "asn")
PERIODS = ("year", "month", "all")

DEFAULT_LIFETIME_EDGES = (1, 2, 8, 31, 181)
DEFAULT_VOLUME_EDGES = (1, 10, 100, 1000, 10000)


@dataclass
class HostTimeline:
    host: str
    first_seen: date
    last_seen: date
    request_volume: int
    distinct_scanners: int

    @property
    def lifetime_days(self) -> int:
        return (self.last_seen - self.first_seen).days + 1


def callback_timelines(detections: Iterable[tuple[date, str, Any]]) -> list[HostTimeline]:
    """One timeline per literal host string; volume counts detections referencing the host."""
    first: dict[str, date] = {}
    last: dict[str, date] = {}
    volume: Counter = Counter()
    scanners: dict[str, set] = defaultdict(set)
    for day, scanner_ip, result in detections:
        for host in {ep.host for ep in result.endpoints}:
            if host not in first or day < first[host]:
                first[host] = day
            if host not in last or day > last[host]:
                last[host] = day
            volume[host] += 1
            scanners[host].add(scanner_ip)
    return [HostTimeline(h, first[h], last[h], volume[h], len(scanners[h])) for h in sorted(first)]


def bucket_index(value: float, edges: Sequence[float]) -> int:
    """Left-closed bucket of ``value``; below the first edge clamps to 0, beyond the last to the final bucket."""
    i = int(np.searchsorted(edges, value, side="right")) - 1
    return min(max(i, 0), len(edges) - 1)


def _check_edges(edges: Sequence[float]) -> None:
    if len(edges) == 0 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError(f"bucket edges must be non-empty and strictly increasing: {edges}")


def lifetime_volume_matrix(timelines: Iterable[HostTimeline],
                           lifetime_edges: Sequence[float] = DEFAULT_LIFETIME_EDGES,
                           volume_edges: Sequence[float] = DEFAULT_VOLUME_EDGES) -> np.ndarray:
    """Host counts with rows = lifetime bucket, columns = volume bucket."""
    _check_edges(lifetime_edges)
    _check_edges(volume_edges)
    matrix = np.zeros((len(lifetime_edges), len(volume_edges)), dtype=int)
    for t in timelines:
        matrix[bucket_index(t.lifetime_days, lifetime_edges), bucket_index(t.request_volume, volume_edges)] += 1
    return matrix


def bucket_labels(edges: Sequence[float]) -> list[str]:
    labels = []
    for lo, hi in zip(edges, list(edges[1:]) + [None]):
        if hi is None:
            labels.append(f">={lo:g}")
        elif hi - lo == 1:
            labels.append(f"{lo:g}")
        else:
            labels.append(f"{lo:g}-{hi - 1:g}")
    return labels


@dataclass
class ReuseSummary:
    n: int
    min: float
    q1: float
    median: float
    q3: float
    max: float
    outliers: list[float] = field(default_factory=list)


def summarize(values: Sequence[float]) -> ReuseSummary | None:
    if len(values) == 0:
        return None
    arr = np.asarray(values, dtype=float)
    q1, med, q3 = np.quantile(arr, [0.25, 0.5, 0.75], method="linear")
    iqr = q3 - q1
    outliers = sorted(float(v) for v in arr if v < q1 - 1.5 * iqr or v > q3 + 1.5 * iqr)
    return ReuseSummary(len(arr), float(arr.min()), float(q1), float(med), float(q3), float(arr.max()), outliers)


def reuse_by_lifetime(timelines: Iterable[HostTimeline],
                      lifetime_edges: Sequence[float] = DEFAULT_LIFETIME_EDGES,
                      labels: Sequence[str] | None = None) -> dict[str, ReuseSummary | None]:
    """Distribution of distinct scanners per host, per lifetime category."""
    _check_edges(lifetime_edges)
    labels = list(labels) if labels is not None else bucket_labels(lifetime_edges)
    if len(labels) != len(lifetime_edges):
        raise ValueError("need one label per lifetime bucket")
    groups: list[list[int]] = [[] for _ in lifetime_edges]
    for t in timelines:
        groups[bucket_index(t.lifetime_days, lifetime_edges)].append(t.distinct_scanners)
    return {label: summarize(g) for label, g in zip(labels, groups)}


def cumulative_unique(events: Iterable[tuple[date, Hashable]]) -> list[tuple[date, int]]:
    """Running count of distinct keys, one point per distinct date."""
    seen: set = set()
    out: list[tuple[date, int]] = []
    for day, key in sorted(events, key=lambda e: e[0]):
        seen.add(key)
        if out and out[-1][0] == day:
            out[-1] = (day, len(seen))
        else:
            out.append((day, len(seen)))
    return out


# -- share tables ------------------------------------------------------------

@dataclass
class ShareTable:
    dimension: str
    period: str
    entries: list[tuple[Any, int, float]]

    @property
    def total(self) -> int:
        return sum(c for _, c, _ in self.entries)

    def top(self, k: int) -> list[tuple[Any, int, float]]:
        return self.entries[:k]


def period_key(day: date, period: str) -> str:
    if period == "year":
        return f"{day.year:04d}"
    if period == "month":
        return f"{day.year:04d}-{day.month:02d}"
    if period == "all":
        return "all"
    raise ValueError(f"unknown period {period!r}")


def _cc(value: str | None) -> str:
    return value if value and len(value) == 2 and value.isalpha() else "ZZ"


def dimension_values(record, dimension: str) -> list:
    """Keys a record contributes to ``dimension``; multi-valued dimensions count each key once."""
    if dimension == "scanner_country":
        return [_cc(record.src_country)]
    if dimension == "asn":
        return [record.src_asn or 0]
    if dimension == "dst_port":
        return [record.dst_port]
    if dimension == "host_country":
        return sorted({_cc(ep.host_country) for ep in record.endpoints})
    if dimension == "protocol":
        return sorted({ep.scheme for ep in record.endpoints if ep.scheme})
    raise ValueError(f"unknown dimension {dimension!r}")


def share_table(counts: Counter, dimension: str, period: str) -> ShareTable:
    total = sum(counts.values())
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], str(kv[0])))
    return ShareTable(dimension, period, [(k, c, 100.0 * c / total) for k, c in ordered])


def dimension_shares(records: Iterable, dimension: str, period: str = "all",
                     day_of=lambda r: r.date) -> list[ShareTable]:
    """Counts and percents per key, one table per period, periods ascending."""
    if dimension not in DIMENSIONS:
        raise ValueError(f"unknown dimension {dimension!r}")
    by_period: dict[str, Counter] = defaultdict(Counter)
    for rec in records:
        p = period_key(day_of(rec), period)
        for key in dimension_values(rec, dimension):
            by_period[p][key] += 1
    return [share_table(by_period[p], dimension, p) for p in sorted(by_period) if by_period[p]]


@dataclass
class CrossTab:
    counts: dict[str, Counter]

    @property
    def shares(self) -> dict[str, dict[str, float]]:
        out = {}
        for row, cols in self.counts.items():
            total = sum(cols.values())
            if total:
                out[row] = {c: 100.0 * n / total for c, n in sorted(cols.items())}
        return out

    @property
    def total(self) -> int:
        return sum(sum(c.values()) for c in self.counts.values())

    def rows(self) -> list[str]:
        return sorted(self.counts, key=lambda r: (-sum(self.counts[r].values()), r))


def scanner_host_matrix(records: Iterable) -> CrossTab:
    """Scanner country x callback-host country; each distinct host of a record counts once."""
    counts: dict[str, Counter] = defaultdict(Counter)
    for rec in records:
        hosts = {}
        for ep in rec.endpoints:
            hosts.setdefault(ep.host, _cc(ep.host_country))
        for cc in hosts.values():
            counts[_cc(rec.src_country)][cc] += 1
    return CrossTab(dict(counts))


def scanner_destination_matrix(records: Iterable) -> CrossTab:
    """Scanner country x telescope destination address (connection counts)."""
    counts: dict[str, Counter] = defaultdict(Counter)
    for rec in records:
        counts[_cc(rec.src_country)][rec.dst_ip] += 1
    return CrossTab(dict(counts))
