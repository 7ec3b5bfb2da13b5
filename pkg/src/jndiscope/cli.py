"""Command-line front end.

    jndiscope run --input CAPTURE.pcap [--input ...] --out DIR
    jndiscope decode FILE|- [--hex] | --text STRING
    jndiscope report shares|infra|monthly|fit|correlate ...

Exit status: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from collections import Counter
from dataclasses import asdict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .decode import DecodeConfig
from .detect import SeverityRules, analyze
from .infra import (
    DEFAULT_LIFETIME_EDGES,
    DEFAULT_VOLUME_EDGES,
    DIMENSIONS,
    PERIODS,
    bucket_index,
    bucket_labels,
    callback_timelines,
    cumulative_unique,
    dimension_shares,
    lifetime_volume_matrix,
    reuse_by_lifetime,
    scanner_destination_matrix,
    scanner_host_matrix,
)
from .ingest import CaptureError, GeoTableError
from .pipeline import ConfigError, load_config_file, make_config, run_pipeline
from .records import load_records
from .temporal import (
    DEFAULT_THRESHOLD,
    YEAR_ORIGIN,
    EmptyYearError,
    LogisticFitError,
    MonthlyMatrix,
    UndefinedCorrelationError,
    analysis_years,
    fit_logistic,
    logistic_eval,
    pearson,
    threshold_interval_from_fit,
    year_summary,
)

log = logging.getLogger("jndiscope")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; remap to our usage code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- small output helpers ----------------------------------------------------

def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fp:
        w = csv.writer(fp, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    if hasattr(v, "isoformat"):
        return v.isoformat()
    return v


def _series(out: Path, name: str, xs: Sequence, ys: Sequence) -> Path:
    """Plot-ready two-column file under ``out/series``."""
    return _write_csv(out / "series" / f"{name}.csv", ("x", "y"), zip(xs, ys))


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def _load(args) -> list:
    missing = [p for p in args.records if not Path(p).is_file()]
    if missing:
        raise DataError(f"record file not found: {missing[0]}")
    records, errors = load_records(args.records)
    if errors:
        print(f"warning: skipped {len(errors)} malformed record line(s)", file=sys.stderr)
    return records


# -- run ---------------------------------------------------------------------

def cmd_run(args) -> int:
    file_values = load_config_file(args.config) if args.config else {}
    inputs = [Path(p) for group in (args.input or []) for p in group] or None
    cfg = make_config(
        file_values,
        inputs=inputs,
        geo_db=args.geo_db,
        tz=args.tz,
        session_gap=args.session_gap,
        max_depth=args.max_depth,
        threshold=args.threshold,
        out=args.out,
        l2_hosts=tuple(args.l2_host) if args.l2_host else None,
        figures=False if args.no_figures else None,
    )
    if not cfg.inputs:
        raise UsageError("no input captures given (use --input or an 'input' config key)")
    for p in cfg.inputs:
        if not p.is_file():
            raise DataError(f"capture not found: {p}")
    if cfg.geo_db is not None and not Path(cfg.geo_db).is_file():
        raise DataError(f"geolocation table not found: {cfg.geo_db}")

    summary, detections = run_pipeline(cfg)
    if cfg.figures and detections:
        from . import plotting
        daily = sorted(Counter(d.date for d in detections).items())
        plotting.line_series({"detections": ([d for d, _ in daily], [n for _, n in daily])},
                             cfg.out / "figures" / "daily_incidence.png",
                             title="Daily exploit incidence", ylabel="detections")
        total = sum(summary.severity.values())
        plotting.bar_shares(list(summary.severity), [100.0 * n / total for n in summary.severity.values()],
                            cfg.out / "figures" / "severity.png", title="Severity", xlabel="level")
    print(summary.format())
    return EXIT_OK


# -- decode ------------------------------------------------------------------

def _read_payload(args) -> bytes:
    if args.text is not None:
        raw = args.text.encode("utf-8")
    elif args.file == "-":
        raw = sys.stdin.buffer.read()
    elif args.file:
        try:
            raw = Path(args.file).read_bytes()
        except OSError as exc:
            raise DataError(f"cannot read {args.file}: {exc}") from exc
    else:
        raise UsageError("give a FILE, '-' for standard input, or --text")
    if args.hex:
        try:
            raw = bytes.fromhex("".join(raw.decode("ascii").split()).replace(":", ""))
        except (UnicodeDecodeError, ValueError) as exc:
            raise DataError(f"input is not hex text: {exc}") from exc
    if not raw:
        raise DataError("empty payload")
    return raw


def decode_ledger(raw: bytes, config: DecodeConfig, rules: SeverityRules, dst_ip: str | None = None) -> dict:
    verdict = analyze(raw, config, rules, dst_ip)
    d, det = verdict.decoded, verdict.detection
    ledger = {
        "byte_length": d.byte_length,
        "valid_transform_count": d.valid_transform_count,
        "best": d.best,
        "candidates": [
            {"index": i, "transforms": list(c.transform_chain), "score": round(c.score, 6),
             "printable_ratio": round(c.printable_ratio, 6), "parse_loss": c.parse_loss, "text": c.text}
            for i, c in enumerate(d.candidates)
        ],
        "verdict": {"detected": False},
    }
    if det is not None:
        ledger["verdict"] = {
            "detected": True,
            "severity": det.severity.value,
            "tier": det.tier,
            "obfuscated": det.obfuscated,
            "weak_only": det.weak_only,
            "matched_candidate": det.matched_candidate,
            "expressions": [e.normalized or e.endpoint_text for e in det.expressions],
            "endpoints": [asdict(ep) for ep in det.endpoints],
            "weak_matches": det.weak_matches,
        }
    return ledger


def cmd_decode(args) -> int:
    raw = _read_payload(args)
    config = DecodeConfig(max_depth=args.max_depth)
    rules = SeverityRules(verification_hosts=tuple(args.l2_host)) if args.l2_host else SeverityRules()
    ledger = decode_ledger(raw, config, rules, args.dst_ip)
    json.dump(ledger, sys.stdout, indent=2, ensure_ascii=True)
    sys.stdout.write("\n")
    return EXIT_OK


# -- report: shares ----------------------------------------------------------

def cmd_shares(args) -> int:
    records = _load(args)
    out, dims = Path(args.out), args.dimension or list(DIMENSIONS)
    for dim in dims:
        tables = dimension_shares(records, dim, args.period)
        rows = [(t.period, k, c, pct) for t in tables for k, c, pct in t.entries]
        _write_csv(out / f"shares_{dim}.csv", ("period", "key", "count", "percent"), rows)
        for t in tables:
            keys = [k for k, _, _ in t.entries]
            pcts = [p for _, _, p in t.entries]
            _series(out, f"shares_{dim}_{t.period}", keys, pcts)
            if not args.no_figures:
                from . import plotting
                plotting.bar_shares(keys, pcts, out / "figures" / f"shares_{dim}_{t.period}.png",
                                    title=f"{dim} ({t.period})", xlabel=dim)
        print(f"{dim}: {len(tables)} period table(s)")
    return EXIT_OK


# -- report: infra -----------------------------------------------------------

def _crosstab_rows(tab):
    for row in tab.rows():
        total = sum(tab.counts[row].values())
        for col, n in sorted(tab.counts[row].items(), key=lambda kv: (-kv[1], kv[0])):
            yield row, col, n, 100.0 * n / total


def cmd_infra(args) -> int:
    records = _load(args)
    out = Path(args.out)
    lt_edges = _floats(args.lifetime_edges) if args.lifetime_edges else list(DEFAULT_LIFETIME_EDGES)
    vol_edges = _floats(args.volume_edges) if args.volume_edges else list(DEFAULT_VOLUME_EDGES)

    timelines = callback_timelines((r.date, r.src_ip, r) for r in records)
    _write_csv(out / "callback_hosts.csv",
               ("host", "first_seen", "last_seen", "lifetime_days", "request_volume", "distinct_scanners"),
               ((t.host, t.first_seen, t.last_seen, t.lifetime_days, t.request_volume, t.distinct_scanners)
                for t in timelines))

    try:
        matrix = lifetime_volume_matrix(timelines, lt_edges, vol_edges)
        reuse = reuse_by_lifetime(timelines, lt_edges)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    lt_labels, vol_labels = bucket_labels(lt_edges), bucket_labels(vol_edges)
    _write_csv(out / "lifetime_volume.csv", ["lifetime_days", *vol_labels],
               ([lab, *row] for lab, row in zip(lt_labels, matrix.tolist())))
    _write_csv(out / "reuse_by_lifetime.csv",
               ("lifetime_days", "n", "min", "q1", "median", "q3", "max", "outliers"),
               ((lab, s.n, s.min, s.q1, s.median, s.q3, s.max, " ".join(f"{o:g}" for o in s.outliers))
                if s else (lab, 0, "", "", "", "", "", "")
                for lab, s in reuse.items()))

    hosts = cumulative_unique((r.date, ep.host) for r in records for ep in r.endpoints)
    scanners = cumulative_unique((r.date, r.src_ip) for r in records)
    _series(out, "cumulative_hosts", [d for d, _ in hosts], [n for _, n in hosts])
    _series(out, "cumulative_scanners", [d for d, _ in scanners], [n for _, n in scanners])

    sh, sd = scanner_host_matrix(records), scanner_destination_matrix(records)
    header = ("scanner_country", "{}", "count", "row_percent")
    _write_csv(out / "scanner_host_matrix.csv", [h.format("host_country") for h in header], _crosstab_rows(sh))
    _write_csv(out / "scanner_destination_matrix.csv", [h.format("dst_ip") for h in header], _crosstab_rows(sd))

    if not args.no_figures:
        from . import plotting
        fig = out / "figures"
        plotting.heatmap(matrix, lt_labels, vol_labels, fig / "lifetime_volume.png",
                         title="Callback hosts by lifetime and volume",
                         xlabel="requests", ylabel="lifetime (days)")
        plotting.boxplot(_reuse_groups(timelines, lt_edges, lt_labels),
                         fig / "reuse_by_lifetime.png", title="Scanners per callback host",
                         ylabel="distinct scanners")
        plotting.line_series({"callback hosts": ([d for d, _ in hosts], [n for _, n in hosts]),
                              "scanners": ([d for d, _ in scanners], [n for _, n in scanners])},
                             fig / "cumulative_unique.png", title="Cumulative unique", ylabel="count")
        for name, tab in (("scanner_host_matrix", sh), ("scanner_destination_matrix", sd)):
            rows = tab.rows()[:15]
            cols = sorted({c for r in rows for c in tab.counts[r]})[:30]
            if rows and cols:
                shares = tab.shares
                grid = [[shares[r].get(c, 0.0) for c in cols] for r in rows]
                plotting.heatmap(grid, rows, cols, fig / f"{name}.png", title=name.replace("_", " "))
    print(f"callback hosts: {len(timelines)}  records: {len(records)}")
    return EXIT_OK


def _reuse_groups(timelines, edges, labels) -> dict:
    groups: dict[str, list] = {lab: [] for lab in labels}
    for t in timelines:
        groups[labels[bucket_index(t.lifetime_days, edges)]].append(t.distinct_scanners)
    return groups


# -- report: monthly ---------------------------------------------------------

def cmd_monthly(args) -> int:
    records = _load(args)
    out = Path(args.out)
    daily = sorted(Counter(r.date for r in records).items())
    _write_csv(out / "daily_incidence.csv", ("date", "detections"), daily)
    _series(out, "daily_incidence", [d for d, _ in daily], [n for _, n in daily])

    matrix = MonthlyMatrix.from_dates(r.date for r in records)
    _write_csv(out / "monthly_matrix.csv", ["year", *[f"m{m:02d}" for m in range(1, 13)], "total"],
               ([y, *matrix.row(y), matrix.totals[y]] for y in matrix.years))

    years = analysis_years(matrix, include_partial=args.include_partial, exclude=args.exclude_year or ())
    rows, shares, cumul = [], {}, {}
    for y in years:
        try:
            dist = year_summary(matrix, y, args.threshold)
        except EmptyYearError:
            continue
        rows.append((y, y - YEAR_ORIGIN, matrix.totals[y], dist.p_hat[0], dist.m_star,
                     dist.cumulative(dist.m_star), "" if dist.a_v is None else dist.a_v))
        months = list(range(1, 13))
        _series(out, f"monthly_share_{y}", months, dist.p)
        _series(out, f"cumulative_share_{y}", months, dist.p_hat)
        shares[str(y)], cumul[str(y)] = (months, dist.p), (months, dist.p_hat)
    _write_csv(out / "year_summary.csv", ("year", "t", "total", "p_hat_1", "m_star", "p_hat_m_star", "a_v"), rows)
    slopes = [(r[1], r[6]) for r in rows if r[6] != ""]
    _series(out, "growth_slope", [t for t, _ in slopes], [a for _, a in slopes])

    if not args.no_figures and records:
        from . import plotting
        fig = out / "figures"
        plotting.line_series({"detections": ([d for d, _ in daily], [n for _, n in daily])},
                             fig / "daily_incidence.png", title="Daily exploit incidence", ylabel="detections")
        if shares:
            plotting.line_series(shares, fig / "monthly_share.png", title="Monthly share", xlabel="month",
                                 ylabel="% of year")
            plotting.line_series(cumul, fig / "cumulative_share.png", title="Cumulative share", xlabel="month",
                                 ylabel="% of year", hline=args.threshold)
    for r in rows:
        a_v = "undefined" if r[6] == "" else f"{r[6]:.2f}"
        print(f"{r[0]}: total={r[2]} m*={r[4]} P^(m*)={r[5]:.1f} A_v={a_v}")
    return EXIT_OK


# -- report: fit -------------------------------------------------------------

def _fit_points(args) -> list[tuple[float, float]]:
    if args.slopes:
        ys = _floats(args.slopes)
        ts = _floats(args.t) if args.t else [float(i) for i in range(1, len(ys) + 1)]
        if len(ts) != len(ys):
            raise UsageError("--t and --slopes must have the same length")
        return list(zip(ts, ys))
    if args.summary:
        try:
            with open(args.summary, newline="") as fp:
                return [(float(r["t"]), float(r["a_v"])) for r in csv.DictReader(fp) if r.get("a_v")]
        except (OSError, KeyError, ValueError) as exc:
            raise DataError(f"cannot read year summary {args.summary}: {exc}") from exc
    if args.records:
        records = _load(args)
        matrix = MonthlyMatrix.from_dates(r.date for r in records)
        pts = []
        for y in analysis_years(matrix, include_partial=False):
            dist = year_summary(matrix, y, args.threshold)
            if dist.a_v is not None:
                pts.append((float(y - YEAR_ORIGIN), dist.a_v))
        return pts
    raise UsageError("give --slopes, --summary or record files")


def cmd_fit(args) -> int:
    points = _fit_points(args)
    out = Path(args.out)
    predict = _floats(args.predict_t) if args.predict_t else [6.0]
    t_obs = np.array([p[0] for p in points])
    grid = np.linspace(min(t_obs.min(), min(predict)), max(t_obs.max(), max(predict)), 101)
    try:
        params = fit_logistic(points, eval_t=grid)
    except LogisticFitError as exc:
        out.mkdir(parents=True, exist_ok=True)
        (out / "fit_trace.json").write_text(json.dumps(exc.trace, indent=1) + "\n")
        raise DataError(f"logistic fit failed: {exc} (trace in {out / 'fit_trace.json'})") from exc
    except ValueError as exc:
        raise DataError(str(exc)) from exc

    se = params.stderr
    _write_csv(out / "fit.csv", ("param", "value", "stderr"),
               [("L", params.L, se[0]), ("k", params.k, se[1]), ("t0", params.t0, se[2]),
                ("sse", params.sse, ""), ("dof", params.dof, ""), ("iterations", params.iterations, "")])
    mean = logistic_eval(params, grid)
    _write_csv(out / "fit_band.csv", ("t", "mean", "low", "high"),
               zip(grid.tolist(), mean.tolist(), params.ci95[:, 0].tolist(), params.ci95[:, 1].tolist()))
    _series(out, "fit_observed", [p[0] for p in points], [p[1] for p in points])
    _series(out, "fit_mean", grid.tolist(), mean.tolist())

    pred_rows = []
    for t in predict:
        lo, hi = params.interval([t])
        row = [t, logistic_eval(params, t), float(lo[0]), float(hi[0])]
        if args.p_hat_1 is not None:
            try:
                iv = threshold_interval_from_fit(params, t, args.p_hat_1, args.target)
                row += [iv.low, iv.mean, iv.high, iv.degenerate]
            except ValueError as exc:
                log.warning("threshold interval at t=%g unavailable: %s", t, exc)
                row += ["", "", "", ""]
        pred_rows.append(row)
    header = ["t", "mean", "low", "high"]
    if args.p_hat_1 is not None:
        header += ["month_early", "month_mean", "month_late", "degenerate"]
    _write_csv(out / "prediction.csv", header, pred_rows)

    if not args.no_figures:
        from . import plotting
        plotting.fit_band([p[0] for p in points], [p[1] for p in points], grid, mean,
                          params.ci95[:, 0], params.ci95[:, 1], out / "figures" / "fit.png",
                          title="Logistic growth-slope fit", ylabel="A_v")
    print(f"L={params.L:.4f} k={params.k:.4f} t0={params.t0:.4f} "
          f"(se {se[0]:.3g}, {se[1]:.3g}, {se[2]:.3g}; {params.iterations} iterations)")
    for row in pred_rows:
        print(f"t={row[0]:g}: {row[1]:.2f} [{row[2]:.2f}, {row[3]:.2f}]")
    return EXIT_OK


# -- report: correlate -------------------------------------------------------

def _read_series(path: str) -> dict[str, float]:
    """Two-column CSV (key, value); a non-numeric first row is taken as a header."""
    values: dict[str, float] = {}
    try:
        with open(path, newline="") as fp:
            for n, row in enumerate(csv.reader(fp)):
                if len(row) < 2:
                    continue
                try:
                    values[row[0].strip()] = float(row[1])
                except ValueError:
                    if n == 0:
                        continue
                    raise DataError(f"{path}: row {n + 1}: non-numeric value {row[1]!r}")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return values


def cmd_correlate(args) -> int:
    if args.a and args.b:
        a, b = _floats(args.a), _floats(args.b)
        keys = [str(i) for i in range(len(a))]
    elif len(args.series) == 2:
        sa, sb = _read_series(args.series[0]), _read_series(args.series[1])
        keys = [k for k in sa if k in sb]
        a, b = [sa[k] for k in keys], [sb[k] for k in keys]
    else:
        raise UsageError("give two series files or --a and --b")
    if len(a) != len(b):
        raise UsageError("series lengths differ")
    try:
        res = pearson(a, b)
    except (UndefinedCorrelationError, ValueError) as exc:
        raise DataError(f"correlation undefined: {exc}") from exc
    out = Path(args.out)
    _write_csv(out / "correlation.csv", ("r", "p_value", "n"), [(res.r, res.p_value, res.n)])
    _write_csv(out / "correlation_pairs.csv", ("key", "a", "b"), zip(keys, a, b))
    _series(out, "correlation_pairs", a, b)
    if not args.no_figures:
        from . import plotting
        plotting.scatter(a, b, out / "figures" / "correlation.png",
                         title=f"r = {res.r:.3f}, p = {res.p_value:.3g}", xlabel="a", ylabel="b")
    print(f"r={res.r:.6f} p={res.p_value:.6g} n={res.n}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="jndiscope", description="Log4Shell exploit traffic analysis for telescope captures.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="ingest captures and write detection records")
    r.add_argument("--input", action="append", nargs="+", metavar="PCAP")
    r.add_argument("--config", help="flat key=value config file; flags override its keys")
    r.add_argument("--geo-db", type=Path, help="CSV of start,end,country,asn ranges")
    r.add_argument("--tz", help="partition timezone (UTC, +02:00, Europe/Berlin)")
    r.add_argument("--session-gap", type=float, help="idle seconds that split a reused 4-tuple")
    r.add_argument("--max-depth", type=int, help="maximum decode transform chain length")
    r.add_argument("--threshold", type=float, help="cumulative percent threshold")
    r.add_argument("--l2-host", action="append", help="verification host substring (repeatable)")
    r.add_argument("--out", type=Path)
    r.add_argument("--no-figures", action="store_true")
    r.set_defaults(func=cmd_run)

    d = sub.add_parser("decode", help="decode one payload and print its candidate ledger")
    d.add_argument("file", nargs="?", help="payload file, or - for standard input")
    d.add_argument("--text", help="payload given inline")
    d.add_argument("--hex", action="store_true", help="input is hex text")
    d.add_argument("--max-depth", type=int, default=DecodeConfig.max_depth)
    d.add_argument("--dst-ip", help="attacked address, for callback-token matching")
    d.add_argument("--l2-host", action="append")
    d.set_defaults(func=cmd_decode)

    rep = sub.add_parser("report", help="aggregate detection records")
    rsub = rep.add_subparsers(dest="report", required=True, parser_class=_Parser)

    def common(sp, records_required=True):
        sp.add_argument("records", nargs="+" if records_required else "*", help="detection record files")
        sp.add_argument("--out", type=Path, default=Path("report"))
        sp.add_argument("--no-figures", action="store_true")

    s = rsub.add_parser("shares", help="share tables per dimension")
    common(s)
    s.add_argument("--dimension", action="append", choices=DIMENSIONS)
    s.add_argument("--period", choices=PERIODS, default="all")
    s.set_defaults(func=cmd_shares)

    i = rsub.add_parser("infra", help="callback host lifetimes, reuse and cross-tabs")
    common(i)
    i.add_argument("--lifetime-edges", help="comma-separated lower bounds in days")
    i.add_argument("--volume-edges", help="comma-separated lower bounds in requests")
    i.set_defaults(func=cmd_infra)

    m = rsub.add_parser("monthly", help="daily incidence, monthly distributions, growth slopes")
    common(m)
    m.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    m.add_argument("--include-partial", action="store_true")
    m.add_argument("--exclude-year", type=int, action="append")
    m.set_defaults(func=cmd_monthly)

    f = rsub.add_parser("fit", help="logistic fit of growth slopes")
    common(f, records_required=False)
    f.add_argument("--slopes", help="comma-separated A_v values")
    f.add_argument("--t", help="comma-separated t values (default 1..n)")
    f.add_argument("--summary", help="year_summary.csv from 'report monthly'")
    f.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    f.add_argument("--predict-t", help="comma-separated t values to predict at (default 6)")
    f.add_argument("--p-hat-1", type=float, help="January cumulative percent for threshold-month intervals")
    f.add_argument("--target", type=float, default=80.0)
    f.set_defaults(func=cmd_fit)

    c = rsub.add_parser("correlate", help="Pearson correlation of two series")
    c.add_argument("series", nargs="*", help="two CSV files of key,value")
    c.add_argument("--a")
    c.add_argument("--b")
    c.add_argument("--out", type=Path, default=Path("report"))
    c.add_argument("--no-figures", action="store_true")
    c.set_defaults(func=cmd_correlate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"jndiscope: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CaptureError, GeoTableError, OSError) as exc:
        print(f"jndiscope: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
