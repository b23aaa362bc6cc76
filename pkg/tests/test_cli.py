"""CLI behavior: decode, validate, scan, report, exit codes."""

from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

import capturebuild as cb
from conftest import FIXTURES
from revaudit.cli import main

CASES = FIXTURES / "cases"


@pytest.fixture
def runner():
    return CliRunner()


def test_decode_tcs_prints_all_core_fields(runner):
    text = cb.positive_tcs()
    result = runner.invoke(main, ["decode", text])
    assert result.exit_code == 0
    payload = json.loads(result.output)
    assert payload["format"] == "tcf_v2"
    assert payload["core"]["version"] == 2
    assert payload["core"]["purposes_consent"] == [1, 2, 4]
    assert payload["core"]["vendor_consents"] == [12, 37]
    assert payload["core"]["consent_language"] == "EN"


def test_decode_onetrust_values(runner):
    result = runner.invoke(main, ["decode", "groups=C0001%3A1%2CC0002%3A0"])
    assert result.exit_code == 0
    payload = json.loads(result.output)
    assert payload["format"] == "onetrust"
    assert payload["enabled_groups"] == ["C0001"]

    result = runner.invoke(main, ["decode", ",C0001,C0002,"])
    assert json.loads(result.output)["enabled_groups"] == ["C0001", "C0002"]


def test_decode_unrecognized_exits_2(runner):
    result = runner.invoke(main, ["decode", "garbage!!"])
    assert result.exit_code == 2


def test_validate_ok_and_error(runner, tmp_path):
    good = CASES / "case_minimal.json"
    result = runner.invoke(main, ["validate", str(good)])
    assert result.exit_code == 0 and "ok" in result.output

    bad = tmp_path / "bad.json"
    bad.write_text('{"schema_version": 7}', encoding="utf-8")
    result = runner.invoke(main, ["validate", str(bad)])
    assert result.exit_code == 2
    assert "VersionError" in result.output


def test_scan_writes_reports_and_fail_flag(runner, tmp_path):
    out = tmp_path / "reports"
    result = runner.invoke(
        main,
        ["scan", str(CASES / "case_dirty.json"), "--out-dir", str(out)],
    )
    assert result.exit_code == 0
    report_file = out / "case_dirty.report.json"
    payload = json.loads(report_file.read_text())
    assert payload["site"] == "dirty.com"

    result = runner.invoke(
        main,
        ["scan", str(CASES / "case_dirty.json"), "--out-dir", str(out), "--fail-on-violation"],
    )
    assert result.exit_code == 1

    result = runner.invoke(
        main,
        ["scan", str(CASES / "case_clean.json"), "--out-dir", str(out), "--fail-on-violation"],
    )
    assert result.exit_code == 0


def test_scan_stdout_and_grace_window(runner):
    result = runner.invoke(main, ["scan", str(CASES / "case_grace.json")])
    kinds = {f["kind"] for f in json.loads(result.output)[0]["findings"]}
    assert "network_api_mismatch" in kinds

    result = runner.invoke(
        main, ["scan", str(CASES / "case_grace.json"), "--grace-window", "15"]
    )
    kinds = {f["kind"] for f in json.loads(result.output)[0]["findings"]}
    assert "network_api_mismatch" not in kinds


def test_scan_jobs_parallel_matches_serial(runner, tmp_path):
    files = sorted(str(p) for p in (FIXTURES / "corpus_tcf136").glob("*.json"))[:6]
    serial = runner.invoke(main, ["scan", *files])
    parallel = runner.invoke(main, ["scan", *files, "--jobs", "2"])
    assert serial.output == parallel.output


def test_report_json_and_csv(runner, tmp_path):
    out = tmp_path / "reports"
    files = [str(CASES / "case_clean.json"), str(CASES / "case_dirty.json")]
    assert runner.invoke(main, ["scan", *files, "--out-dir", str(out)]).exit_code == 0
    report_files = sorted(str(p) for p in out.glob("*.report.json"))

    result = runner.invoke(main, ["report", *report_files])
    assert result.exit_code == 0
    summary = json.loads(result.output)
    row = next(r for r in summary["rows"] if r["row_id"] == "third_parties_not_informed")
    assert row["count"] == 1 and row["denominator"] == 2

    result = runner.invoke(main, ["report", *report_files, "--format", "csv"])
    assert result.exit_code == 0
    assert "row_id,label,count,denominator,percentage" in result.output
    assert "third_parties_not_informed" in result.output


def test_report_rejects_malformed_input(runner, tmp_path):
    bad = tmp_path / "b.json"
    bad.write_text("{not json", encoding="utf-8")
    assert runner.invoke(main, ["report", str(bad)]).exit_code == 2
    bad.write_text('{"site": "x"}', encoding="utf-8")
    assert runner.invoke(main, ["report", str(bad)]).exit_code == 2


def test_extract_dumps_observations(runner):
    result = runner.invoke(main, ["extract", str(CASES / "manifest_extraction.json")])
    assert result.exit_code == 0
    observations = json.loads(result.output)
    manifest = json.loads(
        (CASES / "manifest_extraction.manifest.json").read_text(encoding="utf-8")
    )
    got = {(o["location"], o["request_id"], o["tc_string"]) for o in observations}
    expected = {
        (e["location"], e["request_id"], e["tcs"]) for e in manifest["observations"]
    }
    assert got == expected
    assert all(o["stage"] == "accepted" for o in observations)


def test_usage_error_exit_code(runner):
    assert runner.invoke(main, ["scan"]).exit_code == 2
    assert runner.invoke(main, ["scan", "/nonexistent/file.json"]).exit_code == 2
