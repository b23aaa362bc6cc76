"""Pipeline integration over the case fixtures plus aggregation behavior."""

from __future__ import annotations

import json
import random

import pytest

import capturebuild as cb
from conftest import FIXTURES
from revaudit.capture import load_session, loads_session
from revaudit.report import AuditConfig, aggregate_corpus, analyze_site

CASES = FIXTURES / "cases"


def analyze(name: str, **config):
    return analyze_site(load_session(CASES / name), AuditConfig(**config))


def violation_kinds(report) -> set[str]:
    return {f.kind for f in report.findings if f.severity == "violation"}


def test_clean_fixture_has_zero_violations():
    report = analyze("case_clean.json")
    assert violation_kinds(report) == set()
    assert report.category == "compliant"
    assert report.cmp.tcf
    assert report.percentage_not_informed == 0.0


def test_dirty_fixture_expected_violation_set():
    report = analyze("case_dirty.json")
    assert violation_kinds(report) == {
        "storage_api_mismatch",
        "consent_not_updated",
        "positive_consent_after_revocation",
        "third_party_not_informed",
    }
    not_informed = [f for f in report.findings if f.kind == "third_party_not_informed"]
    assert [f.locator for f in not_informed] == ["adnet0.com"]


def test_stale_store_fixture():
    report = analyze("case_stale_store.json")
    mismatches = [f for f in report.findings if f.kind == "storage_api_mismatch"]
    assert len(mismatches) == 1
    assert mismatches[0].subkind == "stale_store"
    assert mismatches[0].source == "tcf_cookie"


def test_stale_api_fixture():
    report = analyze("case_stale_api.json")
    mismatches = [f for f in report.findings if f.kind == "storage_api_mismatch"]
    assert len(mismatches) == 1
    assert mismatches[0].subkind == "stale_api"
    assert report.has_finding("positive_consent_after_revocation")


def test_screen_only_fixture():
    report = analyze("case_screen_only.json")
    assert report.has_finding("consent_not_updated")
    assert report.has_finding("positive_consent_after_revocation")
    assert not report.has_finding("storage_api_mismatch")


def test_missing_revoked_stage_marks_not_applicable():
    doc = cb.session("x.com", [cb.stage("initial"), cb.stage("accepted", tcfapi=cb.positive_tcs())])
    report = analyze_site(loads_session(json.dumps(doc)))
    assert report.checks["third_parties"] == "not_applicable"
    assert report.checks["updated_after_revocation"] == "not_applicable"
    assert report.checks["store_api_consistency"] == "not_applicable"
    assert not report.revocation_possible


def test_check_failure_downgrades_to_report_note():
    # OneTrust value appears at revocation with no initial baseline
    doc = cb.session(
        "x.com",
        [
            cb.stage("initial"),
            cb.stage("accepted"),
            cb.stage("revoked", active_groups=",C0001,C0002,"),
        ],
    )
    report = analyze_site(loads_session(json.dumps(doc)))
    assert report.checks["validity_revoked"].startswith("failed:")


def test_report_serialization_stable():
    report = analyze("case_dirty.json")
    first = json.dumps(report.to_dict(), sort_keys=True)
    second = json.dumps(analyze("case_dirty.json").to_dict(), sort_keys=True)
    assert first == second


def test_aggregate_permutation_invariant():
    paths = sorted((FIXTURES / "corpus_tcf136").glob("*.json"))[:12]
    reports = [analyze_site(load_session(p)) for p in paths]
    forward = aggregate_corpus(reports)
    shuffled = reports[:]
    random.Random(3).shuffle(shuffled)
    backward = aggregate_corpus(shuffled)
    assert forward.to_dict() == backward.to_dict()


def test_aggregate_requires_reports():
    with pytest.raises(ValueError):
        aggregate_corpus([])


def test_source_stage_matrix_counts():
    reports = [analyze("case_stale_store.json"), analyze("case_stale_api.json")]
    summary = aggregate_corpus(reports)
    matrix = summary.source_stage_matrix
    assert matrix["tcfapi"]["total"] == 2
    assert matrix["tcf_cookie"]["total"] == 2
    assert matrix["tcfapi"]["positive_revoked"] == 1  # the stale-API site
    assert matrix["tcf_cookie"]["positive_revoked"] == 1  # the stale-store site
    assert matrix["tcfapi"]["not_updated"] == 1
    assert matrix["tcf_cookie"]["not_updated"] == 1


def test_network_mismatch_findings_carry_attribution():
    # the stale request's initiator resolves against the CMP registry
    doc = json.loads((CASES / "case_grace.json").read_text(encoding="utf-8"))
    for request in doc["stages"][2]["requests"]:
        request["initiator_url"] = "https://consent.didomi.io/sdk.js"
    report = analyze_site(loads_session(json.dumps(doc)))
    mismatch = next(f for f in report.findings if f.kind == "network_api_mismatch")
    assert mismatch.responsible_party == "cmp(Didomi)"  # fixture cores carry cmp id 7

    for request in doc["stages"][2]["requests"]:
        request["initiator_url"] = "https://widgets.kinja-static.com/main.js"
    report = analyze_site(loads_session(json.dumps(doc)))
    mismatch = next(f for f in report.findings if f.kind == "network_api_mismatch")
    assert mismatch.responsible_party == "third_party(kinja-static.com)"


def test_grace_window_config_changes_verdict():
    narrow = analyze("case_grace.json", grace_window_seconds=5.0)
    assert narrow.has_finding("network_api_mismatch")
    assert narrow.has_finding("delayed_update")
    wide = analyze("case_grace.json", grace_window_seconds=15.0)
    assert not wide.has_finding("network_api_mismatch")
    # widening the window introduced no new violation kinds
    assert violation_kinds(wide) <= violation_kinds(narrow)
