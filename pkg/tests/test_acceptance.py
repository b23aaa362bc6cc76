"""Acceptance suite: one test per release criterion, at stated tolerances.

Each test prints one PASS/FAIL line (hook in conftest). The corpus-level
criteria run over the committed fixture corpora; nothing here depends on the
capture harness being built.
"""

from __future__ import annotations

import json
import random
import subprocess
import sys
import time
import uuid
from itertools import chain, combinations
from pathlib import Path

import pytest

import capturebuild as cb
from conftest import FIXTURES, random_core
from revaudit.capture import load_session
from revaudit.consent import ConsentClass, classify_tcf
from revaudit.netscan import scan_stage
from revaudit.report import AuditConfig, aggregate_corpus, analyze_site
from revaudit.tcs import TcCore, decode_tc_string, encode_tc_core, sniff_tcs

CASES = FIXTURES / "cases"
CORPUS161 = sorted((FIXTURES / "corpus161").glob("*.json"))
CORPUS136 = sorted((FIXTURES / "corpus_tcf136").glob("*.json"))


def _uses_range_encoding(core: TcCore) -> bool:
    ids = core.vendor_consents
    if not ids:
        return False
    sorted_ids = sorted(ids)
    ranges = 1
    for a, b in zip(sorted_ids, sorted_ids[1:]):
        if b != a + 1:
            ranges += 1
    singles = sum(1 for a, b in zip(sorted_ids, sorted_ids[1:]) if b != a + 1) + 1
    # mirrors the encoder's size comparison only loosely; used for coverage stats
    return True if max(ids) > 33 * ranges + 12 else False


def test_codec_round_trip_1000_randomized_cores():
    """1,000 randomized cores round-trip exactly, in under a second."""
    rng = random.Random(20240501)
    cores = [random_core(rng, dense_vendors=(i % 2 == 0)) for i in range(1000)]
    with_restrictions = sum(1 for c in cores if c.publisher_restrictions)
    assert with_restrictions > 100
    assert 0 < sum(1 for c in cores if _uses_range_encoding(c)) < 1000

    start = time.perf_counter()
    for core in cores:
        assert decode_tc_string(encode_tc_core(core)).core == core
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0, f"round trips took {elapsed:.3f}s"


def test_sniffer_recall_and_precision():
    """100% recall on 1,000 encoder outputs; 0 hits on 10,000 negatives."""
    rng = random.Random(987)
    hits = 0
    for i in range(1000):
        text = encode_tc_core(random_core(rng, dense_vendors=(i % 3 == 0)))
        if sniff_tcs(text) is not None:
            hits += 1
    assert hits == 1000

    alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_"
    false_positives = 0
    for i in range(10000):
        if i % 2 == 0:
            token = str(uuid.UUID(int=rng.getrandbits(128)))
        else:
            token = "".join(rng.choice(alphabet) for _ in range(rng.randrange(4, 90)))
        if sniff_tcs(token) is not None:
            false_positives += 1
    assert false_positives == 0


def test_classification_matches_brute_force_partition():
    """All 2^11 x 2 purpose/vendor combinations match the literal definitions."""

    def brute_force(purposes: frozenset[int], has_vendor: bool) -> ConsentClass:
        if purposes & {2, 3, 4, 5, 6, 7, 8, 9} and has_vendor:
            return ConsentClass.POSITIVE
        if purposes <= {1, 10, 11}:
            return ConsentClass.NEGATIVE
        return ConsentClass.INDETERMINATE

    universe = range(1, 12)
    subsets = chain.from_iterable(combinations(universe, r) for r in range(12))
    total = 0
    classes = set()
    for subset in subsets:
        purposes = frozenset(subset)
        for vendors in (frozenset(), frozenset({7})):
            core = TcCore(purposes_consent=purposes, vendor_consents=vendors)
            got = classify_tcf(core)
            assert got is brute_force(purposes, bool(vendors)), (purposes, vendors)
            classes.add(got)
            total += 1
    assert total == 2**11 * 2
    assert classes == {ConsentClass.POSITIVE, ConsentClass.NEGATIVE, ConsentClass.INDETERMINATE}


def test_extraction_manifest_equivalence():
    """The planted session yields exactly the manifest: no misses, no extras."""
    session = load_session(CASES / "manifest_extraction.json")
    manifest = json.loads((CASES / "manifest_extraction.manifest.json").read_text())
    expected = {
        (entry["location"], entry["request_id"], entry["tcs"])
        for entry in manifest["observations"]
    }
    assert len(expected) == 8  # one per location kind
    stage = session.stage("accepted")
    got = {
        (obs.location, obs.request_id, encode_tc_core(obs.value.core))
        for obs in scan_stage(stage)
    }
    assert got == expected


def _rows(paths):
    reports = [analyze_site(load_session(p), AuditConfig()) for p in paths]
    return aggregate_corpus(reports)


def test_table1_arithmetic_on_fixture_corpora():
    """Prevalence rows reproduce the documented ratios to 2 decimal places."""
    summary161 = _rows(CORPUS161)

    row = summary161.row("different_interface")
    assert (row.count, row.denominator) == (32, 161)
    assert row.percentage == pytest.approx(100 * 32 / 161, abs=0.005)  # 19.87..88

    row = summary161.row("effort_asymmetry")
    assert (row.count, row.denominator) == (33, 161)
    assert row.percentage == pytest.approx(100 * 33 / 161, abs=0.005)  # 20.50

    row = summary161.row("aa_after_revocation")
    assert (row.count, row.denominator) == (69, 120)
    assert row.percentage == pytest.approx(57.5, abs=0.005)

    summary136 = _rows(CORPUS136)

    row = summary136.row("positive_after_revocation_tcf")
    assert (row.count, row.denominator) == (22, 136)
    assert row.percentage == pytest.approx(100 * 22 / 136, abs=0.005)  # 16.17..18

    row = summary136.row("third_parties_not_informed")
    assert (row.count, row.denominator) == (101, 136)
    assert row.percentage == pytest.approx(100 * 101 / 136, abs=0.005)  # 74.26


def test_table5_histogram_shape_and_edges():
    """Bucket counts (1, 5, 15, 35, 45); 25% lands left-inclusive; 100% is its own bucket."""
    summary = _rows(CORPUS136)
    assert summary.histogram == {
        "<25": 1,
        ">=25 to <50": 5,
        ">=50 to <75": 15,
        ">=75 to <100": 35,
        "100": 45,
    }
    percentages = [
        analyze_site(load_session(p), AuditConfig()).percentage_not_informed
        for p in CORPUS136[1:3]
    ]
    assert 25.0 in percentages  # the exact-edge sites sit in the second bucket


def test_consistency_cases_produce_documented_kinds():
    """Stale store, stale API, and screen-only-update each yield their finding."""
    stale_store = analyze_site(load_session(CASES / "case_stale_store.json"))
    mismatches = [f for f in stale_store.findings if f.kind == "storage_api_mismatch"]
    assert len(mismatches) == 1 and mismatches[0].subkind == "stale_store"

    stale_api = analyze_site(load_session(CASES / "case_stale_api.json"))
    mismatches = [f for f in stale_api.findings if f.kind == "storage_api_mismatch"]
    assert len(mismatches) == 1 and mismatches[0].subkind == "stale_api"

    screen_only = analyze_site(load_session(CASES / "case_screen_only.json"))
    assert screen_only.has_finding("consent_not_updated")
    assert not screen_only.has_finding("storage_api_mismatch")


def test_grace_window_behavior():
    """2s stale request: info under a 5s window; 10s: violation; 15s window clears it."""
    session = load_session(CASES / "case_grace.json")

    narrow = analyze_site(session, AuditConfig(grace_window_seconds=5.0))
    delayed = [f for f in narrow.findings if f.kind == "delayed_update"]
    mismatches = [f for f in narrow.findings if f.kind == "network_api_mismatch"]
    assert [f.locator for f in delayed] == ["r-fast"]
    assert [f.locator for f in mismatches] == ["r-slow"]
    assert mismatches[0].severity == "violation"

    wide = analyze_site(session, AuditConfig(grace_window_seconds=15.0))
    assert not wide.has_finding("network_api_mismatch")
    narrow_violations = {
        (f.kind, f.locator) for f in narrow.findings if f.severity == "violation"
    }
    wide_violations = {
        (f.kind, f.locator) for f in wide.findings if f.severity == "violation"
    }
    assert wide_violations <= narrow_violations
    assert not (wide_violations - narrow_violations)


def test_determinism_and_runtime_of_full_corpus(tmp_path):
    """Two scan+report runs are byte-identical; the 161-site corpus scans in <30s."""
    files = [str(p) for p in CORPUS161]
    outputs = []
    elapsed = None
    for run in range(2):
        out_dir = tmp_path / f"run{run}"
        start = time.perf_counter()
        proc = subprocess.run(
            [sys.executable, "-m", "revaudit.cli", "scan", *files, "--out-dir", str(out_dir)],
            capture_output=True,
            text=True,
            check=True,
        )
        if run == 0:
            elapsed = time.perf_counter() - start
        summary = subprocess.run(
            [
                sys.executable, "-m", "revaudit.cli", "report",
                *sorted(str(p) for p in out_dir.glob("*.report.json")),
            ],
            capture_output=True,
            text=True,
            check=True,
        )
        blob = b"".join(p.read_bytes() for p in sorted(out_dir.glob("*.report.json")))
        outputs.append((blob, summary.stdout))
    assert outputs[0] == outputs[1]
    assert elapsed is not None and elapsed < 30.0, f"scan took {elapsed:.1f}s"
