"""Registrable domains, informed-party diffs, attribution, and buckets."""

from __future__ import annotations

import json

import pytest

import capturebuild as cb
from revaudit.capture import loads_session
from revaudit.netscan import scan_stage
from revaudit.tcs import decode_tc_string, project_consent
from revaudit.thirdparty import (
    Attribution,
    MissingStage,
    NoEvidence,
    OutOfRange,
    PartyRegistry,
    PublicSuffixList,
    UnparsableHost,
    api_access_diff,
    attribute_responsible_party,
    bucket_percentages,
    default_psl,
    diff_informed,
    informed_parties_http,
    load_registry,
    registrable_domain,
    set_cookie_after_revocation,
)

# -- registrable domain --------------------------------------------------------


def naive_psl_oracle(host: str, rules: list[str]) -> str:
    """Independent matcher: try every rule against the host, longest wins."""
    labels = host.split(".")
    best = 0  # label count of the winning public suffix
    for rule in rules:
        rule = rule.strip()
        if not rule or rule.startswith("//"):
            continue
        exception = rule.startswith("!")
        body = rule[1:] if exception else rule
        rule_labels = body.split(".")
        if len(rule_labels) > len(labels):
            continue
        tail = labels[-len(rule_labels):]
        if all(r == "*" or r == t for r, t in zip(rule_labels, tail)):
            size = len(rule_labels) - 1 if exception else len(rule_labels)
            best = max(best, size)
            if exception:
                return ".".join(labels[-(size + 1):])
    if best == 0:
        best = 1
    return ".".join(labels[-(best + 1):]) if len(labels) > best else host


def test_registrable_domain_against_snapshot_oracle():
    rules = ["com", "co.uk", "org", "io", "*.ck", "!www.ck", "net"]
    psl = PublicSuffixList(rules)
    hosts = [
        "cdn.tracker.co.uk",
        "tracker.co.uk",
        "deep.sub.example.com",
        "example.org",
        "www.ck",
        "thing.norule",
        "a.b.c.io",
        "foo.bar.ck",
    ]
    for host in hosts:
        assert psl.registrable_domain(host) == naive_psl_oracle(host, rules), host


def test_registrable_domain_examples():
    assert registrable_domain("https://cdn.tracker.co.uk/x") == "tracker.co.uk"
    assert registrable_domain("example.com") == "example.com"
    assert registrable_domain("https://192.0.2.1/x") == "192.0.2.1"
    assert registrable_domain("HTTPS://WWW.Example.COM/p") == "example.com"
    assert registrable_domain("host.example.com:8443") == "example.com"


def test_registrable_domain_unparsable():
    with pytest.raises(UnparsableHost):
        registrable_domain("")
    with pytest.raises(UnparsableHost):
        registrable_domain("https:///nopath")


def test_empty_rule_set_rejected():
    with pytest.raises(ValueError):
        PublicSuffixList(["// only comments"])


# -- informed parties ----------------------------------------------------------


def _registry(**kwargs) -> PartyRegistry:
    return PartyRegistry(
        psl=default_psl(),
        cmp_registry={7: "Didomi", 415: "Ketch Kloud, Inc."},
        tracking_domains=frozenset({"adnet1.com"}),
        first_party_aliases=kwargs.get("aliases", {}),
    )


def informed_session(revoked_informs: list[int], accepted_parties: int = 3) -> dict:
    accepted_tcs = cb.positive_tcs()
    revoked_tcs = cb.negative_tcs(created=17_000_000_300)
    accepted_requests = [
        cb.request(f"a{j}", f"https://t.adnet{j}.com/c?consent={accepted_tcs}", "accepted", 30 + j)
        for j in range(accepted_parties)
    ]
    revoked_requests = [
        cb.request(f"r{j}", f"https://t.adnet{j}.com/c?consent={revoked_tcs}", "revoked", 30 + j)
        for j in revoked_informs
    ]
    return cb.session(
        "pub.example",
        [
            cb.stage("initial", tcfapi=cb.negative_tcs()),
            cb.stage("accepted", tcfapi=accepted_tcs, requests=accepted_requests),
            cb.stage("revoked", tcfapi=revoked_tcs, requests=revoked_requests),
        ],
    )


def _analyze_informed(doc: dict, registry: PartyRegistry):
    session = loads_session(json.dumps(doc))
    observations = {s.stage: scan_stage(s, registry.domain_of) for s in session.stages}
    revoked_projection = project_consent(
        decode_tc_string(session.stage("revoked").api_snapshots.tcfapi_tc_string).core
    )
    return session, observations, revoked_projection


def test_informed_parties_excludes_first_party():
    registry = _registry()
    doc = informed_session([])
    doc["stages"][1]["requests"].append(
        cb.request("self", f"https://www.pub.example/x?c={cb.positive_tcs()}", "accepted", 50)
    )
    session, observations, _ = _analyze_informed(doc, registry)
    informed = informed_parties_http(observations["accepted"], session.site, registry)
    assert set(informed) == {"adnet0.com", "adnet1.com", "adnet2.com"}


def test_informed_parties_merges_evidence_per_party():
    registry = _registry()
    doc = informed_session([])
    doc["stages"][1]["requests"].append(
        cb.request("dup", f"https://other.adnet0.com/c?x={cb.positive_tcs()}", "accepted", 51)
    )
    session, observations, _ = _analyze_informed(doc, registry)
    informed = informed_parties_http(observations["accepted"], session.site, registry)
    assert len(informed["adnet0.com"]) == 2


def test_diff_informed_none_reinformed():
    registry = _registry()
    session, observations, projection = _analyze_informed(informed_session([]), registry)
    reports, findings, percentage = diff_informed(
        session, observations, registry, 5.0, projection
    )
    assert percentage == 100.0
    assert {f.locator for f in findings} == {"adnet0.com", "adnet1.com", "adnet2.com"}
    assert all(f.kind == "third_party_not_informed" for f in findings)
    assert all(f.rules == {"LR6", "P1", "P2"} for f in findings)
    tracked = next(r for r in reports if r.party == "adnet1.com")
    assert tracked.is_tracking_domain


def test_diff_informed_partial_and_full():
    registry = _registry()
    session, observations, projection = _analyze_informed(informed_session([0, 1, 2]), registry)
    reports, findings, percentage = diff_informed(session, observations, registry, 5.0, projection)
    assert findings == [] and percentage == 0.0
    assert all(r.informed_at_revoke for r in reports)

    session, observations, projection = _analyze_informed(informed_session([0]), registry)
    _, findings, percentage = diff_informed(session, observations, registry, 5.0, projection)
    assert len(findings) == 2
    assert percentage == pytest.approx(100 * 2 / 3)


def test_diff_informed_subdomain_counts_as_same_party():
    registry = _registry()
    doc = informed_session([])
    doc["stages"][2]["requests"].append(
        cb.request(
            "rx", f"https://beacon.adnet0.com/p?c={cb.negative_tcs(created=17_000_000_300)}", "revoked", 40
        )
    )
    session, observations, projection = _analyze_informed(doc, registry)
    _, findings, _ = _analyze_counts = diff_informed(session, observations, registry, 5.0, projection)
    assert {f.locator for f in findings} == {"adnet1.com", "adnet2.com"}


def test_diff_informed_stale_receipt_does_not_inform():
    registry = _registry()
    doc = informed_session([])
    # party 0 receives only the pre-revocation consent, well past the window
    doc["stages"][2]["requests"].append(
        cb.request("stale", f"https://t.adnet0.com/c?consent={cb.positive_tcs()}", "revoked", 40)
    )
    session, observations, projection = _analyze_informed(doc, registry)
    _, findings, percentage = diff_informed(session, observations, registry, 5.0, projection)
    assert {f.locator for f in findings} == {"adnet0.com", "adnet1.com", "adnet2.com"}
    # and enlarging the window never adds findings
    _, findings_wide, _ = diff_informed(session, observations, registry, 60.0, projection)
    assert {f.locator for f in findings_wide} <= {f.locator for f in findings}


def test_diff_informed_requires_stages():
    registry = _registry()
    doc = cb.session("pub.example", [cb.stage("initial")])
    session = loads_session(json.dumps(doc))
    with pytest.raises(MissingStage):
        diff_informed(session, {}, registry)


def test_diff_informed_anti_monotone():
    registry = _registry()
    base_doc = informed_session([0])
    session, observations, projection = _analyze_informed(base_doc, registry)
    before = {
        f.locator for f in diff_informed(session, observations, registry, 5.0, projection)[1]
    }
    grown_doc = informed_session([0, 1])
    session2, observations2, projection2 = _analyze_informed(grown_doc, registry)
    after = {
        f.locator for f in diff_informed(session2, observations2, registry, 5.0, projection2)[1]
    }
    assert after <= before


# -- api access diff -------------------------------------------------------------


def api_session(revoked_reads: bool, listener: bool = False, first_party: bool = False) -> dict:
    script = "https://www.pub.example/own.js" if first_party else "https://vendor.example/v.js"
    accepted_accesses = [cb.api_access("tcfapi", "getTCData", script, "accepted")]
    if listener:
        accepted_accesses.append(cb.api_access("tcfapi", "addEventListener", script, "accepted", 32))
    revoked_accesses = (
        [cb.api_access("tcfapi", "getTCData", script, "revoked")] if revoked_reads else []
    )
    return cb.session(
        "pub.example",
        [
            cb.stage("initial"),
            cb.stage("accepted", api_accesses=accepted_accesses),
            cb.stage("revoked", api_accesses=revoked_accesses),
        ],
    )


def test_api_access_diff_flags_accept_only_reader():
    findings = api_access_diff(loads_session(json.dumps(api_session(False))), _registry())
    assert len(findings) == 1
    assert findings[0].kind == "api_consumer_not_updated"
    assert findings[0].severity == "warning"
    assert findings[0].locator == "vendor.example"


def test_api_access_diff_listener_suppresses():
    findings = api_access_diff(
        loads_session(json.dumps(api_session(False, listener=True))), _registry()
    )
    assert findings == []


def test_api_access_diff_reader_updated_and_first_party():
    assert api_access_diff(loads_session(json.dumps(api_session(True))), _registry()) == []
    assert (
        api_access_diff(loads_session(json.dumps(api_session(False, first_party=True))), _registry())
        == []
    )


def test_api_access_diff_onetrust_reader():
    doc = cb.session(
        "pub.example",
        [
            cb.stage("accepted", api_accesses=[cb.api_access("onetrust_groups_get", None, "https://v.example/x.js", "accepted")]),
            cb.stage("revoked"),
        ],
    )
    findings = api_access_diff(loads_session(json.dumps(doc)), _registry())
    assert len(findings) == 1 and findings[0].source == "onetrust"


# -- set-cookie after revocation -------------------------------------------------


def test_set_cookie_after_revocation():
    registry = _registry()
    doc = informed_session([1])
    doc["stages"][2]["requests"].append(
        cb.request(
            "sc",
            "https://pix.adnet0.com/pixel",
            "revoked",
            45,
            resp=cb.response(200, [["Set-Cookie", "id=77; Max-Age=86400"]]),
        )
    )
    session, observations, projection = _analyze_informed(doc, registry)
    reports, _, _ = diff_informed(session, observations, registry, 5.0, projection)
    updated, findings = set_cookie_after_revocation(session, reports, registry)
    flagged = {r.party: r.set_cookie_after_revocation for r in updated}
    assert flagged["adnet0.com"] is True
    assert flagged["adnet1.com"] is False  # informed party: no finding here
    assert [f.kind for f in findings] == ["processing_after_revocation"]
    assert findings[0].rules == {"LR4", "LR6", "P1", "P2"}


# -- attribution ------------------------------------------------------------------


def test_attribution_cases():
    registry = _registry()
    cmp_hit = attribute_responsible_party(
        "pub.example", registry, initiator_url="https://consent.didomi.io/sdk.js", cmp_id=7
    )
    assert cmp_hit == Attribution("cmp", "Didomi")

    first = attribute_responsible_party(
        "pub.example", registry, initiator_url="https://www.pub.example/app.js", cmp_id=7
    )
    assert first.kind == "first_party"

    third = attribute_responsible_party(
        "pub.example", registry, initiator_url="https://kinja-static.com/main.js", cmp_id=7
    )
    assert third == Attribution("third_party", "kinja-static.com")
    assert str(third) == "third_party(kinja-static.com)"


def test_attribution_shortened_cmp_name_with_marker_label():
    registry = _registry()
    hit = attribute_responsible_party(
        "pub.example", registry, initiator_url="https://global.ketchcdn.com/web/v2/config.js", cmp_id=415
    )
    assert hit == Attribution("cmp", "Ketch Kloud, Inc.")


def test_attribution_unknown_cmp_id_degrades():
    registry = _registry()
    got = attribute_responsible_party(
        "pub.example", registry, initiator_url="https://consent.didomi.io/sdk.js", cmp_id=9999
    )
    assert got.kind == "third_party"


def test_attribution_alias_is_first_party():
    registry = _registry(aliases={"pub.example": frozenset({"pubstatic.net"})})
    got = attribute_responsible_party(
        "pub.example", registry, initiator_url="https://cdn.pubstatic.net/a.js"
    )
    assert got.kind == "first_party"


def test_attribution_requires_evidence():
    with pytest.raises(NoEvidence):
        attribute_responsible_party("pub.example", _registry())


def test_attribution_cmp_id_alone_is_third_party():
    got = attribute_responsible_party("pub.example", _registry(), cmp_id=7)
    assert got.kind == "third_party" and got.name is None


def test_first_party_alias_file(tmp_path):
    from revaudit.thirdparty import load_first_party_aliases

    path = tmp_path / "aliases.txt"
    path.write_text(
        "# same-operator domains\npub.example pubstatic.net\npub.example pubcdn.io\n",
        encoding="utf-8",
    )
    aliases = load_first_party_aliases(path)
    assert aliases == {"pub.example": frozenset({"pubstatic.net", "pubcdn.io"})}
    registry = load_registry(first_party_aliases=path)
    assert registry.own_domains("pub.example") == {"pub.example", "pubstatic.net", "pubcdn.io"}
    path.write_text("onlyonefield\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_first_party_aliases(path)


# -- buckets ----------------------------------------------------------------------


def test_bucket_histogram_hand_counted():
    got = bucket_percentages([100, 100, 80, 60, 30, 10])
    assert got == {"<25": 1, ">=25 to <50": 1, ">=50 to <75": 1, ">=75 to <100": 1, "100": 2}


def test_bucket_edges():
    assert bucket_percentages([25])[">=25 to <50"] == 1
    assert bucket_percentages([50])[">=50 to <75"] == 1
    assert bucket_percentages([75])[">=75 to <100"] == 1
    assert bucket_percentages([99.99])[">=75 to <100"] == 1
    assert bucket_percentages([100])["100"] == 1
    assert bucket_percentages([0])["<25"] == 1


def test_bucket_out_of_range():
    with pytest.raises(OutOfRange):
        bucket_percentages([101])
    with pytest.raises(OutOfRange):
        bucket_percentages([-0.1])


def test_load_registry_bundled():
    registry = load_registry()
    assert registry.cmp_registry[7] == "Didomi"
    assert registry.is_tracking("doubleclick.net")
    assert not registry.is_tracking("example.com")
