#!/usr/bin/env python3
"""Regenerate the committed capture fixtures under tests/fixtures/.

Deterministic by construction (fixed base time, index-derived consent
strings), so reruns are byte-identical. The corpora are shaped to reproduce
the published prevalence arithmetic:

  corpus161     161 labeled sessions; interface categories, step counts, and
                AA-cookie placement drive the interface and cookie rows.
  corpus_tcf136 136 TCF sessions; 22 keep a positive consent after
                revocation, 101 leave at least one third party uninformed,
                with not-informed percentages filling the histogram buckets
                (1, 5, 15, 35, 45).
  cases         single-session fixtures for the extraction manifest, the
                store/API mismatch and screen-only-update cases, the grace
                window, and clean/dirty pipeline baselines.
"""

from __future__ import annotations

import json
import shutil
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

import capturebuild as cb  # noqa: E402

FIXTURES = ROOT / "tests" / "fixtures"

# banner, channel, site count, (steps_to_revoke, steps_to_accept)
TABLE2 = [
    ("consent_banner", "icon", 9, (0, 0)),
    ("consent_banner", "footer", 63, (1, 1)),
    ("consent_banner", "banner_on_policy", 6, (1, 1)),
    ("consent_banner", "via_policy", 21, (2, 0)),
    ("consent_banner", "settings_or_links", 8, None),
    ("consent_banner", "after_login", 1, None),
    ("no_option_banner", "via_policy", 5, (2, 0)),
    ("no_option_banner", "settings_or_links", 2, None),
    ("no_option_banner", "after_login", 1, None),
    ("no_banner", "footer", 4, (1, 1)),
    ("no_banner", "banner_on_policy", 5, (1, 1)),
    ("no_banner", "via_policy", 7, (2, 0)),
    ("no_banner", "settings_or_links", 17, None),
    ("no_banner", "contact_email", 3, None),
    ("no_banner", "none", 9, None),
]

SAME_INTERFACE = {"icon", "footer", "banner_on_policy", "via_policy"}
AA_AFTER_REVOCATION_SITES = 69  # of the 120 same-interface sites
AA_NO_REVOCATION_SITES = 4  # of the 9 "none" sites

# (sites, parties contacted at acceptance, parties left uninformed)
TCF_BUCKET_PLAN = [
    (1, 8, 1),  # 12.5%  -> <25
    (5, 4, 1),  # 25.0%  -> >=25 to <50 (left edge)
    (15, 2, 1),  # 50.0% -> >=50 to <75
    (35, 4, 3),  # 75.0% -> >=75 to <100
    (45, 3, 3),  # 100%
    (35, 3, 0),  # fully re-informed
]
POSITIVE_AFTER_REVOCATION_SITES = 22  # leading sites of the 100% bucket


def write(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def build_corpus161(out: Path) -> None:
    out.mkdir(parents=True)
    index = 0
    same_interface_seen = 0
    none_seen = 0
    for banner, channel, count, steps in TABLE2:
        for _ in range(count):
            site = f"site{index:03d}.com"
            labels = cb.labels(
                banner,
                channel,
                steps_to_revoke=None if steps is None else steps[0],
                steps_to_accept=None if steps is None else steps[1],
            )
            if channel in SAME_INTERFACE:
                keep_aa = same_interface_seen < AA_AFTER_REVOCATION_SITES
                same_interface_seen += 1
                accepted_cookies = [cb.cookie("_ga", f"GA1.2.{index}", f".{site}")]
                revoked_cookies = list(accepted_cookies) if keep_aa else []
                stages = [
                    cb.stage("initial"),
                    cb.stage("accepted", cookies=accepted_cookies),
                    cb.stage("revoked", cookies=revoked_cookies),
                    cb.stage("rejected"),
                ]
            elif channel == "none":
                with_aa = none_seen < AA_NO_REVOCATION_SITES
                none_seen += 1
                cookies = [cb.cookie("_ga", f"GA1.2.{index}", f".{site}")] if with_aa else []
                stages = [cb.stage("initial", cookies=cookies)]
            else:
                stages = [cb.stage("initial")]
            write(out / f"{site}.json", cb.session(site, stages, labels))
            index += 1
    assert index == 161, index


def build_corpus_tcf136(out: Path) -> None:
    out.mkdir(parents=True)
    index = 0
    positive_budget = POSITIVE_AFTER_REVOCATION_SITES
    for sites, parties, uninformed in TCF_BUCKET_PLAN:
        for _ in range(sites):
            site = f"tcf{index:03d}.com"
            accepted_tcs = cb.positive_tcs(created=17_100_000_000 + index)
            updated_tcs = cb.negative_tcs(created=17_100_500_000 + index)
            keeps_positive = uninformed == parties and parties > 0 and positive_budget > 0
            if keeps_positive:
                positive_budget -= 1
            revoked_api = accepted_tcs if keeps_positive else updated_tcs

            accepted_requests = [
                cb.request(
                    f"a{j}",
                    f"https://sync.adnet{j}.com/c?gdpr_consent={accepted_tcs}",
                    "accepted",
                    30 + j,
                )
                for j in range(parties)
            ]
            revoked_requests = [
                cb.request(
                    f"r{j}",
                    f"https://sync.adnet{j}.com/c?gdpr_consent={updated_tcs}",
                    "revoked",
                    30 + j,
                )
                for j in range(uninformed, parties)
            ]
            stages = [
                cb.stage("initial", tcfapi=cb.negative_tcs(created=17_100_000_000)),
                cb.stage("accepted", tcfapi=accepted_tcs, requests=accepted_requests),
                cb.stage("revoked", tcfapi=revoked_api, requests=revoked_requests),
                cb.stage("rejected", tcfapi=cb.negative_tcs(created=17_100_000_000)),
            ]
            doc = cb.session(site, stages, cb.labels("consent_banner", "footer", 1, 1))
            write(out / f"{site}.json", doc)
            index += 1
    assert index == 136, index
    assert positive_budget == 0, positive_budget


def build_manifest_case(out: Path) -> None:
    def tcs(n: int) -> str:
        return cb.positive_tcs(created=17_200_000_000 + n)

    plants = {
        ("url_query", "r-url"): tcs(1),
        ("post_data_json", "r-postjson"): tcs(2),
        ("post_data_raw", "r-postraw"): tcs(3),
        ("request_cookie_header", "r-cookie"): tcs(4),
        ("response_set_cookie", "r-setcookie"): tcs(5),
        ("response_json", "r-respjson"): tcs(6),
        ("response_html_url", "r-resphtml"): tcs(7),
        ("redirect_url", "r-redirect"): tcs(8),
    }
    # 20 decoys: consent-shaped but wrong, or valid strings in unscanned spots
    wrong_version = "D" + tcs(9)[1:]
    truncated = tcs(10)[:40]
    decoy_tokens = [
        "0b7a3e58-9c1f-4e2a-9a77-2f58f3f1c001",
        "ABC123",
        "XXX",
        "QUFBQUFB",
        "C" * 35,
        "C" + "A" * 40,
        wrong_version,
        truncated,
        "deadbeefcafe",
        "eyJhbGciOiJIUzI1NiJ9",
    ]  # 10 token decoys
    requests = [
        cb.request("r-url", f"https://ads.example.com/c?gdpr_consent={plants[('url_query', 'r-url')]}&uid={decoy_tokens[0]}&isbn={decoy_tokens[2]}", "accepted", 30),
        cb.request(
            "r-postjson",
            "https://ads.example.com/j",
            "accepted",
            31,
            method="POST",
            post_data=json.dumps(
                {
                    "tc": plants[("post_data_json", "r-postjson")],
                    "session": decoy_tokens[3],
                    plants[("url_query", "r-url")]: "tcs-as-key-not-scanned",
                    "nested": [{"v": decoy_tokens[6]}],
                }
            ),
        ),
        cb.request(
            "r-postraw",
            "https://ads.example.com/r",
            "accepted",
            32,
            method="POST",
            post_data=f"a={decoy_tokens[1]}&consent={plants[('post_data_raw', 'r-postraw')]}&t={decoy_tokens[7]}",
        ),
        cb.request(
            "r-cookie",
            "https://ads.example.com/k",
            "accepted",
            33,
            request_headers=[
                ["Cookie", f"sid={decoy_tokens[8]}; euconsent-v2={plants[('request_cookie_header', 'r-cookie')]}; jwt={decoy_tokens[9]}"]
            ],
        ),
        cb.request(
            "r-setcookie",
            "https://ads.example.com/s",
            "accepted",
            34,
            resp=cb.response(
                200,
                [
                    ["Set-Cookie", f"euconsent-v2={plants[('response_set_cookie', 'r-setcookie')]}; Path=/"],
                    ["Set-Cookie", f"uid={decoy_tokens[4]}; Path=/"],
                ],
            ),
        ),
        cb.request(
            "r-respjson",
            "https://ads.example.com/jr",
            "accepted",
            35,
            resp=cb.response(
                200,
                body_kind="json",
                body=json.dumps({"tc": plants[("response_json", "r-respjson")], "alt": decoy_tokens[5]}),
            ),
        ),
        cb.request(
            "r-resphtml",
            "https://ads.example.com/h",
            "accepted",
            36,
            resp=cb.response(
                200,
                body_kind="html",
                body=(
                    f'<script src="https://cdn.example.com/t.js?c={plants[("response_html_url", "r-resphtml")]}"></script>'
                    f'<a href="https://cdn.example.com/?c={tcs(11)}">anchor decoy</a>'
                    f'<link href="https://cdn.example.com/?c={tcs(12)}">'
                    f'<img alt="no url decoy {decoy_tokens[0]}">'
                ),
            ),
        ),
        cb.request(
            "r-redirect",
            "https://ads.example.com/rd",
            "accepted",
            37,
            resp=cb.response(
                302,
                redirect_url=f"https://edge.example.com/?c={plants[('redirect_url', 'r-redirect')]}&x={decoy_tokens[1]}",
            ),
        ),
        cb.request(
            f"r-decoy-path/{tcs(13)}"[:9],
            f"https://ads.example.com/{tcs(13)}/pixel?v={wrong_version}&w={truncated}",
            "accepted",
            38,
            method="POST",
            post_data=f"plain text with {decoy_tokens[3]} inside",
            resp=cb.response(
                200,
                body_kind="other",
                body=None,
            ),
        ),
    ]
    # decoy inventory: 10 tokens + tcs-as-json-key + anchor href + link href
    # + img-without-src + url path + wrong-version/truncated reuses in r-decoy = 20+
    doc = cb.session(
        "pub.example.com", [cb.stage("initial"), cb.stage("accepted", requests=requests)]
    )
    write(out / "manifest_extraction.json", doc)
    manifest = [
        {"location": location, "request_id": request_id, "tcs": value}
        for (location, request_id), value in sorted(plants.items())
    ]
    write(out / "manifest_extraction.manifest.json", {"observations": manifest})


def build_cases(out: Path) -> None:
    out.mkdir(parents=True)
    positive = cb.positive_tcs(created=17_300_000_000)
    negative_initial = cb.negative_tcs(created=17_300_000_000)
    updated = cb.negative_tcs(created=17_300_000_500)

    # store keeps the accepted consent while the API was updated
    write(
        out / "case_stale_store.json",
        cb.session(
            "stale-store.com",
            [
                cb.stage("initial", tcfapi=negative_initial, cookies=[cb.cookie("euconsent-v2", negative_initial, ".stale-store.com")]),
                cb.stage("accepted", tcfapi=positive, cookies=[cb.cookie("euconsent-v2", positive, ".stale-store.com")]),
                cb.stage("revoked", tcfapi=updated, cookies=[cb.cookie("euconsent-v2", positive, ".stale-store.com")]),
            ],
        ),
    )

    # API keeps the accepted consent while the cookie was updated
    write(
        out / "case_stale_api.json",
        cb.session(
            "stale-api.com",
            [
                cb.stage("initial", tcfapi=negative_initial, cookies=[cb.cookie("euconsent-v2", negative_initial, ".stale-api.com")]),
                cb.stage("accepted", tcfapi=positive, cookies=[cb.cookie("euconsent-v2", positive, ".stale-api.com")]),
                cb.stage("revoked", tcfapi=positive, cookies=[cb.cookie("euconsent-v2", updated, ".stale-api.com")]),
            ],
        ),
    )

    # only the consent screen changes on revocation
    screen_changed = cb.positive_tcs(created=17_300_000_000, consent_screen=3)
    write(
        out / "case_screen_only.json",
        cb.session(
            "screen-only.com",
            [
                cb.stage("initial", tcfapi=negative_initial),
                cb.stage("accepted", tcfapi=positive),
                cb.stage("revoked", tcfapi=screen_changed),
            ],
        ),
    )

    # stale consent in traffic at 2s and 10s after the revocation action
    write(
        out / "case_grace.json",
        cb.session(
            "grace.com",
            [
                cb.stage("initial", tcfapi=negative_initial),
                cb.stage(
                    "accepted",
                    tcfapi=positive,
                    requests=[cb.request("a0", f"https://sync.adnet0.com/c?gdpr_consent={positive}", "accepted", 30)],
                ),
                cb.stage(
                    "revoked",
                    tcfapi=updated,
                    requests=[
                        cb.request("r-fast", f"https://sync.adnet0.com/c?gdpr_consent={positive}", "revoked", 2),
                        cb.request("r-slow", f"https://sync.adnet0.com/c?gdpr_consent={positive}", "revoked", 10),
                    ],
                ),
            ],
        ),
    )

    # fully compliant site
    write(
        out / "case_clean.json",
        cb.session(
            "clean.com",
            [
                cb.stage("initial", tcfapi=negative_initial, cookies=[cb.cookie("euconsent-v2", negative_initial, ".clean.com")]),
                cb.stage(
                    "accepted",
                    tcfapi=positive,
                    cookies=[cb.cookie("euconsent-v2", positive, ".clean.com")],
                    requests=[cb.request("a0", f"https://sync.adnet0.com/c?gdpr_consent={positive}", "accepted", 30)],
                ),
                cb.stage(
                    "revoked",
                    tcfapi=updated,
                    cookies=[cb.cookie("euconsent-v2", updated, ".clean.com")],
                    requests=[cb.request("r0", f"https://sync.adnet0.com/c?gdpr_consent={updated}", "revoked", 30)],
                ),
                cb.stage("rejected", tcfapi=negative_initial),
            ],
            cb.labels("consent_banner", "footer", 1, 1),
        ),
    )

    # stale cookie plus one uninformed third party
    write(
        out / "case_dirty.json",
        cb.session(
            "dirty.com",
            [
                cb.stage("initial", tcfapi=negative_initial, cookies=[cb.cookie("euconsent-v2", negative_initial, ".dirty.com")]),
                cb.stage(
                    "accepted",
                    tcfapi=positive,
                    cookies=[cb.cookie("euconsent-v2", positive, ".dirty.com")],
                    requests=[
                        cb.request("a0", f"https://sync.adnet0.com/c?gdpr_consent={positive}", "accepted", 30),
                        cb.request("a1", f"https://px.adnet1.com/c?gdpr_consent={positive}", "accepted", 31),
                    ],
                ),
                cb.stage(
                    "revoked",
                    tcfapi=updated,
                    cookies=[cb.cookie("euconsent-v2", positive, ".dirty.com")],
                    requests=[cb.request("r1", f"https://px.adnet1.com/c?gdpr_consent={updated}", "revoked", 30)],
                ),
            ],
            cb.labels("consent_banner", "footer", 1, 1),
        ),
    )

    # schema floor
    write(out / "case_minimal.json", cb.session("minimal.com", [cb.stage("initial")]))

    build_manifest_case(out)


def build_stub_strings() -> None:
    """Consent strings baked into the capture harness's CMP-stub site."""
    target = ROOT / "frontend" / "src" / "stub" / "consent-strings.json"
    if not target.parent.exists():
        return
    write(
        target,
        {
            "initial": cb.negative_tcs(created=17_400_000_000),
            "accepted": cb.positive_tcs(created=17_400_000_100),
            "revoked": cb.negative_tcs(created=17_400_000_200),
            "rejected": cb.negative_tcs(created=17_400_000_300),
        },
    )


def main() -> None:
    if FIXTURES.exists():
        for sub in ("corpus161", "corpus_tcf136", "cases"):
            shutil.rmtree(FIXTURES / sub, ignore_errors=True)
    build_corpus161(FIXTURES / "corpus161")
    build_corpus_tcf136(FIXTURES / "corpus_tcf136")
    build_cases(FIXTURES / "cases")
    build_stub_strings()
    total = sum(1 for _ in FIXTURES.rglob("*.json"))
    print(f"wrote {total} fixture files under {FIXTURES}")


if __name__ == "__main__":
    main()
