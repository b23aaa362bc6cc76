"""Stage-by-stage consent validity and cross-store consistency checks.

Gathers every consent sighting (cookies, localStorage, API snapshots) into
source snapshots, then checks that each stage holds the legally expected
class, that revocation actually updated stored consent, that stores and APIs
agree, and that traffic carries the same consent the API reports.

All comparisons use the consent projection, never raw string equality: a
string whose only change is the consent screen or a timestamp counts as not
updated.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

from revaudit.capture import OPTANON_COOKIE, CaptureSession, StageRecord
from revaudit.consent import ConsentClass, classify_tcf
from revaudit.findings import INFO, VIOLATION, Finding
from revaudit.netscan import ConsentObservation
from revaudit.onetrust import (
    BaselineComparison,
    OneTrustConsent,
    OneTrustError,
    compare_to_baseline,
    parse_active_groups,
    parse_optanon_cookie,
)
from revaudit.tcs import ConsentProjection, TcString, project_consent, sniff_tcs

__all__ = [
    "ConsentSourceSnapshot",
    "MissingBaseline",
    "TCF_SOURCES",
    "ONETRUST_SOURCES",
    "collect_snapshots",
    "check_stage_validity",
    "check_updated_after_revocation",
    "check_store_api_consistency",
    "check_network_vs_api",
]

TCF_SOURCES = frozenset({"tcfapi", "tcf_cookie", "tcf_local_storage"})
ONETRUST_SOURCES = frozenset({"onetrust_active_groups", "optanon_cookie"})

_VALIDITY_KIND = {
    "initial": "positive_consent_at_initial",
    "rejected": "positive_consent_after_rejection",
    "revoked": "positive_consent_after_revocation",
}


class MissingBaseline(Exception):
    """OneTrust positivity needs the initial-landing value for comparison."""


@dataclass(frozen=True)
class ConsentSourceSnapshot:
    source: str  # tcfapi | tcf_cookie | tcf_local_storage | onetrust_active_groups | optanon_cookie
    stage: str
    value: TcString | OneTrustConsent
    locator: str  # cookie name / storage key / api name


def collect_snapshots(session: CaptureSession) -> list[ConsentSourceSnapshot]:
    """One snapshot per (source, locator, stage) found in the session.

    Cookie and localStorage values are sniffed for the TCF format; API
    snapshots are decoded/parsed. Unparseable candidates are skipped.
    """
    snapshots: list[ConsentSourceSnapshot] = []
    for stage in session.stages:
        for cookie in stage.cookies:
            if cookie.name == OPTANON_COOKIE:
                try:
                    parsed = parse_optanon_cookie(cookie.value)
                except OneTrustError:
                    continue
                snapshots.append(
                    ConsentSourceSnapshot("optanon_cookie", stage.stage, parsed, cookie.name)
                )
                continue
            decoded = sniff_tcs(cookie.value)
            if decoded is not None:
                snapshots.append(
                    ConsentSourceSnapshot("tcf_cookie", stage.stage, decoded, cookie.name)
                )
        for _, key, value in stage.local_storage:
            decoded = sniff_tcs(value)
            if decoded is not None:
                snapshots.append(
                    ConsentSourceSnapshot("tcf_local_storage", stage.stage, decoded, key)
                )
        api = stage.api_snapshots
        if api.tcfapi_tc_string is not None:
            decoded = sniff_tcs(api.tcfapi_tc_string)
            if decoded is not None:
                snapshots.append(
                    ConsentSourceSnapshot("tcfapi", stage.stage, decoded, "__tcfapi")
                )
        if api.onetrust_active_groups is not None:
            snapshots.append(
                ConsentSourceSnapshot(
                    "onetrust_active_groups",
                    stage.stage,
                    parse_active_groups(api.onetrust_active_groups),
                    "OneTrustActiveGroups",
                )
            )
    return snapshots


def _baseline_for(
    snapshots: list[ConsentSourceSnapshot], source: str, locator: str
) -> OneTrustConsent | None:
    for snap in snapshots:
        if snap.stage == "initial" and snap.source == source and snap.locator == locator:
            return snap.value  # type: ignore[return-value]
    return None


def _is_positive(
    snap: ConsentSourceSnapshot, snapshots: list[ConsentSourceSnapshot]
) -> bool:
    """Positivity of one snapshot; OneTrust is judged against initial landing."""
    if snap.source in TCF_SOURCES:
        value: TcString = snap.value  # type: ignore[assignment]
        return classify_tcf(value.core) is ConsentClass.POSITIVE
    baseline = _baseline_for(snapshots, snap.source, snap.locator)
    if baseline is None:
        raise MissingBaseline(f"{snap.source} at {snap.stage} has no initial-landing value")
    return compare_to_baseline(snap.value, baseline) is BaselineComparison.POSITIVE  # type: ignore[arg-type]


def check_stage_validity(
    snapshots: list[ConsentSourceSnapshot], stage: str, site: str = ""
) -> list[Finding]:
    """Flag positive consent where only negative consent is legitimate.

    Applies to initial, rejected, and revoked stages; acceptance never
    produces validity findings. Raises MissingBaseline when a OneTrust
    snapshot at a non-initial stage has no initial-landing counterpart.
    """
    if stage not in _VALIDITY_KIND:
        return []
    findings = []
    for snap in snapshots:
        if snap.stage != stage:
            continue
        if not _is_positive(snap, snapshots):
            continue
        revoked = stage == "revoked"
        findings.append(
            Finding(
                kind=_VALIDITY_KIND[stage],
                rules=frozenset({"LR5", "P2"}) if stage != "initial" else frozenset(),
                stage=stage,
                site=site,
                evidence=(f"{snap.source} ({snap.locator}) holds positive consent",),
                severity=VIOLATION if stage != "initial" else INFO,
                locator=snap.locator,
                source=snap.source,
            )
        )
    return findings


def _pairs_by_key(
    snapshots: list[ConsentSourceSnapshot], first: str, second: str
) -> list[tuple[ConsentSourceSnapshot, ConsentSourceSnapshot]]:
    index = {
        (s.source, s.locator, s.stage): s for s in snapshots
    }
    out = []
    for snap in snapshots:
        if snap.stage != first:
            continue
        other = index.get((snap.source, snap.locator, second))
        if other is not None:
            out.append((snap, other))
    return out


def check_updated_after_revocation(
    snapshots: list[ConsentSourceSnapshot], site: str = ""
) -> list[Finding]:
    """Flag sources whose value did not change between acceptance and
    revocation while the accepted value was positive.

    Metadata-only changes (timestamps, consent screen) count as not updated.
    """
    findings = []
    for accepted, revoked in _pairs_by_key(snapshots, "accepted", "revoked"):
        if accepted.source in TCF_SOURCES:
            acc_value: TcString = accepted.value  # type: ignore[assignment]
            rev_value: TcString = revoked.value  # type: ignore[assignment]
            unchanged = project_consent(acc_value.core) == project_consent(rev_value.core)
            positive = classify_tcf(acc_value.core) is ConsentClass.POSITIVE
        else:
            baseline = _baseline_for(snapshots, accepted.source, accepted.locator)
            if baseline is None:
                continue
            unchanged = (
                accepted.value.enabled_groups == revoked.value.enabled_groups  # type: ignore[union-attr]
            )
            positive = (
                compare_to_baseline(accepted.value, baseline)  # type: ignore[arg-type]
                is BaselineComparison.POSITIVE
            )
        if unchanged and positive:
            findings.append(
                Finding(
                    kind="consent_not_updated",
                    rules=frozenset({"LR5", "P2"}),
                    stage="revoked",
                    site=site,
                    evidence=(
                        f"{accepted.source} ({accepted.locator}) still holds the "
                        "accepted consent after revocation",
                    ),
                    severity=VIOLATION,
                    locator=accepted.locator,
                    source=accepted.source,
                )
            )
    return findings


def check_store_api_consistency(
    snapshots: list[ConsentSourceSnapshot], stage: str, site: str = ""
) -> list[Finding]:
    """Flag stores disagreeing with the API of the same family at one stage."""
    by_stage = [s for s in snapshots if s.stage == stage]
    api_tcf = next((s for s in by_stage if s.source == "tcfapi"), None)
    api_ot = next((s for s in by_stage if s.source == "onetrust_active_groups"), None)
    findings = []
    for snap in by_stage:
        if snap.source in ("tcf_cookie", "tcf_local_storage") and api_tcf is not None:
            store_core = snap.value.core  # type: ignore[union-attr]
            api_core = api_tcf.value.core  # type: ignore[union-attr]
            if project_consent(store_core) == project_consent(api_core):
                continue
            store_positive = classify_tcf(store_core) is ConsentClass.POSITIVE
            api_positive = classify_tcf(api_core) is ConsentClass.POSITIVE
            if store_positive and not api_positive:
                detail = "stale store: storage positive, tcfapi negative"
            elif api_positive and not store_positive:
                detail = "stale API: tcfapi positive, storage negative"
            else:
                detail = "storage and tcfapi disagree"
            findings.append(
                Finding(
                    kind="storage_api_mismatch",
                    rules=frozenset({"LR5", "P2"}),
                    stage=stage,
                    site=site,
                    evidence=(f"{snap.source} ({snap.locator}): {detail}",),
                    severity=VIOLATION,
                    locator=snap.locator,
                    source=snap.source,
                    subkind="stale_store"
                    if store_positive and not api_positive
                    else "stale_api"
                    if api_positive and not store_positive
                    else "divergent",
                )
            )
        elif snap.source == "optanon_cookie" and api_ot is not None:
            if snap.value.enabled_groups == api_ot.value.enabled_groups:  # type: ignore[union-attr]
                continue
            findings.append(
                Finding(
                    kind="storage_api_mismatch",
                    rules=frozenset({"LR5", "P2"}),
                    stage=stage,
                    site=site,
                    evidence=(
                        f"{OPTANON_COOKIE} cookie and OneTrustActiveGroups "
                        "report different enabled groups",
                    ),
                    severity=VIOLATION,
                    locator=snap.locator,
                    source=snap.source,
                    subkind="divergent",
                )
            )
    return findings


def check_network_vs_api(
    observations: list[ConsentObservation],
    snapshots: list[ConsentSourceSnapshot],
    stage: StageRecord,
    grace_window_seconds: float = 5.0,
    site: str = "",
) -> list[Finding]:
    """Compare consent in traffic against the API value at one stage.

    Only runs for accepted/revoked stages with a tcfapi snapshot; skipped
    when the API itself is positive after revocation (no trustworthy
    reference). Mismatching observations inside the grace window after the
    stage action are informational delayed updates; later ones are
    violations, split into stale_consent_sent (the accepted-stage value) and
    different_tcs (matching no known snapshot). Incoming strings with
    unknown projections additionally flag server_injected_tcs.
    """
    if stage.stage not in ("accepted", "revoked"):
        return []
    api = next(
        (s for s in snapshots if s.stage == stage.stage and s.source == "tcfapi"), None
    )
    if api is None:
        return []
    api_projection = project_consent(api.value.core)  # type: ignore[union-attr]
    if stage.stage == "revoked" and classify_tcf(api.value.core) is ConsentClass.POSITIVE:  # type: ignore[union-attr]
        return []

    accepted_projections = {
        project_consent(s.value.core)  # type: ignore[union-attr]
        for s in snapshots
        if s.stage == "accepted" and s.source in TCF_SOURCES
    }
    known_projections = {
        project_consent(s.value.core)  # type: ignore[union-attr]
        for s in snapshots
        if s.source in TCF_SOURCES
    }

    low_confidence = stage.stage_event_time is None
    findings = []
    for obs in observations:
        obs_projection = project_consent(obs.value.core)
        if obs_projection == api_projection:
            continue
        if not low_confidence:
            elapsed = (obs.timestamp - stage.stage_event_time).total_seconds()
            if elapsed < grace_window_seconds:
                findings.append(
                    Finding(
                        kind="delayed_update",
                        rules=frozenset(),
                        stage=stage.stage,
                        site=site,
                        evidence=(
                            f"request {obs.request_id} carried a pre-update consent "
                            f"{elapsed:.1f}s after the {stage.stage} action",
                        ),
                        severity=INFO,
                        locator=obs.request_id,
                        source=obs.location,
                    )
                )
                continue
        subkind = (
            "stale_consent_sent"
            if obs_projection in accepted_projections
            else "different_tcs"
        )
        evidence = [
            f"request {obs.request_id} ({obs.location}, {obs.direction}) to "
            f"{obs.receiver_party} carries consent differing from tcfapi",
        ]
        if low_confidence:
            evidence.append("low confidence: no stage event time, grace window not applied")
        findings.append(
            Finding(
                kind="network_api_mismatch",
                rules=frozenset({"LR5", "P2"}),
                stage=stage.stage,
                site=site,
                evidence=tuple(evidence),
                severity=VIOLATION,
                locator=obs.request_id,
                source=obs.location,
                subkind=subkind,
            )
        )
        if obs.direction == "incoming" and obs_projection not in known_projections:
            findings.append(
                Finding(
                    kind="server_injected_tcs",
                    rules=frozenset({"LR5", "P2"}),
                    stage=stage.stage,
                    site=site,
                    evidence=(
                        f"response for request {obs.request_id} introduced a consent "
                        "string matching no stored or API value",
                    ),
                    severity=VIOLATION,
                    locator=obs.request_id,
                    source=obs.location,
                )
            )
    return findings
