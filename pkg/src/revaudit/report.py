"""Per-site analysis orchestration and corpus-level prevalence aggregation.

`analyze_site` runs the full pipeline over one loaded session; results are
plain dataclasses that serialize to stable JSON (sorted keys, no wall-clock
content) so identical inputs produce byte-identical reports.

`aggregate_corpus` mirrors the published summary tables. Each row carries
its own denominator because the checks apply to different site sets (all
labeled sites; sites with same-interface revocation; sites with a given
consent source and a revoked stage).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from revaudit.capture import CaptureSession, CmpDetection, detect_cmps
from revaudit.consent import ConsentClass, classify_tcf
from revaudit.consistency import (
    ONETRUST_SOURCES,
    TCF_SOURCES,
    ConsentSourceSnapshot,
    MissingBaseline,
    check_network_vs_api,
    check_stage_validity,
    check_store_api_consistency,
    check_updated_after_revocation,
    collect_snapshots,
)
from revaudit.cookies import CookieClassMap, aa_counts, aa_findings, default_class_map
from revaudit.findings import VIOLATION, Finding, sort_findings
from revaudit.interface import (
    CATEGORY_COMPLIANT,
    CATEGORY_EXTRA_STEPS,
    LabelInconsistency,
    evaluate_interface,
    steps_asymmetry,
)
from revaudit.netscan import ConsentObservation, scan_stage
from revaudit.tcs import project_consent
from revaudit.thirdparty import (
    MissingStage,
    PartyRegistry,
    PartyReport,
    api_access_diff,
    bucket_percentages,
    diff_informed,
    load_registry,
    set_cookie_after_revocation,
)

__all__ = ["AuditConfig", "SiteReport", "CorpusSummary", "analyze_site", "aggregate_corpus"]

SOURCES = ("tcfapi", "tcf_cookie", "tcf_local_storage", "onetrust_active_groups", "optanon_cookie")

NOT_APPLICABLE = "not_applicable"
OK = "ok"


@dataclass(frozen=True)
class AuditConfig:
    grace_window_seconds: float = 5.0
    class_map: CookieClassMap | None = None
    registry: PartyRegistry | None = None

    def resolved_class_map(self) -> CookieClassMap:
        return self.class_map if self.class_map is not None else default_class_map()

    def resolved_registry(self) -> PartyRegistry:
        return self.registry if self.registry is not None else load_registry()


@dataclass
class SiteReport:
    site: str
    cmp: CmpDetection
    category: str | None
    interface_labels: dict | None
    stages_present: tuple[str, ...]
    revocation_possible: bool
    rejection_possible: bool
    aa_counts: dict[str, int]
    findings: list[Finding]
    party_reports: list[PartyReport]
    percentage_not_informed: float | None
    source_summary: dict[str, dict[str, bool]]
    checks: dict[str, str]

    def violation_count(self) -> int:
        return sum(1 for f in self.findings if f.severity == VIOLATION)

    def has_finding(self, kind: str, sources: frozenset[str] | None = None) -> bool:
        return any(
            f.kind == kind and (sources is None or f.source in sources)
            for f in self.findings
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "site": self.site,
            "cmp": {
                "tcf": self.cmp.tcf,
                "onetrust": self.cmp.onetrust,
                "evidence": list(self.cmp.evidence),
            },
            "category": self.category,
            "interface_labels": self.interface_labels,
            "stages_present": list(self.stages_present),
            "revocation_possible": self.revocation_possible,
            "rejection_possible": self.rejection_possible,
            "aa_counts": self.aa_counts,
            "findings": [
                {
                    "kind": f.kind,
                    "subkind": f.subkind,
                    "rules": sorted(f.rules),
                    "stage": f.stage,
                    "site": f.site,
                    "evidence": list(f.evidence),
                    "responsible_party": f.responsible_party,
                    "severity": f.severity,
                    "locator": f.locator,
                    "source": f.source,
                }
                for f in self.findings
            ],
            "party_reports": [
                {
                    "party": p.party,
                    "informed_at_accept": p.informed_at_accept,
                    "informed_at_revoke": p.informed_at_revoke,
                    "channels": sorted(p.channels),
                    "set_cookie_after_revocation": p.set_cookie_after_revocation,
                    "is_tracking_domain": p.is_tracking_domain,
                }
                for p in self.party_reports
            ],
            "percentage_not_informed": self.percentage_not_informed,
            "source_summary": self.source_summary,
            "checks": self.checks,
        }


def _attribute_network_findings(
    network_findings: list[Finding],
    observations: list[ConsentObservation],
    site: str,
    registry: PartyRegistry,
) -> list[Finding]:
    """Attach a responsible party (first party / CMP / third party) to each
    traffic-mismatch finding, from the request initiator and the decoded
    cmp id of the offending observation."""
    from dataclasses import replace

    from revaudit.thirdparty import NoEvidence, attribute_responsible_party

    by_request = {obs.request_id: obs for obs in observations}
    attributed = []
    for finding in network_findings:
        obs = by_request.get(finding.locator or "")
        if finding.kind in ("network_api_mismatch", "server_injected_tcs") and obs:
            try:
                attribution = attribute_responsible_party(
                    site,
                    registry,
                    initiator_url=obs.initiator_url,
                    cmp_id=obs.value.core.cmp_id,
                )
                finding = replace(finding, responsible_party=str(attribution))
            except NoEvidence:
                pass
        attributed.append(finding)
    return attributed


def _dedup(findings: list[Finding]) -> list[Finding]:
    seen = set()
    out = []
    for finding in findings:
        key = finding.dedup_key()
        if key not in seen:
            seen.add(key)
            out.append(finding)
    return out


def _source_summary(
    snapshots: list[ConsentSourceSnapshot],
    findings: list[Finding],
    session: CaptureSession,
) -> dict[str, dict[str, bool]]:
    present = {src: any(s.source == src for s in snapshots) for src in SOURCES}
    summary: dict[str, dict[str, bool]] = {}
    revoked = session.stage("revoked") is not None
    rejected = session.stage("rejected") is not None
    for src in SOURCES:
        summary[src] = {
            "present": present[src],
            "rejection_possible": present[src] and rejected,
            "revocation_possible": present[src] and revoked,
            "positive_initial": any(
                f.kind == "positive_consent_at_initial" and f.source == src
                for f in findings
            ),
            "positive_rejected": any(
                f.kind == "positive_consent_after_rejection" and f.source == src
                for f in findings
            ),
            "positive_revoked": any(
                f.kind == "positive_consent_after_revocation" and f.source == src
                for f in findings
            ),
            "not_updated": any(
                f.kind == "consent_not_updated" and f.source == src for f in findings
            ),
        }
    return summary


def analyze_site(session: CaptureSession, config: AuditConfig | None = None) -> SiteReport:
    """Run every applicable check over one session; never raises per-check.

    Checks that cannot run are reported as not_applicable (missing stages)
    or failed (unexpected data); the rest of the report is still produced.
    """
    config = config or AuditConfig()
    registry = config.resolved_registry()
    class_map = config.resolved_class_map()
    checks: dict[str, str] = {}
    findings: list[Finding] = []

    detection = detect_cmps(session)
    snapshots = collect_snapshots(session)
    observations: dict[str, list[ConsentObservation]] = {}
    for stage in session.stages:
        try:
            observations[stage.stage] = scan_stage(stage, registry.domain_of)
        except Exception as exc:  # noqa: BLE001
            observations[stage.stage] = []
            checks[f"netscan_{stage.stage}"] = f"failed: {exc}"

    revoked_stage = session.stage("revoked")
    accepted_stage = session.stage("accepted")

    # consistency: validity per stage
    for stage_id in ("initial", "rejected", "revoked"):
        if session.stage(stage_id) is None:
            checks[f"validity_{stage_id}"] = NOT_APPLICABLE
            continue
        try:
            findings.extend(check_stage_validity(snapshots, stage_id, session.site))
            checks[f"validity_{stage_id}"] = OK
        except MissingBaseline as exc:
            checks[f"validity_{stage_id}"] = f"failed: {exc}"

    if accepted_stage is not None and revoked_stage is not None:
        findings.extend(check_updated_after_revocation(snapshots, session.site))
        checks["updated_after_revocation"] = OK
    else:
        checks["updated_after_revocation"] = NOT_APPLICABLE

    if revoked_stage is not None:
        findings.extend(check_store_api_consistency(snapshots, "revoked", session.site))
        checks["store_api_consistency"] = OK
    else:
        checks["store_api_consistency"] = NOT_APPLICABLE

    for stage_record in session.stages:
        if stage_record.stage not in ("accepted", "revoked"):
            continue
        network_findings = check_network_vs_api(
            observations.get(stage_record.stage, []),
            snapshots,
            stage_record,
            config.grace_window_seconds,
            session.site,
        )
        findings.extend(
            _attribute_network_findings(
                network_findings,
                observations.get(stage_record.stage, []),
                session.site,
                registry,
            )
        )
        checks[f"network_vs_api_{stage_record.stage}"] = OK

    # third parties
    party_reports: list[PartyReport] = []
    percentage: float | None = None
    if accepted_stage is not None and revoked_stage is not None:
        revoked_api = next(
            (s for s in snapshots if s.stage == "revoked" and s.source == "tcfapi"), None
        )
        revoked_projection = None
        if revoked_api is not None and classify_tcf(revoked_api.value.core) is not ConsentClass.POSITIVE:  # type: ignore[union-attr]
            revoked_projection = project_consent(revoked_api.value.core)  # type: ignore[union-attr]
        try:
            party_reports, tp_findings, percentage = diff_informed(
                session,
                observations,
                registry,
                config.grace_window_seconds,
                revoked_projection,
            )
            findings.extend(tp_findings)
            party_reports, sc_findings = set_cookie_after_revocation(
                session, party_reports, registry
            )
            findings.extend(sc_findings)
            checks["third_parties"] = OK
        except MissingStage:
            checks["third_parties"] = NOT_APPLICABLE
        findings.extend(api_access_diff(session, registry))
        checks["api_consumers"] = OK
    else:
        checks["third_parties"] = NOT_APPLICABLE
        checks["api_consumers"] = NOT_APPLICABLE

    # cookies
    counts = aa_counts(session, class_map, registry.psl)
    findings.extend(aa_findings(session, class_map, registry.psl))
    checks["aa_cookies"] = OK

    # interface
    category: str | None = None
    if session.interface_labels is not None:
        aa_present = any(v > 0 for v in counts.values())
        try:
            interface_findings, category = evaluate_interface(
                session.interface_labels, aa_present, session.site
            )
            findings.extend(interface_findings)
            asymmetry = steps_asymmetry(session.interface_labels, session.site)
            if asymmetry is not None:
                findings.append(asymmetry)
            checks["interface"] = OK
        except LabelInconsistency as exc:
            checks["interface"] = f"failed: {exc}"
    else:
        checks["interface"] = NOT_APPLICABLE

    findings = sort_findings(_dedup(findings))
    labels = session.interface_labels
    return SiteReport(
        site=session.site,
        cmp=detection,
        category=category,
        interface_labels=None
        if labels is None
        else {
            "banner": labels.banner,
            "revocation_channel": labels.revocation_channel,
            "steps_to_revoke": labels.steps_to_revoke,
            "steps_to_accept": labels.steps_to_accept,
        },
        stages_present=tuple(s.stage for s in session.stages),
        revocation_possible=revoked_stage is not None,
        rejection_possible=session.stage("rejected") is not None,
        aa_counts=counts,
        findings=findings,
        party_reports=party_reports,
        percentage_not_informed=percentage,
        source_summary=_source_summary(snapshots, findings, session),
        checks=checks,
    )


# ---------------------------------------------------------------------------
# corpus aggregation


@dataclass
class SummaryRow:
    row_id: str
    label: str
    count: int
    denominator: int

    @property
    def percentage(self) -> float | None:
        if self.denominator == 0:
            return None
        return round(100.0 * self.count / self.denominator, 2)


@dataclass
class CorpusSummary:
    n_sites: int
    rows: list[SummaryRow]
    category_matrix: dict[str, dict[str, int]]  # banner -> channel -> count
    source_stage_matrix: dict[str, dict[str, int]]
    histogram: dict[str, int]

    def row(self, row_id: str) -> SummaryRow:
        for row in self.rows:
            if row.row_id == row_id:
                return row
        raise KeyError(row_id)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_sites": self.n_sites,
            "rows": [
                {
                    "row_id": r.row_id,
                    "label": r.label,
                    "count": r.count,
                    "denominator": r.denominator,
                    "percentage": r.percentage,
                }
                for r in self.rows
            ],
            "category_matrix": self.category_matrix,
            "source_stage_matrix": self.source_stage_matrix,
            "histogram": self.histogram,
        }


def aggregate_corpus(reports: list[SiteReport]) -> CorpusSummary:
    """Fold site reports into the prevalence summary.

    Permutation-invariant: rows, matrices, and the histogram depend only on
    the multiset of reports.
    """
    if not reports:
        raise ValueError("aggregate_corpus needs at least one report")

    labeled = [r for r in reports if r.interface_labels is not None]
    same_interface = [
        r for r in labeled if r.category in (CATEGORY_COMPLIANT, CATEGORY_EXTRA_STEPS)
    ]
    tcf_revocable = [r for r in reports if r.cmp.tcf and r.revocation_possible]
    onetrust_revocable = [r for r in reports if r.cmp.onetrust and r.revocation_possible]

    def count(rs: list[SiteReport], predicate) -> int:
        return sum(1 for r in rs if predicate(r))

    rows = [
        SummaryRow(
            "different_interface",
            "Revocation via a different interface/medium",
            count(labeled, lambda r: r.category == "different_interface"),
            len(labeled),
        ),
        SummaryRow(
            "effort_asymmetry",
            "More steps to revoke than to accept",
            count(labeled, lambda r: r.has_finding("effort_asymmetry")),
            len(labeled),
        ),
        SummaryRow(
            "no_revocation_with_tracking",
            "No revocation option while AA cookies are stored",
            count(labeled, lambda r: r.has_finding("no_revocation_with_tracking")),
            len(labeled),
        ),
        SummaryRow(
            "aa_after_revocation",
            "AA-cookie processing not stopped upon revocation",
            count(same_interface, lambda r: r.has_finding("aa_cookies_after_revocation")),
            len(same_interface),
        ),
        SummaryRow(
            "positive_after_revocation_tcf",
            "Positive consent after revocation (TCF consent string)",
            count(
                tcf_revocable,
                lambda r: r.has_finding("positive_consent_after_revocation", TCF_SOURCES),
            ),
            len(tcf_revocable),
        ),
        SummaryRow(
            "positive_after_revocation_onetrust",
            "Positive consent after revocation (OneTrust consent string)",
            count(
                onetrust_revocable,
                lambda r: r.has_finding(
                    "positive_consent_after_revocation", ONETRUST_SOURCES
                ),
            ),
            len(onetrust_revocable),
        ),
        SummaryRow(
            "third_parties_not_informed",
            "Third parties informed of acceptance but not of revocation",
            count(tcf_revocable, lambda r: r.has_finding("third_party_not_informed")),
            len(tcf_revocable),
        ),
    ]

    category_matrix: dict[str, dict[str, int]] = {}
    for report in labeled:
        banner = report.interface_labels["banner"]
        channel = report.interface_labels["revocation_channel"]
        category_matrix.setdefault(banner, {})
        category_matrix[banner][channel] = category_matrix[banner].get(channel, 0) + 1

    source_stage_matrix: dict[str, dict[str, int]] = {}
    for source in SOURCES:
        cells = {
            "total": 0,
            "rejection_possible": 0,
            "revocation_possible": 0,
            "positive_initial": 0,
            "positive_rejected": 0,
            "positive_revoked": 0,
            "not_updated": 0,
        }
        for report in reports:
            summary = report.source_summary.get(source)
            if not summary:
                continue
            cells["total"] += summary["present"]
            cells["rejection_possible"] += summary["rejection_possible"]
            cells["revocation_possible"] += summary["revocation_possible"]
            cells["positive_initial"] += summary["positive_initial"]
            cells["positive_rejected"] += summary["positive_rejected"]
            cells["positive_revoked"] += summary["positive_revoked"]
            cells["not_updated"] += summary["not_updated"]
        source_stage_matrix[source] = cells

    histogram = bucket_percentages(
        [
            r.percentage_not_informed
            for r in reports
            if r.percentage_not_informed is not None and r.percentage_not_informed > 0
        ]
    )
    return CorpusSummary(
        n_sites=len(reports),
        rows=rows,
        category_matrix=category_matrix,
        source_stage_matrix=source_stage_matrix,
        histogram=histogram,
    )
