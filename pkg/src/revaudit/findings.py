"""Finding records shared by all audit checks."""

from __future__ import annotations

from dataclasses import dataclass, field

__all__ = ["Finding", "VIOLATION", "WARNING", "INFO", "FINDING_KINDS"]

VIOLATION = "violation"
WARNING = "warning"
INFO = "info"

# closed set of finding codes emitted by the checks
FINDING_KINDS = frozenset(
    {
        "positive_consent_at_initial",
        "positive_consent_after_rejection",
        "positive_consent_after_revocation",
        "consent_not_updated",
        "storage_api_mismatch",
        "network_api_mismatch",
        "delayed_update",
        "server_injected_tcs",
        "third_party_not_informed",
        "api_consumer_not_updated",
        "processing_after_revocation",
        "aa_cookies_after_revocation",
        "aa_cookies_before_consent",
        "aa_cookies_after_rejection",
        "revocation_requires_extra_steps",
        "revocation_via_different_interface",
        "revocation_requires_login",
        "no_revocation_with_tracking",
        "no_revocation_no_tracking",
        "effort_asymmetry",
        "check_failed",
    }
)


@dataclass(frozen=True)
class Finding:
    """One detected violation or informational flag.

    `locator` identifies the offending artifact (cookie name, storage key,
    party domain) and participates in report-level deduplication. `subkind`
    refines network_api_mismatch (stale_consent_sent | different_tcs).
    Violation findings always reference at least one LR rule.
    """

    kind: str
    rules: frozenset[str]
    stage: str | None
    site: str
    evidence: tuple[str, ...] = ()
    responsible_party: str | None = None
    severity: str = VIOLATION
    locator: str | None = None
    source: str | None = None
    subkind: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in FINDING_KINDS:
            raise ValueError(f"unknown finding kind {self.kind!r}")
        if self.severity == VIOLATION and not any(
            r.startswith("LR") for r in self.rules
        ):
            raise ValueError(f"violation finding {self.kind} carries no LR rule")

    def dedup_key(self) -> tuple:
        return (self.kind, self.subkind, self.stage, self.locator, self.source)


def sort_findings(findings: list[Finding]) -> list[Finding]:
    """Stable canonical order for reports (determinism across runs)."""
    return sorted(
        findings,
        key=lambda f: (
            f.kind,
            f.subkind or "",
            f.stage or "",
            f.locator or "",
            f.source or "",
            f.evidence,
        ),
    )
