"""Compliance verdicts for labeled revocation interfaces.

Interface observation is human-labeled in the capture (channel plus step
counts); this module maps each label combination to a category and the legal
rules it breaks. Zero- or one-step revocation within the same interface is
compliant; everything else infringes LR1, LR2, or LR3.
"""

from __future__ import annotations

from revaudit.capture import InterfaceLabels
from revaudit.findings import INFO, VIOLATION, Finding

__all__ = [
    "CATEGORY_COMPLIANT",
    "CATEGORY_EXTRA_STEPS",
    "CATEGORY_DIFFERENT_INTERFACE",
    "CATEGORY_NO_REVOCATION",
    "SAME_INTERFACE_CHANNELS",
    "DIFFERENT_INTERFACE_CHANNELS",
    "LabelInconsistency",
    "evaluate_interface",
    "steps_asymmetry",
    "category_of",
]

CATEGORY_COMPLIANT = "compliant"
CATEGORY_EXTRA_STEPS = "same_interface_extra_steps"
CATEGORY_DIFFERENT_INTERFACE = "different_interface"
CATEGORY_NO_REVOCATION = "no_revocation"

SAME_INTERFACE_CHANNELS = frozenset({"icon", "footer", "banner_on_policy", "via_policy"})
DIFFERENT_INTERFACE_CHANNELS = frozenset(
    {"settings_or_links", "contact_email", "after_login", "paywall"}
)
_ONE_STEP_CHANNELS = frozenset({"icon", "footer", "banner_on_policy"})


class LabelInconsistency(Exception):
    """Channel and step count disagree (e.g. icon with two steps)."""


def category_of(labels: InterfaceLabels) -> str:
    channel = labels.revocation_channel
    if channel in _ONE_STEP_CHANNELS:
        return CATEGORY_COMPLIANT
    if channel == "via_policy":
        return CATEGORY_EXTRA_STEPS
    if channel in DIFFERENT_INTERFACE_CHANNELS:
        return CATEGORY_DIFFERENT_INTERFACE
    return CATEGORY_NO_REVOCATION  # none, mentioned_not_working


def evaluate_interface(
    labels: InterfaceLabels, aa_present: bool, site: str = ""
) -> tuple[list[Finding], str]:
    """Map interface labels to (findings, category).

    Raises LabelInconsistency when the step count contradicts the channel.
    """
    channel = labels.revocation_channel
    steps = labels.steps_to_revoke
    findings: list[Finding] = []

    if channel in _ONE_STEP_CHANNELS:
        if steps is None or steps > 1:
            raise LabelInconsistency(f"channel {channel} requires steps <= 1, got {steps}")
        return findings, CATEGORY_COMPLIANT

    if channel == "via_policy":
        if steps is None or steps < 2:
            raise LabelInconsistency(f"channel via_policy requires steps >= 2, got {steps}")
        findings.append(
            Finding(
                kind="revocation_requires_extra_steps",
                rules=frozenset({"LR3", "P1", "P2", "P3"}),
                stage=None,
                site=site,
                evidence=(f"{steps} steps to reach the revocation option",),
                severity=VIOLATION,
            )
        )
        return findings, CATEGORY_EXTRA_STEPS

    if channel in ("settings_or_links", "contact_email", "paywall"):
        evidence = {
            "settings_or_links": "revocation via browser settings or external opt-out links",
            "contact_email": "revocation requires contacting or emailing the site",
            "paywall": "revocation gated behind a paywall",
        }[channel]
        findings.append(
            Finding(
                kind="revocation_via_different_interface",
                rules=frozenset({"LR2", "P1", "P2", "P3"}),
                stage=None,
                site=site,
                evidence=(evidence,),
                severity=VIOLATION,
                subkind=channel if channel == "paywall" else None,
            )
        )
        return findings, CATEGORY_DIFFERENT_INTERFACE

    if channel == "after_login":
        findings.append(
            Finding(
                kind="revocation_requires_login",
                rules=frozenset({"LR2", "P1", "P2", "P3"}),
                stage=None,
                site=site,
                evidence=("revocation only reachable after logging in",),
                severity=VIOLATION,
            )
        )
        return findings, CATEGORY_DIFFERENT_INTERFACE

    # none / mentioned_not_working
    detail = (
        "a revocation option is mentioned but does not work"
        if channel == "mentioned_not_working"
        else "no revocation option provided"
    )
    if aa_present:
        findings.append(
            Finding(
                kind="no_revocation_with_tracking",
                rules=frozenset({"LR1", "P1", "P2", "P3"}),
                stage=None,
                site=site,
                evidence=(detail, "AA cookies present"),
                severity=VIOLATION,
                subkind=channel if channel == "mentioned_not_working" else None,
            )
        )
    else:
        findings.append(
            Finding(
                kind="no_revocation_no_tracking",
                rules=frozenset(),
                stage=None,
                site=site,
                evidence=(detail, "no AA cookies observed"),
                severity=INFO,
                subkind=channel if channel == "mentioned_not_working" else None,
            )
        )
    return findings, CATEGORY_NO_REVOCATION


def steps_asymmetry(labels: InterfaceLabels, site: str = "") -> Finding | None:
    """Flag revocation needing more steps than acceptance (LR3)."""
    if labels.steps_to_accept is None or labels.steps_to_revoke is None:
        return None
    if labels.steps_to_revoke <= labels.steps_to_accept:
        return None
    delta = labels.steps_to_revoke - labels.steps_to_accept
    return Finding(
        kind="effort_asymmetry",
        rules=frozenset({"LR3", "P2"}),
        stage=None,
        site=site,
        evidence=(
            f"{labels.steps_to_revoke} steps to revoke vs "
            f"{labels.steps_to_accept} to accept (+{delta})",
        ),
        severity=VIOLATION,
    )
