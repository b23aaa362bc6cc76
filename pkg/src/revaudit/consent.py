"""Consent classification and the legal-basis table for TCF purposes.

A decoded string is positive when it enables at least one purpose that
demands user action (2-9, and conservatively any id above 11) together with
at least one consent vendor; negative when only purposes 1, 10, or 11 are
enabled; indeterminate otherwise. Only the revocation pipeline's accepted
stage may legitimately hold a positive string.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from revaudit.tcs import TcCore

__all__ = [
    "ConsentClass",
    "LegalRule",
    "PurposeLegalBasis",
    "UnknownPurpose",
    "LEGAL_RULES",
    "classify_tcf",
    "expected_class_for_stage",
    "purpose_basis",
]

# purposes that may be enabled without any user action
DEFAULT_OK_PURPOSES = frozenset({1, 10, 11})

STAGES = ("initial", "accepted", "rejected", "revoked")


class ConsentClass(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    INDETERMINATE = "indeterminate"


class UnknownPurpose(Exception):
    """Purpose id outside the 11 defined TCF v2.2 purposes."""


@dataclass(frozen=True)
class LegalRule:
    id: str
    title: str


LEGAL_RULES: dict[str, LegalRule] = {
    rule.id: rule
    for rule in (
        LegalRule("LR1", "Right to revoke consent"),
        LegalRule("LR2", "Easy revocation through the same interface"),
        LegalRule("LR3", "Easy revocation through the same effort and number of steps"),
        LegalRule("LR4", "Revoking requires stopping of data processing and deletion of consent-based data"),
        LegalRule("LR5", "Correct registration of consent revocation"),
        LegalRule("LR6", "Communication of revocation to third-parties"),
        LegalRule("P1", "Fairness"),
        LegalRule("P2", "Data protection by design"),
        LegalRule("P3", "Accountability"),
    )
}


@dataclass(frozen=True)
class PurposeLegalBasis:
    purpose_id: int
    requires_consent: bool
    enabled_by_default_ok: bool
    note: str


# Legal-basis analysis of the 11 TCF v2.2 purposes. Purpose 1 carries the
# requires-consent flag but is storage-based and enabled by default, so
# classification treats it like 10 and 11.
_PURPOSE_TABLE: dict[int, PurposeLegalBasis] = {
    p.purpose_id: p
    for p in (
        PurposeLegalBasis(1, True, True, "Store and/or access information on a device; storage-based, enabled by default"),
        PurposeLegalBasis(2, True, False, "Use limited data to select advertising"),
        PurposeLegalBasis(3, True, False, "Create profiles for personalised advertising"),
        PurposeLegalBasis(4, True, False, "Use profiles to select personalised advertising"),
        PurposeLegalBasis(5, True, False, "Create profiles to personalise content; legitimate-interest basis unclear"),
        PurposeLegalBasis(6, True, False, "Use profiles to select personalised content; legitimate-interest basis unclear"),
        PurposeLegalBasis(7, True, False, "Measure advertising performance"),
        PurposeLegalBasis(8, True, False, "Measure content performance"),
        PurposeLegalBasis(9, True, False, "Understand audiences through statistics or combinations of data from different sources"),
        PurposeLegalBasis(10, False, True, "Develop and improve services; not specific enough to derive a legal basis"),
        PurposeLegalBasis(11, False, True, "Use limited data to select content"),
    )
}


def classify_tcf(core: TcCore) -> ConsentClass:
    """Classify a decoded core as positive, negative, or indeterminate.

    Depends only on the consent projection: metadata such as timestamps and
    the consent screen never change the class. Undefined purposes 12-24 are
    treated like 2-9 (an unknown purpose cannot be presumed exempt).
    """
    action_purposes = core.purposes_consent - DEFAULT_OK_PURPOSES
    if action_purposes and core.vendor_consents:
        return ConsentClass.POSITIVE
    if not action_purposes:
        return ConsentClass.NEGATIVE
    return ConsentClass.INDETERMINATE


def expected_class_for_stage(stage: str) -> ConsentClass:
    """Class a correctly registered consent must have at a pipeline stage."""
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    return ConsentClass.POSITIVE if stage == "accepted" else ConsentClass.NEGATIVE


def purpose_basis(
    purpose_id: int, overrides: dict[int, bool] | None = None
) -> PurposeLegalBasis:
    """Return the legal-basis row for a purpose id (1..11).

    `overrides` remaps the requires_consent flag per purpose for sensitivity
    analysis. Raises UnknownPurpose outside 1..11.
    """
    row = _PURPOSE_TABLE.get(purpose_id)
    if row is None:
        raise UnknownPurpose(f"purpose {purpose_id} is not defined")
    if overrides and purpose_id in overrides:
        return PurposeLegalBasis(
            purpose_id=row.purpose_id,
            requires_consent=overrides[purpose_id],
            enabled_by_default_ok=row.enabled_by_default_ok,
            note=row.note + " (overridden)",
        )
    return row


def load_purpose_overrides(path) -> dict[int, bool]:
    """Read a sensitivity-analysis override file: `purpose_id flag` per line."""
    from pathlib import Path

    overrides: dict[int, bool] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2 or parts[1].lower() not in ("true", "false", "1", "0"):
            raise ValueError(f"line {lineno}: expected 'purpose_id true|false', got {line!r}")
        pid = int(parts[0])
        if pid not in _PURPOSE_TABLE:
            raise UnknownPurpose(f"line {lineno}: purpose {pid} is not defined")
        overrides[pid] = parts[1].lower() in ("true", "1")
    return overrides
