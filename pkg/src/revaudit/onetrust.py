"""OneTrust consent parsing: the OptanonConsent cookie and OneTrustActiveGroups.

OneTrust stores consent as group ids (e.g. "C0001") with enabled flags. The
format is CMP-specific and carries no purpose semantics we can rely on, so
positivity is judged relative to the value seen at initial landing.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from urllib.parse import unquote

__all__ = [
    "OneTrustConsent",
    "BaselineComparison",
    "OneTrustError",
    "NoGroupsParameter",
    "SourceMismatch",
    "parse_optanon_cookie",
    "parse_active_groups",
    "compare_to_baseline",
]


class OneTrustError(Exception):
    pass


class NoGroupsParameter(OneTrustError):
    """OptanonConsent cookie payload has no "groups" key."""


class SourceMismatch(OneTrustError):
    """Comparison attempted between values from different source kinds."""


class BaselineComparison(str, Enum):
    NEGATIVE = "negative"  # enabled set equals the baseline
    POSITIVE = "positive"  # enabled set strictly contains the baseline
    CHANGED = "changed"  # sets are incomparable


@dataclass(frozen=True)
class OneTrustConsent:
    enabled_groups: frozenset[str]
    disabled_groups: frozenset[str]
    raw_pairs: tuple[tuple[str, str], ...]
    source: str  # "optanon_cookie" | "active_groups"


def _parse_groups_value(value: str) -> tuple[frozenset[str], frozenset[str]]:
    enabled: set[str] = set()
    disabled: set[str] = set()
    for token in value.split(","):
        token = token.strip()
        if not token:
            continue
        name, _, flag = token.partition(":")
        name = name.strip()
        if not name:
            continue
        if flag.strip() == "1":
            enabled.add(name)
        else:
            disabled.add(name)
    return frozenset(enabled), frozenset(disabled - enabled)


def parse_optanon_cookie(value: str) -> OneTrustConsent:
    """Parse an OptanonConsent cookie value.

    The value is percent-decoded, split on '&' into key=value pairs, and the
    "groups" value read as comma-separated group:flag tokens (flag "1" means
    enabled). Raises NoGroupsParameter when no "groups" key is present.
    """
    decoded = unquote(value)
    pairs: list[tuple[str, str]] = []
    groups_value: str | None = None
    for piece in decoded.split("&"):
        if not piece:
            continue
        key, _, val = piece.partition("=")
        pairs.append((key, val))
        if key == "groups" and groups_value is None:
            groups_value = val
    if groups_value is None:
        raise NoGroupsParameter("no 'groups' key in OptanonConsent payload")
    enabled, disabled = _parse_groups_value(groups_value)
    return OneTrustConsent(
        enabled_groups=enabled,
        disabled_groups=disabled,
        raw_pairs=tuple(pairs),
        source="optanon_cookie",
    )


def parse_active_groups(value: str) -> OneTrustConsent:
    """Parse a OneTrustActiveGroups value: every listed group is enabled."""
    enabled = frozenset(t.strip() for t in value.split(",") if t.strip())
    return OneTrustConsent(
        enabled_groups=enabled,
        disabled_groups=frozenset(),
        raw_pairs=(),
        source="active_groups",
    )


def compare_to_baseline(
    current: OneTrustConsent, baseline: OneTrustConsent
) -> BaselineComparison:
    """Compare an enabled-group set against the initial-landing baseline.

    negative: equal sets; positive: strict superset (more purposes enabled);
    changed: incomparable. Raises SourceMismatch across source kinds.
    """
    if current.source != baseline.source:
        raise SourceMismatch(f"{current.source} vs {baseline.source}")
    if current.enabled_groups == baseline.enabled_groups:
        return BaselineComparison.NEGATIVE
    if current.enabled_groups > baseline.enabled_groups:
        return BaselineComparison.POSITIVE
    return BaselineComparison.CHANGED
