"""Advertising/analytics cookie measurement across the four stages.

The purpose classifier itself is external; its decisions are ingested as a
class-map file (cookie name, domain pattern, class). AA cookies are the ones
requiring consent, so any present after revocation violate LR4.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from revaudit.capture import CaptureSession, CookieRecord
from revaudit.findings import INFO, VIOLATION, Finding
from revaudit.thirdparty import PublicSuffixList, UnparsableHost, registrable_domain

__all__ = [
    "CookieClassMap",
    "AA_CLASSES",
    "COOKIE_CLASSES",
    "load_class_map",
    "default_class_map",
    "classify_cookie",
    "aa_counts",
    "aa_findings",
]

COOKIE_CLASSES = ("necessary", "functional", "analytics", "advertising", "unknown")
AA_CLASSES = frozenset({"analytics", "advertising"})


@dataclass(frozen=True)
class CookieClassMap:
    """(name, domain pattern) -> class; longest matching domain wins."""

    by_name: dict[str, dict[str, str]]  # name -> {domain pattern or "": class}
    overridden: frozenset[tuple[str, str]] = frozenset()

    def with_overrides(self, overrides: "CookieClassMap") -> "CookieClassMap":
        merged = {name: dict(domains) for name, domains in self.by_name.items()}
        marked: set[tuple[str, str]] = set(self.overridden)
        for name, domains in overrides.by_name.items():
            merged.setdefault(name, {}).update(domains)
            marked.update((name, d) for d in domains)
        return CookieClassMap(by_name=merged, overridden=frozenset(marked))


def _parse_map_lines(lines: list[str]) -> CookieClassMap:
    by_name: dict[str, dict[str, str]] = {}
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 'name domain class', got {line!r}")
        name, domain, klass = parts
        if klass not in COOKIE_CLASSES:
            raise ValueError(f"line {lineno}: unknown class {klass!r}")
        domain = "" if domain == "*" else domain.lower().lstrip(".")
        by_name.setdefault(name, {})[domain] = klass
    return CookieClassMap(by_name=by_name)


def load_class_map(path: str | Path) -> CookieClassMap:
    return _parse_map_lines(Path(path).read_text(encoding="utf-8").splitlines())


def default_class_map() -> CookieClassMap:
    text = (
        resources.files("revaudit")
        .joinpath("data/cookie_classes.tsv")
        .read_text(encoding="utf-8")
    )
    return _parse_map_lines(text.splitlines())


def classify_cookie(
    cookie: CookieRecord,
    class_map: CookieClassMap,
    psl: PublicSuffixList | None = None,
) -> str:
    """Look up a cookie's class: exact (name, registrable domain), suffix
    matches by descending pattern length, then name-only, else unknown."""
    domains = class_map.by_name.get(cookie.name)
    if not domains:
        return "unknown"
    host = cookie.domain.lstrip(".").lower()
    try:
        reg = registrable_domain(host, psl) if host else ""
    except UnparsableHost:
        reg = ""
    candidates = [p for p in domains if p and (host == p or host.endswith("." + p) or reg == p)]
    if candidates:
        return domains[max(candidates, key=len)]
    return domains.get("", "unknown")


def _stage_aa_cookies(
    cookies: tuple[CookieRecord, ...],
    class_map: CookieClassMap,
    psl: PublicSuffixList | None,
) -> list[CookieRecord]:
    seen: set[tuple[str, str, str]] = set()
    out = []
    for cookie in cookies:
        key = (cookie.name, cookie.domain, cookie.path)
        if key in seen:
            continue
        seen.add(key)
        if classify_cookie(cookie, class_map, psl) in AA_CLASSES:
            out.append(cookie)
    return out


def aa_counts(
    session: CaptureSession,
    class_map: CookieClassMap,
    psl: PublicSuffixList | None = None,
) -> dict[str, int]:
    """AA-cookie count per stage, over distinct (name, domain, path)."""
    return {
        stage.stage: len(_stage_aa_cookies(stage.cookies, class_map, psl))
        for stage in session.stages
    }


def aa_findings(
    session: CaptureSession,
    class_map: CookieClassMap,
    psl: PublicSuffixList | None = None,
) -> list[Finding]:
    """LR4 violation for AA cookies surviving revocation; informational
    flags for AA cookies before consent and after rejection."""
    findings: list[Finding] = []
    for stage in session.stages:
        aa = _stage_aa_cookies(stage.cookies, class_map, psl)
        if not aa:
            continue
        names = tuple(
            f"{c.name} ({c.domain})"
            + (" [override]" if _is_overridden(c, class_map) else "")
            for c in aa[:10]
        )
        if stage.stage == "revoked":
            findings.append(
                Finding(
                    kind="aa_cookies_after_revocation",
                    rules=frozenset({"LR4", "P1", "P2"}),
                    stage="revoked",
                    site=session.site,
                    evidence=(f"{len(aa)} AA cookies present after revocation",) + names,
                    severity=VIOLATION,
                )
            )
        elif stage.stage == "initial":
            findings.append(
                Finding(
                    kind="aa_cookies_before_consent",
                    rules=frozenset(),
                    stage="initial",
                    site=session.site,
                    evidence=(f"{len(aa)} AA cookies present before any consent",) + names,
                    severity=INFO,
                )
            )
        elif stage.stage == "rejected":
            findings.append(
                Finding(
                    kind="aa_cookies_after_rejection",
                    rules=frozenset(),
                    stage="rejected",
                    site=session.site,
                    evidence=(f"{len(aa)} AA cookies present after rejection",) + names,
                    severity=INFO,
                )
            )
    return findings


def _is_overridden(cookie: CookieRecord, class_map: CookieClassMap) -> bool:
    return any(name == cookie.name for name, _ in class_map.overridden)
