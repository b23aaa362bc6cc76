"""Third-party communication analysis: who learned of acceptance vs revocation.

Party identity is the registrable domain (eTLD+1 under a public-suffix
snapshot), so informing a.x.com at acceptance and b.x.com at revocation
counts as the same party. HTTP-channel omissions are violations; API-channel
omissions are warnings because event-listener updates are unobservable.
"""

from __future__ import annotations

import ipaddress
import re
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from urllib.parse import urlsplit

from revaudit.capture import CaptureSession
from revaudit.findings import INFO, VIOLATION, WARNING, Finding
from revaudit.netscan import OUTGOING_LOCATIONS, ConsentObservation
from revaudit.tcs import ConsentProjection, project_consent

__all__ = [
    "PublicSuffixList",
    "PartyRegistry",
    "PartyReport",
    "Attribution",
    "UnparsableHost",
    "NoEvidence",
    "OutOfRange",
    "MissingStage",
    "registrable_domain",
    "informed_parties_http",
    "diff_informed",
    "api_access_diff",
    "set_cookie_after_revocation",
    "attribute_responsible_party",
    "bucket_percentages",
    "load_registry",
]

BUCKET_LABELS = ("<25", ">=25 to <50", ">=50 to <75", ">=75 to <100", "100")

# host labels hinting at CMP infrastructure when names are shortened
_CMP_MARKERS = ("privacy", "center", "consent", "cdn", "cmp")
_NAME_STOPWORDS = frozenset({"inc", "ltd", "llc", "gmbh", "pte", "the", "co", "corp", "sa"})
_TOKEN_RE = re.compile(r"[a-z0-9]+")


class UnparsableHost(Exception):
    pass


class NoEvidence(Exception):
    """Attribution attempted without initiator or decoded cmp id."""


class OutOfRange(Exception):
    """Percentage outside [0, 100]."""


class MissingStage(Exception):
    """Analysis requires both accepted and revoked stages."""


# ---------------------------------------------------------------------------
# public suffix list


class PublicSuffixList:
    """Minimal publicsuffix.org matcher (normal, wildcard, exception rules)."""

    def __init__(self, rules: list[str]) -> None:
        self.exact: set[str] = set()
        self.wildcards: set[str] = set()  # parents of *.x rules
        self.exceptions: set[str] = set()
        for rule in rules:
            rule = rule.strip().lower()
            if not rule or rule.startswith("//") or rule.startswith("#"):
                continue
            if rule.startswith("!"):
                self.exceptions.add(rule[1:])
            elif rule.startswith("*."):
                self.wildcards.add(rule[2:])
            else:
                self.exact.add(rule)
        if not self.exact and not self.wildcards:
            raise ValueError("suffix rule set is empty")

    @classmethod
    def from_file(cls, path: str | Path) -> "PublicSuffixList":
        return cls(Path(path).read_text(encoding="utf-8").splitlines())

    def public_suffix(self, host: str) -> str:
        labels = host.split(".")
        for i in range(len(labels)):
            candidate = ".".join(labels[i:])
            if candidate in self.exceptions:
                return ".".join(labels[i + 1 :])
            if candidate in self.exact:
                return candidate
            parent = ".".join(labels[i + 1 :])
            if parent in self.wildcards:
                return candidate
        # no rule matched: the prevailing rule is "*" (the bare TLD)
        return labels[-1]

    def registrable_domain(self, host: str) -> str:
        suffix = self.public_suffix(host)
        if host == suffix:
            return host
        prefix = host[: -(len(suffix) + 1)].split(".")
        return f"{prefix[-1]}.{suffix}" if suffix else prefix[-1]


_default_psl: PublicSuffixList | None = None


def default_psl() -> PublicSuffixList:
    global _default_psl
    if _default_psl is None:
        text = (
            resources.files("revaudit")
            .joinpath("data/public_suffix_snapshot.dat")
            .read_text(encoding="utf-8")
        )
        _default_psl = PublicSuffixList(text.splitlines())
    return _default_psl


def _extract_host(host_or_url: str) -> str:
    text = host_or_url.strip()
    if not text:
        raise UnparsableHost("empty input")
    if "//" in text or text.startswith(("http:", "https:", "ws:", "wss:")):
        try:
            host = urlsplit(text).hostname
        except ValueError as exc:
            raise UnparsableHost(str(exc)) from None
    else:
        try:
            host = urlsplit("//" + text).hostname
        except ValueError as exc:
            raise UnparsableHost(str(exc)) from None
    if not host:
        raise UnparsableHost(f"no hostname in {host_or_url!r}")
    return host.rstrip(".").lower()


def registrable_domain(host_or_url: str, psl: PublicSuffixList | None = None) -> str:
    """eTLD+1 of a host or URL; IP literals are returned verbatim."""
    host = _extract_host(host_or_url)
    try:
        ipaddress.ip_address(host)
        return host
    except ValueError:
        pass
    return (psl or default_psl()).registrable_domain(host)


# ---------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class PartyRegistry:
    psl: PublicSuffixList
    cmp_registry: dict[int, str]
    tracking_domains: frozenset[str]
    first_party_aliases: dict[str, frozenset[str]]  # site -> extra own domains

    def domain_of(self, host_or_url: str) -> str:
        return registrable_domain(host_or_url, self.psl)

    def is_tracking(self, party: str) -> bool:
        return party in self.tracking_domains

    def own_domains(self, site: str) -> frozenset[str]:
        return frozenset({site}) | self.first_party_aliases.get(site, frozenset())

    def is_third_party(self, host_or_url: str, site: str) -> bool:
        try:
            return self.domain_of(host_or_url) not in self.own_domains(site)
        except UnparsableHost:
            return False


def _read_lines(path: str | Path) -> list[str]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith(("#", "!", "//")):
            out.append(line)
    return out


def load_first_party_aliases(path: str | Path) -> dict[str, frozenset[str]]:
    """Read a per-site alias file: `site alias-domain` per line.

    Declares same-operator domains (CDNs and the like) as first party so
    they are not misattributed as third parties.
    """
    aliases: dict[str, set[str]] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'site alias-domain', got {line!r}")
        aliases.setdefault(parts[0].lower(), set()).add(parts[1].lower())
    return {site: frozenset(domains) for site, domains in aliases.items()}


def load_registry(
    suffix_list: str | Path | None = None,
    cmp_list: str | Path | None = None,
    tracking_domains: str | Path | None = None,
    first_party_aliases: dict[str, frozenset[str]] | str | Path | None = None,
) -> PartyRegistry:
    """Build a registry from config files, defaulting to the bundled data."""
    if isinstance(first_party_aliases, (str, Path)):
        first_party_aliases = load_first_party_aliases(first_party_aliases)
    psl = PublicSuffixList.from_file(suffix_list) if suffix_list else default_psl()
    data = resources.files("revaudit").joinpath("data")
    cmp_lines = (
        _read_lines(cmp_list)
        if cmp_list
        else data.joinpath("cmp_registry.tsv").read_text(encoding="utf-8").splitlines()
    )
    cmp_registry: dict[int, str] = {}
    for line in cmp_lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        cmp_id, _, name = line.partition("\t")
        if not name:
            cmp_id, _, name = line.partition(" ")
        cmp_registry[int(cmp_id)] = name.strip()
    tracking_lines = (
        _read_lines(tracking_domains)
        if tracking_domains
        else [
            ln
            for ln in data.joinpath("tracking_domains.txt")
            .read_text(encoding="utf-8")
            .splitlines()
            if ln.strip() and not ln.startswith("#")
        ]
    )
    return PartyRegistry(
        psl=psl,
        cmp_registry=cmp_registry,
        tracking_domains=frozenset(d.strip().lower() for d in tracking_lines),
        first_party_aliases=first_party_aliases or {},
    )


# ---------------------------------------------------------------------------
# informed parties


@dataclass(frozen=True)
class PartyReport:
    party: str
    informed_at_accept: bool
    informed_at_revoke: bool
    channels: frozenset[str]  # subset of {"http", "api"}
    set_cookie_after_revocation: bool = False
    is_tracking_domain: bool = False


def informed_parties_http(
    observations: list[ConsentObservation],
    site: str,
    registry: PartyRegistry,
) -> dict[str, tuple[str, ...]]:
    """Third parties that received a consent string in outgoing traffic.

    Pass one stage's observations. Returns party -> evidence strings.
    """
    own = registry.own_domains(site)
    informed: dict[str, list[str]] = {}
    for obs in observations:
        if obs.location not in OUTGOING_LOCATIONS:
            continue
        if obs.receiver_party in own:
            continue
        informed.setdefault(obs.receiver_party, []).append(
            f"{obs.location} in request {obs.request_id} to {obs.request_url}"
        )
    return {party: tuple(ev) for party, ev in sorted(informed.items())}


def _filtered_revoked_observations(
    observations: list[ConsentObservation],
    stage_event_time,
    grace_window_seconds: float,
    revoked_api_projection: ConsentProjection | None,
) -> list[ConsentObservation]:
    """Drop stale-consent observations still inside the grace window.

    A receipt that mismatches the (negative) post-revocation API value and
    fires within the window reflects the pre-revocation state and neither
    informs the party nor counts as a violation here. Without an event-time
    anchor or a trustworthy API value, nothing is filtered.
    """
    if stage_event_time is None or revoked_api_projection is None:
        return observations
    kept = []
    for obs in observations:
        delayed = (
            project_consent(obs.value.core) != revoked_api_projection
            and (obs.timestamp - stage_event_time).total_seconds() < grace_window_seconds
        )
        if not delayed:
            kept.append(obs)
    return kept


def diff_informed(
    session: CaptureSession,
    observations_by_stage: dict[str, list[ConsentObservation]],
    registry: PartyRegistry,
    grace_window_seconds: float = 5.0,
    revoked_api_projection: ConsentProjection | None = None,
) -> tuple[list[PartyReport], list[Finding], float | None]:
    """Compare HTTP-informed parties between acceptance and revocation.

    With a trustworthy post-revocation API value, a party counts as informed
    of revocation only when it received that updated consent; receipts of
    stale consent inside the grace window are excluded as in-flight traffic.
    Without a reference (API absent, or itself still positive), any receipt
    counts. Returns (party reports, findings, percentage of accept-informed
    parties not informed at revocation). Raises MissingStage without both
    stages.
    """
    accepted = session.stage("accepted")
    revoked = session.stage("revoked")
    if accepted is None or revoked is None:
        raise MissingStage("diff_informed needs accepted and revoked stages")
    informed_accept = informed_parties_http(
        observations_by_stage.get("accepted", []), session.site, registry
    )
    revoked_observations = _filtered_revoked_observations(
        observations_by_stage.get("revoked", []),
        revoked.stage_event_time,
        grace_window_seconds,
        revoked_api_projection,
    )
    if revoked_api_projection is not None:
        # an updated-consent receipt informs; a stale one does not
        revoked_observations = [
            obs
            for obs in revoked_observations
            if project_consent(obs.value.core) == revoked_api_projection
        ]
    informed_revoke = informed_parties_http(revoked_observations, session.site, registry)

    reports: list[PartyReport] = []
    findings: list[Finding] = []
    for party in sorted(set(informed_accept) | set(informed_revoke)):
        reports.append(
            PartyReport(
                party=party,
                informed_at_accept=party in informed_accept,
                informed_at_revoke=party in informed_revoke,
                channels=frozenset({"http"}),
                is_tracking_domain=registry.is_tracking(party),
            )
        )
    not_informed = [p for p in informed_accept if p not in informed_revoke]
    for party in not_informed:
        findings.append(
            Finding(
                kind="third_party_not_informed",
                rules=frozenset({"LR6", "P1", "P2"}),
                stage="revoked",
                site=session.site,
                evidence=(f"informed at acceptance: {informed_accept[party][0]}",),
                severity=VIOLATION,
                locator=party,
                source="http",
            )
        )
    percentage = (
        100.0 * len(not_informed) / len(informed_accept) if informed_accept else None
    )
    return reports, findings, percentage


def api_access_diff(session: CaptureSession, registry: PartyRegistry) -> list[Finding]:
    """Third-party API consumers that fetched consent at acceptance only.

    Warnings, not violations: a consumer may have registered an event
    listener we cannot observe; tcfapi accessors with an addEventListener
    call anywhere are skipped entirely.
    """
    reads: dict[str, dict[str, set[str]]] = {"accepted": {}, "revoked": {}}
    listeners: set[str] = set()
    own = registry.own_domains(session.site)
    for stage in session.stages:
        for access in stage.api_accesses:
            try:
                domain = registry.domain_of(access.accessor_script_url)
            except UnparsableHost:
                continue
            if domain in own:
                continue
            if access.api == "tcfapi" and access.command == "addEventListener":
                listeners.add(domain)
            if stage.stage not in reads:
                continue
            if access.api == "tcfapi" and access.command == "getTCData":
                reads[stage.stage].setdefault(domain, set()).add("tcfapi")
            elif access.api == "onetrust_groups_get":
                reads[stage.stage].setdefault(domain, set()).add("onetrust")
    findings = []
    for domain in sorted(reads["accepted"]):
        for channel in sorted(reads["accepted"][domain]):
            if channel == "tcfapi" and domain in listeners:
                continue
            if channel in reads["revoked"].get(domain, set()):
                continue
            findings.append(
                Finding(
                    kind="api_consumer_not_updated",
                    rules=frozenset({"LR6"}),
                    stage="revoked",
                    site=session.site,
                    evidence=(
                        f"{domain} fetched consent via {channel} after acceptance "
                        "but not after revocation",
                    ),
                    severity=WARNING,
                    locator=domain,
                    source=channel,
                )
            )
    return findings


def set_cookie_after_revocation(
    session: CaptureSession,
    party_reports: list[PartyReport],
    registry: PartyRegistry,
) -> tuple[list[PartyReport], list[Finding]]:
    """Flag not-informed parties that still set cookies after revocation."""
    revoked = session.stage("revoked")
    if revoked is None:
        raise MissingStage("set_cookie_after_revocation needs a revoked stage")
    setters: set[str] = set()
    own = registry.own_domains(session.site)
    for request in revoked.requests:
        if request.response is None:
            continue
        if any(name.lower() == "set-cookie" for name, _ in request.response.headers):
            try:
                party = registry.domain_of(request.url)
            except UnparsableHost:
                continue
            if party not in own:
                setters.add(party)
    updated: list[PartyReport] = []
    findings: list[Finding] = []
    for report in party_reports:
        hit = (
            report.informed_at_accept
            and not report.informed_at_revoke
            and report.party in setters
        )
        updated.append(replace(report, set_cookie_after_revocation=hit) if hit else report)
        if hit:
            findings.append(
                Finding(
                    kind="processing_after_revocation",
                    rules=frozenset({"LR4", "LR6", "P1", "P2"}),
                    stage="revoked",
                    site=session.site,
                    evidence=(f"{report.party} set cookies after revocation while uninformed",),
                    severity=VIOLATION,
                    locator=report.party,
                )
            )
    return updated, findings


# ---------------------------------------------------------------------------
# attribution


@dataclass(frozen=True)
class Attribution:
    kind: str  # "first_party" | "cmp" | "third_party"
    name: str | None = None

    def __str__(self) -> str:
        return self.kind if self.name is None else f"{self.kind}({self.name})"


def _name_tokens(name: str) -> list[str]:
    return [
        t
        for t in _TOKEN_RE.findall(name.lower())
        if len(t) >= 3 and t not in _NAME_STOPWORDS
    ]


def _host_matches_cmp(host: str, cmp_name: str) -> bool:
    tokens = _name_tokens(cmp_name)
    if not tokens:
        return False
    labels = host.lower().split(".")
    variants = set(labels)
    for label in labels:
        stripped = label
        for marker in _CMP_MARKERS:
            stripped = stripped.replace(marker, "")
        stripped = stripped.strip("-_")
        if stripped:
            variants.add(stripped)
    for token in tokens:
        for variant in variants:
            if len(variant) >= 3 and (token in variant or variant in token):
                return True
    return False


def attribute_responsible_party(
    site: str,
    registry: PartyRegistry,
    initiator_url: str | None = None,
    cmp_id: int | None = None,
) -> Attribution:
    """Attribute a finding to the first party, the CMP, or a third party.

    The CMP attribution matches the initiator host against the registry name
    for the decoded cmp id, tolerating shortened names and infrastructure
    labels (privacy/center/consent/cdn/cmp). Raises NoEvidence without an
    initiator or cmp id.
    """
    if initiator_url is None and cmp_id is None:
        raise NoEvidence("need an initiator url or a decoded cmp id")
    if initiator_url is None:
        # a cmp id alone cannot place the initiator; stay conservative
        return Attribution("third_party", None)
    try:
        domain = registry.domain_of(initiator_url)
    except UnparsableHost:
        raise NoEvidence(f"unparsable initiator {initiator_url!r}") from None
    if domain in registry.own_domains(site):
        return Attribution("first_party")
    host = _extract_host(initiator_url)
    if cmp_id is not None:
        name = registry.cmp_registry.get(cmp_id)
        if name and _host_matches_cmp(host, name):
            return Attribution("cmp", name)
    return Attribution("third_party", domain)


# ---------------------------------------------------------------------------
# histogram


def bucket_percentages(values: list[float]) -> dict[str, int]:
    """Histogram of not-informed percentages.

    Buckets [0,25), [25,50), [50,75), [75,100) are left-inclusive; exactly
    100 is its own bucket. Raises OutOfRange outside [0, 100].
    """
    counts = dict.fromkeys(BUCKET_LABELS, 0)
    for v in values:
        if not 0 <= v <= 100:
            raise OutOfRange(f"percentage {v} outside [0, 100]")
        if v == 100:
            counts["100"] += 1
        elif v >= 75:
            counts[">=75 to <100"] += 1
        elif v >= 50:
            counts[">=50 to <75"] += 1
        elif v >= 25:
            counts[">=25 to <50"] += 1
        else:
            counts["<25"] += 1
    return counts
