"""Consent-string extraction from recorded network traffic.

Finds every TCF consent string in a stage's requests and responses across
eight location kinds: URL query parameters, POST data (JSON or raw), Cookie
request headers, Set-Cookie response headers, JSON response bodies, URLs
embedded in HTML responses (img/iframe/script), and redirect URLs.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from datetime import datetime
from html import unescape
from typing import Callable
from urllib.parse import urlsplit

from revaudit.capture import RequestRecord, StageRecord
from revaudit.tcs import TcString, sniff_tcs

__all__ = [
    "ConsentObservation",
    "OUTGOING_LOCATIONS",
    "INCOMING_LOCATIONS",
    "parse_url",
    "parse_json",
    "parse_html",
    "scan_stage",
]

log = logging.getLogger(__name__)

OUTGOING_LOCATIONS = frozenset(
    {"url_query", "post_data_json", "post_data_raw", "request_cookie_header"}
)
INCOMING_LOCATIONS = frozenset(
    {"response_set_cookie", "response_json", "response_html_url", "redirect_url"}
)

DEFAULT_BODY_CAP = 4 * 1024 * 1024  # bytes of body text scanned per response

_RAW_TOKEN_SPLIT = re.compile(r'[&="\s]+')
_TAG_OPEN = re.compile(r"<\s*(img|iframe|script)\b", re.IGNORECASE)
_ATTR = re.compile(
    r"""(src|srcset)\s*=\s*("([^"]*)"|'([^']*)'|([^\s"'<>]+))""", re.IGNORECASE
)


@dataclass(frozen=True)
class ConsentObservation:
    """One consent-string sighting in traffic."""

    value: TcString
    location: str
    direction: str  # "outgoing" | "incoming"
    request_id: str
    request_url: str
    initiator_url: str | None
    timestamp: datetime
    receiver_party: str


def parse_url(url: str) -> list[TcString]:
    """Sniff every query-parameter value of a URL, in parameter order.

    Each raw value gets one level of percent-decoding (inside the sniffer).
    Malformed URLs yield an empty list.
    """
    try:
        query = urlsplit(url).query
    except ValueError:
        return []
    hits: list[TcString] = []
    for pair in query.split("&"):
        _, sep, value = pair.partition("=")
        if not sep:
            continue
        decoded = sniff_tcs(value)
        if decoded is not None:
            hits.append(decoded)
    return hits


def _walk_json(node, hits: list[TcString]) -> None:
    if isinstance(node, str):
        decoded = sniff_tcs(node)
        if decoded is not None:
            hits.append(decoded)
    elif isinstance(node, dict):
        for value in node.values():
            _walk_json(value, hits)
    elif isinstance(node, list):
        for value in node:
            _walk_json(value, hits)


def parse_json(document: str) -> list[TcString]:
    """Sniff every string leaf of a JSON document (objects and arrays).

    Input that does not parse as JSON falls back to a whole-text sniff.
    """
    try:
        root = json.loads(document)
    except (json.JSONDecodeError, TypeError):
        decoded = sniff_tcs(document)
        return [decoded] if decoded is not None else []
    hits: list[TcString] = []
    _walk_json(root, hits)
    return hits


def _tag_urls(markup: str) -> list[str]:
    urls: list[str] = []
    for match in _TAG_OPEN.finditer(markup):
        start = match.end()
        # attribute chunk ends at the next tag delimiter; tolerate unclosed tags
        stop_gt = markup.find(">", start)
        stop_lt = markup.find("<", start)
        stops = [s for s in (stop_gt, stop_lt) if s != -1]
        chunk = markup[start : min(stops)] if stops else markup[start:]
        tag = match.group(1).lower()
        for attr_match in _ATTR.finditer(chunk):
            attr = attr_match.group(1).lower()
            value = next(g for g in attr_match.groups()[2:] if g is not None)
            value = unescape(value)
            if attr == "src":
                urls.append(value)
            elif attr == "srcset" and tag == "img":
                urls.extend(
                    entry.strip().split()[0]
                    for entry in value.split(",")
                    if entry.strip()
                )
    return urls


def parse_html(document: str) -> list[tuple[TcString, str]]:
    """Sniff URLs carried by img/iframe/script tags in (possibly broken) HTML.

    Returns (decoded string, source URL) pairs; anchors and other tags are
    out of scope. A single-pass tag scan, never aborted by bad markup.
    """
    hits: list[tuple[TcString, str]] = []
    for url in _tag_urls(document):
        for decoded in parse_url(url):
            hits.append((decoded, url))
    return hits


def _sniff_raw_tokens(text: str) -> list[TcString]:
    hits = []
    for token in _RAW_TOKEN_SPLIT.split(text):
        if token:
            decoded = sniff_tcs(token)
            if decoded is not None:
                hits.append(decoded)
    return hits


def _cookie_header_values(header_value: str) -> list[str]:
    values = []
    for piece in header_value.split(";"):
        _, sep, value = piece.partition("=")
        if sep:
            values.append(value.strip())
    return values


def _scan_request(
    request: RequestRecord, body_cap: int
) -> list[tuple[str, TcString]]:
    found: list[tuple[str, TcString]] = []

    for decoded in parse_url(request.url):
        found.append(("url_query", decoded))

    if request.post_data is not None:
        try:
            root = json.loads(request.post_data)
        except (json.JSONDecodeError, TypeError):
            root = None
        if isinstance(root, (dict, list)):
            hits: list[TcString] = []
            _walk_json(root, hits)
            found.extend(("post_data_json", h) for h in hits)
        else:
            found.extend(("post_data_raw", h) for h in _sniff_raw_tokens(request.post_data))

    for name, value in request.request_headers:
        if name.lower() == "cookie":
            for cookie_value in _cookie_header_values(value):
                decoded = sniff_tcs(cookie_value)
                if decoded is not None:
                    found.append(("request_cookie_header", decoded))

    response = request.response
    if response is None:
        return found

    if response.redirect_url:
        found.extend(("redirect_url", d) for d in parse_url(response.redirect_url))

    for name, value in response.headers:
        if name.lower() == "set-cookie":
            for cookie_value in _cookie_header_values(value):
                decoded = sniff_tcs(cookie_value)
                if decoded is not None:
                    found.append(("response_set_cookie", decoded))

    body = response.body
    if body is not None:
        if len(body) > body_cap:
            log.warning(
                "request %s: response body truncated to %d bytes", request.id, body_cap
            )
            body = body[:body_cap]
        if response.body_kind == "json":
            found.extend(("response_json", d) for d in parse_json(body))
        elif response.body_kind == "html":
            found.extend(("response_html_url", d) for d, _ in parse_html(body))

    return found


def scan_stage(
    stage: StageRecord,
    domain_of: Callable[[str], str] | None = None,
    body_cap: int = DEFAULT_BODY_CAP,
) -> list[ConsentObservation]:
    """Extract every consent-string observation from one stage's traffic.

    `domain_of` maps a URL to its registrable domain for receiver-party
    attribution (defaults to the bundled public-suffix snapshot); response
    bodies beyond `body_cap` are truncated with a warning. Failures inside a
    single request are logged and skipped; the scan never raises. Output is
    ordered by (request timestamp, request id).
    """
    if domain_of is None:
        from revaudit.thirdparty import registrable_domain

        domain_of = registrable_domain
    observations: list[ConsentObservation] = []
    for request in sorted(stage.requests, key=lambda r: (r.timestamp, r.id)):
        try:
            found = _scan_request(request, body_cap)
        except Exception:  # noqa: BLE001 - one bad request must not stop the scan
            log.warning("request %s: scan failed", request.id, exc_info=True)
            continue
        try:
            party = domain_of(request.url)
        except Exception:  # noqa: BLE001
            log.warning("request %s: unparsable url %r", request.id, request.url)
            continue
        for location, decoded in found:
            observations.append(
                ConsentObservation(
                    value=decoded,
                    location=location,
                    direction="outgoing" if location in OUTGOING_LOCATIONS else "incoming",
                    request_id=request.id,
                    request_url=request.url,
                    initiator_url=request.initiator_url,
                    timestamp=request.timestamp,
                    receiver_party=party,
                )
            )
    return observations
