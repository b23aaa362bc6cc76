"""The recorded crawl-session format every analysis consumes.

One JSON document per site, schema_version 1: interface labels plus an
ordered list of stage records (initial, accepted, revoked; rejected comes
from a fresh browser profile and is stored in the same document). Cookie
values are kept verbatim as received (percent-encoded); timestamps are
ISO-8601 UTC.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, BinaryIO, TextIO

from revaudit.tcs import sniff_tcs

__all__ = [
    "CaptureSession",
    "StageRecord",
    "CookieRecord",
    "ApiAccess",
    "ApiSnapshots",
    "RequestRecord",
    "ResponseRecord",
    "InterfaceLabels",
    "CaptureError",
    "SchemaError",
    "InvariantError",
    "VersionError",
    "CmpDetection",
    "load_session",
    "loads_session",
    "dump_session",
    "detect_cmps",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1

STAGE_IDS = ("initial", "accepted", "rejected", "revoked")
_PIPELINE_ORDER = {"initial": 0, "accepted": 1, "revoked": 2}

BANNER_KINDS = ("consent_banner", "no_option_banner", "no_banner")
# Channels without a step count: revocation happens outside the interface
# (or not at all), so steps are not measurable.
REVOCATION_CHANNELS = (
    "icon",
    "footer",
    "banner_on_policy",
    "via_policy",
    "settings_or_links",
    "contact_email",
    "after_login",
    "paywall",
    "mentioned_not_working",
    "none",
)
STEPLESS_CHANNELS = frozenset(
    {"settings_or_links", "contact_email", "after_login", "paywall",
     "mentioned_not_working", "none"}
)

BODY_KINDS = ("json", "html", "other", "none")
API_KINDS = ("tcfapi", "onetrust_groups_get", "onetrust_groups_set")

OPTANON_COOKIE = "OptanonConsent"


class CaptureError(Exception):
    pass


class SchemaError(CaptureError):
    """Missing or mistyped field; message carries the document path."""


class InvariantError(CaptureError):
    """Well-typed document that breaks a session invariant."""


class VersionError(CaptureError):
    """Unknown schema_version."""


@dataclass(frozen=True)
class CookieRecord:
    name: str
    value: str
    domain: str
    path: str
    expires: datetime | None = None
    set_at: datetime | None = None


@dataclass(frozen=True)
class ApiAccess:
    api: str
    command: str | None
    accessor_script_url: str
    timestamp: datetime


@dataclass(frozen=True)
class ApiSnapshots:
    tcfapi_tc_string: str | None = None
    tcfapi_gdpr_applies: bool | None = None
    onetrust_active_groups: str | None = None


@dataclass(frozen=True)
class ResponseRecord:
    status: int
    headers: tuple[tuple[str, str], ...] = ()
    redirect_url: str | None = None
    body_kind: str = "none"
    body: str | None = None


@dataclass(frozen=True)
class RequestRecord:
    id: str
    url: str
    method: str
    timestamp: datetime
    initiator_url: str | None = None
    post_data: str | None = None
    request_headers: tuple[tuple[str, str], ...] = ()
    response: ResponseRecord | None = None


@dataclass(frozen=True)
class InterfaceLabels:
    banner: str
    revocation_channel: str
    steps_to_revoke: int | None = None
    steps_to_accept: int | None = None


@dataclass(frozen=True)
class StageRecord:
    stage: str
    stage_event_time: datetime | None
    cookies: tuple[CookieRecord, ...] = ()
    local_storage: tuple[tuple[str, str, str], ...] = ()  # (origin, key, value)
    api_snapshots: ApiSnapshots = field(default_factory=ApiSnapshots)
    api_accesses: tuple[ApiAccess, ...] = ()
    requests: tuple[RequestRecord, ...] = ()


@dataclass(frozen=True)
class CaptureSession:
    schema_version: int
    site: str
    crawl_time: datetime
    interface_labels: InterfaceLabels | None
    stages: tuple[StageRecord, ...]

    def stage(self, stage_id: str) -> StageRecord | None:
        for record in self.stages:
            if record.stage == stage_id:
                return record
        return None


# ---------------------------------------------------------------------------
# validation helpers


def _fail(path: str, message: str) -> SchemaError:
    return SchemaError(f"{path}: {message}")


def _expect_object(value: Any, path: str) -> dict:
    if not isinstance(value, dict):
        raise _fail(path, f"expected object, got {type(value).__name__}")
    return value


def _expect_list(value: Any, path: str) -> list:
    if not isinstance(value, list):
        raise _fail(path, f"expected array, got {type(value).__name__}")
    return value


def _get(obj: dict, key: str, path: str) -> Any:
    if key not in obj:
        raise _fail(f"{path}.{key}", "missing field")
    return obj[key]


def _string(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise _fail(path, f"expected string, got {type(value).__name__}")
    return value


def _integer(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise _fail(path, f"expected integer, got {type(value).__name__}")
    return value


def _boolean(value: Any, path: str) -> bool:
    if not isinstance(value, bool):
        raise _fail(path, f"expected boolean, got {type(value).__name__}")
    return value


def _enum(value: Any, allowed: tuple[str, ...], path: str) -> str:
    text = _string(value, path)
    if text not in allowed:
        raise _fail(path, f"expected one of {allowed}, got {text!r}")
    return text


def _timestamp(value: Any, path: str) -> datetime:
    text = _string(value, path)
    candidate = text[:-1] + "+00:00" if text.endswith("Z") else text
    try:
        parsed = datetime.fromisoformat(candidate)
    except ValueError:
        raise _fail(path, f"not an ISO-8601 timestamp: {text!r}") from None
    if parsed.tzinfo is None or parsed.utcoffset() != timezone.utc.utcoffset(None):
        raise _fail(path, f"timestamp must be UTC: {text!r}")
    return parsed


def _optional(value: Any, parser, path: str):
    return None if value is None else parser(value, path)


def _headers(value: Any, path: str) -> tuple[tuple[str, str], ...]:
    out = []
    for i, item in enumerate(_expect_list(value, path)):
        pair = _expect_list(item, f"{path}[{i}]")
        if len(pair) != 2:
            raise _fail(f"{path}[{i}]", "expected [name, value]")
        out.append((_string(pair[0], f"{path}[{i}][0]"), _string(pair[1], f"{path}[{i}][1]")))
    return tuple(out)


# ---------------------------------------------------------------------------
# parsing


def _parse_cookie(value: Any, path: str) -> CookieRecord:
    obj = _expect_object(value, path)
    name = _string(_get(obj, "name", path), f"{path}.name")
    if not name:
        raise InvariantError(f"{path}.name: cookie name must be non-empty")
    return CookieRecord(
        name=name,
        value=_string(_get(obj, "value", path), f"{path}.value"),
        domain=_string(_get(obj, "domain", path), f"{path}.domain"),
        path=_string(_get(obj, "path", path), f"{path}.path"),
        expires=_optional(obj.get("expires"), _timestamp, f"{path}.expires"),
        set_at=_optional(obj.get("set_at"), _timestamp, f"{path}.set_at"),
    )


def _parse_api_access(value: Any, path: str) -> ApiAccess:
    obj = _expect_object(value, path)
    api = _enum(_get(obj, "api", path), API_KINDS, f"{path}.api")
    command = _optional(obj.get("command"), _string, f"{path}.command")
    if (command is not None) != (api == "tcfapi"):
        raise InvariantError(f"{path}: command present iff api is tcfapi")
    return ApiAccess(
        api=api,
        command=command,
        accessor_script_url=_string(
            _get(obj, "accessor_script_url", path), f"{path}.accessor_script_url"
        ),
        timestamp=_timestamp(_get(obj, "timestamp", path), f"{path}.timestamp"),
    )


def _parse_response(value: Any, path: str) -> ResponseRecord:
    obj = _expect_object(value, path)
    body_kind = _enum(obj.get("body_kind", "none"), BODY_KINDS, f"{path}.body_kind")
    body = _optional(obj.get("body"), _string, f"{path}.body")
    if body is not None and body_kind == "none":
        raise InvariantError(f"{path}: body present requires body_kind != none")
    return ResponseRecord(
        status=_integer(_get(obj, "status", path), f"{path}.status"),
        headers=_headers(obj.get("headers", []), f"{path}.headers"),
        redirect_url=_optional(obj.get("redirect_url"), _string, f"{path}.redirect_url"),
        body_kind=body_kind,
        body=body,
    )


def _parse_request(value: Any, path: str) -> RequestRecord:
    obj = _expect_object(value, path)
    return RequestRecord(
        id=_string(_get(obj, "id", path), f"{path}.id"),
        url=_string(_get(obj, "url", path), f"{path}.url"),
        method=_string(_get(obj, "method", path), f"{path}.method"),
        timestamp=_timestamp(_get(obj, "timestamp", path), f"{path}.timestamp"),
        initiator_url=_optional(obj.get("initiator_url"), _string, f"{path}.initiator_url"),
        post_data=_optional(obj.get("post_data"), _string, f"{path}.post_data"),
        request_headers=_headers(obj.get("request_headers", []), f"{path}.request_headers"),
        response=_optional(obj.get("response"), _parse_response, f"{path}.response"),
    )


def _parse_snapshots(value: Any, path: str) -> ApiSnapshots:
    obj = _expect_object(value, path)
    return ApiSnapshots(
        tcfapi_tc_string=_optional(obj.get("tcfapi_tc_string"), _string, f"{path}.tcfapi_tc_string"),
        tcfapi_gdpr_applies=_optional(obj.get("tcfapi_gdpr_applies"), _boolean, f"{path}.tcfapi_gdpr_applies"),
        onetrust_active_groups=_optional(obj.get("onetrust_active_groups"), _string, f"{path}.onetrust_active_groups"),
    )


def _parse_local_storage(value: Any, path: str) -> tuple[tuple[str, str, str], ...]:
    out = []
    for i, item in enumerate(_expect_list(value, path)):
        triple = _expect_list(item, f"{path}[{i}]")
        if len(triple) != 3:
            raise _fail(f"{path}[{i}]", "expected [origin, key, value]")
        out.append(tuple(_string(part, f"{path}[{i}][{j}]") for j, part in enumerate(triple)))
    return tuple(out)


def _parse_stage(value: Any, path: str) -> StageRecord:
    obj = _expect_object(value, path)
    stage = _enum(_get(obj, "stage", path), STAGE_IDS, f"{path}.stage")
    event_time = _optional(obj.get("stage_event_time"), _timestamp, f"{path}.stage_event_time")
    requests = tuple(
        _parse_request(item, f"{path}.requests[{i}]")
        for i, item in enumerate(_expect_list(obj.get("requests", []), f"{path}.requests"))
    )
    seen_ids: set[str] = set()
    for i, request in enumerate(requests):
        if request.id in seen_ids:
            raise InvariantError(f"{path}.requests[{i}]: duplicate request id {request.id!r}")
        seen_ids.add(request.id)
        if stage != "initial" and event_time is not None and request.timestamp < event_time:
            raise InvariantError(
                f"{path}.requests[{i}]: timestamp precedes stage_event_time"
            )
    return StageRecord(
        stage=stage,
        stage_event_time=event_time,
        cookies=tuple(
            _parse_cookie(item, f"{path}.cookies[{i}]")
            for i, item in enumerate(_expect_list(obj.get("cookies", []), f"{path}.cookies"))
        ),
        local_storage=_parse_local_storage(obj.get("local_storage", []), f"{path}.local_storage"),
        api_snapshots=_parse_snapshots(obj.get("api_snapshots", {}), f"{path}.api_snapshots"),
        api_accesses=tuple(
            _parse_api_access(item, f"{path}.api_accesses[{i}]")
            for i, item in enumerate(_expect_list(obj.get("api_accesses", []), f"{path}.api_accesses"))
        ),
        requests=requests,
    )


def _parse_labels(value: Any, path: str) -> InterfaceLabels:
    obj = _expect_object(value, path)
    channel = _enum(_get(obj, "revocation_channel", path), REVOCATION_CHANNELS, f"{path}.revocation_channel")
    steps_to_revoke = _optional(obj.get("steps_to_revoke"), _integer, f"{path}.steps_to_revoke")
    steps_to_accept = _optional(obj.get("steps_to_accept"), _integer, f"{path}.steps_to_accept")
    for label, steps in (("steps_to_revoke", steps_to_revoke), ("steps_to_accept", steps_to_accept)):
        if steps is not None and steps < 0:
            raise _fail(f"{path}.{label}", "must be non-negative")
    if (steps_to_revoke is None) != (channel in STEPLESS_CHANNELS):
        raise InvariantError(
            f"{path}: steps_to_revoke must be absent exactly for channels {sorted(STEPLESS_CHANNELS)}"
        )
    return InterfaceLabels(
        banner=_enum(_get(obj, "banner", path), BANNER_KINDS, f"{path}.banner"),
        revocation_channel=channel,
        steps_to_revoke=steps_to_revoke,
        steps_to_accept=steps_to_accept,
    )


def loads_session(document: str | bytes) -> CaptureSession:
    """Parse and validate a capture document from JSON text."""
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"$: invalid JSON: {exc}") from None
    obj = _expect_object(raw, "$")
    version = _integer(_get(obj, "schema_version", "$"), "$.schema_version")
    if version != SCHEMA_VERSION:
        raise VersionError(f"unknown schema_version {version}")
    stages = tuple(
        _parse_stage(item, f"$.stages[{i}]")
        for i, item in enumerate(_expect_list(_get(obj, "stages", "$"), "$.stages"))
    )
    seen: dict[str, int] = {}
    pipeline_rank = -1
    for i, record in enumerate(stages):
        if record.stage in seen:
            raise InvariantError(f"$.stages[{i}]: duplicate stage {record.stage!r}")
        seen[record.stage] = i
        rank = _PIPELINE_ORDER.get(record.stage)
        if rank is not None:
            if rank < pipeline_rank:
                raise InvariantError(
                    f"$.stages[{i}]: stage {record.stage!r} out of pipeline order"
                )
            pipeline_rank = rank
    return CaptureSession(
        schema_version=version,
        site=_string(_get(obj, "site", "$"), "$.site"),
        crawl_time=_timestamp(_get(obj, "crawl_time", "$"), "$.crawl_time"),
        interface_labels=_optional(obj.get("interface_labels"), _parse_labels, "$.interface_labels"),
        stages=stages,
    )


def load_session(source: str | Path | TextIO | BinaryIO) -> CaptureSession:
    """Load a capture session from a path or an open stream."""
    if isinstance(source, (str, Path)):
        document = Path(source).read_text(encoding="utf-8")
    elif isinstance(source, io.TextIOBase):
        document = source.read()
    else:
        document = source.read()
    return loads_session(document)


# ---------------------------------------------------------------------------
# serialization (inverse of load, used for round-trip checks and fixtures)


def _iso(ts: datetime | None) -> str | None:
    if ts is None:
        return None
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def dump_session(session: CaptureSession) -> dict:
    """Render a session back to the plain-JSON document shape."""
    return {
        "schema_version": session.schema_version,
        "site": session.site,
        "crawl_time": _iso(session.crawl_time),
        "interface_labels": None
        if session.interface_labels is None
        else {
            "banner": session.interface_labels.banner,
            "revocation_channel": session.interface_labels.revocation_channel,
            "steps_to_revoke": session.interface_labels.steps_to_revoke,
            "steps_to_accept": session.interface_labels.steps_to_accept,
        },
        "stages": [_dump_stage(stage) for stage in session.stages],
    }


def _dump_stage(stage: StageRecord) -> dict:
    return {
        "stage": stage.stage,
        "stage_event_time": _iso(stage.stage_event_time),
        "cookies": [
            {
                "name": c.name,
                "value": c.value,
                "domain": c.domain,
                "path": c.path,
                "expires": _iso(c.expires),
                "set_at": _iso(c.set_at),
            }
            for c in stage.cookies
        ],
        "local_storage": [list(entry) for entry in stage.local_storage],
        "api_snapshots": {
            "tcfapi_tc_string": stage.api_snapshots.tcfapi_tc_string,
            "tcfapi_gdpr_applies": stage.api_snapshots.tcfapi_gdpr_applies,
            "onetrust_active_groups": stage.api_snapshots.onetrust_active_groups,
        },
        "api_accesses": [
            {
                "api": a.api,
                "command": a.command,
                "accessor_script_url": a.accessor_script_url,
                "timestamp": _iso(a.timestamp),
            }
            for a in stage.api_accesses
        ],
        "requests": [
            {
                "id": r.id,
                "url": r.url,
                "method": r.method,
                "timestamp": _iso(r.timestamp),
                "initiator_url": r.initiator_url,
                "post_data": r.post_data,
                "request_headers": [list(h) for h in r.request_headers],
                "response": None
                if r.response is None
                else {
                    "status": r.response.status,
                    "headers": [list(h) for h in r.response.headers],
                    "redirect_url": r.response.redirect_url,
                    "body_kind": r.response.body_kind,
                    "body": r.response.body,
                },
            }
            for r in stage.requests
        ],
    }


# ---------------------------------------------------------------------------
# CMP detection


@dataclass(frozen=True)
class CmpDetection:
    tcf: bool
    onetrust: bool
    evidence: tuple[str, ...]


def detect_cmps(session: CaptureSession) -> CmpDetection:
    """Detect TCF (decodable tcfapi snapshot) and OneTrust (OptanonConsent)."""
    tcf = False
    onetrust = False
    evidence: list[str] = []
    for stage in session.stages:
        snapshot = stage.api_snapshots.tcfapi_tc_string
        if snapshot is not None and sniff_tcs(snapshot) is not None:
            if not tcf:
                evidence.append(f"{stage.stage}: tcfapi snapshot decodes as TCF v2 string")
            tcf = True
        if any(c.name == OPTANON_COOKIE for c in stage.cookies):
            if not onetrust:
                evidence.append(f"{stage.stage}: cookie {OPTANON_COOKIE} present")
            onetrust = True
    return CmpDetection(tcf=tcf, onetrust=onetrust, evidence=tuple(evidence))
