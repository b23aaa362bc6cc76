"""IAB TCF v2 Transparency-and-Consent string codec.

Strings are '.'-separated segments of base64url text (no padding, alphabet
A-Z a-z 0-9 - _). The first segment is the core; bits are big-endian within
and across bytes and the encoder zero-pads the final byte.

Core layout (bit widths):

    Version 6 | Created 36 | LastUpdated 36 | CmpId 12 | CmpVersion 12 |
    ConsentScreen 6 | ConsentLanguage 12 | VendorListVersion 12 |
    TcfPolicyVersion 6 | IsServiceSpecific 1 | UseNonStandardTexts 1 |
    SpecialFeatureOptIns 12 | PurposesConsent 24 | PurposesLITransparency 24 |
    PurposeOneTreatment 1 | PublisherCC 12                     (= 213 bits)

followed by two vendor sections (consents, then legitimate interests), each

    MaxVendorId 16 | IsRangeEncoding 1 |
    bitfield of MaxVendorId bits  -or-
    NumEntries 12 { IsARange 1 | Start 16 | [End 16] }

and publisher restrictions:

    NumRestrictions 12 { PurposeId 6 | RestrictionType 2 |
                         NumEntries 12 { IsARange 1 | Start 16 | [End 16] } }

Timestamps are deciseconds since the Unix epoch. Non-core segments (segment
type = first 3 bits) are preserved as opaque text and re-emitted byte for
byte; none of the audit checks read them.
"""

from __future__ import annotations

import base64
import re
from dataclasses import dataclass, field
from urllib.parse import unquote

from revaudit import _bitkit

__all__ = [
    "TcCore",
    "TcString",
    "ConsentProjection",
    "PublisherRestriction",
    "TcsError",
    "MalformedBase64",
    "TruncatedCore",
    "UnsupportedVersion",
    "FieldOverflow",
    "decode_tc_string",
    "encode_tc_core",
    "sniff_tcs",
    "project_consent",
]

CORE_PRELUDE_BITS = 213
MIN_SNIFF_CHARS = 36  # ceil(213 / 6)

_B64URL_RE = re.compile(r"^[A-Za-z0-9_-]+$")
_LETTER_A = ord("A")


class TcsError(Exception):
    """Base class for consent-string codec errors."""


class MalformedBase64(TcsError):
    """Segment text contains characters outside the base64url alphabet."""


class TruncatedCore(TcsError):
    """Core segment ends before a declared field or section is complete."""


class UnsupportedVersion(TcsError):
    """Core segment declares a version other than 2."""


class FieldOverflow(TcsError):
    """A field value does not fit its declared bit width or value range."""


@dataclass(frozen=True)
class PublisherRestriction:
    purpose_id: int
    restriction_type: int  # 0..3
    vendor_ids: frozenset[int]


@dataclass(frozen=True)
class TcCore:
    """Fully decoded core segment of a TCF v2 consent string."""

    version: int = 2
    created: int = 0  # deciseconds since epoch, 36-bit
    last_updated: int = 0
    cmp_id: int = 0
    cmp_version: int = 0
    consent_screen: int = 0
    consent_language: str = "AA"
    vendor_list_version: int = 0
    policy_version: int = 0
    is_service_specific: bool = False
    use_non_standard_texts: bool = False
    special_feature_opt_ins: frozenset[int] = frozenset()
    purposes_consent: frozenset[int] = frozenset()
    purposes_li_transparency: frozenset[int] = frozenset()
    purpose_one_treatment: bool = False
    publisher_cc: str = "AA"
    vendor_consents: frozenset[int] = frozenset()
    vendor_li: frozenset[int] = frozenset()
    publisher_restrictions: tuple[PublisherRestriction, ...] = ()


@dataclass(frozen=True)
class TcString:
    """A decoded consent string: core plus opaque non-core segments."""

    core: TcCore
    extra_segments: tuple[tuple[int, str], ...] = ()  # (segment_type, raw text)


@dataclass(frozen=True)
class ConsentProjection:
    """Consent-relevant fields of a core, stripped of metadata.

    Two strings that differ only in timestamps, consent screen, or other
    metadata project equal; all consistency comparisons use this equality.
    """

    purposes_consent: frozenset[int]
    purposes_li_transparency: frozenset[int]
    special_feature_opt_ins: frozenset[int]
    vendor_consents: frozenset[int]
    vendor_li: frozenset[int]
    publisher_restrictions: tuple[PublisherRestriction, ...]


def project_consent(core: TcCore) -> ConsentProjection:
    """Project the consent-relevant fields of a core for comparison."""
    restrictions = tuple(
        sorted(
            core.publisher_restrictions,
            key=lambda r: (r.purpose_id, r.restriction_type, sorted(r.vendor_ids)),
        )
    )
    return ConsentProjection(
        purposes_consent=core.purposes_consent,
        purposes_li_transparency=core.purposes_li_transparency,
        special_feature_opt_ins=core.special_feature_opt_ins,
        vendor_consents=core.vendor_consents,
        vendor_li=core.vendor_li,
        publisher_restrictions=restrictions,
    )


# ---------------------------------------------------------------------------
# decoding


def _segment_bytes(segment: str) -> bytes:
    if not segment or not _B64URL_RE.match(segment):
        raise MalformedBase64(f"not base64url: {segment[:32]!r}")
    padded = segment + "=" * (-len(segment) % 4)
    try:
        return base64.b64decode(padded, altchars=b"-_", validate=True)
    except (ValueError, TypeError) as exc:
        raise MalformedBase64(str(exc)) from None


class _Reader:
    __slots__ = ("data", "pos")

    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def take(self, width: int) -> int:
        try:
            value = _bitkit.read_uint(self.data, self.pos, width)
        except ValueError:
            raise TruncatedCore(f"needed {width} bits at offset {self.pos}") from None
        self.pos += width
        return value

    def take_set(self, count: int) -> frozenset[int]:
        try:
            ids = _bitkit.read_set_bits(self.data, self.pos, count)
        except ValueError:
            raise TruncatedCore(f"needed {count} bits at offset {self.pos}") from None
        self.pos += count
        return frozenset(ids)


def _read_letters(reader: _Reader, count: int) -> str:
    return "".join(chr(_LETTER_A + reader.take(6)) for _ in range(count))


def _read_vendor_section(reader: _Reader) -> frozenset[int]:
    max_vendor_id = reader.take(16)
    if reader.take(1):  # range encoding
        return _read_range_entries(reader)
    return reader.take_set(max_vendor_id)


def _read_range_entries(reader: _Reader) -> frozenset[int]:
    ids: set[int] = set()
    for _ in range(reader.take(12)):
        if reader.take(1):
            start, end = reader.take(16), reader.take(16)
            ids.update(range(start, end + 1))
        else:
            ids.add(reader.take(16))
    return frozenset(ids)


def _decode_core_segment(segment: str) -> TcCore:
    data = _segment_bytes(segment)
    if len(data) * 8 < CORE_PRELUDE_BITS:
        raise TruncatedCore(
            f"core prelude needs {CORE_PRELUDE_BITS} bits, got {len(data) * 8}"
        )
    r = _Reader(data)
    version = r.take(6)
    if version != 2:
        raise UnsupportedVersion(f"version {version}")
    core = TcCore(
        version=version,
        created=r.take(36),
        last_updated=r.take(36),
        cmp_id=r.take(12),
        cmp_version=r.take(12),
        consent_screen=r.take(6),
        consent_language=_read_letters(r, 2),
        vendor_list_version=r.take(12),
        policy_version=r.take(6),
        is_service_specific=bool(r.take(1)),
        use_non_standard_texts=bool(r.take(1)),
        special_feature_opt_ins=r.take_set(12),
        purposes_consent=r.take_set(24),
        purposes_li_transparency=r.take_set(24),
        purpose_one_treatment=bool(r.take(1)),
        publisher_cc=_read_letters(r, 2),
        vendor_consents=_read_vendor_section(r),
        vendor_li=_read_vendor_section(r),
        publisher_restrictions=tuple(
            PublisherRestriction(
                purpose_id=r.take(6),
                restriction_type=r.take(2),
                vendor_ids=_read_range_entries(r),
            )
            for _ in range(r.take(12))
        ),
    )
    return core


def decode_tc_string(text: str) -> TcString:
    """Decode a full consent string (core segment plus opaque extras).

    Raises MalformedBase64, TruncatedCore, or UnsupportedVersion.
    """
    if not text:
        raise MalformedBase64("empty string")
    segments = text.split(".")
    core = _decode_core_segment(segments[0])
    extras = []
    for raw in segments[1:]:
        data = _segment_bytes(raw)
        segment_type = _bitkit.read_uint(data, 0, 3) if len(data) else 0
        extras.append((segment_type, raw))
    return TcString(core=core, extra_segments=tuple(extras))


# ---------------------------------------------------------------------------
# encoding


class _Writer:
    __slots__ = ("buf", "pos")

    def __init__(self) -> None:
        self.buf = bytearray()
        self.pos = 0

    def _grow(self, width: int) -> None:
        need = (self.pos + width + 7) >> 3
        if need > len(self.buf):
            self.buf.extend(b"\x00" * (need - len(self.buf)))

    def put(self, width: int, value: int, label: str) -> None:
        if value < 0 or value >> width:
            raise FieldOverflow(f"{label}={value} exceeds {width} bits")
        self._grow(width)
        _bitkit.write_uint(self.buf, self.pos, width, value)
        self.pos += width

    def put_bitfield(self, count: int, ids: frozenset[int], label: str) -> None:
        self._grow(count)
        for i in ids:
            if not 1 <= i <= count:
                raise FieldOverflow(f"{label} id {i} outside 1..{count}")
            _bitkit.set_bit(self.buf, self.pos + i - 1)
        self.pos += count

    def to_base64url(self) -> str:
        return base64.urlsafe_b64encode(bytes(self.buf)).decode("ascii").rstrip("=")


def _letter_value(ch: str, label: str) -> int:
    v = ord(ch.upper()) - _LETTER_A
    if not 0 <= v <= 25:
        raise FieldOverflow(f"{label} letter {ch!r} outside A..Z")
    return v


def _put_letters(w: _Writer, text: str, count: int, label: str) -> None:
    if len(text) != count:
        raise FieldOverflow(f"{label} must be {count} letters, got {text!r}")
    for ch in text:
        w.put(6, _letter_value(ch, label), label)


def _ranges_of(ids: frozenset[int]) -> list[tuple[int, int]]:
    out: list[tuple[int, int]] = []
    for i in sorted(ids):
        if out and i == out[-1][1] + 1:
            out[-1] = (out[-1][0], i)
        else:
            out.append((i, i))
    return out


def _put_range_entries(w: _Writer, ids: frozenset[int], label: str) -> None:
    ranges = _ranges_of(ids)
    w.put(12, len(ranges), label + " entries")
    for start, end in ranges:
        if start == end:
            w.put(1, 0, label)
            w.put(16, start, label)
        else:
            w.put(1, 1, label)
            w.put(16, start, label)
            w.put(16, end, label)


def _put_vendor_section(w: _Writer, ids: frozenset[int], label: str) -> None:
    for i in ids:
        if not 1 <= i <= 0xFFFF:
            raise FieldOverflow(f"{label} vendor id {i} outside 1..65535")
    max_id = max(ids, default=0)
    range_bits = 12 + sum(33 if a != b else 17 for a, b in _ranges_of(ids))
    w.put(16, max_id, label + " max id")
    if ids and range_bits < max_id:
        w.put(1, 1, label)
        _put_range_entries(w, ids, label)
    else:
        w.put(1, 0, label)
        w.put_bitfield(max_id, ids, label)


def encode_tc_core(
    core: TcCore, extra_segments: tuple[tuple[int, str], ...] = ()
) -> str:
    """Encode a core (and pass through opaque extra segments) to text.

    The vendor sections pick whichever of the two encodings is smaller.
    Raises FieldOverflow when a value does not fit its declared width.
    """
    w = _Writer()
    w.put(6, core.version, "version")
    w.put(36, core.created, "created")
    w.put(36, core.last_updated, "last_updated")
    w.put(12, core.cmp_id, "cmp_id")
    w.put(12, core.cmp_version, "cmp_version")
    w.put(6, core.consent_screen, "consent_screen")
    _put_letters(w, core.consent_language, 2, "consent_language")
    w.put(12, core.vendor_list_version, "vendor_list_version")
    w.put(6, core.policy_version, "policy_version")
    w.put(1, int(core.is_service_specific), "is_service_specific")
    w.put(1, int(core.use_non_standard_texts), "use_non_standard_texts")
    w.put_bitfield(12, core.special_feature_opt_ins, "special_feature_opt_ins")
    w.put_bitfield(24, core.purposes_consent, "purposes_consent")
    w.put_bitfield(24, core.purposes_li_transparency, "purposes_li_transparency")
    w.put(1, int(core.purpose_one_treatment), "purpose_one_treatment")
    _put_letters(w, core.publisher_cc, 2, "publisher_cc")
    _put_vendor_section(w, core.vendor_consents, "vendor_consents")
    _put_vendor_section(w, core.vendor_li, "vendor_li")
    w.put(12, len(core.publisher_restrictions), "publisher_restrictions")
    for restriction in core.publisher_restrictions:
        if not 1 <= restriction.purpose_id <= 24:
            raise FieldOverflow(
                f"restriction purpose_id {restriction.purpose_id} outside 1..24"
            )
        w.put(6, restriction.purpose_id, "restriction purpose_id")
        w.put(2, restriction.restriction_type, "restriction_type")
        for i in restriction.vendor_ids:
            if not 1 <= i <= 0xFFFF:
                raise FieldOverflow(f"restriction vendor id {i} outside 1..65535")
        _put_range_entries(w, restriction.vendor_ids, "restriction vendors")
    parts = [w.to_base64url()]
    parts.extend(raw for _, raw in extra_segments)
    return ".".join(parts)


# ---------------------------------------------------------------------------
# sniffing


def sniff_tcs(text: str) -> TcString | None:
    """Decode `text` if it looks like a TCF v2 consent string, else None.

    Applies at most one level of percent-decoding, requires every
    '.'-separated segment to be base64url, the first segment to carry the
    full 213-bit prelude and version 2, and the whole core to decode.
    Total: never raises.
    """
    if not text or not isinstance(text, str):
        return None
    if "%" in text:
        try:
            text = unquote(text, errors="strict")
        except UnicodeDecodeError:
            return None
    first = text.split(".", 1)[0]
    # version 2 in the leading 6 bits is exactly a leading 'C'
    if len(first) < MIN_SNIFF_CHARS or first[0] != "C":
        return None
    try:
        return decode_tc_string(text)
    except TcsError:
        return None
