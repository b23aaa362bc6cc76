"""Codec tests: round trips against the encoder oracle, sniffing, projection."""

from __future__ import annotations

import base64
import dataclasses
import random
import uuid

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_core
from revaudit.tcs import (
    FieldOverflow,
    MalformedBase64,
    PublisherRestriction,
    TcCore,
    TruncatedCore,
    UnsupportedVersion,
    decode_tc_string,
    encode_tc_core,
    project_consent,
    sniff_tcs,
)

# -- strategies --------------------------------------------------------------

id_sets = lambda hi, n: st.frozensets(st.integers(1, hi), max_size=n)  # noqa: E731

cores = st.builds(
    TcCore,
    version=st.just(2),
    created=st.integers(0, 2**36 - 1),
    last_updated=st.integers(0, 2**36 - 1),
    cmp_id=st.integers(0, 2**12 - 1),
    cmp_version=st.integers(0, 2**12 - 1),
    consent_screen=st.integers(0, 2**6 - 1),
    consent_language=st.text(alphabet="ABCDEFGHIJKLMNOPQRSTUVWXYZ", min_size=2, max_size=2),
    vendor_list_version=st.integers(0, 2**12 - 1),
    policy_version=st.integers(0, 2**6 - 1),
    is_service_specific=st.booleans(),
    use_non_standard_texts=st.booleans(),
    special_feature_opt_ins=id_sets(12, 12),
    purposes_consent=id_sets(24, 24),
    purposes_li_transparency=id_sets(24, 24),
    purpose_one_treatment=st.booleans(),
    publisher_cc=st.text(alphabet="ABCDEFGHIJKLMNOPQRSTUVWXYZ", min_size=2, max_size=2),
    vendor_consents=id_sets(5000, 25),
    vendor_li=id_sets(900, 10),
    publisher_restrictions=st.lists(
        st.builds(
            PublisherRestriction,
            purpose_id=st.integers(1, 24),
            restriction_type=st.integers(0, 3),
            vendor_ids=st.frozensets(st.integers(1, 500), min_size=1, max_size=5),
        ),
        max_size=2,
    ).map(tuple),
)


# -- round trip --------------------------------------------------------------


@given(cores)
@settings(max_examples=200, deadline=None)
def test_round_trip_property(core):
    assert decode_tc_string(encode_tc_core(core)).core == core


def test_round_trip_both_vendor_encodings():
    # contiguous block picks the range encoding; scattered ids the bitfield
    dense = TcCore(vendor_consents=frozenset(range(1, 200)))
    sparse = TcCore(vendor_consents=frozenset({1, 3, 5, 7, 9, 11}))
    for core in (dense, sparse):
        assert decode_tc_string(encode_tc_core(core)).core == core
    dense_text = encode_tc_core(dense).split(".")[0]
    sparse_text = encode_tc_core(sparse).split(".")[0]
    assert len(dense_text) < len(sparse_text) + 200  # both stay compact


def test_all_zero_core_decodes_to_empty_sets():
    core = TcCore()
    decoded = decode_tc_string(encode_tc_core(core)).core
    assert decoded.version == 2
    assert decoded.purposes_consent == frozenset()
    assert decoded.vendor_consents == frozenset()
    assert decoded == core


def test_vendor_set_with_gap_recovered_exactly():
    core = TcCore(vendor_consents=frozenset({1, 2, 3, 700}))
    assert decode_tc_string(encode_tc_core(core)).core.vendor_consents == {1, 2, 3, 700}


def test_extra_segments_preserved_byte_identically():
    core = TcCore(purposes_consent=frozenset({1, 2}))
    extras = ((1, "IBAgAA"), (2, "QBAgAA"))
    text = encode_tc_core(core, extras)
    decoded = decode_tc_string(text)
    assert decoded.extra_segments == extras
    assert encode_tc_core(decoded.core, decoded.extra_segments) == text


# -- decode errors -----------------------------------------------------------


def test_decode_rejects_non_base64():
    with pytest.raises(MalformedBase64):
        decode_tc_string("notbase64!!")


def test_decode_rejects_empty_and_empty_segment():
    with pytest.raises(MalformedBase64):
        decode_tc_string("")
    with pytest.raises(MalformedBase64):
        decode_tc_string(encode_tc_core(TcCore()) + ".")


def test_decode_rejects_truncated_prelude():
    text = encode_tc_core(TcCore())
    with pytest.raises(TruncatedCore):
        decode_tc_string(text[:20])


def test_decode_rejects_truncated_vendor_section():
    # full prelude, then a bitfield that claims more bits than remain
    text = encode_tc_core(TcCore(vendor_consents=frozenset({2000})))
    with pytest.raises(TruncatedCore):
        decode_tc_string(text[:40])


def test_decode_rejects_wrong_version():
    core_bytes = bytearray(base64.urlsafe_b64decode(encode_tc_core(TcCore()) + "=="))
    core_bytes[0] = (3 << 2) | (core_bytes[0] & 0x03)  # overwrite the 6-bit version
    text = base64.urlsafe_b64encode(bytes(core_bytes)).decode().rstrip("=")
    with pytest.raises(UnsupportedVersion):
        decode_tc_string(text)


# -- encode errors -----------------------------------------------------------


def test_encode_rejects_purpose_25():
    with pytest.raises(FieldOverflow):
        encode_tc_core(TcCore(purposes_consent=frozenset({25})))


def test_encode_rejects_oversized_fields():
    with pytest.raises(FieldOverflow):
        encode_tc_core(TcCore(cmp_id=2**12))
    with pytest.raises(FieldOverflow):
        encode_tc_core(TcCore(created=2**36))
    with pytest.raises(FieldOverflow):
        encode_tc_core(TcCore(vendor_consents=frozenset({0})))
    with pytest.raises(FieldOverflow):
        encode_tc_core(TcCore(consent_language="E1"))
    with pytest.raises(FieldOverflow):
        encode_tc_core(
            TcCore(publisher_restrictions=(PublisherRestriction(25, 0, frozenset({1})),))
        )


# -- sniffing ----------------------------------------------------------------


def test_sniffer_recall_on_encoder_output(rng):
    for _ in range(300):
        core = random_core(rng, dense_vendors=rng.random() < 0.5)
        text = encode_tc_core(core)
        decoded = sniff_tcs(text)
        assert decoded is not None and decoded.core == core


def test_sniffer_handles_percent_encoding_once():
    core = TcCore(purposes_consent=frozenset({1, 2}), vendor_consents=frozenset({9}))
    text = encode_tc_core(core)
    once = text.replace("C", "%43", 1)  # force one escape into the transport form
    assert sniff_tcs(once) is not None
    # a doubly escaped value survives only one decoding level and is rejected
    twice = once.replace("%", "%25", 1)
    assert sniff_tcs(twice) is None


def test_sniffer_rejects_short_and_foreign_tokens():
    assert sniff_tcs("ABC123") is None  # the classic URL-parameter decoy
    assert sniff_tcs("") is None
    rng = random.Random(7)
    alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_"
    for _ in range(2000):
        if rng.random() < 0.5:
            token = str(uuid.UUID(int=rng.getrandbits(128)))
        else:
            token = "".join(rng.choice(alphabet) for _ in range(rng.randrange(4, 80)))
        assert sniff_tcs(token) is None


def test_sniffer_soundness(rng):
    # anything the sniffer accepts must fully decode with version 2
    candidates = [encode_tc_core(random_core(rng)) for _ in range(50)]
    candidates += ["C" + "A" * 35, "C" + "A" * 50, "ABC123", "x." + "A" * 40]
    for text in candidates:
        result = sniff_tcs(text)
        if result is not None:
            assert decode_tc_string(text).core.version == 2


# -- projection --------------------------------------------------------------


def test_projection_ignores_metadata():
    core = TcCore(
        purposes_consent=frozenset({1, 2}),
        vendor_consents=frozenset({5}),
        consent_screen=1,
    )
    tweaked = dataclasses.replace(
        core, consent_screen=2, created=99, last_updated=100, cmp_version=7
    )
    assert project_consent(core) == project_consent(tweaked)


def test_projection_detects_purpose_change():
    core = TcCore(purposes_consent=frozenset({1, 2}))
    other = dataclasses.replace(core, purposes_consent=frozenset({1, 2, 4}))
    assert project_consent(core) != project_consent(other)


def test_projection_stable_under_round_trip_and_idempotent(rng):
    for _ in range(100):
        core = random_core(rng)
        round_tripped = decode_tc_string(encode_tc_core(core)).core
        assert project_consent(core) == project_consent(round_tripped)


@given(cores, cores)
@settings(max_examples=60, deadline=None)
def test_projection_equality_implied_by_core_equality(a, b):
    if a == b:
        assert project_consent(a) == project_consent(b)
    if project_consent(a) != project_consent(b):
        assert a != b
