from __future__ import annotations

import random
from pathlib import Path

import pytest

from revaudit.tcs import PublisherRestriction, TcCore

FIXTURES = Path(__file__).parent / "fixtures"

LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


def random_core(rng: random.Random, dense_vendors: bool = False) -> TcCore:
    """Draw a random valid core; vendor sets alternate between shapes that
    favor the bitfield and the range encoding."""
    if dense_vendors:
        start = rng.randrange(1, 50)
        vendors = frozenset(range(start, start + rng.randrange(1, 60)))
    else:
        vendors = frozenset(rng.sample(range(1, 4000), rng.randrange(0, 30)))
    restrictions = tuple(
        PublisherRestriction(
            purpose_id=rng.randrange(1, 25),
            restriction_type=rng.randrange(0, 4),
            vendor_ids=frozenset(rng.sample(range(1, 800), rng.randrange(1, 6))),
        )
        for _ in range(rng.randrange(0, 3))
    )
    return TcCore(
        version=2,
        created=rng.randrange(2**36),
        last_updated=rng.randrange(2**36),
        cmp_id=rng.randrange(2**12),
        cmp_version=rng.randrange(2**12),
        consent_screen=rng.randrange(2**6),
        consent_language="".join(rng.choice(LETTERS) for _ in range(2)),
        vendor_list_version=rng.randrange(2**12),
        policy_version=rng.randrange(2**6),
        is_service_specific=rng.random() < 0.5,
        use_non_standard_texts=rng.random() < 0.5,
        special_feature_opt_ins=frozenset(rng.sample(range(1, 13), rng.randrange(0, 5))),
        purposes_consent=frozenset(rng.sample(range(1, 25), rng.randrange(0, 12))),
        purposes_li_transparency=frozenset(rng.sample(range(1, 25), rng.randrange(0, 12))),
        purpose_one_treatment=rng.random() < 0.5,
        publisher_cc="".join(rng.choice(LETTERS) for _ in range(2)),
        vendor_consents=vendors,
        vendor_li=frozenset(rng.sample(range(1, 600), rng.randrange(0, 12))),
        publisher_restrictions=restrictions,
    )


@pytest.fixture
def rng() -> random.Random:
    return random.Random(0xC0FFEE)


def pytest_runtest_logreport(report):
    """One visible PASS/FAIL line per acceptance criterion."""
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    outcome = "PASS" if report.passed else "FAIL"
    print(f"\nACCEPTANCE {name}: {outcome}")
