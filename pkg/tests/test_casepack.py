import datetime

import pytest

from rpkifuzz.casepack import (
    CASES,
    ConformanceCase,
    build_case,
    cases_manifest,
    get_case,
    list_cases,
    matrix_markdown,
    run_conformance,
)
from rpkifuzz.harness import RpAdapter
from rpkifuzz.objects.cms import parse_signed_object
from rpkifuzz.objects.crl import parse_crl
from rpkifuzz.objects.roa import decode_roa_econtent
from rpkifuzz.objects.rrdp import parse_rrdp
from rpkifuzz.publisher import RrdpServer, publish
from rpkifuzz.stubrp.validator import Fetcher, StubValidator

FIXED_NOW = datetime.datetime(2026, 8, 10, 9, 0, 0, tzinfo=datetime.timezone.utc)

EXPECTED_IDS = [
    "expired-crl-valid-mft",
    "ee-validity-misaligned",
    "crl-missing-number",
    "crl-missing-signature",
    "crl-missing-sigalg",
    "crl-missing-issuer",
    "roa-repeated-family",
    "roa-maxlength-noninteger",
    "roa-overlong-prefix",
    "ee-issuer-organisationname",
    "snapshot-session-mismatch",
    "cert-duplicate-serial",
    "cert-noncritical-keyusage",
    "roa-asid-inherit",
]


def test_case_list_stable_and_complete():
    ids = list_cases()
    assert ids == EXPECTED_IDS
    assert len(ids) >= 14
    assert list_cases() == ids  # stable order


def test_every_case_builds(tmp_path):
    for case_id in list_cases():
        state, expected = build_case(case_id, seed=3, now=FIXED_NOW)
        assert state.markers[case_id]
        assert set(expected) == {"routinator", "fort", "octorpki", "rpki-client"}
        # singleton invariants hold per CA
        for pp in state.pps.values():
            by_ca = {}
            for uri in pp.publishes:
                ca = uri.split("/repo/")[1].split("/")[0]
                by_ca.setdefault(ca, []).append(uri)
            for ca, uris in by_ca.items():
                assert sum(u.endswith(".mft") for u in uris) == 1, (case_id, ca)
                assert sum(u.endswith(".crl") for u in uris) == 1, (case_id, ca)


def test_unknown_case_rejected():
    with pytest.raises(KeyError):
        build_case("no-such-case")
    with pytest.raises(KeyError):
        get_case("nope")


def test_build_deterministic_bit_identical():
    a, _ = build_case("crl-missing-number", seed=9, now=FIXED_NOW)
    b, _ = build_case("crl-missing-number", seed=9, now=FIXED_NOW)
    assert a.tal_bytes == b.tal_bytes
    assert a.pps.keys() == b.pps.keys()
    for domain in a.pps:
        assert a.pps[domain].publishes == b.pps[domain].publishes
        assert a.pps[domain].rrdp_docs == b.pps[domain].rrdp_docs


def test_expired_crl_case_shape():
    state, _ = build_case("expired-crl-valid-mft", seed=1, now=FIXED_NOW)
    pp = next(iter(state.pps.values()))
    crl_uri = next(u for u in pp.publishes if u.endswith("ca-case.crl"))
    crl = parse_crl(pp.publishes[crl_uri])
    assert crl.next_update < FIXED_NOW  # the deviation
    mft_uri = next(u for u in pp.publishes if u.endswith("ca-case.mft"))
    from rpkifuzz.objects.manifest import decode_manifest_econtent

    mft = decode_manifest_econtent(parse_signed_object(pp.publishes[mft_uri]).econtent)
    assert mft.this_update <= FIXED_NOW <= mft.next_update  # manifest itself valid


def test_repeated_family_case_shape():
    state, _ = build_case("roa-repeated-family", seed=1, now=FIXED_NOW)
    pp = next(iter(state.pps.values()))
    roa_uri = next(u for u in pp.publishes if u.endswith("test.roa"))
    roa = decode_roa_econtent(parse_signed_object(pp.publishes[roa_uri]).econtent)
    assert [b.family for b in roa.blocks] == [1, 1]


def test_session_mismatch_case_shape():
    state, _ = build_case("snapshot-session-mismatch", seed=1, now=FIXED_NOW)
    pp = next(iter(state.pps.values()))
    notif = parse_rrdp(pp.notification_bytes)
    snap = parse_rrdp(pp.snapshot_bytes)
    assert snap.session_id != notif.session_id
    from rpkifuzz import keystore

    assert notif.snapshot_hash == keystore.sha256(pp.snapshot_bytes).hex()  # only the session differs


def test_case_minimality_under_strict_validator():
    """Strict validation rejects a case for exactly its named deviation (or,
    for accept-expected cases, not at all)."""
    reject_reasons = {
        "expired-crl-valid-mft": "CRL expired",
        "crl-missing-number": "CRL Number",
        "crl-missing-signature": "signature",
        "crl-missing-sigalg": "signature",
        "crl-missing-issuer": "issuer",
        "snapshot-session-mismatch": "session/serial mismatch",
        "roa-maxlength-noninteger": "maxLength",
    }
    for case_id in ("ee-validity-misaligned", "roa-overlong-prefix", "roa-asid-inherit",
                    "expired-crl-valid-mft", "crl-missing-number", "snapshot-session-mismatch",
                    "roa-maxlength-noninteger"):
        state, _ = build_case(case_id, seed=2, now=FIXED_NOW)
        with RrdpServer() as server:
            publish(state, server)
            run = StubValidator(fetcher=Fetcher(server.hosts_map()), now=FIXED_NOW).run([state.tal_bytes])
        expected_reason = reject_reasons.get(case_id)
        if expected_reason is None:
            assert run.rejected == [], (case_id, run.rejected)
        else:
            assert run.rejected, case_id
            assert all(expected_reason in r for r in run.rejected), (case_id, run.rejected)


def test_cases_manifest_shape():
    manifest = cases_manifest()
    assert [m["id"] for m in manifest] == EXPECTED_IDS
    for m in manifest:
        assert m["rfcRef"] and m["observe"] in ("marker", "test")


def test_run_conformance_empty_adapters():
    results = run_conformance([], ["ee-validity-misaligned"], now=FIXED_NOW)
    assert len(results) == 1 and results[0].rows == {}
    assert "ee-validity-misaligned" in matrix_markdown(results)


def test_run_conformance_one_case_two_profiles():
    adapters = [RpAdapter.stub("octorpki", profile="octorpki"), RpAdapter.stub("fort", profile="fort")]
    results = run_conformance(adapters, ["expired-crl-valid-mft"], now=FIXED_NOW)
    rows = results[0].rows
    assert rows["octorpki"]["observed"] == "accepts" and not rows["octorpki"]["note"]
    assert rows["fort"]["observed"] == "rejects" and not rows["fort"]["note"]
    md = matrix_markdown(results)
    assert "expired-crl-valid-mft" in md and "| case |" in md


def test_conformance_flags_behavior_change():
    # a strict profile under the octorpki name must deviate from the expectation
    adapters = [RpAdapter.stub("octorpki", profile="strict")]
    results = run_conformance(adapters, ["expired-crl-valid-mft"], now=FIXED_NOW)
    row = results[0].rows["octorpki"]
    assert row["observed"] == "rejects" and row["expected"] == "accepts"
    assert row["note"]  # informational, never a failure
