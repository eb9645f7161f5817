import datetime

import pytest

from rpkifuzz import keystore, oids
from rpkifuzz.factory import (
    ALL_RESOURCES_AS,
    ALL_RESOURCES_IP,
    CaIdentity,
    make_aspa,
    make_ca_cert,
    make_crl,
    make_ee_cert,
    make_gbr,
    make_manifest,
    make_roa,
    make_rtr_pdu,
    utcnow,
)
from rpkifuzz.objects import parse_certificate, parse_crl, parse_signed_object
from rpkifuzz.objects.aspa import decode_aspa_econtent
from rpkifuzz.objects.cert import verify_certificate_signature
from rpkifuzz.objects.cms import signed_object_digest_ok, signed_object_signature_ok
from rpkifuzz.objects.crl import verify_crl_signature
from rpkifuzz.objects.gbr import GbrContent, parse_vcard
from rpkifuzz.objects.manifest import decode_manifest_econtent
from rpkifuzz.objects.resources import INHERIT
from rpkifuzz.objects.roa import decode_roa_econtent

NOW = utcnow()
DAY = datetime.timedelta(hours=24)


@pytest.fixture()
def ca_pair(key_pool):
    root = CaIdentity.create("root", key_pool.keys[0], "pp.test")
    _, root_der = make_ca_cert(root, None, ALL_RESOURCES_IP, ALL_RESOURCES_AS, now=NOW)
    child = CaIdentity.create("ca-a", key_pool.keys[1], "pp.test", parent=root)
    _, child_der = make_ca_cert(child, root, now=NOW)
    return root, root_der, child, child_der


def test_root_ca_cert_shape(ca_pair):
    root, root_der, _, _ = ca_pair
    cert = parse_certificate(root_der)
    assert cert.is_ca
    assert cert.aki == root.key.key_id  # self
    assert cert.sia.ca_repository == root.repo_uri
    assert cert.sia.rpki_manifest == root.mft_uri
    assert cert.sia.rpki_notify == root.notify_uri
    assert verify_certificate_signature(root_der, root.key.spki)


def test_child_inherits_and_chains(ca_pair):
    root, _, child, child_der = ca_pair
    cert = parse_certificate(child_der)
    assert cert.ip_resources is INHERIT and cert.as_resources is INHERIT
    assert cert.aki == root.key.key_id
    assert cert.crl_dp == root.crl_uri and cert.aia == root.cert_uri
    assert verify_certificate_signature(child_der, root.key.spki)


def test_ca_cert_requires_resources(key_pool):
    ca = CaIdentity.create("bare", key_pool.keys[2], "pp.test")
    with pytest.raises(ValueError):
        make_ca_cert(ca, None, None, None, now=NOW)


def test_ee_serial_increments_and_aki(ca_pair, key_pool):
    _, _, child, _ = ca_pair
    before = child._serial
    c1, d1 = make_ee_cert(child, key_pool.keys[3], "rsync://pp.test/repo/ca-a/x.roa", now=NOW)
    c2, d2 = make_ee_cert(child, key_pool.keys[4], "rsync://pp.test/repo/ca-a/y.roa", now=NOW)
    assert (c1.serial, c2.serial) == (before + 1, before + 2)
    assert c1.aki == child.key.key_id
    assert not c1.is_ca and c1.sia.signed_object
    assert verify_certificate_signature(d1, child.key.spki)
    assert verify_certificate_signature(d2, child.key.spki)


def test_roa_vrp_semantics(ca_pair, key_pool):
    _, _, child, _ = ca_pair
    blob = make_roa(child, 65001, [("10.0.0.0/8", 8)], key_pool.keys[5], now=NOW)
    so = parse_signed_object(blob)
    assert signed_object_digest_ok(so) and signed_object_signature_ok(so)
    assert decode_roa_econtent(so.econtent).vrps() == {(65001, "10.0.0.0/8", 8)}


def test_roa_omitted_maxlen_defaults_to_prefix_length(ca_pair, key_pool):
    _, _, child, _ = ca_pair
    blob = make_roa(child, 65002, ["172.16.0.0/12"], key_pool.keys[5], now=NOW)
    vrps = decode_roa_econtent(parse_signed_object(blob).econtent).vrps()
    assert vrps == {(65002, "172.16.0.0/12", 12)}


def test_roa_mixed_families_two_blocks(ca_pair, key_pool):
    _, _, child, _ = ca_pair
    blob = make_roa(child, 65003, [("10.1.0.0/16", 16), ("2001:db8::/32", 48)], key_pool.keys[5], now=NOW)
    roa = decode_roa_econtent(parse_signed_object(blob).econtent)
    assert [b.family for b in roa.blocks] == [1, 2]


def test_roa_empty_prefixes_rejected(ca_pair, key_pool):
    _, _, child, _ = ca_pair
    with pytest.raises(ValueError):
        make_roa(child, 65001, [], key_pool.keys[5], now=NOW)


def test_manifest_lists_and_hashes(ca_pair, key_pool):
    _, _, child, _ = ca_pair
    roa = make_roa(child, 65004, [("10.2.0.0/16", 16)], key_pool.keys[5], now=NOW)
    blob = make_manifest(child, [("x.roa", keystore.sha256(roa))], NOW, NOW + DAY, 3, key_pool.keys[6])
    so = parse_signed_object(blob)
    mft = decode_manifest_econtent(so.econtent)
    assert mft.manifest_number == 3
    assert mft.file_list == [("x.roa", keystore.sha256(roa))]
    ee = parse_certificate(so.ee_cert_der)
    assert (ee.not_before, ee.not_after) == (NOW, NOW + DAY)  # EE tracks this/nextUpdate


def test_manifest_boilerplate_within_spec_bounds(ca_pair, key_pool):
    _, _, child, _ = ca_pair
    empty = make_manifest(child, [], NOW, NOW + DAY, 1, key_pool.keys[6])
    assert 1500 <= len(empty) <= 2700  # ecosystem average is 2078


def test_manifest_per_entry_increment(ca_pair, key_pool):
    _, _, child, _ = ca_pair
    base = make_manifest(child, [], NOW, NOW + DAY, 1, key_pool.keys[6])
    name32 = "a" * 28 + ".roa"
    one = make_manifest(child, [(name32, b"\x00" * 32)], NOW, NOW + DAY, 1, key_pool.keys[6])
    assert abs((len(one) - len(base)) - 70) <= 10


def test_crl_empty_and_flags(ca_pair):
    _, _, child, _ = ca_pair
    blob = make_crl(child, [], NOW, NOW + DAY, 4)
    crl = parse_crl(blob)
    assert crl.revoked == [] and crl.crl_number == 4
    assert verify_crl_signature(blob, child.key.spki)
    no_number = parse_crl(make_crl(child, [], NOW, NOW + DAY, crl_number=None))
    assert no_number.crl_number is None and no_number.aki is not None


def test_gbr_and_aspa(ca_pair, key_pool):
    _, _, child, _ = ca_pair
    gbr = make_gbr(child, GbrContent(full_name="Ops", properties=[("EMAIL", "x@y.z")]), key_pool.keys[5], now=NOW)
    so = parse_signed_object(gbr)
    assert so.econtent_type == oids.CT_GBR
    assert signed_object_signature_ok(so)
    assert parse_vcard(so.econtent).full_name == "Ops"

    aspa = make_aspa(child, 64512, [9, 1, 5, 5], key_pool.keys[5], now=NOW)
    so2 = parse_signed_object(aspa)
    assert so2.econtent_type == oids.CT_ASPA
    content = decode_aspa_econtent(so2.econtent)
    assert content.provider_as_ids == (1, 5, 9)  # sorted, deduplicated
    assert signed_object_digest_ok(so2)


def test_serial_override_for_deliberate_collisions(ca_pair, key_pool):
    root, _, _, _ = ca_pair
    other = CaIdentity.create("ca-dup", key_pool.keys[7], "pp.test", parent=root)
    c, _ = make_ca_cert(other, root, serial=42, now=NOW)
    assert c.serial == 42


# ---------------------------------------------------------------------------
# RTR PDUs

def test_rtr_reset_query_exact_bytes():
    pdu = make_rtr_pdu("reset-query", 8, 0)
    assert pdu == bytes.fromhex("0102000000000008")
    assert len(pdu) == 8


def test_rtr_oversized_payload():
    pdu = make_rtr_pdu("reset-query", 8, 65536)
    assert len(pdu) == 8 + 65536
    assert pdu[:8] == bytes.fromhex("0102000000000008")


def test_rtr_length_field_saturates():
    pdu = make_rtr_pdu("reset-query", 2**32 - 1, 0)
    assert len(pdu) == 8
    assert pdu[4:8] == b"\xff\xff\xff\xff"
    assert make_rtr_pdu("reset-query", 2**40, 0)[4:8] == b"\xff\xff\xff\xff"
