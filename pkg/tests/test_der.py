import random
import subprocess

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rpkifuzz.der import (
    DerDecodeError,
    DerValue,
    Tags,
    bit_string,
    decode_integer,
    decode_oid,
    der_decode,
    der_encode,
    explicit,
    integer,
    null,
    octet_string,
    oid,
    printable,
    seq,
    set_of,
)


def test_null_encoding():
    assert der_encode(null()) == bytes.fromhex("0500")


def test_integer_zero_canonical():
    assert der_encode(integer(0)) == bytes.fromhex("020100")


@pytest.mark.parametrize(
    "value,expected",
    [
        (127, "02017f"),
        (128, "02020080"),
        (256, "02020100"),
        (-1, "0201ff"),
        (-129, "0202ff7f"),
    ],
)
def test_integer_minimal_two_complement(value, expected):
    assert der_encode(integer(value)) == bytes.fromhex(expected)
    assert decode_integer(der_decode(bytes.fromhex(expected))) == value


def test_long_form_length():
    blob = der_encode(octet_string(b"\x00" * 200))
    assert blob[:3] == bytes.fromhex("0481c8")


def test_decode_truncated_content():
    with pytest.raises(DerDecodeError) as exc:
        der_decode(bytes.fromhex("0201"))
    assert exc.value.code == "truncated-content"
    assert exc.value.offset == 2


def test_decode_trailing_garbage():
    with pytest.raises(DerDecodeError) as exc:
        der_decode(bytes.fromhex("050000"))
    assert exc.value.code == "trailing-garbage"


def test_decode_indefinite_length_rejected():
    with pytest.raises(DerDecodeError) as exc:
        der_decode(bytes.fromhex("30800500 0000".replace(" ", "")))
    assert exc.value.code == "indefinite-length"


def test_ber_flag_accepts_indefinite():
    value = der_decode(bytes.fromhex("308005000000"), allow_ber=True)
    assert value.tag == Tags.SEQUENCE and len(value.children) == 1


def test_decode_overlong_length_rejected():
    # long form for a short length is not canonical
    with pytest.raises(DerDecodeError) as exc:
        der_decode(bytes.fromhex("048103aabbcc"))
    assert exc.value.code == "overlong-length"
    assert der_decode(bytes.fromhex("048103aabbcc"), allow_ber=True).content == b"\xaa\xbb\xcc"


def test_deep_nesting_bounded():
    def wrap(body: bytes) -> bytes:
        if len(body) < 128:
            return bytes([0x30, len(body)]) + body
        length = len(body)
        octets = length.to_bytes((length.bit_length() + 7) // 8, "big")
        return bytes([0x30, 0x80 | len(octets)]) + octets + body

    blob = der_encode(seq())
    for _ in range(200):
        blob = wrap(blob)
    with pytest.raises(DerDecodeError) as exc:
        der_decode(blob)
    assert exc.value.code == "depth-exceeded"


def test_set_of_sorts_canonically():
    blob = der_encode(set_of(integer(300), integer(2), octet_string(b"a")))
    inner = der_decode(blob).children
    assert [der_encode(c) for c in inner] == sorted(der_encode(c) for c in inner)


def test_oid_roundtrip():
    dotted = "1.2.840.113549.1.9.16.1.24"
    assert decode_oid(der_decode(der_encode(oid(dotted)))) == dotted


def test_explicit_tag_wrapping():
    blob = der_encode(explicit(3, integer(2)))
    assert blob[0] == 0xA3
    node = der_decode(blob)
    assert node.tag == 0x80 | 3 and decode_integer(node.child(0)) == 2


def test_decode_totality_seeded_corpus():
    """10,000 random byte strings: value or DerDecodeError, nothing else."""
    rng = random.Random(0xDE5EED)
    decoded = 0
    for _ in range(10_000):
        blob = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 64)))
        try:
            value = der_decode(blob)
            decoded += 1
            assert der_encode(value) == blob
        except DerDecodeError:
            pass
    assert decoded > 0  # some random strings are valid DER (e.g. tiny primitives)


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=128))
def test_decode_total_and_roundtrip_property(blob):
    try:
        value = der_decode(blob)
    except DerDecodeError:
        return
    assert der_encode(value) == blob


der_values = st.deferred(
    lambda: st.one_of(
        st.integers(min_value=-(2**64), max_value=2**64).map(integer),
        st.binary(max_size=32).map(octet_string),
        st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789 ", max_size=16).map(printable),
        st.just(null()),
        st.binary(max_size=16).map(bit_string),
        st.lists(der_values, max_size=4).map(lambda kids: seq(*kids)),
    )
)


@settings(max_examples=200, deadline=None)
@given(der_values)
def test_encode_decode_identity_property(value):
    assert der_decode(der_encode(value)) == value


@pytest.mark.skipif(subprocess.run(["which", "openssl"], capture_output=True).returncode != 0,
                    reason="openssl CLI not available")
def test_asn1_dump_oracle_roundtrip(tmp_path):
    """A generated tree is accepted and re-printed identically by openssl asn1parse."""
    tree = seq(integer(65001), seq(seq(octet_string(b"\x00\x01"), seq(seq(bit_string(b"\x0a", unused=0), integer(8))))))
    blob = der_encode(tree)
    p1 = tmp_path / "a.der"
    p1.write_bytes(blob)
    dump1 = subprocess.run(["openssl", "asn1parse", "-inform", "DER", "-in", str(p1)],
                           capture_output=True, check=True).stdout
    reencoded = der_encode(der_decode(blob))
    assert reencoded == blob
    p2 = tmp_path / "b.der"
    p2.write_bytes(reencoded)
    dump2 = subprocess.run(["openssl", "asn1parse", "-inform", "DER", "-in", str(p2)],
                           capture_output=True, check=True).stdout
    assert dump1 == dump2
