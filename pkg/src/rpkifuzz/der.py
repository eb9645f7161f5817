"""Minimal DER codec used for every ASN.1 object this package emits or inspects.

Values are plain trees of :class:`DerValue`: a tag, a constructed flag, and
either content octets (primitive) or child values (constructed).  The encoder
emits canonical DER (definite, minimal lengths).  The decoder is total: any
byte string either yields a tree or raises :class:`DerDecodeError` with an
offset and a stable error code -- it must survive the same mutated corpora it
helps produce.

Tags are stored as the raw identifier octets interpreted as a big-endian
integer with the constructed bit cleared, so NULL is ``0x05``, SEQUENCE is
``0x10``, a context-0 tag is ``0xA0 & ~0x20 == 0x80``, and multi-byte tags
round-trip byte-exactly even when their number is encoded non-minimally.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass
from functools import lru_cache

__all__ = [
    "DerValue",
    "DerDecodeError",
    "DerEncodeError",
    "der_encode",
    "der_decode",
    "Tags",
    "raw",
]

_MAX_DEPTH = 96
_MAX_TAG_OCTETS = 8
_MAX_CONTENT = 2 ** 32

# pseudo-tag for pre-encoded TLV bytes; emitted verbatim, never produced by decode
RAW_TAG = -1


class Tags:
    """Universal tag numbers (class universal, constructed bit cleared)."""

    BOOLEAN = 0x01
    INTEGER = 0x02
    BIT_STRING = 0x03
    OCTET_STRING = 0x04
    NULL = 0x05
    OID = 0x06
    UTF8_STRING = 0x0C
    SEQUENCE = 0x10
    SET = 0x11
    PRINTABLE_STRING = 0x13
    IA5_STRING = 0x16
    UTC_TIME = 0x17
    GENERALIZED_TIME = 0x18


class DerEncodeError(ValueError):
    pass


class DerDecodeError(ValueError):
    """Structured decode failure: a stable ``code`` plus the failing offset."""

    def __init__(self, code: str, offset: int, detail: str = ""):
        self.code = code
        self.offset = offset
        msg = f"{code} at offset {offset}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


@dataclass(frozen=True)
class DerValue:
    tag: int
    constructed: bool
    content: bytes | tuple["DerValue", ...]

    def __post_init__(self):
        if self.constructed:
            if not isinstance(self.content, tuple):
                object.__setattr__(self, "content", tuple(self.content))
        elif not isinstance(self.content, bytes):
            object.__setattr__(self, "content", bytes(self.content))

    @property
    def children(self) -> tuple["DerValue", ...]:
        if not self.constructed:
            raise ValueError("primitive value has no children")
        return self.content  # type: ignore[return-value]

    def child(self, index: int) -> "DerValue":
        return self.children[index]

    def replace_child(self, index: int, new: "DerValue") -> "DerValue":
        kids = list(self.children)
        kids[index] = new
        return DerValue(self.tag, True, tuple(kids))

    def with_children(self, kids) -> "DerValue":
        return DerValue(self.tag, True, tuple(kids))


# ---------------------------------------------------------------------------
# encoding

def _encode_tag(tag: int, constructed: bool) -> bytes:
    if tag < 0:
        raise DerEncodeError(f"negative tag {tag}")
    cbit = 0x20 if constructed else 0
    if tag <= 0xFF:
        if tag & 0x1F == 0x1F:
            raise DerEncodeError("single-octet tag with reserved low bits 0x1F")
        return bytes([tag | cbit])
    octets = tag.to_bytes((tag.bit_length() + 7) // 8, "big")
    if len(octets) > _MAX_TAG_OCTETS:
        raise DerEncodeError("tag too long")
    first = octets[0]
    if first & 0x1F != 0x1F:
        raise DerEncodeError("multi-octet tag must have 0x1F low bits in first octet")
    for b in octets[1:-1]:
        if not b & 0x80:
            raise DerEncodeError("multi-octet tag continuation missing high bit")
    if octets[-1] & 0x80:
        raise DerEncodeError("multi-octet tag does not terminate")
    return bytes([first | cbit]) + octets[1:]


def _encode_length(length: int) -> bytes:
    if length < 0x80:
        return bytes([length])
    octets = length.to_bytes((length.bit_length() + 7) // 8, "big")
    return bytes([0x80 | len(octets)]) + octets


def der_encode(value: DerValue) -> bytes:
    """Serialize a value tree to canonical DER bytes (deterministic)."""
    if value.tag == RAW_TAG:
        return value.content  # type: ignore[return-value]
    if value.constructed:
        body = b"".join(der_encode(child) for child in value.children)
    else:
        body = value.content  # type: ignore[assignment]
    if len(body) > _MAX_CONTENT:
        raise DerEncodeError(f"content length {len(body)} exceeds 2^32")
    return _encode_tag(value.tag, value.constructed) + _encode_length(len(body)) + body


def raw(encoded: bytes) -> DerValue:
    """Wrap already-encoded TLV bytes so they embed without a re-encode pass."""
    return DerValue(RAW_TAG, False, encoded)


# ---------------------------------------------------------------------------
# decoding

def _read_tag(data: bytes, pos: int, end: int) -> tuple[int, bool, int]:
    if pos >= end:
        raise DerDecodeError("truncated-tag", pos)
    first = data[pos]
    constructed = bool(first & 0x20)
    pos += 1
    if first & 0x1F != 0x1F:
        return first & ~0x20, constructed, pos
    octets = [first & ~0x20]
    while True:
        if pos >= end:
            raise DerDecodeError("truncated-tag", pos)
        if len(octets) >= _MAX_TAG_OCTETS:
            raise DerDecodeError("tag-too-long", pos)
        b = data[pos]
        octets.append(b)
        pos += 1
        if not b & 0x80:
            break
    tag = int.from_bytes(bytes(octets), "big")
    return tag, constructed, pos


def _read_length(data: bytes, pos: int, end: int, allow_ber: bool) -> tuple[int | None, int]:
    """Returns (length, new_pos); length None means indefinite (BER only)."""
    if pos >= end:
        raise DerDecodeError("truncated-length", pos)
    first = data[pos]
    pos += 1
    if not first & 0x80:
        return first, pos
    count = first & 0x7F
    if count == 0:
        if allow_ber:
            return None, pos
        raise DerDecodeError("indefinite-length", pos - 1)
    if count == 0x7F:
        raise DerDecodeError("reserved-length", pos - 1)
    if pos + count > end:
        raise DerDecodeError("truncated-length", pos)
    length = int.from_bytes(data[pos : pos + count], "big")
    if not allow_ber:
        if data[pos] == 0:
            raise DerDecodeError("overlong-length", pos, "leading zero octet")
        if length < 0x80:
            raise DerDecodeError("overlong-length", pos, "long form for short length")
    return length, pos + count


def _decode_value(data: bytes, pos: int, end: int, depth: int, allow_ber: bool) -> tuple[DerValue, int]:
    if depth > _MAX_DEPTH:
        raise DerDecodeError("depth-exceeded", pos)
    start = pos
    tag, constructed, pos = _read_tag(data, pos, end)
    length, pos = _read_length(data, pos, end, allow_ber)
    if length is None:
        # indefinite length (BER flag only): children until 00 00 terminator
        if not constructed:
            raise DerDecodeError("indefinite-primitive", start)
        kids = []
        while True:
            if pos + 2 <= end and data[pos] == 0 and data[pos + 1] == 0:
                pos += 2
                break
            if pos >= end:
                raise DerDecodeError("truncated-content", pos)
            child, pos = _decode_value(data, pos, end, depth + 1, allow_ber)
            kids.append(child)
        return DerValue(tag, True, tuple(kids)), pos
    content_end = pos + length
    if content_end > end:
        raise DerDecodeError("truncated-content", pos, f"need {length} bytes")
    if constructed:
        kids = []
        while pos < content_end:
            child, pos = _decode_value(data, pos, content_end, depth + 1, allow_ber)
            kids.append(child)
        return DerValue(tag, True, tuple(kids)), content_end
    return DerValue(tag, False, bytes(data[pos:content_end])), content_end


def der_decode(data: bytes, *, allow_ber: bool = False) -> DerValue:
    """Parse one DER value covering the whole input.

    Raises :class:`DerDecodeError` on anything else; never any other
    exception, whatever the input bytes.
    """
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise DerDecodeError("not-bytes", 0)
    data = bytes(data)
    value, pos = _decode_value(data, 0, len(data), 0, allow_ber)
    if pos != len(data):
        raise DerDecodeError("trailing-garbage", pos, f"{len(data) - pos} bytes left")
    return value


# ---------------------------------------------------------------------------
# constructors for the handful of types RPKI objects use

def seq(*children: DerValue) -> DerValue:
    return DerValue(Tags.SEQUENCE, True, tuple(children))


def set_of(*children: DerValue) -> DerValue:
    """SET OF with canonical DER ordering of the encoded elements."""
    ordered = sorted(children, key=der_encode)
    return DerValue(Tags.SET, True, tuple(ordered))


def explicit(number: int, inner: DerValue) -> DerValue:
    """Context-class [number] EXPLICIT wrapper."""
    return DerValue(0x80 | number, True, (inner,))


def implicit(number: int, template: DerValue) -> DerValue:
    """Retag a value as context-class [number] IMPLICIT."""
    return DerValue(0x80 | number, template.constructed, template.content)


def integer(n: int) -> DerValue:
    if n == 0:
        body = b"\x00"
    else:
        body = n.to_bytes((n.bit_length() + 8) // 8, "big", signed=True)
    return DerValue(Tags.INTEGER, False, body)


def decode_integer(value: DerValue) -> int:
    if value.tag != Tags.INTEGER or value.constructed or not value.content:
        raise DerDecodeError("bad-integer", 0)
    return int.from_bytes(value.content, "big", signed=True)  # type: ignore[arg-type]


def boolean(v: bool) -> DerValue:
    return DerValue(Tags.BOOLEAN, False, b"\xff" if v else b"\x00")


def null() -> DerValue:
    return DerValue(Tags.NULL, False, b"")


def octet_string(b: bytes) -> DerValue:
    return DerValue(Tags.OCTET_STRING, False, bytes(b))


def bit_string(b: bytes, unused: int = 0) -> DerValue:
    return DerValue(Tags.BIT_STRING, False, bytes([unused]) + bytes(b))


def bit_string_content(value: DerValue) -> bytes:
    """Content bits of a BIT STRING, dropping the unused-bits octet."""
    if value.constructed or not value.content:
        raise DerDecodeError("bad-bit-string", 0)
    return bytes(value.content[1:])  # type: ignore[index]


@lru_cache(maxsize=256)
def oid(dotted: str) -> DerValue:
    arcs = [int(a) for a in dotted.split(".")]
    if len(arcs) < 2:
        raise DerEncodeError(f"OID needs at least two arcs: {dotted}")
    return DerValue(Tags.OID, False, encode_oid_body(tuple(arcs)))


def encode_oid_body(arcs: list[int]) -> bytes:
    body = bytearray([arcs[0] * 40 + arcs[1]])
    for arc in arcs[2:]:
        chunk = [arc & 0x7F]
        arc >>= 7
        while arc:
            chunk.insert(0, (arc & 0x7F) | 0x80)
            arc >>= 7
        body.extend(chunk)
    return bytes(body)


def decode_oid(value: DerValue) -> str:
    body = value.content
    if value.tag != Tags.OID or value.constructed or not body:
        raise DerDecodeError("bad-oid", 0)
    arcs = [body[0] // 40, body[0] % 40]
    val = 0
    for b in body[1:]:
        val = (val << 7) | (b & 0x7F)
        if not b & 0x80:
            arcs.append(val)
            val = 0
    if val:
        raise DerDecodeError("bad-oid", 0, "unterminated arc")
    return ".".join(str(a) for a in arcs)


def ia5(s: str) -> DerValue:
    return DerValue(Tags.IA5_STRING, False, s.encode("ascii"))


def printable(s: str) -> DerValue:
    return DerValue(Tags.PRINTABLE_STRING, False, s.encode("ascii"))


def utf8(s: str) -> DerValue:
    return DerValue(Tags.UTF8_STRING, False, s.encode("utf-8"))


def x509_time(dt: datetime.datetime) -> DerValue:
    """Time CHOICE: UTCTime before 2050, GeneralizedTime after."""
    dt = dt.astimezone(datetime.timezone.utc)
    if dt.year < 2050:
        return DerValue(Tags.UTC_TIME, False, dt.strftime("%y%m%d%H%M%SZ").encode("ascii"))
    return generalized_time(dt)


def generalized_time(dt: datetime.datetime) -> DerValue:
    dt = dt.astimezone(datetime.timezone.utc)
    return DerValue(Tags.GENERALIZED_TIME, False, dt.strftime("%Y%m%d%H%M%SZ").encode("ascii"))


def decode_time(value: DerValue) -> datetime.datetime:
    raw = value.content
    if value.constructed or not raw:
        raise DerDecodeError("bad-time", 0)
    text = bytes(raw).decode("ascii", errors="replace")
    try:
        if value.tag == Tags.UTC_TIME:
            dt = datetime.datetime.strptime(text, "%y%m%d%H%M%SZ")
        else:
            dt = datetime.datetime.strptime(text, "%Y%m%d%H%M%SZ")
    except ValueError as exc:
        raise DerDecodeError("bad-time", 0, text) from exc
    return dt.replace(tzinfo=datetime.timezone.utc)
