"""X.501 distinguished names, one RDN per attribute.

RPKI names are normally a lone printable-string CommonName; UTF-8 and extra
attribute types (OrganizationName in particular) are selectable per attribute
because some validators choke on exactly that.
"""

from __future__ import annotations

from dataclasses import dataclass

from .. import oids
from ..der import DerValue, Tags, der_decode, printable, seq, set_of, utf8


@dataclass(frozen=True)
class NameAttr:
    attr_type: str  # dotted OID
    value: str
    utf8: bool = False


def common_name(value: str, utf8_value: bool = False) -> tuple[NameAttr, ...]:
    return (NameAttr(oids.AT_COMMON_NAME, value, utf8_value),)


def encode_name(attrs: tuple[NameAttr, ...] | list[NameAttr]) -> DerValue:
    rdns = []
    for attr in attrs:
        value = utf8(attr.value) if attr.utf8 else printable(attr.value)
        from ..der import oid as mkoid

        rdns.append(set_of(seq(mkoid(attr.attr_type), value)))
    return seq(*rdns)


def decode_name(node: DerValue) -> tuple[NameAttr, ...]:
    from ..der import DerDecodeError, decode_oid

    if not node.constructed or node.tag != Tags.SEQUENCE:
        raise DerDecodeError("bad-name", 0)
    attrs = []
    for rdn in node.children:
        if not rdn.constructed:
            raise DerDecodeError("bad-name", 0, "RDN not a SET")
        for atv in rdn.children:
            if not atv.constructed or len(atv.children) != 2:
                raise DerDecodeError("bad-name", 0, "bad AttributeTypeAndValue")
            attr_type = decode_oid(atv.child(0))
            value_node = atv.child(1)
            is_utf8 = value_node.tag == Tags.UTF8_STRING
            text = bytes(value_node.content).decode("utf-8", errors="replace")
            attrs.append(NameAttr(attr_type, text, is_utf8))
    return tuple(attrs)


def decode_name_bytes(data: bytes) -> tuple[NameAttr, ...]:
    return decode_name(der_decode(data))
