"""Route origin authorization eContent.

The family blocks are a SEQUENCE, so repeating the same address family is
representable on purpose; per-prefix maxLength slots accept a raw DER node so
deliberately non-integer values can be planted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..der import (
    DerDecodeError,
    DerValue,
    Tags,
    decode_integer,
    der_decode,
    der_encode,
    integer,
    octet_string,
    seq,
)
from .resources import AFI_IPV4, AFI_IPV6, Prefix, afi_octets, decode_prefix_bits, encode_prefix_bits


@dataclass(frozen=True)
class RoaPrefix:
    prefix: Prefix
    max_length: object = None  # None | int | DerValue (raw node for malformed cases)
    max_length_malformed: bool = False

    def vrp_max_length(self) -> int:
        return self.max_length if isinstance(self.max_length, int) else self.prefix.length


@dataclass(frozen=True)
class RoaFamilyBlock:
    family: int
    prefixes: tuple[RoaPrefix, ...]


@dataclass
class RoaContent:
    as_id: int
    blocks: list[RoaFamilyBlock] = field(default_factory=list)

    @classmethod
    def from_prefixes(cls, as_id: int, prefixes) -> "RoaContent":
        """Group (prefix_str, max_length) pairs one block per family, v4 first."""
        by_family: dict[int, list[RoaPrefix]] = {}
        for entry in prefixes:
            if isinstance(entry, (tuple, list)):
                text, max_length = entry
            else:
                text, max_length = entry, None
            p = Prefix.parse(text)
            by_family.setdefault(p.family, []).append(RoaPrefix(p, max_length))
        blocks = [
            RoaFamilyBlock(fam, tuple(by_family[fam]))
            for fam in (AFI_IPV4, AFI_IPV6)
            if fam in by_family
        ]
        return cls(as_id=as_id, blocks=blocks)

    def vrps(self, asn: int | None = None) -> set[tuple[int, str, int]]:
        asn = self.as_id if asn is None else asn
        out = set()
        for block in self.blocks:
            for rp in block.prefixes:
                out.add((asn, str(rp.prefix), rp.vrp_max_length()))
        return out


def encode_roa_econtent(roa: RoaContent) -> bytes:
    blocks = []
    for block in roa.blocks:
        items = []
        for rp in block.prefixes:
            parts = [encode_prefix_bits(rp.prefix)]
            if isinstance(rp.max_length, int):
                parts.append(integer(rp.max_length))
            elif isinstance(rp.max_length, DerValue):
                parts.append(rp.max_length)
            items.append(seq(*parts))
        blocks.append(seq(octet_string(afi_octets(block.family)), seq(*items)))
    return der_encode(seq(integer(roa.as_id), seq(*blocks)))


def decode_roa_econtent(data: bytes | DerValue) -> RoaContent:
    tree = der_decode(data) if isinstance(data, (bytes, bytearray)) else data
    kids = list(tree.children)
    if kids and kids[0].tag == 0x80:  # explicit version slot
        kids = kids[1:]
    if len(kids) != 2:
        raise DerDecodeError("bad-roa", 0, "expected asID + ipAddrBlocks")
    as_id = decode_integer(kids[0])
    blocks = []
    for block in kids[1].children:
        family = int.from_bytes(bytes(block.child(0).content)[:2], "big")
        if family not in (AFI_IPV4, AFI_IPV6):
            raise DerDecodeError("bad-roa", 0, f"unknown address family {family}")
        prefixes = []
        for item in block.child(1).children:
            prefix = decode_prefix_bits(item.child(0), family)
            max_length = None
            malformed = False
            if len(item.children) > 1:
                ml_node = item.child(1)
                if ml_node.tag == Tags.INTEGER and not ml_node.constructed and ml_node.content:
                    max_length = decode_integer(ml_node)
                else:
                    max_length, malformed = ml_node, True
            prefixes.append(RoaPrefix(prefix, max_length, malformed))
        blocks.append(RoaFamilyBlock(family, tuple(prefixes)))
    return RoaContent(as_id=as_id, blocks=blocks)
