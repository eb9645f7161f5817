"""IP prefix and AS number resource sets and their certificate-extension encoding.

Covers the delegation-extension structures certificates carry: per-family
prefix lists (or the inherit marker) and AS ranges (or inherit).  Prefixes are
encoded as bit strings truncated at the prefix length.
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass

from ..der import (
    DerDecodeError,
    DerValue,
    Tags,
    bit_string,
    decode_integer,
    explicit,
    integer,
    null,
    octet_string,
    seq,
)

AFI_IPV4 = 1
AFI_IPV6 = 2


class _Inherit:
    def __repr__(self):
        return "INHERIT"


INHERIT = _Inherit()


@dataclass(frozen=True)
class Prefix:
    family: int  # AFI_IPV4 or AFI_IPV6
    address: int  # network address as integer
    length: int

    @classmethod
    def parse(cls, text: str) -> "Prefix":
        net = ipaddress.ip_network(text, strict=True)
        family = AFI_IPV4 if net.version == 4 else AFI_IPV6
        return cls(family, int(net.network_address), net.prefixlen)

    @property
    def family_bits(self) -> int:
        return 32 if self.family == AFI_IPV4 else 128

    def __str__(self) -> str:
        if self.family == AFI_IPV4:
            addr = ipaddress.IPv4Address(self.address)
        else:
            addr = ipaddress.IPv6Address(self.address)
        return f"{addr}/{self.length}"

    def range(self) -> tuple[int, int]:
        span = self.family_bits - self.length
        return self.address, self.address | ((1 << span) - 1)

    def covers(self, other: "Prefix") -> bool:
        if self.family != other.family:
            return False
        lo, hi = self.range()
        olo, ohi = other.range()
        return lo <= olo and ohi <= hi


@dataclass(frozen=True)
class AsRange:
    low: int
    high: int

    def covers(self, other: "AsRange") -> bool:
        return self.low <= other.low and other.high <= self.high


def encode_prefix_bits(prefix: Prefix) -> DerValue:
    """Address prefix as a BIT STRING of exactly `length` bits."""
    nbytes = (prefix.length + 7) // 8
    unused = nbytes * 8 - prefix.length
    body = (prefix.address >> (prefix.family_bits - nbytes * 8)).to_bytes(nbytes, "big") if nbytes else b""
    return bit_string(body, unused=unused)


def decode_prefix_bits(node: DerValue, family: int) -> Prefix:
    if node.tag != Tags.BIT_STRING or node.constructed or not node.content:
        raise DerDecodeError("bad-prefix", 0)
    raw = bytes(node.content)
    unused = raw[0]
    body = raw[1:]
    if unused > 7 or (not body and unused):
        raise DerDecodeError("bad-prefix", 0, "bad unused-bits octet")
    length = len(body) * 8 - unused
    family_bits = 32 if family == AFI_IPV4 else 128
    if length > family_bits:
        raise DerDecodeError("bad-prefix", 0, f"prefix length {length} too long for family")
    address = int.from_bytes(body, "big") << (family_bits - len(body) * 8) if body else 0
    # mask out the unused low bits so the address is the true network address
    if length < family_bits:
        address &= ~((1 << (family_bits - length)) - 1) & ((1 << family_bits) - 1)
    return Prefix(family, address, length)


def afi_octets(family: int) -> bytes:
    return family.to_bytes(2, "big")


# ---------------------------------------------------------------------------
# certificate extension payloads (delegation extensions)

def encode_ip_resources(resources) -> DerValue:
    """IPAddrBlocks: [(family, [Prefix,...])] grouped per family, or INHERIT."""
    if resources is INHERIT:
        blocks = [seq(octet_string(afi_octets(f)), null()) for f in (AFI_IPV4, AFI_IPV6)]
        return seq(*blocks)
    blocks = []
    for family, prefixes in resources:
        if prefixes is INHERIT:
            choice = null()
        else:
            choice = seq(*[encode_prefix_bits(p) for p in prefixes])
        blocks.append(seq(octet_string(afi_octets(family)), choice))
    return seq(*blocks)


def decode_ip_resources(node: DerValue):
    """Returns INHERIT or [(family, [Prefix,...] | INHERIT)]."""
    out = []
    saw_explicit = False
    for block in node.children:
        afi_node = block.child(0)
        afi = int.from_bytes(bytes(afi_node.content)[:2], "big")
        choice = block.child(1)
        if choice.tag == Tags.NULL:
            out.append((afi, INHERIT))
            continue
        saw_explicit = True
        prefixes = []
        for item in choice.children:
            if item.tag == Tags.BIT_STRING:
                prefixes.append(decode_prefix_bits(item, afi))
            else:
                # address range form: keep as raw extremes
                lo = decode_prefix_bits(item.child(0), afi)
                hi = decode_prefix_bits(item.child(1), afi)
                prefixes.append((lo, hi))
        out.append((afi, prefixes))
    if not saw_explicit and out and all(v is INHERIT for _, v in out):
        return INHERIT
    return out


def encode_as_resources(resources) -> DerValue:
    """ASIdentifiers with only the asnum choice: INHERIT or [AsRange | int]."""
    if resources is INHERIT:
        return seq(explicit(0, null()))
    items = []
    for entry in resources:
        if isinstance(entry, int):
            items.append(integer(entry))
        else:
            items.append(seq(integer(entry.low), integer(entry.high)))
    return seq(explicit(0, seq(*items)))


def decode_as_resources(node: DerValue):
    for child in node.children:
        if child.tag == 0x80 and child.constructed:
            inner = child.child(0)
            if inner.tag == Tags.NULL:
                return INHERIT
            ranges = []
            for item in inner.children:
                if item.tag == Tags.INTEGER:
                    v = decode_integer(item)
                    ranges.append(AsRange(v, v))
                else:
                    ranges.append(AsRange(decode_integer(item.child(0)), decode_integer(item.child(1))))
            return ranges
    raise DerDecodeError("bad-as-resources", 0)


def prefixes_covered(prefixes: list[Prefix], holdings) -> bool:
    """True if every prefix falls inside the holdings ([(family, [Prefix])] form)."""
    if holdings is INHERIT:
        return True
    for p in prefixes:
        ok = False
        for family, items in holdings:
            if family != p.family or items is INHERIT:
                continue
            for h in items:
                if isinstance(h, Prefix) and h.covers(p):
                    ok = True
                    break
            if ok:
                break
        if not ok:
            return False
    return True
