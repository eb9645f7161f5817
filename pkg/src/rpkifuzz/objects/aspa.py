"""AS provider authorization eContent: a customer AS and its provider set."""

from __future__ import annotations

from dataclasses import dataclass

from ..der import DerDecodeError, DerValue, decode_integer, der_decode, der_encode, integer, seq


@dataclass(frozen=True)
class AspaContent:
    customer_as_id: int
    provider_as_ids: tuple[int, ...]

    def well_formed(self) -> bool:
        return all(a < b for a, b in zip(self.provider_as_ids, self.provider_as_ids[1:]))


def encode_aspa_econtent(aspa: AspaContent) -> bytes:
    return der_encode(
        seq(integer(aspa.customer_as_id), seq(*[integer(p) for p in aspa.provider_as_ids]))
    )


def decode_aspa_econtent(data: bytes | DerValue) -> AspaContent:
    tree = der_decode(data) if isinstance(data, (bytes, bytearray)) else data
    kids = list(tree.children)
    if kids and kids[0].tag == 0x80:
        kids = kids[1:]
    if len(kids) != 2:
        raise DerDecodeError("bad-aspa", 0, "expected customer + providers")
    return AspaContent(
        customer_as_id=decode_integer(kids[0]),
        provider_as_ids=tuple(decode_integer(p) for p in kids[1].children),
    )
