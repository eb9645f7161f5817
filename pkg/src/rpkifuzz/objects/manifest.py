"""Manifest eContent: the per-CA listing of repository files and their digests."""

from __future__ import annotations

import datetime
from dataclasses import dataclass, field

from .. import oids
from ..der import (
    DerDecodeError,
    DerValue,
    bit_string,
    bit_string_content,
    decode_integer,
    decode_oid,
    decode_time,
    der_decode,
    der_encode,
    generalized_time,
    ia5,
    integer,
    oid,
    seq,
)


@dataclass
class ManifestContent:
    manifest_number: int
    this_update: datetime.datetime
    next_update: datetime.datetime
    file_list: list[tuple[str, bytes]] = field(default_factory=list)
    file_hash_alg: str = oids.SHA256


def encode_manifest_econtent(mft: ManifestContent) -> bytes:
    entries = [seq(ia5(name), bit_string(digest)) for name, digest in mft.file_list]
    return der_encode(
        seq(
            integer(mft.manifest_number),
            generalized_time(mft.this_update),
            generalized_time(mft.next_update),
            oid(mft.file_hash_alg),
            seq(*entries),
        )
    )


def decode_manifest_econtent(data: bytes | DerValue) -> ManifestContent:
    tree = der_decode(data) if isinstance(data, (bytes, bytearray)) else data
    kids = list(tree.children)
    if kids and kids[0].tag == 0x80:  # explicit version slot
        kids = kids[1:]
    if len(kids) != 5:
        raise DerDecodeError("bad-manifest", 0, "expected 5 fields")
    file_list = []
    for entry in kids[4].children:
        name = bytes(entry.child(0).content).decode("ascii", errors="replace")
        file_list.append((name, bit_string_content(entry.child(1))))
    return ManifestContent(
        manifest_number=decode_integer(kids[0]),
        this_update=decode_time(kids[1]),
        next_update=decode_time(kids[2]),
        file_hash_alg=decode_oid(kids[3]),
        file_list=file_list,
    )
