"""Certificate revocation lists with independently omittable fields.

Well-formed CRLs carry crlNumber, AKI, a signature algorithm and a signature
value; each can be left out on purpose to probe how validators treat the
resulting object, so the builder takes omit flags and the parser reports
presence instead of failing.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass, field

from .. import keystore, oids
from ..der import (
    DerDecodeError,
    DerValue,
    Tags,
    bit_string,
    bit_string_content,
    decode_integer,
    decode_oid,
    decode_time,
    der_decode,
    der_encode,
    explicit,
    integer,
    null,
    octet_string,
    oid,
    seq,
    x509_time,
)
from .cert import FieldLoc
from .names import NameAttr, decode_name, encode_name


@dataclass
class CrlContent:
    issuer: tuple[NameAttr, ...] | None
    this_update: datetime.datetime
    next_update: datetime.datetime
    revoked: list[tuple[int, datetime.datetime]] = field(default_factory=list)
    crl_number: int | None = None
    aki: bytes | None = None
    has_signature_alg: bool = True
    signature: bytes | None = None


def _algid() -> DerValue:
    return seq(oid(oids.SHA256_WITH_RSA), null())


def build_crl(
    issuer: tuple[NameAttr, ...],
    signer: keystore.KeyHandle,
    this_update: datetime.datetime,
    next_update: datetime.datetime,
    revoked: list[tuple[int, datetime.datetime]] | None = None,
    crl_number: int | None = 1,
    aki: bytes | None = None,
    *,
    omit_issuer: bool = False,
    omit_signature_alg: bool = False,
    omit_signature: bool = False,
) -> bytes:
    """crl_number/aki None omit those extensions; omit flags drop whole fields."""
    tbs_fields: list[DerValue] = [integer(1), _algid()]
    if not omit_issuer:
        tbs_fields.append(encode_name(issuer))
    tbs_fields.append(x509_time(this_update))
    tbs_fields.append(x509_time(next_update))
    if revoked:
        tbs_fields.append(seq(*[seq(integer(serial), x509_time(when)) for serial, when in revoked]))
    exts = []
    if aki is not None:
        exts.append(seq(oid(oids.EXT_AUTHORITY_KEY_ID), octet_string(der_encode(seq(DerValue(0x80, False, aki))))))
    if crl_number is not None:
        exts.append(seq(oid(oids.EXT_CRL_NUMBER), octet_string(der_encode(integer(crl_number)))))
    if exts:
        tbs_fields.append(explicit(0, seq(*exts)))
    tbs = seq(*tbs_fields)
    outer: list[DerValue] = [tbs]
    if not omit_signature_alg:
        outer.append(_algid())
    if not omit_signature:
        outer.append(bit_string(keystore.sign(signer, der_encode(tbs))))
    return der_encode(seq(*outer))


def parse_crl(data: bytes | DerValue) -> CrlContent:
    tree = der_decode(data) if isinstance(data, (bytes, bytearray)) else data
    kids = tree.children
    if not kids:
        raise DerDecodeError("bad-crl", 0, "empty CertificateList")
    tbs = kids[0]
    issuer = None
    this_update = next_update = None
    revoked: list[tuple[int, datetime.datetime]] = []
    crl_number = None
    aki = None
    saw_algid = False
    times: list[datetime.datetime] = []
    for child in tbs.children:
        if child.tag == Tags.INTEGER and not times:
            continue  # version
        if child.tag == Tags.SEQUENCE and not times:
            first = child.children[0] if child.children else None
            if not saw_algid and first is not None and first.tag == Tags.OID:
                saw_algid = True
            else:
                issuer = decode_name(child)
            continue
        if child.tag in (Tags.UTC_TIME, Tags.GENERALIZED_TIME):
            times.append(decode_time(child))
            continue
        if child.tag == Tags.SEQUENCE and times:
            for entry in child.children:
                revoked.append((decode_integer(entry.child(0)), decode_time(entry.child(1))))
            continue
        if child.tag == 0x80 and child.constructed:
            for ext in child.child(0).children:
                ext_oid = decode_oid(ext.child(0))
                value = bytes(ext.children[-1].content)
                if ext_oid == oids.EXT_CRL_NUMBER:
                    crl_number = decode_integer(der_decode(value))
                elif ext_oid == oids.EXT_AUTHORITY_KEY_ID:
                    inner = der_decode(value)
                    for kid in inner.children:
                        if kid.tag == 0x80:
                            aki = bytes(kid.content)
    if len(times) < 2:
        raise DerDecodeError("bad-crl", 0, "missing update times")
    this_update, next_update = times[0], times[1]
    has_signature_alg = len(kids) >= 2 and kids[1].tag == Tags.SEQUENCE
    signature = None
    if kids[-1].tag == Tags.BIT_STRING and len(kids) >= 2:
        signature = bit_string_content(kids[-1])
    return CrlContent(
        issuer=issuer,
        this_update=this_update,
        next_update=next_update,
        revoked=revoked,
        crl_number=crl_number,
        aki=aki,
        has_signature_alg=has_signature_alg,
        signature=signature,
    )


def verify_crl_signature(data: bytes, issuer_spki: bytes) -> bool:
    try:
        tree = der_decode(data)
        if len(tree.children) < 2 or tree.children[-1].tag != Tags.BIT_STRING:
            return False
        tbs_der = der_encode(tree.child(0))
        signature = bit_string_content(tree.children[-1])
    except (DerDecodeError, IndexError, ValueError):
        return False
    return keystore.verify(issuer_spki, tbs_der, signature)


class CrlFieldIndex:
    """Locators for the CRL subset of the replaceable fields."""

    FIELDS = ("signature", "issuerName", "parentKeyIdentifier")

    def __init__(self, tree: DerValue):
        self.tree = tree
        self.locs: dict[str, FieldLoc] = {}
        try:
            self._index()
        except (DerDecodeError, IndexError, ValueError):
            pass

    def _index(self):
        kids = self.tree.children
        if kids and kids[-1].tag == Tags.BIT_STRING and len(kids) >= 2:
            self.locs["signature"] = FieldLoc((len(kids) - 1,))
        if not kids:
            return
        tbs = kids[0]
        saw_algid = False
        saw_time = False
        for i, child in enumerate(tbs.children):
            if child.tag in (Tags.UTC_TIME, Tags.GENERALIZED_TIME):
                saw_time = True
            if child.tag == Tags.SEQUENCE and not saw_time:
                first = child.children[0] if child.children else None
                if not saw_algid and first is not None and first.tag == Tags.OID:
                    saw_algid = True
                elif "issuerName" not in self.locs:
                    self.locs["issuerName"] = FieldLoc((0, i))
            if child.tag == 0x80 and child.constructed and child.children:
                for j, ext in enumerate(child.child(0).children):
                    try:
                        if decode_oid(ext.child(0)) != oids.EXT_AUTHORITY_KEY_ID:
                            continue
                    except DerDecodeError:
                        continue
                    value_idx = len(ext.children) - 1
                    inner = der_decode(bytes(ext.child(value_idx).content))
                    for k, kid in enumerate(inner.children):
                        if kid.tag == 0x80 and not kid.constructed:
                            self.locs["parentKeyIdentifier"] = FieldLoc((0, i, 0, j, value_idx), (k,))

    def get_bytes(self, name: str):
        from .cert import loc_get_bytes

        loc = self.locs.get(name)
        return loc_get_bytes(self.tree, loc) if loc else None

    def replace(self, name: str, new: DerValue) -> bool:
        from .cert import loc_replace

        loc = self.locs.get(name)
        if not loc:
            return False
        self.tree = loc_replace(self.tree, loc, new)
        return True
