"""CMS SignedData envelopes wrapping every payload object.

Each signed object carries two signatures: the embedded one-off EE certificate
is signed by the CA, and the payload digest is signed by the EE key over the
signed-attributes set.  Assembly is deterministic for fixed inputs.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass

from .. import keystore, oids
from ..der import (
    DerDecodeError,
    DerValue,
    Tags,
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
    set_of,
    x509_time,
)


@dataclass
class SignedObject:
    econtent_type: str
    econtent: bytes
    ee_cert_der: bytes
    message_digest: bytes | None
    signature: bytes
    signed_attrs_der: bytes  # re-encoded with the explicit SET OF tag (signature input)
    sid: bytes | None
    signing_time: datetime.datetime | None = None


def _attr(attr_oid: str, value: DerValue) -> DerValue:
    return seq(oid(attr_oid), set_of(value))


def cms_assemble(
    econtent_type: str,
    econtent: bytes,
    ee_cert_der: bytes,
    ee_key: keystore.KeyHandle,
    signing_time: datetime.datetime | None = None,
    *,
    ee_spki: bytes | None = None,
) -> bytes:
    """Wrap eContent in a SignedData blob signed by ee_key.

    The EE certificate must carry ee_key's public half; anything else is a
    caller bug, not a fuzzing knob (mangled envelopes come from byte mutation).
    Callers that just built the certificate pass ee_spki to skip the re-parse.
    """
    from ..der import raw

    if ee_spki is None:
        ee_spki = _spki_from_cert_tree(der_decode(ee_cert_der))
    if ee_spki != ee_key.spki:
        raise ValueError("key/cert mismatch: EE certificate does not carry the signing key")
    digest = keystore.sha256(econtent)
    attrs = [
        _attr(oids.ATTR_CONTENT_TYPE, oid(econtent_type)),
        _attr(oids.ATTR_MESSAGE_DIGEST, octet_string(digest)),
    ]
    if signing_time is not None:
        attrs.append(_attr(oids.ATTR_SIGNING_TIME, x509_time(signing_time)))
    signed_attrs_der = der_encode(set_of(*attrs))
    signature = keystore.sign(ee_key, signed_attrs_der)
    signer_info = seq(
        integer(3),
        DerValue(0x80, False, ee_key.key_id),  # sid: subjectKeyIdentifier [0]
        seq(oid(oids.SHA256)),
        # signedAttrs [0] IMPLICIT: same content octets as the signed SET OF
        DerValue(0x80, True, (raw(signed_attrs_der[_header_len(signed_attrs_der):]),)),
        seq(oid(oids.RSA_ENCRYPTION), null()),
        octet_string(signature),
    )
    signed_data = seq(
        integer(3),
        set_of(seq(oid(oids.SHA256))),
        seq(oid(econtent_type), explicit(0, octet_string(econtent))),
        DerValue(0x80, True, (raw(ee_cert_der),)),  # certificates [0] IMPLICIT
        set_of(signer_info),
    )
    return der_encode(seq(oid(oids.SIGNED_DATA), explicit(0, signed_data)))


def _header_len(tlv: bytes) -> int:
    """Length of the tag+length header of one encoded TLV."""
    if len(tlv) < 2:
        return len(tlv)
    pos = 1
    if tlv[0] & 0x1F == 0x1F:
        while pos < len(tlv) and tlv[pos] & 0x80:
            pos += 1
        pos += 1
    first = tlv[pos]
    pos += 1
    if first & 0x80:
        pos += first & 0x7F
    return pos


def _spki_from_cert_tree(cert_tree: DerValue) -> bytes:
    tbs = cert_tree.child(0)
    off = 0 if (tbs.child(0).tag == 0x80 and tbs.child(0).constructed) else -1
    return der_encode(tbs.child(6 + off))


def parse_signed_object(data: bytes | DerValue) -> SignedObject:
    tree = der_decode(data) if isinstance(data, (bytes, bytearray)) else data
    if len(tree.children) != 2 or decode_oid(tree.child(0)) != oids.SIGNED_DATA:
        raise DerDecodeError("bad-cms", 0, "not a SignedData ContentInfo")
    sd = tree.child(1).child(0)
    kids = sd.children
    encap = None
    cert_der = None
    signer_infos = None
    for child in kids:
        if child.tag == Tags.SEQUENCE and encap is None and child.children and child.child(0).tag == Tags.OID:
            encap = child
        elif child.tag == 0x80 and child.constructed and cert_der is None:
            cert_der = der_encode(child.child(0))
        elif child.tag == Tags.SET and child.children and child.child(0).tag == Tags.SEQUENCE:
            # digestAlgorithms is SET OF SEQUENCE too; signerInfos comes last
            signer_infos = child
    if encap is None or cert_der is None or signer_infos is None:
        raise DerDecodeError("bad-cms", 0, "missing SignedData fields")
    econtent_type = decode_oid(encap.child(0))
    econtent = bytes(encap.child(1).child(0).content)
    si = signer_infos.child(0)
    sid = None
    message_digest = None
    signing_time = None
    signed_attrs_der = b""
    signature = b""
    for child in si.children:
        if child.tag == 0x80 and not child.constructed:
            sid = bytes(child.content)
        elif child.tag == 0x80 and child.constructed:
            signed_attrs = DerValue(Tags.SET, True, child.children)
            signed_attrs_der = der_encode(signed_attrs)
            for attr in child.children:
                try:
                    attr_oid = decode_oid(attr.child(0))
                except (DerDecodeError, IndexError):
                    continue
                values = attr.child(1)
                if not values.children:
                    continue
                if attr_oid == oids.ATTR_MESSAGE_DIGEST:
                    message_digest = bytes(values.child(0).content)
                elif attr_oid == oids.ATTR_SIGNING_TIME:
                    signing_time = decode_time(values.child(0))
        elif child.tag == Tags.OCTET_STRING:
            signature = bytes(child.content)
    return SignedObject(
        econtent_type=econtent_type,
        econtent=econtent,
        ee_cert_der=cert_der,
        message_digest=message_digest,
        signature=signature,
        signed_attrs_der=signed_attrs_der,
        sid=sid,
        signing_time=signing_time,
    )


def signed_object_digest_ok(so: SignedObject) -> bool:
    return so.message_digest == keystore.sha256(so.econtent)


def signed_object_signature_ok(so: SignedObject) -> bool:
    """Check the CMS signature against the SPKI inside the embedded EE cert."""
    try:
        spki = _spki_from_cert_tree(der_decode(so.ee_cert_der))
    except (DerDecodeError, IndexError, ValueError):
        return False
    return keystore.verify(spki, so.signed_attrs_der, so.signature)
