"""X.509 resource certificates: build, parse, and locate replaceable fields.

Certificates carry eight fields that must agree with the surrounding
repository before a validator will look at anything else: the signature, the
parent key identifier, the CRL location, the issuer name, the issuer location,
the repository location, the manifest location, and the notification location.
:class:`CertFieldIndex` finds each of them inside a raw value tree so the
scaffolder can overwrite exactly the ones a strategy selects.
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
    boolean,
    decode_integer,
    decode_oid,
    decode_time,
    der_decode,
    der_encode,
    explicit,
    ia5,
    integer,
    null,
    octet_string,
    oid,
    seq,
    x509_time,
)
from . import resources as res
from .names import NameAttr, decode_name, encode_name

KU_CA = bytes([0x01, 0x06])  # keyCertSign | cRLSign, 1 unused bit
KU_EE = bytes([0x07, 0x80])  # digitalSignature, 7 unused bits


@dataclass
class SiaInfo:
    ca_repository: str | None = None
    rpki_manifest: str | None = None
    rpki_notify: str | None = None
    signed_object: str | None = None


@dataclass
class CertContent:
    serial: int
    issuer: tuple[NameAttr, ...]
    subject: tuple[NameAttr, ...]
    not_before: datetime.datetime
    not_after: datetime.datetime
    spki: bytes
    ski: bytes
    aki: bytes | None
    is_ca: bool
    sia: SiaInfo = field(default_factory=SiaInfo)
    crl_dp: str | None = None
    aia: str | None = None
    ip_resources: object = None  # INHERIT | [(family, [Prefix])] | None
    as_resources: object = None  # INHERIT | [AsRange] | None
    key_usage_critical: bool = True
    resources_critical: bool = True
    signature_ok: bool | None = None  # set by parse when a verifying key is supplied


from functools import lru_cache


def _algid_sha256_rsa() -> DerValue:
    return seq(oid(oids.SHA256_WITH_RSA), null())


def _extension(ext_oid: str, critical: bool, inner: DerValue) -> DerValue:
    parts = [oid(ext_oid)]
    if critical:
        parts.append(boolean(True))
    parts.append(octet_string(der_encode(inner)))
    return seq(*parts)


def _general_name_uri(uri: str) -> DerValue:
    return DerValue(0x80 | 6, False, uri.encode("ascii"))


def _access_description(method: str, uri: str) -> DerValue:
    return seq(oid(method), _general_name_uri(uri))


# DerValue is frozen, so repeated nodes are safe to memoize and share; URIs and
# key ids repeat for every object one CA issues
@lru_cache(maxsize=512)
def _crldp_ext(uri: str) -> DerValue:
    crldp = seq(seq(explicit(0, DerValue(0x80, True, (_general_name_uri(uri),)))))
    return _extension(oids.EXT_CRL_DISTRIBUTION_POINTS, False, crldp)


@lru_cache(maxsize=512)
def _aia_ext(uri: str) -> DerValue:
    return _extension(oids.EXT_AIA, False, seq(_access_description(oids.AD_CA_ISSUERS, uri)))


@lru_cache(maxsize=512)
def _sia_ext(items: tuple[tuple[str, str], ...]) -> DerValue:
    return _extension(oids.EXT_SIA, False, seq(*[_access_description(m, u) for m, u in items]))


@lru_cache(maxsize=512)
def _aki_ext(aki: bytes) -> DerValue:
    return _extension(oids.EXT_AUTHORITY_KEY_ID, False, seq(DerValue(0x80, False, aki)))


@lru_cache(maxsize=8)
def _ku_ext(is_ca: bool, critical: bool) -> DerValue:
    bits = KU_CA if is_ca else KU_EE
    return _extension(oids.EXT_KEY_USAGE, critical, DerValue(Tags.BIT_STRING, False, bits))


@lru_cache(maxsize=8)
def _const_ext(which: str, critical: bool = True) -> DerValue:
    if which == "bc":
        return _extension(oids.EXT_BASIC_CONSTRAINTS, True, seq(boolean(True)))
    if which == "policies":
        return _extension(oids.EXT_CERTIFICATE_POLICIES, True, seq(seq(oid(oids.POLICY_RPKI))))
    if which == "ip-inherit":
        return _extension(oids.EXT_IP_RESOURCES, critical, res.encode_ip_resources(res.INHERIT))
    if which == "as-inherit":
        return _extension(oids.EXT_AS_RESOURCES, critical, res.encode_as_resources(res.INHERIT))
    raise KeyError(which)


def build_tbs(content: CertContent, issuer_key_id: bytes | None = None) -> DerValue:
    """TBSCertificate tree; issuer_key_id overrides content.aki when given."""
    exts = []
    if content.is_ca:
        exts.append(_const_ext("bc"))
    exts.append(_extension(oids.EXT_SUBJECT_KEY_ID, False, octet_string(content.ski)))
    aki = issuer_key_id if issuer_key_id is not None else content.aki
    if aki is not None:
        exts.append(_aki_ext(aki))
    exts.append(_ku_ext(content.is_ca, content.key_usage_critical))
    if content.crl_dp:
        exts.append(_crldp_ext(content.crl_dp))
    if content.aia:
        exts.append(_aia_ext(content.aia))
    sia_items = []
    if content.sia.ca_repository:
        sia_items.append((oids.AD_CA_REPOSITORY, content.sia.ca_repository))
    if content.sia.rpki_manifest:
        sia_items.append((oids.AD_RPKI_MANIFEST, content.sia.rpki_manifest))
    if content.sia.signed_object:
        sia_items.append((oids.AD_SIGNED_OBJECT, content.sia.signed_object))
    if content.sia.rpki_notify:
        sia_items.append((oids.AD_RPKI_NOTIFY, content.sia.rpki_notify))
    if sia_items:
        exts.append(_sia_ext(tuple(sia_items)))
    exts.append(_const_ext("policies"))
    if content.ip_resources is not None:
        if content.ip_resources is res.INHERIT:
            exts.append(_const_ext("ip-inherit", content.resources_critical))
        else:
            exts.append(
                _extension(oids.EXT_IP_RESOURCES, content.resources_critical, res.encode_ip_resources(content.ip_resources))
            )
    if content.as_resources is not None:
        if content.as_resources is res.INHERIT:
            exts.append(_const_ext("as-inherit", content.resources_critical))
        else:
            exts.append(
                _extension(oids.EXT_AS_RESOURCES, content.resources_critical, res.encode_as_resources(content.as_resources))
            )
    from ..der import raw

    return seq(
        explicit(0, integer(2)),
        integer(content.serial),
        _algid_sha256_rsa(),
        encode_name(content.issuer),
        seq(x509_time(content.not_before), x509_time(content.not_after)),
        encode_name(content.subject),
        raw(content.spki),  # SubjectPublicKeyInfo is already a complete TLV
        explicit(3, seq(*exts)),
    )


def build_certificate(content: CertContent, signer: keystore.KeyHandle) -> bytes:
    from ..der import raw

    tbs_der = der_encode(build_tbs(content))
    signature = keystore.sign(signer, tbs_der)
    return der_encode(seq(raw(tbs_der), _algid_sha256_rsa(), bit_string(signature)))


# ---------------------------------------------------------------------------
# parsing

_URI_METHODS = {
    oids.AD_CA_REPOSITORY: "ca_repository",
    oids.AD_RPKI_MANIFEST: "rpki_manifest",
    oids.AD_RPKI_NOTIFY: "rpki_notify",
    oids.AD_SIGNED_OBJECT: "signed_object",
}


def _tbs_field_offset(tbs: DerValue) -> int:
    """0 when the explicit version slot is present, else -1."""
    first = tbs.child(0)
    return 0 if (first.tag == 0x80 and first.constructed) else -1


def parse_certificate(data: bytes | DerValue) -> CertContent:
    """Parse into the content model; raises DerDecodeError when the shape is off."""
    tree = der_decode(data) if isinstance(data, (bytes, bytearray)) else data
    if len(tree.children) != 3:
        raise DerDecodeError("bad-certificate", 0, "expected 3 top-level fields")
    tbs = tree.child(0)
    off = _tbs_field_offset(tbs)
    serial = decode_integer(tbs.child(1 + off))
    issuer = decode_name(tbs.child(3 + off))
    validity = tbs.child(4 + off)
    subject = decode_name(tbs.child(5 + off))
    spki = der_encode(tbs.child(6 + off))
    content = CertContent(
        serial=serial,
        issuer=issuer,
        subject=subject,
        not_before=decode_time(validity.child(0)),
        not_after=decode_time(validity.child(1)),
        spki=spki,
        ski=b"",
        aki=None,
        is_ca=False,
        key_usage_critical=False,
        resources_critical=False,
    )
    for ext_node in _iter_extensions(tbs):
        ext_oid, critical, inner_bytes = ext_node
        if ext_oid == oids.EXT_BASIC_CONSTRAINTS:
            inner = der_decode(inner_bytes)
            content.is_ca = bool(inner.children and inner.child(0).content == b"\xff")
        elif ext_oid == oids.EXT_SUBJECT_KEY_ID:
            content.ski = bytes(der_decode(inner_bytes).content)
        elif ext_oid == oids.EXT_AUTHORITY_KEY_ID:
            inner = der_decode(inner_bytes)
            for kid in inner.children:
                if kid.tag == 0x80:
                    content.aki = bytes(kid.content)
        elif ext_oid == oids.EXT_KEY_USAGE:
            content.key_usage_critical = critical
        elif ext_oid == oids.EXT_CRL_DISTRIBUTION_POINTS:
            content.crl_dp = _first_uri_in(der_decode(inner_bytes))
        elif ext_oid == oids.EXT_AIA:
            content.aia = _access_uris(der_decode(inner_bytes)).get("ca_issuers")
        elif ext_oid == oids.EXT_SIA:
            uris = _access_uris(der_decode(inner_bytes))
            content.sia = SiaInfo(
                ca_repository=uris.get("ca_repository"),
                rpki_manifest=uris.get("rpki_manifest"),
                rpki_notify=uris.get("rpki_notify"),
                signed_object=uris.get("signed_object"),
            )
        elif ext_oid == oids.EXT_IP_RESOURCES:
            content.ip_resources = res.decode_ip_resources(der_decode(inner_bytes))
            content.resources_critical = critical
        elif ext_oid == oids.EXT_AS_RESOURCES:
            content.as_resources = res.decode_as_resources(der_decode(inner_bytes))
            content.resources_critical = critical
    return content


def _iter_extensions(tbs: DerValue):
    for child in tbs.children:
        if child.tag == 0x80 | 3 and child.constructed:
            for ext in child.child(0).children:
                kids = ext.children
                ext_oid = decode_oid(kids[0])
                critical = len(kids) == 3 and kids[1].content == b"\xff"
                value = kids[-1]
                yield ext_oid, critical, bytes(value.content)


def _first_uri_in(tree: DerValue) -> str | None:
    stack = [tree]
    while stack:
        node = stack.pop()
        if node.tag == 0x80 | 6 and not node.constructed:
            return bytes(node.content).decode("ascii", errors="replace")
        if node.constructed:
            stack.extend(reversed(node.children))
    return None


def _access_uris(tree: DerValue) -> dict[str, str]:
    out = {}
    for ad in tree.children:
        if not ad.constructed or len(ad.children) < 2:
            continue
        try:
            method = decode_oid(ad.child(0))
        except DerDecodeError:
            continue
        target = ad.child(1)
        if target.tag == 0x80 | 6 and not target.constructed:
            key = _URI_METHODS.get(method, "ca_issuers" if method == oids.AD_CA_ISSUERS else method)
            out[key] = bytes(target.content).decode("ascii", errors="replace")
    return out


def verify_certificate_signature(data: bytes, issuer_spki: bytes) -> bool:
    try:
        tree = der_decode(data)
        tbs_der = der_encode(tree.child(0))
        signature = bit_string_content(tree.child(2))
    except (DerDecodeError, IndexError, ValueError):
        return False
    return keystore.verify(issuer_spki, tbs_der, signature)


# ---------------------------------------------------------------------------
# replaceable-field location

@dataclass(frozen=True)
class FieldLoc:
    """Path to a node, optionally descending into DER nested in an OCTET STRING."""

    path: tuple[int, ...]
    inner_path: tuple[int, ...] | None = None


def tree_get(tree: DerValue, path: tuple[int, ...]) -> DerValue:
    node = tree
    for idx in path:
        node = node.child(idx)
    return node


def tree_replace(tree: DerValue, path: tuple[int, ...], new: DerValue) -> DerValue:
    if not path:
        return new
    head, rest = path[0], path[1:]
    return tree.replace_child(head, tree_replace(tree.child(head), rest, new))


def loc_get_bytes(tree: DerValue, loc: FieldLoc) -> bytes | None:
    try:
        node = tree_get(tree, loc.path)
        if loc.inner_path is None:
            return der_encode(node)
        inner = der_decode(bytes(node.content))
        return der_encode(tree_get(inner, loc.inner_path))
    except (DerDecodeError, IndexError, ValueError):
        return None


def loc_replace(tree: DerValue, loc: FieldLoc, new: DerValue) -> DerValue:
    if loc.inner_path is None:
        return tree_replace(tree, loc.path, new)
    node = tree_get(tree, loc.path)
    inner = der_decode(bytes(node.content))
    inner = tree_replace(inner, loc.inner_path, new)
    return tree_replace(tree, loc.path, DerValue(node.tag, False, der_encode(inner)))


class CertFieldIndex:
    """Field locators for one parsed certificate tree.

    Lookups are best-effort: a field that is absent or unrecognizable simply
    has no locator, which the replacement strategies treat as unreplaceable.
    """

    FIELDS = (
        "signature",
        "parentKeyIdentifier",
        "crlLocation",
        "issuerName",
        "issuerLocation",
        "repositoryLocation",
        "manifestLocation",
        "notificationLocation",
    )

    def __init__(self, tree: DerValue):
        self.tree = tree
        self.locs: dict[str, FieldLoc] = {}
        try:
            self._index()
        except (DerDecodeError, IndexError, ValueError):
            pass

    def _index(self):
        if not self.tree.constructed or len(self.tree.children) < 3:
            return
        self.locs["signature"] = FieldLoc((2,))
        tbs = self.tree.child(0)
        if not tbs.constructed:
            return
        off = _tbs_field_offset(tbs)
        if len(tbs.children) > 3 + off:
            self.locs["issuerName"] = FieldLoc((0, 3 + off))
        for i, child in enumerate(tbs.children):
            if child.tag == 0x80 | 3 and child.constructed and child.children:
                self._index_extensions((0, i, 0), child.child(0))

    def _index_extensions(self, base: tuple[int, ...], ext_list: DerValue):
        for j, ext in enumerate(ext_list.children):
            if not ext.constructed or not ext.children:
                continue
            try:
                ext_oid = decode_oid(ext.child(0))
            except DerDecodeError:
                continue
            value_idx = len(ext.children) - 1
            value_path = base + (j, value_idx)
            value_node = ext.child(value_idx)
            if value_node.constructed:
                continue
            try:
                inner = der_decode(bytes(value_node.content))
            except DerDecodeError:
                continue
            if ext_oid == oids.EXT_AUTHORITY_KEY_ID:
                for k, kid in enumerate(inner.children) if inner.constructed else []:
                    if kid.tag == 0x80 and not kid.constructed:
                        self.locs["parentKeyIdentifier"] = FieldLoc(value_path, (k,))
            elif ext_oid == oids.EXT_CRL_DISTRIBUTION_POINTS:
                path = self._find_uri_path(inner)
                if path is not None:
                    self.locs["crlLocation"] = FieldLoc(value_path, path)
            elif ext_oid == oids.EXT_AIA:
                path = self._find_uri_path(inner)
                if path is not None:
                    self.locs["issuerLocation"] = FieldLoc(value_path, path)
            elif ext_oid == oids.EXT_SIA and inner.constructed:
                for k, ad in enumerate(inner.children):
                    if not ad.constructed or len(ad.children) < 2:
                        continue
                    try:
                        method = decode_oid(ad.child(0))
                    except DerDecodeError:
                        continue
                    slot = {
                        oids.AD_CA_REPOSITORY: "repositoryLocation",
                        oids.AD_RPKI_MANIFEST: "manifestLocation",
                        oids.AD_RPKI_NOTIFY: "notificationLocation",
                    }.get(method)
                    if slot:
                        self.locs[slot] = FieldLoc(value_path, (k, 1))

    @staticmethod
    def _find_uri_path(tree: DerValue) -> tuple[int, ...] | None:
        def walk(node: DerValue, path: tuple[int, ...]):
            if node.tag == 0x80 | 6 and not node.constructed:
                return path
            if node.constructed:
                for i, child in enumerate(node.children):
                    found = walk(child, path + (i,))
                    if found is not None:
                        return found
            return None

        return walk(tree, ())

    def get_bytes(self, name: str) -> bytes | None:
        loc = self.locs.get(name)
        return loc_get_bytes(self.tree, loc) if loc else None

    def replace(self, name: str, new: DerValue) -> bool:
        loc = self.locs.get(name)
        if not loc:
            return False
        self.tree = loc_replace(self.tree, loc, new)
        return True
