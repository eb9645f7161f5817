"""Parameter-driven construction of well-formed RPKI objects.

Everything here is the benign baseline: certificate authorities with
consistent URI wiring, payload objects wrapped in fresh one-off EE
certificates, manifests whose hashes match the files they list.  Mutation and
scaffolding start from these and depart deliberately.
"""

from __future__ import annotations

import datetime
import struct
import threading
from dataclasses import dataclass, field

from . import keystore, oids
from .keystore import KeyHandle
from .objects import cert as certmod
from .objects import crl as crlmod
from .objects.aspa import AspaContent, encode_aspa_econtent
from .objects.cert import CertContent, SiaInfo, build_certificate
from .objects.cms import cms_assemble
from .objects.gbr import GbrContent, render_vcard
from .objects.manifest import ManifestContent, encode_manifest_econtent
from .objects.names import NameAttr, common_name
from .objects.resources import INHERIT, AsRange, Prefix
from .objects.roa import RoaContent, encode_roa_econtent

DEFAULT_VALIDITY = datetime.timedelta(days=7)
CLOCK_SKEW_GUARD = datetime.timedelta(minutes=5)
MFT_CRL_WINDOW = datetime.timedelta(hours=24)

ALL_IPV4 = [(1, [Prefix.parse("0.0.0.0/0")])]
ALL_RESOURCES_IP = [(1, [Prefix.parse("0.0.0.0/0")]), (2, [Prefix.parse("::/0")])]
ALL_RESOURCES_AS = [AsRange(0, 4294967295)]


def utcnow() -> datetime.datetime:
    return datetime.datetime.now(datetime.timezone.utc).replace(microsecond=0)


@dataclass
class CaIdentity:
    """One certificate authority: its key, URIs, and issued-serial state."""

    name: str
    key: KeyHandle
    domain: str
    repo_uri: str
    mft_uri: str
    crl_uri: str
    notify_uri: str
    cert_uri: str
    parent: "CaIdentity | None" = None
    cert_bytes: bytes | None = None
    cert: CertContent | None = None
    subject_attrs: tuple[NameAttr, ...] = ()
    _serial: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @classmethod
    def create(
        cls,
        name: str,
        key: KeyHandle,
        domain: str,
        parent: "CaIdentity | None" = None,
        subject_attrs: tuple[NameAttr, ...] | None = None,
    ) -> "CaIdentity":
        repo_uri = f"rsync://{domain}/repo/{name}/"
        if parent is None:
            cert_uri = f"https://{domain}/{name}.cer"
        else:
            cert_uri = f"{parent.repo_uri}{name}.cer"
        return cls(
            name=name,
            key=key,
            domain=domain,
            repo_uri=repo_uri,
            mft_uri=f"{repo_uri}{name}.mft",
            crl_uri=f"{repo_uri}{name}.crl",
            notify_uri=f"https://{domain}/notification.xml",
            cert_uri=cert_uri,
            parent=parent,
            subject_attrs=tuple(subject_attrs) if subject_attrs else common_name(name),
        )

    def next_serial(self, override: int | None = None) -> int:
        if override is not None:
            return override
        with self._lock:
            self._serial += 1
            return self._serial

    @property
    def subject_dn(self) -> tuple[NameAttr, ...]:
        return self.subject_attrs

    @property
    def issuer_dn_for_children(self) -> tuple[NameAttr, ...]:
        return self.subject_attrs


def make_ca_cert(
    subject: CaIdentity,
    issuer: CaIdentity | None,
    ip_resources=INHERIT,
    as_resources=INHERIT,
    not_before: datetime.datetime | None = None,
    not_after: datetime.datetime | None = None,
    serial: int | None = None,
    *,
    key_usage_critical: bool = True,
    resources_critical: bool = True,
    now: datetime.datetime | None = None,
) -> tuple[CertContent, bytes]:
    """CA certificate signed by `issuer` (self-signed root when issuer is None)."""
    now = now or utcnow()
    if ip_resources is None and as_resources is None:
        raise ValueError("CA certificate needs resources or an inherit marker")
    signer = issuer or subject
    content = CertContent(
        serial=signer.next_serial(serial),
        issuer=signer.subject_dn,
        subject=subject.subject_dn,
        not_before=not_before or (now - CLOCK_SKEW_GUARD),
        not_after=not_after or (now + DEFAULT_VALIDITY),
        spki=subject.key.spki,
        ski=subject.key.key_id,
        aki=signer.key.key_id,
        is_ca=True,
        sia=SiaInfo(
            ca_repository=subject.repo_uri,
            rpki_manifest=subject.mft_uri,
            rpki_notify=subject.notify_uri,
        ),
        crl_dp=None if issuer is None else issuer.crl_uri,
        aia=None if issuer is None else issuer.cert_uri,
        ip_resources=ip_resources,
        as_resources=as_resources,
        key_usage_critical=key_usage_critical,
        resources_critical=resources_critical,
    )
    data = build_certificate(content, signer.key)
    subject.cert, subject.cert_bytes = content, data
    return content, data


def make_ee_cert(
    issuer: CaIdentity,
    one_off_key: KeyHandle,
    signed_object_uri: str,
    not_before: datetime.datetime | None = None,
    not_after: datetime.datetime | None = None,
    serial: int | None = None,
    *,
    ip_resources=INHERIT,
    as_resources=None,
    subject: tuple[NameAttr, ...] | None = None,
    now: datetime.datetime | None = None,
) -> tuple[CertContent, bytes]:
    """One-off end-entity certificate for a single signed object."""
    now = now or utcnow()
    serial = issuer.next_serial(serial)
    content = CertContent(
        serial=serial,
        issuer=issuer.issuer_dn_for_children,
        subject=subject or common_name(f"{issuer.name}-ee-{serial}"),
        not_before=not_before or (now - CLOCK_SKEW_GUARD),
        not_after=not_after or (now + DEFAULT_VALIDITY),
        spki=one_off_key.spki,
        ski=one_off_key.key_id,
        aki=issuer.key.key_id,
        is_ca=False,
        sia=SiaInfo(signed_object=signed_object_uri),
        crl_dp=issuer.crl_uri,
        aia=issuer.cert_uri,
        ip_resources=ip_resources,
        as_resources=as_resources,
    )
    return content, build_certificate(content, issuer.key)


def make_roa(
    issuer: CaIdentity,
    as_id: int,
    prefixes,
    ee_key: KeyHandle,
    *,
    object_uri: str | None = None,
    roa_content: RoaContent | None = None,
    ee_kwargs: dict | None = None,
    now: datetime.datetime | None = None,
) -> bytes:
    """CMS-wrapped ROA; prefixes is a list of prefix strings or (prefix, maxLen)."""
    if roa_content is None:
        if not prefixes:
            raise ValueError("ROA needs at least one prefix")
        roa_content = RoaContent.from_prefixes(as_id, prefixes)
    econtent = encode_roa_econtent(roa_content)
    uri = object_uri or f"{issuer.repo_uri}roa-{as_id}.roa"
    _, ee_der = make_ee_cert(issuer, ee_key, uri, now=now, **(ee_kwargs or {}))
    return cms_assemble(oids.CT_ROA, econtent, ee_der, ee_key, ee_spki=ee_key.spki)


def make_manifest(
    issuer: CaIdentity,
    file_list: list[tuple[str, bytes]],
    this_update: datetime.datetime,
    next_update: datetime.datetime,
    manifest_number: int,
    ee_key: KeyHandle,
    *,
    ee_not_before: datetime.datetime | None = None,
    ee_not_after: datetime.datetime | None = None,
    econtent_override: bytes | None = None,
) -> bytes:
    """Signed manifest; the EE validity tracks this/nextUpdate unless overridden."""
    econtent = econtent_override or encode_manifest_econtent(
        ManifestContent(manifest_number, this_update, next_update, list(file_list))
    )
    _, ee_der = make_ee_cert(
        issuer,
        ee_key,
        issuer.mft_uri,
        not_before=ee_not_before or this_update,
        not_after=ee_not_after or next_update,
        ip_resources=INHERIT,
        as_resources=INHERIT,
    )
    return cms_assemble(oids.CT_MANIFEST, econtent, ee_der, ee_key, ee_spki=ee_key.spki)


def make_crl(
    issuer: CaIdentity,
    revoked_serials: list[tuple[int, datetime.datetime]] | None,
    this_update: datetime.datetime,
    next_update: datetime.datetime,
    crl_number: int | None = 1,
    *,
    include_aki: bool = True,
    omit_issuer: bool = False,
    omit_signature_alg: bool = False,
    omit_signature: bool = False,
) -> bytes:
    return crlmod.build_crl(
        issuer.subject_dn,
        issuer.key,
        this_update,
        next_update,
        revoked=revoked_serials,
        crl_number=crl_number,
        aki=issuer.key.key_id if include_aki else None,
        omit_issuer=omit_issuer,
        omit_signature_alg=omit_signature_alg,
        omit_signature=omit_signature,
    )


def make_gbr(
    issuer: CaIdentity,
    gbr: GbrContent,
    ee_key: KeyHandle,
    *,
    object_uri: str | None = None,
    now: datetime.datetime | None = None,
) -> bytes:
    uri = object_uri or f"{issuer.repo_uri}contact.gbr"
    _, ee_der = make_ee_cert(
        issuer, ee_key, uri, ip_resources=INHERIT, as_resources=INHERIT, now=now
    )
    return cms_assemble(oids.CT_GBR, render_vcard(gbr), ee_der, ee_key, ee_spki=ee_key.spki)


def make_aspa(
    issuer: CaIdentity,
    customer_as: int,
    provider_as_ids,
    ee_key: KeyHandle,
    *,
    object_uri: str | None = None,
    now: datetime.datetime | None = None,
) -> bytes:
    aspa = AspaContent(customer_as, tuple(sorted(set(provider_as_ids))))
    uri = object_uri or f"{issuer.repo_uri}as{customer_as}.asa"
    _, ee_der = make_ee_cert(
        issuer, ee_key, uri, ip_resources=None, as_resources=INHERIT, now=now
    )
    return cms_assemble(oids.CT_ASPA, encode_aspa_econtent(aspa), ee_der, ee_key, ee_spki=ee_key.spki)


# ---------------------------------------------------------------------------
# RTR probe PDUs

RTR_PDU_TYPES = {
    "serial-notify": 0,
    "serial-query": 1,
    "reset-query": 2,
    "cache-response": 3,
    "end-of-data": 7,
    "cache-reset": 8,
    "error-report": 10,
}


def make_rtr_pdu(kind: str, declared_length: int, actual_payload_length: int) -> bytes:
    """RTR v1 header plus a zero payload; the length field may lie on purpose."""
    pdu_type = RTR_PDU_TYPES[kind] if isinstance(kind, str) else int(kind)
    declared = min(max(declared_length, 0), 0xFFFFFFFF)
    header = struct.pack(">BBHI", 1, pdu_type, 0, declared)
    return header + b"\x00" * actual_payload_length


__all__ = [
    "CaIdentity",
    "make_ca_cert",
    "make_ee_cert",
    "make_roa",
    "make_manifest",
    "make_crl",
    "make_gbr",
    "make_aspa",
    "make_rtr_pdu",
    "RTR_PDU_TYPES",
    "utcnow",
    "ALL_RESOURCES_IP",
    "ALL_RESOURCES_AS",
]
