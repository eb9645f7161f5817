"""The stub validator engine.

Processing order mirrors deployed relying parties: load trust anchors, fetch
the root certificate, walk RRDP (notification, snapshot), check manifest
integrity per CA, then validate each listed object's signature chain and
content before emitting VRPs.  Rejections are logged, never fatal; the process
only dies through the explicit fault-injection hooks.
"""

from __future__ import annotations

import datetime
import logging
import urllib.request
from dataclasses import dataclass, field

from .. import oids
from ..der import (
    DerDecodeError,
    der_decode,
    der_encode,
    bit_string_content,
    decode_integer,
    null,
    octet_string,
    oid as mkoid,
    seq,
)
from ..keystore import sha256
from ..objects import resources as res
from ..objects.cert import CertContent, parse_certificate
from ..objects.cms import SignedObject, parse_signed_object
from ..objects.crl import parse_crl
from ..objects.manifest import decode_manifest_econtent
from ..objects.gbr import parse_vcard
from ..objects.aspa import decode_aspa_econtent
from ..objects.roa import decode_roa_econtent
from ..objects.rrdp import parse_rrdp
from ..objects.tal import parse_tal

log = logging.getLogger("stubrp")

MAX_V4 = 24  # BGP-propagatable prefix bounds used by the overlong-drop quirk
MAX_V6 = 48


# ---------------------------------------------------------------------------
# independent RSA PKCS#1 v1.5 / SHA-256 verification (plain modular arithmetic)

def rsa_verify_sha256(spki_der: bytes, message: bytes, signature: bytes) -> bool:
    try:
        spki = der_decode(spki_der)
        pub = der_decode(bit_string_content(spki.child(1)))
        n = decode_integer(pub.child(0))
        e = decode_integer(pub.child(1))
        k = (n.bit_length() + 7) // 8
        if len(signature) != k or n <= 0:
            return False
        em = pow(int.from_bytes(signature, "big"), e, n).to_bytes(k, "big")
        digest_info = der_encode(
            seq(seq(mkoid(oids.SHA256), null()), octet_string(sha256(message)))
        )
        padding = b"\xff" * (k - len(digest_info) - 3)
        return em == b"\x00\x01" + padding + b"\x00" + digest_info
    except (DerDecodeError, IndexError, ValueError, OverflowError):
        return False


def check_path(path: str) -> bool:
    """Publish-URI path filter: no '.' or '..' segments, empty only at the end."""
    items = path.split("/")
    for i, item in enumerate(items):
        if item == "":
            return len(items[i + 1 :]) == 0
        if item in ("..", "."):
            return False
    return True


# ---------------------------------------------------------------------------
# fetching over the hosts-override map

class Fetcher:
    def __init__(self, hosts_map: dict[str, str] | None = None, timeout: float = 10.0):
        self.hosts = hosts_map or {}
        self.timeout = timeout

    def fetch(self, uri: str) -> bytes:
        scheme, _, rest = uri.partition("://")
        host, _, path = rest.partition("/")
        base = self.hosts.get(host.split(":")[0])
        if base is None:
            target = uri
            headers = {}
        else:
            target = f"{base}/{path}"
            headers = {"Host": host}
        req = urllib.request.Request(target, headers=headers)
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            return resp.read()


# ---------------------------------------------------------------------------
# validator

@dataclass
class FaultInjection:
    pattern: bytes | None = None
    mode: str = "exit"  # exit | silent | hang


class StubCrash(Exception):
    """Raised when fault injection triggers; the CLI converts it to a death."""

    def __init__(self, mode: str):
        self.mode = mode
        super().__init__(f"injected crash ({mode})")


@dataclass
class ValidationRun:
    vrps: set = field(default_factory=set)
    rejected: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


class StubValidator:
    def __init__(
        self,
        quirks: frozenset[str] = frozenset(),
        fetcher: Fetcher | None = None,
        now: datetime.datetime | None = None,
        fault: FaultInjection | None = None,
    ):
        self.quirks = quirks
        self.fetcher = fetcher or Fetcher()
        self.now = now or datetime.datetime.now(datetime.timezone.utc)
        self.fault = fault or FaultInjection()
        self._snapshot_cache: dict[str, dict[str, bytes] | None] = {}
        self._seen_serials: set[tuple[bytes, int]] = set()

    # -- helpers -----------------------------------------------------------

    def _reject(self, run: ValidationRun, what: str, why: str):
        run.rejected.append(f"{what}: {why}")
        log.info("reject %s: %s", what, why)

    def _check_fault(self, data: bytes):
        if self.fault.pattern and self.fault.pattern in data:
            raise StubCrash(self.fault.mode)

    def _time_ok(self, not_before, not_after) -> bool:
        return not_before <= self.now <= not_after

    # -- entry -----------------------------------------------------------------

    def run(self, tal_blobs: list[bytes]) -> ValidationRun:
        run = ValidationRun()
        for blob in tal_blobs:
            try:
                tal = parse_tal(blob)
            except (ValueError, UnicodeDecodeError) as exc:
                self._reject(run, "tal", f"unparseable: {exc}")
                continue
            self._validate_ta(run, tal)
        return run

    def _validate_ta(self, run: ValidationRun, tal):
        cert_bytes = None
        for uri in tal.uris:
            try:
                cert_bytes = self.fetcher.fetch(uri)
                break
            except Exception as exc:  # noqa: BLE001 -- network errors are data here
                self._reject(run, uri, f"fetch failed: {exc}")
        if cert_bytes is None:
            return
        self._check_fault(cert_bytes)
        try:
            cert = parse_certificate(cert_bytes)
        except (DerDecodeError, IndexError, ValueError) as exc:
            self._reject(run, "trust anchor", f"unparseable: {exc}")
            return
        spki = self._cert_spki(cert_bytes)
        if spki != tal.spki:
            self._reject(run, "trust anchor", "SPKI does not match TAL")
            return
        if not self._verify_cert_sig(cert_bytes, spki):
            self._reject(run, "trust anchor", "self-signature invalid")
            return
        if not cert.is_ca or cert.ip_resources is None and cert.as_resources is None:
            self._reject(run, "trust anchor", "not a CA with resources")
            return
        if not self._time_ok(cert.not_before, cert.not_after):
            self._reject(run, "trust anchor", "outside validity window")
            return
        holdings = cert.ip_resources if cert.ip_resources not in (None, res.INHERIT) else []
        store = self._store_for(run, cert.sia.rpki_notify)
        if store is None:
            return
        self._validate_ca(run, cert, cert_bytes, store, holdings)

    # -- RRDP ---------------------------------------------------------------------

    def _store_for(self, run: ValidationRun, notify_uri: str | None) -> dict[str, bytes] | None:
        if not notify_uri:
            self._reject(run, "trust anchor", "no notification URI in SIA")
            return None
        if notify_uri in self._snapshot_cache:
            return self._snapshot_cache[notify_uri]
        store = self._fetch_snapshot(run, notify_uri)
        self._snapshot_cache[notify_uri] = store
        return store

    def _fetch_snapshot(self, run: ValidationRun, notify_uri: str) -> dict[str, bytes] | None:
        try:
            notif_bytes = self.fetcher.fetch(notify_uri)
            notif = parse_rrdp(notif_bytes)
        except Exception as exc:  # noqa: BLE001
            self._reject(run, notify_uri, f"notification unusable: {exc}")
            return None
        if notif.kind != "notification" or not notif.snapshot_uri:
            self._reject(run, notify_uri, "not a notification document")
            return None
        try:
            snap_bytes = self.fetcher.fetch(notif.snapshot_uri)
        except Exception as exc:  # noqa: BLE001
            self._reject(run, notif.snapshot_uri, f"snapshot fetch failed: {exc}")
            return None
        if sha256(snap_bytes).hex() != (notif.snapshot_hash or "").lower():
            self._reject(run, notif.snapshot_uri, "snapshot hash mismatch")
            return None
        try:
            snap = parse_rrdp(snap_bytes)
        except Exception as exc:  # noqa: BLE001
            self._reject(run, notif.snapshot_uri, f"snapshot unparseable: {exc}")
            return None
        if snap.kind != "snapshot":
            self._reject(run, notif.snapshot_uri, "not a snapshot document")
            return None
        if snap.session_id != notif.session_id or snap.serial != notif.serial:
            if "tolerate-session-mismatch" not in self.quirks:
                self._reject(run, notif.snapshot_uri, "session/serial mismatch with notification")
                return None
            run.notes.append("session mismatch tolerated")
        store: dict[str, bytes] = {}
        for uri, content in snap.publishes:
            _, _, rest = uri.partition("://")
            _, _, path = rest.partition("/")
            if not check_path(path):
                self._reject(run, uri, "path traversal segment in publish URI")
                continue
            self._check_fault(content)
            store[uri] = content
        return store

    # -- CA recursion -------------------------------------------------------------

    def _validate_ca(self, run: ValidationRun, ca_cert: CertContent, ca_bytes: bytes, store, holdings):
        ca_spki = self._cert_spki(ca_bytes)
        label = ca_cert.sia.ca_repository or "ca"
        mft_uri = ca_cert.sia.rpki_manifest
        if not mft_uri or mft_uri not in store:
            self._reject(run, label, "manifest missing")
            return
        mft_blob = store[mft_uri]
        so = self._validate_signed(run, mft_uri, mft_blob, ca_spki, ca_cert)
        if so is None:
            return
        if so.econtent_type != oids.CT_MANIFEST:
            self._reject(run, mft_uri, "wrong eContentType for manifest")
            return
        try:
            mft = decode_manifest_econtent(so.econtent)
        except (DerDecodeError, IndexError, ValueError) as exc:
            self._reject(run, mft_uri, f"manifest content unparseable: {exc}")
            return
        if not (mft.this_update <= self.now <= mft.next_update):
            self._reject(run, mft_uri, "manifest outside validity window")
            return
        # RP MUST NOT treat EE validity misalignment with this/nextUpdate as an error
        if not self._check_crl(run, ca_cert, ca_spki, so, mft, store, label):
            return
        repo = ca_cert.sia.ca_repository or ""
        for name, digest in sorted(mft.file_list):
            uri = repo + name
            data = store.get(uri)
            if data is None:
                self._reject(run, uri, "listed in manifest but absent")
                continue
            if sha256(data) != digest:
                self._reject(run, uri, "hash mismatch with manifest")
                continue
            if name.endswith(".crl"):
                continue  # handled above
            if name.endswith(".cer"):
                self._validate_child_cert(run, uri, data, ca_cert, ca_spki, store, holdings)
            elif name.endswith((".roa", ".asa", ".gbr")):
                self._validate_payload(run, uri, data, ca_cert, ca_spki, holdings)
            else:
                run.notes.append(f"{uri}: unknown extension, ignored")

    def _check_crl(self, run, ca_cert, ca_spki, mft_so, mft, store, label) -> bool:
        crl_uri = None
        ee = self._parse_ee(mft_so)
        if ee is not None and ee.crl_dp:
            crl_uri = ee.crl_dp
        if crl_uri is None or crl_uri not in store:
            crl_names = [n for n, _ in mft.file_list if n.endswith(".crl")]
            if crl_names:
                crl_uri = (ca_cert.sia.ca_repository or "") + crl_names[0]
        data = store.get(crl_uri or "")
        if data is None:
            self._reject(run, label, "CRL missing")
            return False
        self._check_fault(data)
        try:
            crl = parse_crl(data)
        except (DerDecodeError, IndexError, ValueError) as exc:
            self._reject(run, crl_uri, f"CRL unparseable: {exc}")
            return False
        tolerate_fields = "tolerate-missing-crl-fields" in self.quirks
        if crl.signature is None or not crl.has_signature_alg:
            if not tolerate_fields:
                self._reject(run, crl_uri, "CRL missing signature or signatureAlgorithm")
                return False
            run.notes.append("CRL missing signature fields tolerated")
        elif not self._verify_crl_sig(data, ca_spki):
            self._reject(run, crl_uri, "CRL signature invalid")
            return False
        if crl.issuer is None:
            if not tolerate_fields:
                self._reject(run, crl_uri, "CRL missing issuer")
                return False
            run.notes.append("CRL missing issuer tolerated")
        elif tuple(crl.issuer) != tuple(ca_cert.subject):
            self._reject(run, crl_uri, "CRL issuer does not match CA")
            return False
        if crl.aki is None:
            self._reject(run, crl_uri, "CRL missing Authority Key Identifier")
            return False
        if crl.crl_number is None:
            if "tolerate-missing-crl-number" not in self.quirks:
                self._reject(run, crl_uri, "CRL missing CRL Number extension")
                return False
            run.notes.append("missing CRL number tolerated")
        if crl.next_update < self.now:
            if "tolerate-expired-crl" not in self.quirks:
                self._reject(run, label, "CRL expired; manifest content dropped")
                return False
            run.notes.append("expired CRL tolerated")
        revoked = {serial for serial, _ in crl.revoked}
        if ee is not None and ee.serial in revoked:
            self._reject(run, label, "manifest EE certificate revoked")
            return False
        return True

    def _validate_child_cert(self, run, uri, data, parent_cert, parent_spki, store, parent_holdings):
        self._check_fault(data)
        try:
            cert = parse_certificate(data)
        except (DerDecodeError, IndexError, ValueError) as exc:
            self._reject(run, uri, f"certificate unparseable: {exc}")
            return
        if not self._verify_cert_sig(data, parent_spki):
            self._reject(run, uri, "certificate signature invalid")
            return
        if not cert.is_ca:
            self._reject(run, uri, "child certificate not a CA")
            return
        if not self._time_ok(cert.not_before, cert.not_after):
            self._reject(run, uri, "certificate outside validity window")
            return
        key = (sha256(der_encode(der_decode(parent_spki))), cert.serial)
        if key in self._seen_serials:
            if "tolerate-duplicate-serial" not in self.quirks:
                self._reject(run, uri, "duplicate certificate serial for issuer")
                return
            run.notes.append(f"{uri}: duplicate serial tolerated")
        self._seen_serials.add(key)
        if not cert.key_usage_critical or not cert.resources_critical:
            if "tolerate-noncritical-certext" not in self.quirks:
                self._reject(run, uri, "keyUsage/resource extensions not critical")
                return
            run.notes.append(f"{uri}: non-critical extensions tolerated")
        holdings = self._resolve_holdings(cert.ip_resources, parent_holdings)
        if cert.ip_resources not in (None, res.INHERIT):
            if not res.prefixes_covered(
                [p for fam, plist in cert.ip_resources if plist is not res.INHERIT for p in plist if isinstance(p, res.Prefix)],
                parent_holdings,
            ):
                self._reject(run, uri, "IP resources exceed parent holdings")
                return
        if cert.sia.rpki_notify and parent_cert.sia.rpki_notify != cert.sia.rpki_notify:
            substore = self._store_for(run, cert.sia.rpki_notify)
            if substore is None:
                return
            self._validate_ca(run, cert, data, substore, holdings)
        else:
            self._validate_ca(run, cert, data, store, holdings)

    def _resolve_holdings(self, ip_resources, parent_holdings):
        if ip_resources in (None, res.INHERIT):
            return parent_holdings
        out = []
        for fam, plist in ip_resources:
            if plist is res.INHERIT:
                out.extend([(f, ps) for f, ps in parent_holdings if f == fam] if isinstance(parent_holdings, list) else [])
            else:
                out.append((fam, plist))
        return out

    # -- signed objects ------------------------------------------------------------

    def _parse_ee(self, so: SignedObject) -> CertContent | None:
        try:
            return parse_certificate(so.ee_cert_der)
        except (DerDecodeError, IndexError, ValueError):
            return None

    def _validate_signed(self, run, uri, data, ca_spki, ca_cert) -> SignedObject | None:
        self._check_fault(data)
        try:
            so = parse_signed_object(data)
        except (DerDecodeError, IndexError, ValueError) as exc:
            self._reject(run, uri, f"CMS unparseable: {exc}")
            return None
        if so.message_digest != sha256(so.econtent):
            self._reject(run, uri, "messageDigest does not match eContent")
            return None
        ee_spki = self._cert_spki(so.ee_cert_der)
        if ee_spki is None or not rsa_verify_sha256(ee_spki, so.signed_attrs_der, so.signature):
            self._reject(run, uri, "CMS signature invalid")
            return None
        if not self._verify_cert_sig(so.ee_cert_der, ca_spki):
            self._reject(run, uri, "EE certificate not signed by CA")
            return None
        ee = self._parse_ee(so)
        if ee is None:
            self._reject(run, uri, "EE certificate unparseable")
            return None
        if not self._time_ok(ee.not_before, ee.not_after):
            self._reject(run, uri, "EE certificate outside validity window")
            return None
        if ee.aki is not None and ca_cert.ski and ee.aki != ca_cert.ski:
            self._reject(run, uri, "EE AKI does not match CA key")
            return None
        if "reject-nonstandard-issuer-attrs" in self.quirks:
            allowed = {oids.AT_COMMON_NAME, oids.AT_SERIAL_NUMBER}
            if any(attr.attr_type not in allowed for attr in ee.issuer):
                self._reject(run, uri, "issuer attribute type outside CommonName/serialNumber")
                return None
        return so

    def _validate_payload(self, run, uri, data, ca_cert, ca_spki, holdings):
        so = self._validate_signed(run, uri, data, ca_spki, ca_cert)
        if so is None:
            return
        if uri.endswith(".roa"):
            self._validate_roa(run, uri, so, holdings)
        elif uri.endswith(".asa"):
            try:
                aspa = decode_aspa_econtent(so.econtent)
            except (DerDecodeError, IndexError, ValueError) as exc:
                self._reject(run, uri, f"ASPA content unparseable: {exc}")
                return
            if any(a >= b for a, b in zip(aspa.provider_as_ids, aspa.provider_as_ids[1:])):
                self._reject(run, uri, "ASPA providers not strictly increasing")
        elif uri.endswith(".gbr"):
            try:
                parse_vcard(so.econtent)
            except ValueError as exc:
                self._reject(run, uri, f"vCard invalid: {exc}")

    def _validate_roa(self, run, uri, so: SignedObject, holdings):
        if so.econtent_type != oids.CT_ROA:
            self._reject(run, uri, "wrong eContentType for ROA")
            return
        try:
            roa = decode_roa_econtent(so.econtent)
        except (DerDecodeError, IndexError, ValueError) as exc:
            self._reject(run, uri, f"ROA content unparseable: {exc}")
            return
        ee = self._parse_ee(so)
        if ee is None:
            self._reject(run, uri, "EE certificate unparseable")
            return
        if "reject-repeated-family" in self.quirks:
            families = [b.family for b in roa.blocks]
            if len(families) != len(set(families)):
                self._reject(run, uri, "repeated address family in ipAddrBlocks")
                return
        if ee.as_resources is res.INHERIT and "reject-asid-inherit" in self.quirks:
            self._reject(run, uri, "AS-ID inheritance in EE certificate")
            return
        ee_holdings = self._resolve_holdings(ee.ip_resources, holdings)
        vrps = set()
        for block in roa.blocks:
            family_bits = 32 if block.family == res.AFI_IPV4 else 128
            for rp in block.prefixes:
                if rp.max_length_malformed:
                    if "tolerate-bad-maxlength" not in self.quirks:
                        self._reject(run, uri, "maxLength not a parseable integer")
                        return
                    run.notes.append(f"{uri}: malformed maxLength tolerated")
                max_len = rp.vrp_max_length()
                if not rp.prefix.length <= max_len <= family_bits:
                    self._reject(run, uri, f"maxLength {max_len} outside [{rp.prefix.length}, {family_bits}]")
                    return
                if "drop-overlong-prefix" in self.quirks:
                    limit = MAX_V4 if block.family == res.AFI_IPV4 else MAX_V6
                    if rp.prefix.length > limit:
                        run.notes.append(f"{uri}: prefix {rp.prefix} longer than /{limit} dropped")
                        continue
                if not res.prefixes_covered([rp.prefix], ee_holdings):
                    self._reject(run, uri, f"prefix {rp.prefix} outside EE resources")
                    return
                vrps.add((roa.as_id, str(rp.prefix), max_len))
        run.vrps |= vrps

    # -- low-level cert helpers -------------------------------------------------------

    @staticmethod
    def _cert_spki(cert_der: bytes) -> bytes | None:
        try:
            tree = der_decode(cert_der)
            tbs = tree.child(0)
            off = 0 if (tbs.child(0).tag == 0x80 and tbs.child(0).constructed) else -1
            return der_encode(tbs.child(6 + off))
        except (DerDecodeError, IndexError, ValueError):
            return None

    @staticmethod
    def _verify_cert_sig(cert_der: bytes, issuer_spki: bytes | None) -> bool:
        if issuer_spki is None:
            return False
        try:
            tree = der_decode(cert_der)
            tbs_der = der_encode(tree.child(0))
            signature = bit_string_content(tree.child(2))
        except (DerDecodeError, IndexError, ValueError):
            return False
        return rsa_verify_sha256(issuer_spki, tbs_der, signature)

    @staticmethod
    def _verify_crl_sig(crl_der: bytes, issuer_spki: bytes) -> bool:
        try:
            tree = der_decode(crl_der)
            if len(tree.children) < 2 or tree.children[-1].tag != 0x03:
                return False
            tbs_der = der_encode(tree.child(0))
            signature = bit_string_content(tree.children[-1])
        except (DerDecodeError, IndexError, ValueError):
            return False
        return rsa_verify_sha256(issuer_spki, tbs_der, signature)
