"""Wrap arbitrary test objects in complete, validly signed repositories.

Payload objects get a fresh EE certificate and CMS envelope; certificates and
CRLs pass through a replacement strategy that overwrites only the
repository-dependent fields the strategy selects, then re-signs as needed.
Object kinds that are singletons per CA (manifest, CRL, certificate) or per
publication point (notification, snapshot, delta) fan out into fresh CAs or
domains.  Every test-carrying CA also receives a benign marker ROA with a
unique prefix so each validator's VRP output maps back to accepted and
rejected test objects.

Auxiliary material (root CA, TAL, per-slot markers, unchanged manifests) is
cached across batches and only re-signed when the content it covers changes.
"""

from __future__ import annotations

import datetime
import logging
import math
import random
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import keystore, oids
from .der import DerDecodeError, DerValue, bit_string, der_decode, der_encode, octet_string, seq
from .factory import (
    ALL_RESOURCES_AS,
    ALL_RESOURCES_IP,
    CaIdentity,
    make_ca_cert,
    make_crl,
    make_ee_cert,
    make_manifest,
    make_roa,
    utcnow,
)
from .fields import CRL_FIELDS, NONE_URI, REPLACEABLE_FIELDS, ReplacementStrategy
from .keystore import KeyPool
from .mutation import EXT_BY_KIND, TestObject
from .objects.cert import CertFieldIndex, build_certificate
from .objects.cms import cms_assemble, parse_signed_object
from .objects.crl import CrlFieldIndex
from .objects.manifest import ManifestContent, encode_manifest_econtent
from .objects.names import encode_name
from .objects.rrdp import NotificationDelta, RrdpDocument, render_rrdp, sha256_hex
from .objects.roa import RoaContent, decode_roa_econtent
from .objects.tal import TalDocument, render_tal

log = logging.getLogger(__name__)

PAYLOAD_KINDS = ("roa", "aspa", "gbr")
SINGLETON_CA_KINDS = ("mft", "crl", "cer")
PP_KINDS = ("notification", "snapshot", "delta")

MFT_BOILERPLATE_DEFAULT = 2078
MFT_ENTRY_SIZE_DEFAULT = 70


class ScaffoldError(ValueError):
    pass


@dataclass(frozen=True)
class MarkerSlot:
    asn: int
    prefix: str
    length: int

    def vrp(self) -> tuple[int, str, int]:
        return (self.asn, self.prefix, self.length)


def marker_slot(index: int, as_base: int = 4_200_000_000, prefix_len: int = 24) -> MarkerSlot:
    """Unique benign prefix per batch slot, carved from 10.128.0.0/9.

    Slots are /24-spaced so they stay pairwise disjoint for any prefix_len in
    [24, 32]; longer-than-/24 markers exist to make per-prefix-dropping
    validators observable.
    """
    if index >= 32768:
        raise ScaffoldError("marker pool exhausted (32768 slots per batch)")
    if not 24 <= prefix_len <= 32:
        raise ScaffoldError("marker prefix length must be in [24, 32]")
    return MarkerSlot(as_base + index, f"10.{128 + index // 256}.{index % 256}.0/{prefix_len}", prefix_len)


@dataclass
class ScaffoldConfig:
    base_domain: str = "pp0.rpkifuzz.example"
    seed: int = 0
    workers: int = 1
    strategy: ReplacementStrategy = ReplacementStrategy.TARGETED
    now: datetime.datetime | None = None
    validity: datetime.timedelta = datetime.timedelta(days=7)
    window: datetime.timedelta = datetime.timedelta(hours=24)
    marker_as_base: int = 4_200_000_000
    marker_prefix_len: int = 24


@dataclass
class ScaffoldStats:
    aux_objects: int = 0
    signatures: int = 0
    digests: int = 0


@dataclass
class PpState:
    domain: str
    session_id: str
    serial: int
    publishes: dict[str, bytes] = field(default_factory=dict)  # rsync uri -> bytes
    https_files: dict[str, bytes] = field(default_factory=dict)  # path -> bytes
    doc_override: tuple[str, bytes] | None = None  # (kind, raw bytes) served as that RRDP doc
    deltas: list[tuple[int, bytes]] = field(default_factory=list)  # (serial, rendered delta)
    rrdp_docs: dict[str, bytes] = field(default_factory=dict)  # served path -> bytes

    @property
    def notification_bytes(self) -> bytes:
        return self.rrdp_docs["/notification.xml"]

    @property
    def snapshot_bytes(self) -> bytes:
        return self.rrdp_docs[f"/snapshot-{self.serial}.xml"]


def build_rrdp_documents(pp: PpState, digest=None) -> None:
    """Render the PP's notification/snapshot/delta set from its publishes.

    A doc_override substitutes raw test bytes for one document while the rest
    of the publication point stays consistent around it.
    """
    if digest is None:
        digest = lambda uri, data: keystore.sha256(data)  # noqa: E731
    base = f"https://{pp.domain}"
    override_kind, override = pp.doc_override or (None, b"")
    snapshot = render_rrdp(
        RrdpDocument("snapshot", pp.session_id, pp.serial, publishes=list(pp.publishes.items()))
    )
    if override_kind == "snapshot":
        snapshot = override
    if override_kind == "delta" and not pp.deltas:
        pp.serial = max(pp.serial, 2)
        snapshot = render_rrdp(
            RrdpDocument("snapshot", pp.session_id, pp.serial, publishes=list(pp.publishes.items()))
        )
        pp.deltas = [(pp.serial, override)]
    docs: dict[str, bytes] = {}
    snap_path = f"/snapshot-{pp.serial}.xml"
    docs[snap_path] = snapshot
    delta_refs = []
    for serial, data in pp.deltas:
        path = f"/delta-{serial}.xml"
        docs[path] = data
        delta_refs.append(NotificationDelta(serial, base + path, digest(base + path, data).hex()))
    notification = render_rrdp(
        RrdpDocument(
            "notification",
            pp.session_id,
            pp.serial,
            snapshot_uri=base + snap_path,
            snapshot_hash=digest(base + snap_path, snapshot).hex(),
            deltas=delta_refs,
        )
    )
    if override_kind == "notification":
        notification = override
    docs["/notification.xml"] = notification
    pp.rrdp_docs = docs


@dataclass
class RepositoryState:
    tal: TalDocument
    tal_bytes: bytes
    pps: dict[str, PpState]
    objects: dict[str, bytes] = field(default_factory=dict)
    markers: dict[str, set] = field(default_factory=dict)  # test id -> marker VRPs
    expected_vrps: dict[str, set] = field(default_factory=dict)  # test id -> own VRPs
    test_index: dict[str, str] = field(default_factory=dict)  # test id -> placed URI
    extra_tals: list[bytes] = field(default_factory=list)
    stats: ScaffoldStats = field(default_factory=ScaffoldStats)

    def all_marker_vrps(self) -> set:
        out = set()
        for vrps in self.markers.values():
            out |= vrps
        return out

    def all_expected_vrps(self) -> set:
        out = self.all_marker_vrps()
        for vrps in self.expected_vrps.values():
            out |= vrps
        return out


@dataclass
class _CaState:
    ident: CaIdentity
    cert_bytes: bytes
    mft_number: int = 0
    crl_number: int = 0


class ScaffoldContext:
    """Campaign-level state: key pool, cached auxiliaries, counters."""

    def __init__(self, pool: KeyPool, config: ScaffoldConfig | None = None):
        self.pool = pool
        self.config = config or ScaffoldConfig()
        self.now = self.config.now or utcnow()
        self.rng = random.Random(self.config.seed)
        self.batch_counter = 0
        self._root: _CaState | None = None
        self._payload_ca: _CaState | None = None
        self._tal: TalDocument | None = None
        self._tal_bytes: bytes | None = None
        self._marker_cache: dict[tuple[str, int], tuple[str, bytes, set]] = {}
        self._digest_cache: dict[str, tuple[bytes, bytes]] = {}
        self._root_repo_cache: tuple | None = None
        self._digest_count = 0
        self._lock = threading.Lock()
        self._executor: ThreadPoolExecutor | None = None

    # -- instrumentation ----------------------------------------------------

    def file_digest(self, uri: str, data: bytes) -> bytes:
        """Memoized per-URI file digest; counts only fresh computations."""
        cached = self._digest_cache.get(uri)
        if cached is not None and cached[0] == data:
            return cached[1]
        digest = keystore.sha256(data)
        with self._lock:
            self._digest_count += 1
            if len(self._digest_cache) > 8192:  # long campaigns: bound memory, recompute instead
                self._digest_cache.clear()
            self._digest_cache[uri] = (data, digest)
        return digest

    def _counters(self) -> tuple[int, int]:
        return keystore.sign_call_count(), self._digest_count

    # -- cached auxiliaries --------------------------------------------------

    def root(self) -> _CaState:
        if self._root is None:
            ident = CaIdentity.create("root", self.pool.acquire(), self.config.base_domain)
            _, cert = make_ca_cert(
                ident, None, ALL_RESOURCES_IP, ALL_RESOURCES_AS,
                not_before=self.now - datetime.timedelta(minutes=5),
                not_after=self.now + self.config.validity,
                now=self.now,
            )
            self._root = _CaState(ident, cert)
            self._tal = TalDocument(uris=[ident.cert_uri], spki=ident.key.spki)
            self._tal_bytes = render_tal(self._tal)
        return self._root

    def payload_ca(self) -> _CaState:
        if self._payload_ca is None:
            root = self.root()
            ident = CaIdentity.create("ca-payload", self.pool.acquire(), self.config.base_domain, parent=root.ident)
            _, cert = make_ca_cert(
                ident, root.ident,
                not_before=self.now - datetime.timedelta(minutes=5),
                not_after=self.now + self.config.validity,
                now=self.now,
            )
            self._payload_ca = _CaState(ident, cert)
        return self._payload_ca

    def marker(self, ca: _CaState, slot: int) -> tuple[str, bytes, set]:
        """Benign marker ROA for a batch slot.

        Cached only for the long-lived payload CA; fan-out CAs are batch-local
        so caching their markers would just leak memory over a campaign.
        """
        cacheable = self._payload_ca is not None and ca is self._payload_ca
        key = (ca.ident.name, slot)
        if cacheable:
            hit = self._marker_cache.get(key)
            if hit is not None:
                return hit
        ms = marker_slot(slot, self.config.marker_as_base, self.config.marker_prefix_len)
        filename = f"marker-{slot}.roa"
        uri = ca.ident.repo_uri + filename
        data = make_roa(
            ca.ident, ms.asn, [(ms.prefix, ms.length)], self.pool.acquire(),
            object_uri=uri, now=self.now,
        )
        entry = (filename, data, {ms.vrp()})
        if cacheable:
            self._marker_cache[key] = entry
        return entry

    def fresh_session(self) -> str:
        return str(uuid.UUID(int=self.rng.getrandbits(128), version=4))

    def executor(self) -> ThreadPoolExecutor | None:
        if self.config.workers <= 1:
            return None
        if self._executor is None:
            self._executor = ThreadPoolExecutor(max_workers=self.config.workers)
        return self._executor

    def close(self):
        if self._executor is not None:
            self._executor.shutdown(wait=False)
            self._executor = None

    # -- main entry points ----------------------------------------------------

    def repositoryfy(self, batch: list[TestObject], strategy: ReplacementStrategy | None = None) -> RepositoryState:
        """Build a complete repository around a batch of test objects."""
        if not batch:
            raise ScaffoldError("empty batch")
        for obj in batch:
            if obj.kind == "rtr-pdu" or obj.kind not in EXT_BY_KIND:
                raise ScaffoldError(f"unplaceable kind {obj.kind!r}")
        strategy = strategy or self.config.strategy
        sign0, digest0 = self._counters()
        batch_no = self.batch_counter
        self.batch_counter += 1

        root = self.root()
        state = RepositoryState(tal=self._tal, tal_bytes=self._tal_bytes, pps={})
        main_pp = PpState(domain=self.config.base_domain, session_id=self.fresh_session(), serial=1)
        main_pp.https_files[f"/{root.ident.name}.cer"] = root.cert_bytes
        state.pps[self.config.base_domain] = main_pp

        payload_slots = [(i, o) for i, o in enumerate(batch) if o.kind in PAYLOAD_KINDS]
        singleton_slots = [(i, o) for i, o in enumerate(batch) if o.kind in SINGLETON_CA_KINDS]
        pp_slots = [(i, o) for i, o in enumerate(batch) if o.kind in PP_KINDS]
        tal_slots = [(i, o) for i, o in enumerate(batch) if o.kind == "tal"]

        root_children: list[tuple[str, bytes]] = []  # files in the root repo

        if payload_slots:
            ca = self.payload_ca()
            root_children.append((f"{ca.ident.name}.cer", ca.cert_bytes))
            self._assemble_payload_ca(state, main_pp, ca, payload_slots, strategy, batch_no)

        for slot, obj in singleton_slots:
            entries = self._assemble_singleton(state, main_pp, root, obj, slot, strategy, batch_no)
            root_children.extend(entries)

        for slot, obj in pp_slots:
            self._assemble_pp_kind(state, obj, slot, batch_no)

        for slot, obj in tal_slots:
            root_children.extend(self._assemble_tal_kind(state, main_pp, root, obj, slot, batch_no))

        self._assemble_root_repo(main_pp, root, root_children)
        for pp in state.pps.values():
            build_rrdp_documents(pp, digest=self.file_digest)
            state.objects.update(pp.publishes)

        sign1, digest1 = self._counters()
        n_tests = len(state.test_index)
        n_markers = len([m for m in state.markers.values() if m])
        total_artifacts = len(state.objects) + sum(len(pp.https_files) for pp in state.pps.values())
        state.stats = ScaffoldStats(
            aux_objects=total_artifacts - n_tests - n_markers + 1 + len(state.pps),
            signatures=sign1 - sign0,
            digests=digest1 - digest0,
        )
        log.info(
            "repositoryfy batch=%d objects=%d aux=%d signatures=%d digests=%d",
            batch_no, len(batch), state.stats.aux_objects, state.stats.signatures, state.stats.digests,
        )
        return state

    # -- payload kinds ---------------------------------------------------------

    def _wrap_payload(self, ca: _CaState, obj: TestObject, uri: str, serial: int, ee_key, strategy) -> tuple[bytes, set]:
        """Fresh EE + CMS around the object's content; raw pass-through for
        strategy NONE or envelopes our own parser cannot open.  Returns the
        published bytes plus the VRPs the content is expected to yield."""
        if strategy is ReplacementStrategy.NONE:
            return obj.data, self._expected_vrps(obj.kind, obj.data)
        econtent_type = oids.ECONTENT_BY_KIND.get(obj.kind, oids.CT_ROA)
        try:
            parsed = parse_signed_object(obj.data)
            econtent = parsed.econtent
            if parsed.econtent_type in oids.ECONTENT_BY_KIND.values():
                econtent_type = parsed.econtent_type
        except (DerDecodeError, IndexError, ValueError):
            return obj.data, self._expected_vrps(obj.kind, obj.data)  # envelope is the test case
        _, ee_der = make_ee_cert(ca.ident, ee_key, uri, serial=serial, now=self.now)
        data = cms_assemble(econtent_type, econtent, ee_der, ee_key, ee_spki=ee_key.spki)
        vrps = set()
        if obj.kind == "roa" and econtent_type == oids.CT_ROA:
            try:
                vrps = decode_roa_econtent(econtent).vrps()
            except (DerDecodeError, IndexError, ValueError):
                vrps = set()
        return data, vrps

    def _assemble_payload_ca(self, state, pp: PpState, ca: _CaState, slots, strategy, batch_no):
        # deterministic per-slot resources assigned up front, then parallel signing
        jobs = []
        for slot, obj in slots:
            filename = f"test-{batch_no}-{slot}{EXT_BY_KIND[obj.kind]}"
            uri = ca.ident.repo_uri + filename
            jobs.append((slot, obj, filename, uri, ca.ident.next_serial(), self.pool.acquire()))
        executor = self.executor()

        def run(job):
            slot, obj, filename, uri, serial, ee_key = job
            data, vrps = self._wrap_payload(ca, obj, uri, serial, ee_key, strategy)
            return slot, obj, filename, uri, data, vrps

        if executor is None:
            results = [run(j) for j in jobs]
        else:
            # chunked dispatch: long-lived tasks keep GIL hand-offs cheap while
            # the signature calls inside still overlap across threads
            n_chunks = max(1, min(self.config.workers * 2, len(jobs)))
            size = (len(jobs) + n_chunks - 1) // n_chunks
            chunks = [jobs[i : i + size] for i in range(0, len(jobs), size)]
            results = [item for part in executor.map(lambda c: [run(j) for j in c], chunks) for item in part]
        file_list: list[tuple[str, bytes]] = []
        for slot, obj, filename, uri, data, vrps in results:
            pp.publishes[uri] = data
            file_list.append((filename, data))
            tid = obj.object_id
            state.test_index[tid] = uri
            _, mdata, mvrps = self.marker(ca, slot)
            muri = ca.ident.repo_uri + f"marker-{slot}.roa"
            pp.publishes[muri] = mdata
            file_list.append((f"marker-{slot}.roa", mdata))
            state.markers[tid] = mvrps
            state.expected_vrps[tid] = vrps
        self._emit_mft_crl(pp, ca, file_list)

    def _expected_vrps(self, kind: str, data: bytes) -> set:
        if kind != "roa":
            return set()
        try:
            so = parse_signed_object(data)
            return decode_roa_econtent(so.econtent).vrps()
        except (DerDecodeError, IndexError, ValueError):
            return set()

    # -- shared CA assembly ------------------------------------------------------

    def _emit_mft_crl(
        self, pp: PpState, ca: _CaState, file_list: list[tuple[str, bytes]],
        *, crl_override: bytes | None = None, mft_override: bytes | None = None,
    ):
        """Reissue the CA's CRL and manifest over the given repository content."""
        ca.crl_number += 1
        ca.mft_number += 1
        crl_name = f"{ca.ident.name}.crl"
        if crl_override is None:
            crl = make_crl(ca.ident, [], self.now, self.now + self.config.window, ca.crl_number)
        else:
            crl = crl_override
        pp.publishes[ca.ident.crl_uri] = crl
        entries = [(crl_name, self.file_digest(ca.ident.crl_uri, crl))]
        for filename, data in file_list:
            entries.append((filename, self.file_digest(ca.ident.repo_uri + filename, data)))
        entries.sort()
        if mft_override is None:
            mft = make_manifest(
                ca.ident, entries, self.now, self.now + self.config.window, ca.mft_number, self.pool.acquire()
            )
        else:
            mft = mft_override
        pp.publishes[ca.ident.mft_uri] = mft

    def _new_ca(self, root: _CaState, name: str, domain: str | None = None, key=None) -> _CaState:
        ident = CaIdentity.create(name, key or self.pool.acquire(), domain or self.config.base_domain, parent=root.ident)
        _, cert = make_ca_cert(
            ident, root.ident,
            not_before=self.now - datetime.timedelta(minutes=5),
            not_after=self.now + self.config.validity,
            now=self.now,
        )
        return _CaState(ident, cert)

    # -- singleton kinds (mft / crl / cer) -----------------------------------------

    def _assemble_singleton(self, state, pp: PpState, root: _CaState, obj: TestObject, slot, strategy, batch_no):
        tid = obj.object_id
        name = f"ca-{batch_no}-{slot}"
        if obj.kind == "cer":
            return self._assemble_cer(state, pp, root, obj, slot, name, strategy)
        ca = self._new_ca(root, name)
        _, mdata, mvrps = self.marker(ca, slot)
        muri = ca.ident.repo_uri + f"marker-{slot}.roa"
        pp.publishes[muri] = mdata
        state.markers[tid] = mvrps
        state.expected_vrps[tid] = set()
        file_list = [(f"marker-{slot}.roa", mdata)]
        if obj.kind == "crl":
            adapted = apply_replacement(obj.data, strategy, ReplacementContext.for_ca(ca.ident), obj.replace_mask, "crl")
            uri = ca.ident.crl_uri
            state.test_index[tid] = uri
            self._emit_mft_crl(pp, ca, file_list, crl_override=adapted.data)
        else:  # mft
            uri = ca.ident.mft_uri
            state.test_index[tid] = uri
            mft_data = self._rewrap_mft(ca, obj, strategy)
            self._emit_mft_crl(pp, ca, file_list, mft_override=mft_data)
        return [(f"{name}.cer", ca.cert_bytes)]

    def _rewrap_mft(self, ca: _CaState, obj: TestObject, strategy) -> bytes:
        if strategy is ReplacementStrategy.NONE:
            return obj.data
        try:
            parsed = parse_signed_object(obj.data)
        except (DerDecodeError, IndexError, ValueError):
            return obj.data
        ee_key = self.pool.acquire()
        _, ee_der = make_ee_cert(
            ca.ident, ee_key, ca.ident.mft_uri,
            not_before=self.now, not_after=self.now + self.config.window,
        )
        return cms_assemble(oids.CT_MANIFEST, parsed.econtent, ee_der, ee_key, ee_spki=ee_key.spki)

    def _assemble_cer(self, state, pp: PpState, root: _CaState, obj: TestObject, slot, name, strategy):
        tid = obj.object_id
        cert_filename = f"{name}.cer"
        ident = CaIdentity.create(name, self.pool.acquire(), self.config.base_domain, parent=root.ident)
        ctx = ReplacementContext.for_cert(root.ident, ident)
        adapted = apply_replacement(obj.data, strategy, ctx, obj.replace_mask, "cer")
        state.test_index[tid] = ident.cert_uri
        state.expected_vrps[tid] = set()
        entries = [(cert_filename, adapted.data)]
        # sign the subtree only when we control the subject key
        controlled = self._controlled_key(adapted.data)
        if controlled is not None:
            ident.key = controlled
            ca = _CaState(ident, adapted.data)
            _, mdata, mvrps = self.marker(ca, slot)
            pp.publishes[ca.ident.repo_uri + f"marker-{slot}.roa"] = mdata
            state.markers[tid] = mvrps
            self._emit_mft_crl(pp, ca, [(f"marker-{slot}.roa", mdata)])
        else:
            # no subtree possible under an uncontrolled key; a sibling marker CA
            # still tells the publication point apart from the object
            log.warning("test certificate %s has an uncontrolled key; marker degraded to sibling CA", tid)
            ca = self._new_ca(root, f"{name}m")
            _, mdata, mvrps = self.marker(ca, slot)
            pp.publishes[ca.ident.repo_uri + f"marker-{slot}.roa"] = mdata
            state.markers[tid] = mvrps
            self._emit_mft_crl(pp, ca, [(f"marker-{slot}.roa", mdata)])
            entries.append((f"{name}m.cer", ca.cert_bytes))
        return entries

    def _controlled_key(self, cert_der: bytes):
        try:
            tree = der_decode(cert_der)
            from .objects.cms import _spki_from_cert_tree

            return self.pool.lookup_spki(_spki_from_cert_tree(tree))
        except (DerDecodeError, IndexError, ValueError):
            return None

    # -- RRDP document kinds ---------------------------------------------------------

    def _assemble_pp_kind(self, state, obj: TestObject, slot, batch_no):
        tid = obj.object_id
        domain = f"pp{batch_no}-{slot}.{self.config.base_domain}"
        pp = PpState(domain=domain, session_id=self.fresh_session(), serial=1)
        root_ident = CaIdentity.create(f"root-{batch_no}-{slot}", self.pool.acquire(), domain)
        _, root_cert = make_ca_cert(
            root_ident, None, ALL_RESOURCES_IP, ALL_RESOURCES_AS,
            not_before=self.now - datetime.timedelta(minutes=5),
            not_after=self.now + self.config.validity, now=self.now,
        )
        pp.https_files[f"/{root_ident.name}.cer"] = root_cert
        state.extra_tals.append(render_tal(TalDocument(uris=[root_ident.cert_uri], spki=root_ident.key.spki)))
        ca = _CaState(root_ident, root_cert)
        _, mdata, mvrps = self.marker(ca, slot)
        pp.publishes[root_ident.repo_uri + f"marker-{slot}.roa"] = mdata
        state.markers[tid] = mvrps
        state.expected_vrps[tid] = set()
        self._emit_mft_crl(pp, ca, [(f"marker-{slot}.roa", mdata)])
        state.pps[domain] = pp
        pp.doc_override = (obj.kind, obj.data)
        state.test_index[tid] = f"https://{domain}/{obj.kind}.xml"

    def _assemble_tal_kind(self, state, pp: PpState, root: _CaState, obj: TestObject, slot, batch_no):
        """The test bytes become an extra TAL file; a benign marker CA gives it
        something observable to point at (when the TAL actually resolves)."""
        tid = obj.object_id
        state.extra_tals.append(obj.data)
        ca = self._new_ca(root, f"ca-{batch_no}-{slot}t")
        _, mdata, mvrps = self.marker(ca, slot)
        pp.publishes[ca.ident.repo_uri + f"marker-{slot}.roa"] = mdata
        state.markers[tid] = mvrps
        state.expected_vrps[tid] = set()
        state.test_index[tid] = f"tal-{batch_no}-{slot}.tal"
        self._emit_mft_crl(pp, ca, [(f"marker-{slot}.roa", mdata)])
        return [(f"ca-{batch_no}-{slot}t.cer", ca.cert_bytes)]

    # -- root repository --------------------------------------------------------------

    def _assemble_root_repo(self, pp: PpState, root: _CaState, children: list[tuple[str, bytes]]):
        key = tuple(sorted((n, keystore.sha256(d)) for n, d in children))
        cached = self._root_repo_cache
        if cached is not None and cached[0] == key:
            _, crl, mft = cached
            pp.publishes[root.ident.crl_uri] = crl
            pp.publishes[root.ident.mft_uri] = mft
            for name, data in children:
                pp.publishes[root.ident.repo_uri + name] = data
            return
        for name, data in children:
            pp.publishes[root.ident.repo_uri + name] = data
        self._emit_mft_crl(pp, root, children)
        self._root_repo_cache = (key, pp.publishes[root.ident.crl_uri], pp.publishes[root.ident.mft_uri])


# ---------------------------------------------------------------------------
# replacement strategies

@dataclass
class ReplacementContext:
    """The scaffold-side values the eight dependent fields must resolve to."""

    issuer: CaIdentity
    signer_key: keystore.KeyHandle
    issuer_name_node: DerValue
    parent_key_id: bytes
    crl_location: str
    issuer_location: str
    repository_location: str | None = None
    manifest_location: str | None = None
    notification_location: str | None = None

    @classmethod
    def for_ca(cls, ca: CaIdentity) -> "ReplacementContext":
        return cls(
            issuer=ca,
            signer_key=ca.key,
            issuer_name_node=encode_name(ca.subject_dn),
            parent_key_id=ca.key.key_id,
            crl_location=ca.crl_uri,
            issuer_location=ca.cert_uri,
        )

    @classmethod
    def for_cert(cls, issuer: CaIdentity, subject: CaIdentity) -> "ReplacementContext":
        return cls(
            issuer=issuer,
            signer_key=issuer.key,
            issuer_name_node=encode_name(issuer.subject_dn),
            parent_key_id=issuer.key.key_id,
            crl_location=issuer.crl_uri,
            issuer_location=issuer.cert_uri,
            repository_location=subject.repo_uri,
            manifest_location=subject.mft_uri,
            notification_location=subject.notify_uri,
        )

    def value_node(self, fld: str) -> DerValue:
        if fld == "parentKeyIdentifier":
            return DerValue(0x80, False, self.parent_key_id)
        if fld == "issuerName":
            return self.issuer_name_node
        uri = {
            "crlLocation": self.crl_location,
            "issuerLocation": self.issuer_location,
            "repositoryLocation": self.repository_location,
            "manifestLocation": self.manifest_location,
            "notificationLocation": self.notification_location,
        }[fld]
        return DerValue(0x80 | 6, False, (uri or NONE_URI).encode("ascii"))


@dataclass
class ReplacementResult:
    data: bytes
    replaced: set[str]
    resigned: bool
    downgraded: bool = False
    passthrough: bool = False


_SENTINEL_SIG = der_encode(bit_string(b""))
_SENTINEL_NAME = der_encode(seq())
_SENTINEL_AKI = der_encode(DerValue(0x80, False, b""))
_SENTINEL_URI = der_encode(DerValue(0x80 | 6, False, NONE_URI.encode()))


def _field_is_sentinel(fld: str, encoded: bytes | None) -> bool:
    if encoded is None:
        return False
    if fld == "signature":
        return encoded == _SENTINEL_SIG
    if fld == "issuerName":
        return encoded == _SENTINEL_NAME
    if fld == "parentKeyIdentifier":
        return encoded == _SENTINEL_AKI
    return encoded == _SENTINEL_URI


def _field_is_well_formed(fld: str, encoded: bytes | None) -> bool:
    if encoded is None:
        return False
    try:
        node = der_decode(encoded)
    except DerDecodeError:
        return False
    if fld == "signature":
        return node.tag == 0x03 and not node.constructed and len(node.content) == 257 and node.content[0] == 0
    if fld == "issuerName":
        from .objects.names import decode_name

        try:
            return len(decode_name(node)) >= 1
        except (DerDecodeError, IndexError, ValueError):
            return False
    if fld == "parentKeyIdentifier":
        return not node.constructed and len(node.content) == 20
    text = bytes(node.content) if not node.constructed else b""
    return text.startswith((b"rsync://", b"https://", b"http://"))


def apply_replacement(
    data: bytes,
    strategy: ReplacementStrategy,
    ctx: ReplacementContext,
    mask: frozenset[str] | None,
    kind: str,
) -> ReplacementResult:
    """Adapt a certificate or CRL to the scaffold per the replacement strategy."""
    if strategy is ReplacementStrategy.NONE:
        return ReplacementResult(data, set(), resigned=False, passthrough=True)
    downgraded = False
    try:
        tree = der_decode(data)
        index = CertFieldIndex(tree) if kind == "cer" else CrlFieldIndex(tree)
        if not index.locs:
            raise DerDecodeError("no-fields", 0)
    except DerDecodeError:
        if strategy is ReplacementStrategy.TARGETED:
            log.warning("targeted replacement requested but object unparseable; downgrading to parseable")
            downgraded = True
        log.debug("object unparseable at field granularity; passing through")
        return ReplacementResult(data, set(), resigned=False, downgraded=downgraded, passthrough=True)

    applicable = REPLACEABLE_FIELDS if kind == "cer" else CRL_FIELDS
    if strategy is ReplacementStrategy.OPTIMISTIC:
        selected = set(applicable)
    elif strategy is ReplacementStrategy.TARGETED:
        if mask is None:
            selected = {f for f in applicable if _field_is_sentinel(f, index.get_bytes(f))}
        else:
            selected = set(mask) & set(applicable)
    else:  # PARSEABLE
        selected = {f for f in applicable if _field_is_well_formed(f, index.get_bytes(f))}

    replaced: set[str] = set()
    for fld in sorted(selected - {"signature"}):
        if index.replace(fld, ctx.value_node(fld)):
            replaced.add(fld)
    resign = "signature" in selected
    if resign:
        tree = index.tree
        tbs_der = der_encode(tree.child(0))
        signature = keystore.sign(ctx.signer_key, tbs_der)
        sig_node = bit_string(signature)
        if index.replace("signature", sig_node):
            replaced.add("signature")
        else:
            # signature slot missing entirely (stripped CRL): append one
            kids = list(index.tree.children)
            kids.append(sig_node)
            index.tree = index.tree.with_children(kids)
            replaced.add("signature")
    return ReplacementResult(der_encode(index.tree), replaced, resigned=resign, downgraded=downgraded)


# ---------------------------------------------------------------------------
# size planner and large objects

def plan_manifest_entries(
    file_size_threshold: int,
    boilerplate: int = MFT_BOILERPLATE_DEFAULT,
    entry_size: int = MFT_ENTRY_SIZE_DEFAULT,
) -> int:
    """Manifest entry count needed to reach a validator's file-size threshold.

    Thresholds are binary mebibytes when derived from published limits; the
    caller passes plain bytes.
    """
    if file_size_threshold <= boilerplate:
        raise ScaffoldError("threshold does not exceed manifest boilerplate")
    return math.ceil((file_size_threshold - boilerplate) / entry_size)


def make_large_object(ctx: ScaffoldContext, kind: str, target_size: int) -> TestObject:
    """Valid signed object of at least target_size (within +1%)."""
    from .mutation import Provenance

    if kind not in ("roa", "mft"):
        raise ScaffoldError("large objects supported for roa and mft kinds")
    ca = ctx.payload_ca()
    ee_key = ctx.pool.acquire()
    if kind == "mft":
        empty = make_manifest(ca.ident, [], ctx.now, ctx.now + ctx.config.window, 10_000, ee_key)
        base = len(empty)
        entry = 71  # 32-char file name under this encoder: 39 bytes framing + name
        if target_size < base:
            raise ScaffoldError(f"target below minimal manifest size {base}")
        count = max(0, (target_size - base) // entry)
        digest = b"\x00" * 32
        while True:
            file_list = [(f"{'a' * 20}{i:08x}.roa", digest) for i in range(count)]
            data = make_manifest(ca.ident, file_list, ctx.now, ctx.now + ctx.config.window, 10_000, ee_key)
            if len(data) >= target_size:
                break
            missing = target_size - len(data)
            count += max(1, missing // entry)
        if len(data) > target_size * 1.01:
            raise ScaffoldError("overshot large-manifest target")
    else:
        empty = make_roa(ca.ident, 64512, [("10.0.0.0/9", 9)], ee_key, now=ctx.now)
        if target_size < len(empty):
            raise ScaffoldError(f"target below minimal ROA size {len(empty)}")
        per_prefix = 12  # SEQ{BIT STRING /32 (7B), INTEGER maxLen (3B)}
        count = max(1, (target_size - len(empty)) // per_prefix)
        while True:
            prefixes = [(f"10.{128 + (i >> 16) % 64}.{(i >> 8) & 0xFF}.{i & 0xFF}/32", 32) for i in range(count)]
            data = make_roa(ca.ident, 64512, prefixes, ee_key, now=ctx.now)
            if len(data) >= target_size:
                break
            count += max(1, (target_size - len(data)) // per_prefix)
        if len(data) > target_size * 1.01:
            raise ScaffoldError("overshot large-ROA target")
    prov = Provenance("factory", kind, seed=target_size, parent_corpus_id="large-object")
    return TestObject(kind=kind, data=data, provenance=prov, replace_mask=frozenset())


def make_traversal_notification(ctx: ScaffoldContext, payload_path: str, payload: bytes) -> RepositoryState:
    """Benign repository plus one snapshot publish whose URI keeps the literal
    traversal segments (never normalized on our side)."""
    from .mutation import Provenance

    marker = TestObject(
        kind="roa",
        data=make_roa(ctx.payload_ca().ident, 64512, [("10.64.0.0/24", 24)], ctx.pool.acquire(), now=ctx.now),
        provenance=Provenance("factory", "roa", parent_corpus_id="traversal-carrier"),
        replace_mask=frozenset(),
    )
    state = ctx.repositoryfy([marker])
    pp = state.pps[ctx.config.base_domain]
    evil_uri = f"rsync://{ctx.config.base_domain}/repo/{payload_path}" if payload_path else ctx.payload_ca().ident.repo_uri + "extra.bin"
    pp.publishes[evil_uri] = payload
    state.objects[evil_uri] = payload
    build_rrdp_documents(pp, digest=ctx.file_digest)
    return state
