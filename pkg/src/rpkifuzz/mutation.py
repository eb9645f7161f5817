"""Test-case generators: random byte mutation and structure-aware generation.

Byte mutation tramples object framing and targets parsers; structure-aware
generation emits schema-abiding objects whose selected fields carry mutated
values while every repository-dependent field holds a none-sentinel for the
scaffolder to fill in.  Both are fully seeded: provenance regenerates any test
object bit-exactly.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import random
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from . import keystore, oids
from .der import DerValue, Tags, bit_string, der_decode, der_encode, integer, printable, seq
from .fields import CRL_FIELDS, NONE_URI, REPLACEABLE_FIELDS
from .objects import rrdp as rrdpmod
from .objects.cert import CertContent, SiaInfo, build_tbs, _algid_sha256_rsa
from .objects.gbr import GbrContent, render_vcard
from .objects.manifest import ManifestContent, encode_manifest_econtent
from .objects.names import NameAttr, common_name, encode_name
from .objects.resources import INHERIT, AsRange, Prefix
from .objects.roa import RoaContent, RoaFamilyBlock, RoaPrefix, encode_roa_econtent
from .objects.tal import TalDocument, render_tal

KINDS = (
    "roa",
    "mft",
    "crl",
    "cer",
    "aspa",
    "gbr",
    "snapshot",
    "delta",
    "notification",
    "tal",
    "rtr-pdu",
)

EXT_BY_KIND = {
    "roa": ".roa",
    "mft": ".mft",
    "crl": ".crl",
    "cer": ".cer",
    "aspa": ".asa",
    "gbr": ".gbr",
    "snapshot": ".xml",
    "delta": ".xml",
    "notification": ".xml",
    "tal": ".tal",
    "rtr-pdu": ".rtr",
}

MUTATION_OPS = ("bit-flip", "byte-insert", "byte-delete", "block-swap")


@dataclass(frozen=True)
class Provenance:
    generator: str  # "mutate_bytes" | "structured" | "corpus" | "factory"
    kind: str
    seed: int | None = None
    parent_corpus_id: str | None = None
    ops_budget: int | None = None
    fields: tuple[str, ...] | None = None

    def object_id(self) -> str:
        blob = json.dumps(
            [self.generator, self.kind, self.seed, self.parent_corpus_id, self.ops_budget, self.fields],
            separators=(",", ":"),
        ).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class TestObject:
    kind: str
    data: bytes
    provenance: Provenance
    replace_mask: frozenset[str] | None = None  # None: unknown, detect sentinels

    @property
    def object_id(self) -> str:
        return self.provenance.object_id()


# ---------------------------------------------------------------------------
# random byte mutation

def mutate_bytes(
    base: bytes,
    seed: int,
    ops_budget: int,
    *,
    ops: tuple[str, ...] = MUTATION_OPS,
    kind: str = "roa",
    parent_corpus_id: str | None = None,
) -> TestObject:
    """Apply ops_budget seeded draws of bit flips, inserts, deletes and swaps."""
    if not base:
        raise ValueError("empty base object")
    rng = random.Random(seed)
    buf = bytearray(base)
    for _ in range(ops_budget):
        op = rng.choice(ops)
        if not buf and op in ("bit-flip", "byte-delete", "block-swap"):
            op = "byte-insert"
        if op == "bit-flip":
            pos = rng.randrange(len(buf))
            buf[pos] ^= 1 << rng.randrange(8)
        elif op == "byte-insert":
            buf.insert(rng.randrange(len(buf) + 1), rng.randrange(256))
        elif op == "byte-delete":
            del buf[rng.randrange(len(buf))]
        elif op == "block-swap":
            if len(buf) < 2:
                buf[0] ^= 1 << rng.randrange(8)
                continue
            size = rng.randrange(1, max(2, len(buf) // 2 + 1))
            size = min(size, len(buf) // 2)
            a = rng.randrange(0, len(buf) - 2 * size + 1)
            b = rng.randrange(a + size, len(buf) - size + 1)
            buf[a : a + size], buf[b : b + size] = buf[b : b + size], buf[a : a + size]
    prov = Provenance(
        "mutate_bytes", kind, seed=seed, parent_corpus_id=parent_corpus_id, ops_budget=ops_budget
    )
    return TestObject(kind=kind, data=bytes(buf), provenance=prov, replace_mask=None)


# ---------------------------------------------------------------------------
# structure-aware generation

# shared one-off key for structured objects: valid SPKI material without
# per-object keygen cost; the scaffold re-signs whatever needs signing
_STRUCTURED_KEY_SEED = 0x5EED0B1
_structured_key = None


def structured_key() -> keystore.KeyHandle:
    global _structured_key
    if _structured_key is None:
        _structured_key = keystore.generate_key_seeded(random.Random(_STRUCTURED_KEY_SEED))
    return _structured_key


SENTINEL_SIGNATURE = bit_string(b"")
SENTINEL_NAME = seq()
SENTINEL_KEY_ID = b""

# content fields eligible for mutation, per kind
CONTENT_FIELDS = {
    "roa": ("asId", "maxLength", "prefixes", "addressFamily", "version"),
    "mft": ("manifestNumber", "thisUpdate", "nextUpdate", "fileHashAlg", "fileList"),
    "crl": ("thisUpdate", "nextUpdate", "revoked", "crlNumber"),
    "cer": ("serial", "validity", "subject", "keyUsage", "resources"),
    "aspa": ("customerAsId", "providerAsIds"),
    "gbr": ("fullName", "properties", "framing"),
    "snapshot": ("sessionId", "serial", "uris", "content"),
    "delta": ("sessionId", "serial", "uris", "withdrawHash"),
    "notification": ("sessionId", "serial", "snapshotHash", "deltaList"),
    "tal": ("uris", "spki"),
    "rtr-pdu": ("pduType", "declaredLength", "payload"),
}


def random_field_strategy(kind: str, seed: int) -> tuple[str, ...]:
    """Pick a random non-empty subset of the kind's mutable fields."""
    rng = random.Random(seed ^ 0xF1E7D5)
    pool = list(CONTENT_FIELDS[kind])
    if kind in ("cer", "crl"):
        pool += [f for f in (CRL_FIELDS if kind == "crl" else REPLACEABLE_FIELDS)]
    k = rng.randint(1, max(1, len(pool) // 2))
    return tuple(sorted(rng.sample(pool, k)))


def generate_structured(kind: str, seed: int, field_strategy=None) -> TestObject:
    """Schema-abiding object: mutated values exactly in the selected fields,
    none-sentinels in every repository-dependent field not selected."""
    if kind not in KINDS:
        raise ValueError(f"unknown object kind {kind!r}")
    fields = tuple(field_strategy) if field_strategy else ()
    rng = random.Random(seed)
    builder = _BUILDERS[kind]
    data, mask = builder(rng, frozenset(fields))
    prov = Provenance("structured", kind, seed=seed, fields=tuple(sorted(fields)))
    return TestObject(kind=kind, data=data, provenance=prov, replace_mask=frozenset(mask))


def _mut_int(rng: random.Random) -> int:
    return rng.choice(
        [0, 1, -1, 2 ** 31, 2 ** 32 - 1, 2 ** 32, 2 ** 63, rng.getrandbits(rng.choice((8, 16, 31, 64)))]
    )


def _mut_time(rng: random.Random) -> datetime.datetime:
    base = datetime.datetime(2000, 1, 1, tzinfo=datetime.timezone.utc)
    return base + datetime.timedelta(seconds=rng.getrandbits(31))


def _mut_text(rng: random.Random, max_len: int = 24) -> str:
    alphabet = "abcdefghijklmnopqrstuvwxyz0123456789-._~"
    return "".join(rng.choice(alphabet) for _ in range(rng.randint(0, max_len)))


def _now() -> datetime.datetime:
    return datetime.datetime.now(datetime.timezone.utc).replace(microsecond=0)


def _sentinel_ee_cert(rng: random.Random, mutated: frozenset[str], signed_object_uri: str) -> tuple[DerValue, set[str]]:
    """EE certificate tree with sentinels in all eight dependent fields."""
    return _cert_tree(rng, mutated, is_ca=False, signed_object_uri=signed_object_uri)


def _cert_tree(
    rng: random.Random, mutated: frozenset[str], *, is_ca: bool, signed_object_uri: str | None = None
) -> tuple[DerValue, set[str]]:
    mask: set[str] = set()
    now = _now()
    key = structured_key()

    def uri_for(fld: str, default: str) -> str | None:
        if fld in mutated:
            return f"rsync://mutated.example/{_mut_text(rng)}"
        mask.add(fld)
        return NONE_URI

    subject = common_name(f"gen-{rng.getrandbits(32):08x}")
    if "subject" in mutated and not is_ca:
        subject = (NameAttr(oids.AT_ORGANIZATION_NAME, _mut_text(rng) or "org"),)
    content = CertContent(
        serial=_mut_int(rng) if "serial" in mutated else rng.randint(1, 2 ** 20),
        issuer=(),  # placed below: sentinel or mutated
        subject=subject,
        not_before=_mut_time(rng) if "validity" in mutated else now,
        not_after=_mut_time(rng) if "validity" in mutated else now + datetime.timedelta(days=7),
        spki=key.spki,
        ski=key.key_id,
        aki=None,  # placed below
        is_ca=is_ca,
        sia=SiaInfo(
            ca_repository=uri_for("repositoryLocation", "") if is_ca else None,
            rpki_manifest=uri_for("manifestLocation", "") if is_ca else None,
            rpki_notify=uri_for("notificationLocation", "") if is_ca else None,
            signed_object=signed_object_uri if not is_ca else None,
        ),
        crl_dp=uri_for("crlLocation", ""),
        aia=uri_for("issuerLocation", ""),
        ip_resources=[(1, [Prefix.parse("10.0.0.0/8")])] if "resources" in mutated else INHERIT,
        as_resources=None if not is_ca else INHERIT,
        key_usage_critical=("keyUsage" not in mutated),
    )
    if "parentKeyIdentifier" in mutated:
        content.aki = bytes(rng.getrandbits(8) for _ in range(20))
    else:
        mask.add("parentKeyIdentifier")
        content.aki = SENTINEL_KEY_ID
    if "issuerName" in mutated:
        content.issuer = (NameAttr(oids.AT_COMMON_NAME, _mut_text(rng) or "x"),)
    else:
        mask.add("issuerName")
        content.issuer = ()
    tbs = build_tbs(content)
    if "signature" in mutated:
        sig = bit_string(bytes(rng.getrandbits(8) for _ in range(256)))
    else:
        mask.add("signature")
        sig = SENTINEL_SIGNATURE
    return seq(tbs, _algid_sha256_rsa(), sig), mask


def _cms_wrap_tree(econtent_type: str, econtent: bytes, ee_cert: DerValue, mutated: frozenset[str], rng) -> bytes:
    from .der import explicit, null, octet_string, oid as mkoid, set_of

    digest = keystore.sha256(econtent)
    attrs = set_of(
        seq(mkoid(oids.ATTR_CONTENT_TYPE), set_of(mkoid(econtent_type))),
        seq(mkoid(oids.ATTR_MESSAGE_DIGEST), set_of(octet_string(digest))),
    )
    signer_info = seq(
        integer(3),
        DerValue(0x80, False, structured_key().key_id),
        seq(mkoid(oids.SHA256)),
        DerValue(0x80, True, attrs.children),
        seq(mkoid(oids.RSA_ENCRYPTION), null()),
        octet_string(b""),  # sentinel CMS signature, always scaffold-owned
    )
    signed_data = seq(
        integer(3),
        set_of(seq(mkoid(oids.SHA256))),
        seq(mkoid(econtent_type), explicit(0, octet_string(econtent))),
        DerValue(0x80, True, (ee_cert,)),
        set_of(signer_info),
    )
    return der_encode(seq(mkoid(oids.SIGNED_DATA), explicit(0, signed_data)))


def _build_roa(rng: random.Random, mutated: frozenset[str]):
    as_id = _mut_int(rng) if "asId" in mutated else rng.randint(1, 65535)
    if as_id < 0:
        as_id = abs(as_id)
    n_prefixes = rng.randint(1, 4) if "prefixes" in mutated else 1
    prefixes = []
    for _ in range(n_prefixes):
        length = rng.randint(8, 28)
        addr = rng.getrandbits(32) & ~((1 << (32 - length)) - 1)
        max_length = None
        if "maxLength" in mutated:
            max_length = rng.choice([rng.randint(0, 48), printable(_mut_text(rng, 6) or "z")])
        prefixes.append(RoaPrefix(Prefix(1, addr, length), max_length))
    blocks = [RoaFamilyBlock(1, tuple(prefixes))]
    if "addressFamily" in mutated:
        blocks.append(RoaFamilyBlock(1, (RoaPrefix(Prefix(1, 0, 8), None),)))
    roa = RoaContent(as_id=as_id, blocks=blocks)
    econtent = encode_roa_econtent(roa)
    if "version" in mutated:
        tree = der_decode(econtent)
        from .der import explicit

        tree = tree.with_children((explicit(0, integer(rng.randint(1, 99))),) + tree.children)
        econtent = der_encode(tree)
    ee, mask = _sentinel_ee_cert(rng, mutated, NONE_URI)
    return _cms_wrap_tree(oids.CT_ROA, econtent, ee, mutated, rng), mask


def _build_mft(rng: random.Random, mutated: frozenset[str]):
    now = _now()
    files = []
    n = rng.randint(0, 6) if "fileList" in mutated else 2
    for i in range(n):
        name = _mut_text(rng, 30) + rng.choice((".roa", ".crl", ".cer"))
        digest = bytes(rng.getrandbits(8) for _ in range(rng.choice((32, 32, 32, rng.randint(0, 40)))))
        files.append((name, digest))
    if "fileList" not in mutated:
        files = [("obj.roa", b"\x00" * 32), ("ca.crl", b"\x11" * 32)]
    mft = ManifestContent(
        manifest_number=_mut_int(rng) if "manifestNumber" in mutated else rng.randint(1, 1000),
        this_update=_mut_time(rng) if "thisUpdate" in mutated else now,
        next_update=_mut_time(rng) if "nextUpdate" in mutated else now + datetime.timedelta(hours=24),
        file_list=files,
        file_hash_alg="1.2.840.113549.1.1.1" if "fileHashAlg" in mutated else oids.SHA256,
    )
    econtent = encode_manifest_econtent(mft)
    ee, mask = _sentinel_ee_cert(rng, mutated, NONE_URI)
    return _cms_wrap_tree(oids.CT_MANIFEST, econtent, ee, mutated, rng), mask


def _build_crl(rng: random.Random, mutated: frozenset[str]):
    from .der import explicit, octet_string, oid as mkoid
    from .der import x509_time

    now = _now()
    mask: set[str] = set()
    tbs_fields = [integer(1), _algid_sha256_rsa()]
    if "issuerName" in mutated:
        tbs_fields.append(encode_name((NameAttr(oids.AT_COMMON_NAME, _mut_text(rng) or "x"),)))
    else:
        mask.add("issuerName")
        tbs_fields.append(SENTINEL_NAME)
    tbs_fields.append(x509_time(_mut_time(rng) if "thisUpdate" in mutated else now))
    tbs_fields.append(x509_time(_mut_time(rng) if "nextUpdate" in mutated else now + datetime.timedelta(hours=24)))
    if "revoked" in mutated:
        entries = [seq(integer(_mut_int(rng)), x509_time(_mut_time(rng))) for _ in range(rng.randint(1, 4))]
        tbs_fields.append(seq(*entries))
    exts = []
    if "parentKeyIdentifier" in mutated:
        aki = bytes(rng.getrandbits(8) for _ in range(20))
    else:
        mask.add("parentKeyIdentifier")
        aki = SENTINEL_KEY_ID
    exts.append(seq(mkoid(oids.EXT_AUTHORITY_KEY_ID), octet_string(der_encode(seq(DerValue(0x80, False, aki))))))
    crl_number = _mut_int(rng) if "crlNumber" in mutated else 1
    exts.append(seq(mkoid(oids.EXT_CRL_NUMBER), octet_string(der_encode(integer(crl_number)))))
    tbs_fields.append(explicit(0, seq(*exts)))
    tbs = seq(*tbs_fields)
    if "signature" in mutated:
        sig = bit_string(bytes(rng.getrandbits(8) for _ in range(256)))
    else:
        mask.add("signature")
        sig = SENTINEL_SIGNATURE
    return der_encode(seq(tbs, _algid_sha256_rsa(), sig)), mask


def _build_cer(rng: random.Random, mutated: frozenset[str]):
    tree, mask = _cert_tree(rng, mutated, is_ca=True)
    return der_encode(tree), mask


def _build_aspa(rng: random.Random, mutated: frozenset[str]):
    from .objects.aspa import AspaContent, encode_aspa_econtent

    customer = _mut_int(rng) if "customerAsId" in mutated else rng.randint(1, 65535)
    if "providerAsIds" in mutated:
        providers = tuple(rng.randint(0, 2 ** 32 - 1) for _ in range(rng.randint(0, 6)))
    else:
        providers = tuple(sorted({rng.randint(1, 65535) for _ in range(3)}))
    econtent = encode_aspa_econtent(AspaContent(abs(customer), providers))
    ee, mask = _sentinel_ee_cert(rng, mutated, NONE_URI)
    return _cms_wrap_tree(oids.CT_ASPA, econtent, ee, mutated, rng), mask


def _build_gbr(rng: random.Random, mutated: frozenset[str]):
    gbr = GbrContent(
        full_name=_mut_text(rng) if "fullName" in mutated else "Contact Person",
        properties=[("EMAIL", f"{_mut_text(rng, 8)}@example.net")] if "properties" in mutated else [("TEL", "+1-555-0100")],
    )
    payload = render_vcard(gbr)
    if "framing" in mutated:
        payload = payload.replace(b"BEGIN:VCARD", _mut_text(rng, 12).encode() or b"X")
    ee, mask = _sentinel_ee_cert(rng, mutated, NONE_URI)
    return _cms_wrap_tree(oids.CT_GBR, payload, ee, mutated, rng), mask


def _rrdp_common(rng: random.Random, mutated: frozenset[str]):
    session = str(uuid.UUID(int=rng.getrandbits(128))) if "sessionId" not in mutated else _mut_text(rng, 40)
    serial = rng.randint(1, 1000) if "serial" not in mutated else abs(_mut_int(rng))
    return session, serial


def _build_snapshot(rng: random.Random, mutated: frozenset[str]):
    session, serial = _rrdp_common(rng, mutated)
    doc = rrdpmod.RrdpDocument(kind="snapshot", session_id=session, serial=serial)
    for _ in range(rng.randint(0, 4)):
        uri = f"rsync://{_mut_text(rng, 12) or 'h'}/repo/{_mut_text(rng, 12) or 'f'}.roa"
        if "uris" in mutated:
            uri = f"rsync://h/../{_mut_text(rng, 8)}"
        content = bytes(rng.getrandbits(8) for _ in range(rng.randint(0, 64)))
        doc.publishes.append((uri, content))
    return rrdpmod.render_rrdp(doc, fuzz=True), set()


def _build_delta(rng: random.Random, mutated: frozenset[str]):
    session, serial = _rrdp_common(rng, mutated)
    doc = rrdpmod.RrdpDocument(kind="delta", session_id=session, serial=serial)
    for _ in range(rng.randint(0, 4)):
        uri = f"rsync://h/repo/{_mut_text(rng, 10) or 'f'}.roa"
        if rng.random() < 0.5:
            doc.elements.append(rrdpmod.DeltaElement("publish", uri, b"\x00" * rng.randint(0, 32)))
        else:
            h = "00" * 32 if "withdrawHash" not in mutated else _mut_text(rng, 10)
            doc.elements.append(rrdpmod.DeltaElement("withdraw", uri, None, h))
    return rrdpmod.render_rrdp(doc, fuzz=True), set()


def _build_notification(rng: random.Random, mutated: frozenset[str]):
    session, serial = _rrdp_common(rng, mutated)
    doc = rrdpmod.RrdpDocument(
        kind="notification",
        session_id=session,
        serial=serial,
        snapshot_uri=f"https://{_mut_text(rng, 10) or 'h'}/snapshot-{serial}.xml",
        snapshot_hash=("00" * 32) if "snapshotHash" not in mutated else _mut_text(rng, 16),
    )
    if "deltaList" in mutated:
        for _ in range(rng.randint(1, 4)):
            doc.deltas.append(
                rrdpmod.NotificationDelta(abs(_mut_int(rng)) % 10 ** 9, f"https://h/delta-{rng.randint(0,99)}.xml", "11" * 32)
            )
    return rrdpmod.render_rrdp(doc, fuzz=True), set()


def _build_tal(rng: random.Random, mutated: frozenset[str]):
    uris = [f"https://{_mut_text(rng, 12) or 'host'}/ta.cer"]
    if "uris" in mutated:
        uris = [f"https://h/../{_mut_text(rng, 10)}.cer" for _ in range(rng.randint(1, 3))]
    spki = structured_key().spki
    if "spki" in mutated:
        spki = bytes(rng.getrandbits(8) for _ in range(rng.randint(8, 300)))
    return render_tal(TalDocument(uris=uris, spki=spki)), set()


def _build_rtr(rng: random.Random, mutated: frozenset[str]):
    from .factory import make_rtr_pdu

    declared = 8 if "declaredLength" not in mutated else abs(_mut_int(rng)) % 2 ** 32
    payload = 0 if "payload" not in mutated else rng.randint(0, 4096)
    kinds = list(("reset-query", "serial-query", "error-report"))
    kind = kinds[0] if "pduType" not in mutated else rng.choice(kinds)
    return make_rtr_pdu(kind, declared, payload), set()


_BUILDERS = {
    "roa": _build_roa,
    "mft": _build_mft,
    "crl": _build_crl,
    "cer": _build_cer,
    "aspa": _build_aspa,
    "gbr": _build_gbr,
    "snapshot": _build_snapshot,
    "delta": _build_delta,
    "notification": _build_notification,
    "tal": _build_tal,
    "rtr-pdu": _build_rtr,
}


def regenerate(provenance: Provenance, corpus_dir=None) -> TestObject:
    """Rebuild a test object bit-exactly from its provenance."""
    if provenance.generator == "structured":
        return generate_structured(provenance.kind, provenance.seed, provenance.fields)
    if provenance.generator == "mutate_bytes":
        if corpus_dir is None or provenance.parent_corpus_id is None:
            raise ValueError("byte-mutated objects need the base corpus to regenerate")
        base = (Path(corpus_dir) / provenance.parent_corpus_id).read_bytes()
        return mutate_bytes(
            base,
            provenance.seed,
            provenance.ops_budget or 0,
            kind=provenance.kind,
            parent_corpus_id=provenance.parent_corpus_id,
        )
    if provenance.generator == "corpus":
        if corpus_dir is None or provenance.parent_corpus_id is None:
            raise ValueError("corpus objects need the corpus directory to regenerate")
        data = (Path(corpus_dir) / provenance.parent_corpus_id).read_bytes()
        return TestObject(kind=provenance.kind, data=data, provenance=provenance)
    raise ValueError(f"unknown generator {provenance.generator!r}")


# ---------------------------------------------------------------------------
# corpus feeding

def corpus_write(corpus_dir, obj: TestObject) -> Path:
    """Store an object as <corpus>/<kind>/<id><ext> plus a mask sidecar."""
    kind_dir = Path(corpus_dir) / obj.kind
    kind_dir.mkdir(parents=True, exist_ok=True)
    path = kind_dir / f"{obj.object_id}{EXT_BY_KIND[obj.kind]}"
    path.write_bytes(obj.data)
    if obj.replace_mask is not None:
        sidecar = path.with_suffix(path.suffix + ".mask.json")
        sidecar.write_text(json.dumps({"replace_mask": sorted(obj.replace_mask)}))
    return path


def corpus_feed(
    corpus_dir,
    batch_size: int,
    *,
    kind: str | None = None,
    poll_interval: float = 0.5,
    max_idle_polls: int | None = None,
    stop=None,
):
    """Yield batches of TestObjects from a corpus directory, in name order.

    Consumes files at most once; idles when nothing new is present and resumes
    when files appear.  Terminates after max_idle_polls empty scans or when
    `stop` (a threading.Event) is set.
    """
    corpus = Path(corpus_dir)
    seen: set[Path] = set()
    idle = 0
    while True:
        if stop is not None and stop.is_set():
            return
        fresh = []
        if corpus.is_dir():
            for path in sorted(corpus.rglob("*")):
                if path in seen or not path.is_file() or path.name.endswith(".mask.json"):
                    continue
                seen.add(path)
                fresh.append(path)
        if fresh:
            idle = 0
            batch: list[TestObject] = []
            for path in fresh:
                batch.append(_load_corpus_file(corpus, path, kind))
                if len(batch) == batch_size:
                    yield batch
                    batch = []
            if batch:
                yield batch
        else:
            idle += 1
            if max_idle_polls is not None and idle >= max_idle_polls:
                return
            time.sleep(poll_interval)


def _load_corpus_file(corpus: Path, path: Path, default_kind: str | None) -> TestObject:
    parent = path.parent.name
    kind = parent if parent in KINDS else default_kind
    if kind is None:
        raise ValueError(f"cannot infer kind for corpus file {path}; pass kind=")
    rel = str(path.relative_to(corpus))
    mask = None
    sidecar = path.with_suffix(path.suffix + ".mask.json")
    if sidecar.exists():
        try:
            mask = frozenset(json.loads(sidecar.read_text())["replace_mask"])
        except (ValueError, KeyError):
            mask = None
    prov = Provenance("corpus", kind, parent_corpus_id=rel)
    return TestObject(kind=kind, data=path.read_bytes(), provenance=prov, replace_mask=mask)
