"""Deterministic conformance cases for known cross-validator divergences.

Each case builds a repository that differs from a benign baseline in exactly
one named deviation, attaches a marker ROA so acceptance is observable in VRP
output, and carries the accept/reject row observed per validator (2023-era
releases).  Conformance runs report deviations from those historical
expectations informationally; vendors patch, so a mismatch is a note, never a
failure.
"""

from __future__ import annotations

import datetime
import random
import uuid
from dataclasses import dataclass, field

from . import keystore, oids
from .der import DerValue, der_decode, der_encode, printable
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
from .harness import RpAdapter, run_once
from .objects.cms import cms_assemble
from .objects.names import NameAttr
from .objects.resources import INHERIT
from .objects.roa import RoaContent, RoaFamilyBlock, RoaPrefix, encode_roa_econtent
from .objects.rrdp import RrdpDocument, parse_rrdp, render_rrdp
from .objects.tal import TalDocument, render_tal
from .publisher import RrdpServer, publish
from .scaffold import PpState, RepositoryState, build_rrdp_documents

RP_NAMES = ("routinator", "fort", "octorpki", "rpki-client")

MARKER_VRP = (64700, "10.200.0.0/24", 24)
TEST_AS = 64701
TEST_PREFIX = "10.201.0.0/24"


@dataclass(frozen=True)
class ConformanceCase:
    id: str
    rfc_ref: str
    expected: dict[str, str]  # rp name -> accepts | rejects | unknown
    observe: str  # "marker" | "test"
    description: str


def _expected(**kw) -> dict[str, str]:
    out = {name: "unknown" for name in RP_NAMES}
    out.update(kw)
    return out


CASES: tuple[ConformanceCase, ...] = (
    ConformanceCase(
        "expired-crl-valid-mft",
        "RFC 9286 s6.6",
        _expected(routinator="rejects", fort="rejects", octorpki="accepts", **{"rpki-client": "rejects"}),
        "marker",
        "CRL nextUpdate in the past while the manifest is still valid",
    ),
    ConformanceCase(
        "ee-validity-misaligned",
        "RFC 9286 s5.1.2",
        _expected(routinator="accepts", fort="accepts", octorpki="accepts", **{"rpki-client": "accepts"}),
        "marker",
        "manifest EE validity does not match this/nextUpdate (must not be an error)",
    ),
    ConformanceCase(
        "crl-missing-number",
        "RFC 6487 s5",
        _expected(routinator="rejects", fort="rejects", octorpki="accepts", **{"rpki-client": "accepts"}),
        "marker",
        "CRL Number extension absent",
    ),
    ConformanceCase(
        "crl-missing-signature",
        "RFC 6487 s5 / RFC 5280",
        _expected(routinator="rejects", fort="rejects", octorpki="accepts", **{"rpki-client": "rejects"}),
        "marker",
        "signatureValue field absent from the CRL",
    ),
    ConformanceCase(
        "crl-missing-sigalg",
        "RFC 6487 s5 / RFC 5280",
        _expected(routinator="rejects", fort="rejects", octorpki="accepts", **{"rpki-client": "rejects"}),
        "marker",
        "signatureAlgorithm field absent from the CRL",
    ),
    ConformanceCase(
        "crl-missing-issuer",
        "RFC 6487 s5 / RFC 5280",
        _expected(routinator="rejects", fort="rejects", octorpki="accepts", **{"rpki-client": "rejects"}),
        "marker",
        "issuer field absent from the CRL",
    ),
    ConformanceCase(
        "roa-repeated-family",
        "RFC 6482 s3 / RFC 3779 s2.2.3.1",
        _expected(routinator="rejects", fort="accepts", octorpki="accepts", **{"rpki-client": "accepts"}),
        "test",
        "two ipAddrBlocks entries with the same address family",
    ),
    ConformanceCase(
        "roa-maxlength-noninteger",
        "RFC 6482",
        _expected(routinator="rejects", fort="rejects", octorpki="accepts", **{"rpki-client": "rejects"}),
        "test",
        "maxLength slot holds a non-integer value",
    ),
    ConformanceCase(
        "roa-overlong-prefix",
        "BGP propagation practice",
        _expected(routinator="accepts", fort="accepts", octorpki="rejects", **{"rpki-client": "accepts"}),
        "test",
        "IPv4 prefix longer than /24",
    ),
    ConformanceCase(
        "ee-issuer-organisationname",
        "RFC 6487 s4",
        _expected(routinator="accepts", fort="rejects", octorpki="accepts", **{"rpki-client": "accepts"}),
        "marker",
        "EE issuer carries an OrganizationName attribute",
    ),
    ConformanceCase(
        "snapshot-session-mismatch",
        "RFC 8182 s3.4.3",
        _expected(routinator="rejects", fort="rejects", octorpki="accepts", **{"rpki-client": "rejects"}),
        "marker",
        "snapshot session_id differs from the notification",
    ),
    ConformanceCase(
        "cert-duplicate-serial",
        "RFC 6487 s4.2",
        _expected(routinator="accepts", fort="rejects", octorpki="accepts", **{"rpki-client": "rejects"}),
        "marker",
        "two certificates share one serial under the same issuer",
    ),
    ConformanceCase(
        "cert-noncritical-keyusage",
        "RFC 6487 s4.8.4",
        _expected(routinator="accepts", fort="rejects", octorpki="accepts", **{"rpki-client": "rejects"}),
        "marker",
        "keyUsage and resource extensions not marked critical",
    ),
    ConformanceCase(
        "roa-asid-inherit",
        "RFC 6482 (unspecified corner)",
        _expected(routinator="accepts", fort="accepts", octorpki="accepts", **{"rpki-client": "rejects"}),
        "test",
        "EE certificate carries AS resources marked inherit",
    ),
)

_BY_ID = {case.id: case for case in CASES}


def list_cases() -> list[str]:
    return [case.id for case in CASES]


def get_case(case_id: str) -> ConformanceCase:
    if case_id not in _BY_ID:
        raise KeyError(f"unknown conformance case {case_id!r}")
    return _BY_ID[case_id]


# ---------------------------------------------------------------------------
# case construction

def _default_build_time() -> datetime.datetime:
    return utcnow().replace(minute=0, second=0, microsecond=0)


class _CaseBuilder:
    """Single-PP repository assembled from factory parts, fully seeded."""

    def __init__(self, seed: int, now: datetime.datetime | None):
        self.now = now or _default_build_time()
        self.rng = random.Random(seed)
        self.pool = keystore.pool_create(12, seed=seed)
        self.domain = "case.rpkifuzz.example"
        self.window = datetime.timedelta(hours=24)
        self.root = CaIdentity.create("root", self.pool.acquire(), self.domain)
        _, self.root_cert = make_ca_cert(
            self.root, None, ALL_RESOURCES_IP, ALL_RESOURCES_AS,
            not_before=self.now - datetime.timedelta(minutes=5),
            not_after=self.now + datetime.timedelta(days=7),
            now=self.now,
        )
        self.pp = PpState(
            domain=self.domain,
            session_id=str(uuid.UUID(int=self.rng.getrandbits(128), version=4)),
            serial=1,
        )
        self.pp.https_files["/root.cer"] = self.root_cert
        self.root_files: list[tuple[str, bytes]] = []

    def new_ca(self, name: str, **cert_kwargs) -> CaIdentity:
        ca = CaIdentity.create(name, self.pool.acquire(), self.domain, parent=self.root,
                               subject_attrs=cert_kwargs.pop("subject_attrs", None))
        _, cert = make_ca_cert(
            ca, self.root,
            not_before=self.now - datetime.timedelta(minutes=5),
            not_after=self.now + datetime.timedelta(days=7),
            now=self.now,
            **cert_kwargs,
        )
        self.root_files.append((f"{name}.cer", cert))
        return ca

    def marker(self, ca: CaIdentity) -> tuple[str, bytes]:
        data = make_roa(
            ca, MARKER_VRP[0], [(MARKER_VRP[1], MARKER_VRP[2])], self.pool.acquire(),
            object_uri=ca.repo_uri + "marker.roa", now=self.now,
        )
        return "marker.roa", data

    def emit_ca(self, ca: CaIdentity, files: list[tuple[str, bytes]], *,
                crl: bytes | None = None, mft: bytes | None = None,
                mft_ee_window: tuple | None = None):
        if crl is None:
            crl = make_crl(ca, [], self.now, self.now + self.window, 1)
        self.pp.publishes[ca.crl_uri] = crl
        entries = [(f"{ca.name}.crl", keystore.sha256(crl))]
        for name, data in files:
            self.pp.publishes[ca.repo_uri + name] = data
            entries.append((name, keystore.sha256(data)))
        entries.sort()
        if mft is None:
            ee_nb, ee_na = mft_ee_window or (self.now, self.now + self.window)
            mft = make_manifest(
                ca, entries, self.now, self.now + self.window, 1, self.pool.acquire(),
                ee_not_before=ee_nb, ee_not_after=ee_na,
            )
        self.pp.publishes[ca.mft_uri] = mft

    def finalize(self, case_id: str, test_vrps: set) -> RepositoryState:
        self.emit_ca(self.root, self.root_files)
        build_rrdp_documents(self.pp)
        tal = TalDocument(uris=[self.root.cert_uri], spki=self.root.key.spki)
        state = RepositoryState(
            tal=tal,
            tal_bytes=render_tal(tal),
            pps={self.domain: self.pp},
            objects=dict(self.pp.publishes),
            markers={case_id: {MARKER_VRP}},
            expected_vrps={case_id: set(test_vrps)},
            test_index={case_id: self.domain},
        )
        return state


def build_case(case_id: str, seed: int = 0, now: datetime.datetime | None = None) -> tuple[RepositoryState, dict[str, str]]:
    """Deterministic repository for one case plus its expected matrix."""
    case = get_case(case_id)
    b = _CaseBuilder(seed, now)
    test_vrps: set = set()
    ca = None

    if case.id == "expired-crl-valid-mft":
        ca = b.new_ca("ca-case")
        name, marker = b.marker(ca)
        expired = make_crl(ca, [], b.now - datetime.timedelta(hours=2), b.now - datetime.timedelta(hours=1), 1)
        b.emit_ca(ca, [(name, marker)], crl=expired)
    elif case.id == "ee-validity-misaligned":
        ca = b.new_ca("ca-case")
        name, marker = b.marker(ca)
        window = (b.now - datetime.timedelta(days=1), b.now + datetime.timedelta(days=3))
        b.emit_ca(ca, [(name, marker)], mft_ee_window=window)
    elif case.id == "crl-missing-number":
        ca = b.new_ca("ca-case")
        name, marker = b.marker(ca)
        b.emit_ca(ca, [(name, marker)], crl=make_crl(ca, [], b.now, b.now + b.window, crl_number=None))
    elif case.id == "crl-missing-signature":
        ca = b.new_ca("ca-case")
        name, marker = b.marker(ca)
        b.emit_ca(ca, [(name, marker)], crl=make_crl(ca, [], b.now, b.now + b.window, 1, omit_signature=True))
    elif case.id == "crl-missing-sigalg":
        ca = b.new_ca("ca-case")
        name, marker = b.marker(ca)
        b.emit_ca(ca, [(name, marker)], crl=make_crl(ca, [], b.now, b.now + b.window, 1, omit_signature_alg=True))
    elif case.id == "crl-missing-issuer":
        ca = b.new_ca("ca-case")
        name, marker = b.marker(ca)
        b.emit_ca(ca, [(name, marker)], crl=make_crl(ca, [], b.now, b.now + b.window, 1, omit_issuer=True))
    elif case.id == "roa-repeated-family":
        ca = b.new_ca("ca-case")
        name, marker = b.marker(ca)
        from .objects.resources import Prefix

        roa_content = RoaContent(
            as_id=TEST_AS,
            blocks=[
                RoaFamilyBlock(1, (RoaPrefix(Prefix.parse(TEST_PREFIX), 24),)),
                RoaFamilyBlock(1, (RoaPrefix(Prefix.parse("10.202.0.0/24"), 24),)),
            ],
        )
        data = make_roa(ca, TEST_AS, None, b.pool.acquire(), roa_content=roa_content,
                        object_uri=ca.repo_uri + "test.roa", now=b.now)
        test_vrps = {(TEST_AS, TEST_PREFIX, 24), (TEST_AS, "10.202.0.0/24", 24)}
        b.emit_ca(ca, [(name, marker), ("test.roa", data)])
    elif case.id == "roa-maxlength-noninteger":
        ca = b.new_ca("ca-case")
        name, marker = b.marker(ca)
        from .objects.resources import Prefix

        roa_content = RoaContent(
            as_id=TEST_AS,
            blocks=[RoaFamilyBlock(1, (RoaPrefix(Prefix.parse(TEST_PREFIX), printable("xyz")),))],
        )
        data = make_roa(ca, TEST_AS, None, b.pool.acquire(), roa_content=roa_content,
                        object_uri=ca.repo_uri + "test.roa", now=b.now)
        test_vrps = {(TEST_AS, TEST_PREFIX, 24)}  # tolerant parse: maxLength falls back to prefix length
        b.emit_ca(ca, [(name, marker), ("test.roa", data)])
    elif case.id == "roa-overlong-prefix":
        ca = b.new_ca("ca-case")
        name, marker = b.marker(ca)
        data = make_roa(ca, TEST_AS, [("10.201.0.0/28", 28)], b.pool.acquire(),
                        object_uri=ca.repo_uri + "test.roa", now=b.now)
        test_vrps = {(TEST_AS, "10.201.0.0/28", 28)}
        b.emit_ca(ca, [(name, marker), ("test.roa", data)])
    elif case.id == "ee-issuer-organisationname":
        ca = b.new_ca(
            "ca-case",
            subject_attrs=(
                NameAttr(oids.AT_COMMON_NAME, "ca-case"),
                NameAttr(oids.AT_ORGANIZATION_NAME, "Example Cloud Org", True),
            ),
        )
        name, marker = b.marker(ca)
        b.emit_ca(ca, [(name, marker)])
    elif case.id == "snapshot-session-mismatch":
        ca = b.new_ca("ca-case")
        name, marker = b.marker(ca)
        b.emit_ca(ca, [(name, marker)])
        state = b.finalize(case.id, test_vrps)
        pp = state.pps[b.domain]
        snap_path = f"/snapshot-{pp.serial}.xml"
        snap = parse_rrdp(pp.rrdp_docs[snap_path])
        mismatched = render_rrdp(
            RrdpDocument("snapshot", snap.session_id[:-4] + "beef", snap.serial, publishes=snap.publishes)
        )
        pp.rrdp_docs[snap_path] = mismatched
        base = f"https://{pp.domain}"
        pp.rrdp_docs["/notification.xml"] = render_rrdp(
            RrdpDocument(
                "notification", pp.session_id, pp.serial,
                snapshot_uri=base + snap_path,
                snapshot_hash=keystore.sha256(mismatched).hex(),
            )
        )
        return state, dict(case.expected)
    elif case.id == "cert-duplicate-serial":
        ca_a = b.new_ca("ca-case-a", serial=77)
        name_a, marker_a = b.marker(ca_a)
        # ca-a gets an ordinary repo but a different ROA so only ca-b's marker decides
        roa_a = make_roa(ca_a, 64710, [("10.210.0.0/24", 24)], b.pool.acquire(),
                         object_uri=ca_a.repo_uri + "a.roa", now=b.now)
        b.emit_ca(ca_a, [("a.roa", roa_a)])
        ca = b.new_ca("ca-case-b", serial=77)
        name, marker = b.marker(ca)
        b.emit_ca(ca, [(name, marker)])
    elif case.id == "cert-noncritical-keyusage":
        ca = b.new_ca("ca-case", key_usage_critical=False, resources_critical=False)
        name, marker = b.marker(ca)
        b.emit_ca(ca, [(name, marker)])
    elif case.id == "roa-asid-inherit":
        ca = b.new_ca("ca-case")
        name, marker = b.marker(ca)
        data = make_roa(ca, TEST_AS, [(TEST_PREFIX, 24)], b.pool.acquire(),
                        object_uri=ca.repo_uri + "test.roa", now=b.now,
                        ee_kwargs={"as_resources": INHERIT})
        test_vrps = {(TEST_AS, TEST_PREFIX, 24)}
        b.emit_ca(ca, [(name, marker), ("test.roa", data)])
    else:
        raise KeyError(case.id)

    return b.finalize(case.id, test_vrps), dict(case.expected)


# ---------------------------------------------------------------------------
# conformance runs

@dataclass
class ConformanceResult:
    case_id: str
    rfc_ref: str
    rows: dict[str, dict[str, str]] = field(default_factory=dict)  # rp -> expected/observed/note


def observe_acceptance(case: ConformanceCase, state: RepositoryState, vrps) -> bool:
    from .harness import canonical_set

    if vrps is None:
        return False
    wanted = state.markers[case.id] if case.observe == "marker" else state.expected_vrps[case.id]
    return canonical_set(wanted) <= vrps


def run_conformance(adapters: list[RpAdapter], case_ids: list[str] | None = None, seed: int = 0,
                    now: datetime.datetime | None = None) -> list[ConformanceResult]:
    """Observed accept/reject per (case, adapter) next to the expected matrix."""
    results = []
    for case_id in case_ids or list_cases():
        case = get_case(case_id)
        state, expected = build_case(case_id, seed=seed, now=now)
        result = ConformanceResult(case_id=case_id, rfc_ref=case.rfc_ref)
        with RrdpServer() as server:
            endpoints = publish(state, server)
            for adapter in adapters:
                outcome = run_once(adapter, endpoints)
                observed = "accepts" if (outcome.classification == "ok" and observe_acceptance(case, state, outcome.vrps)) else "rejects"
                exp = expected.get(adapter.name, "unknown")
                note = ""
                if exp != "unknown" and exp != observed:
                    note = "behavior differs from the recorded observation"
                result.rows[adapter.name] = {"expected": exp, "observed": observed, "note": note}
        results.append(result)
    return results


def cases_manifest() -> list[dict]:
    return [
        {
            "id": case.id,
            "rfcRef": case.rfc_ref,
            "description": case.description,
            "observe": case.observe,
            "expected": dict(case.expected),
        }
        for case in CASES
    ]


def matrix_markdown(results: list[ConformanceResult]) -> str:
    if not results:
        return "(no cases run)\n"
    rp_names = sorted({rp for r in results for rp in r.rows})
    header = "| case | " + " | ".join(rp_names) + " |"
    sep = "|" + "---|" * (len(rp_names) + 1)
    lines = [header, sep]
    for r in results:
        cells = []
        for rp in rp_names:
            row = r.rows.get(rp)
            if row is None:
                cells.append("-")
                continue
            mark = "OK" if not row["note"] else "changed"
            cells.append(f"{row['observed']} ({row['expected']}, {mark})")
        lines.append(f"| {r.case_id} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
