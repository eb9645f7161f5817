"""RRDP notification/snapshot/delta documents.

Rendering is byte-deterministic (hand-built XML, fixed attribute order,
lowercase hex hashes, base64 content).  Invariants -- hash of the served
snapshot, shared session id and referenced serial -- are checked on render
unless the fuzzing override suspends them.
"""

from __future__ import annotations

import base64
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from xml.sax.saxutils import escape, quoteattr

from .. import keystore

RRDP_NS = "http://www.ripe.net/rpki/rrdp"
XML_DECL = '<?xml version="1.0" encoding="UTF-8"?>\n'


@dataclass(frozen=True)
class NotificationDelta:
    serial: int
    uri: str
    hash: str


@dataclass(frozen=True)
class DeltaElement:
    action: str  # "publish" | "withdraw"
    uri: str
    content: bytes | None = None
    hash: str | None = None


@dataclass
class RrdpDocument:
    kind: str  # notification | snapshot | delta
    session_id: str
    serial: int
    # notification
    snapshot_uri: str | None = None
    snapshot_hash: str | None = None
    deltas: list[NotificationDelta] = field(default_factory=list)
    # snapshot
    publishes: list[tuple[str, bytes]] = field(default_factory=list)
    # delta
    elements: list[DeltaElement] = field(default_factory=list)


def sha256_hex(data: bytes) -> str:
    return keystore.sha256(data).hex()


def render_rrdp(doc: RrdpDocument, *, fuzz: bool = False) -> bytes:
    """Serialize to RFC-shaped XML; `fuzz=True` suspends invariant checks."""
    if not fuzz:
        _check_invariants(doc)
    if doc.kind == "notification":
        return _render_notification(doc)
    if doc.kind == "snapshot":
        return _render_snapshot(doc)
    if doc.kind == "delta":
        return _render_delta(doc)
    raise ValueError(f"unknown RRDP document kind {doc.kind!r}")


def _check_invariants(doc: RrdpDocument) -> None:
    if doc.kind == "notification":
        if not doc.snapshot_uri or not doc.snapshot_hash:
            raise ValueError("notification requires snapshot uri and hash")
        for d in doc.deltas:
            if d.serial > doc.serial:
                raise ValueError("delta serial beyond notification serial")
    if doc.serial < 0:
        raise ValueError("negative serial")


def _header(doc: RrdpDocument, element: str) -> str:
    return (
        f'<{element} xmlns="{RRDP_NS}" version="1" '
        f"session_id={quoteattr(doc.session_id)} serial=\"{doc.serial}\">"
    )


def _render_notification(doc: RrdpDocument) -> bytes:
    parts = [XML_DECL, _header(doc, "notification"), "\n"]
    parts.append(
        f'  <snapshot uri={quoteattr(doc.snapshot_uri or "")} hash="{doc.snapshot_hash}"/>\n'
    )
    for d in doc.deltas:
        parts.append(f'  <delta serial="{d.serial}" uri={quoteattr(d.uri)} hash="{d.hash}"/>\n')
    parts.append("</notification>\n")
    return "".join(parts).encode("utf-8")


def _render_snapshot(doc: RrdpDocument) -> bytes:
    parts = [XML_DECL, _header(doc, "snapshot"), "\n"]
    for uri, content in doc.publishes:
        b64 = base64.b64encode(content).decode("ascii")
        parts.append(f"  <publish uri={quoteattr(uri)}>{b64}</publish>\n")
    parts.append("</snapshot>\n")
    return "".join(parts).encode("utf-8")


def _render_delta(doc: RrdpDocument) -> bytes:
    parts = [XML_DECL, _header(doc, "delta"), "\n"]
    for el in doc.elements:
        if el.action == "publish":
            b64 = base64.b64encode(el.content or b"").decode("ascii")
            hash_attr = f' hash="{el.hash}"' if el.hash else ""
            parts.append(f"  <publish uri={quoteattr(el.uri)}{hash_attr}>{b64}</publish>\n")
        else:
            parts.append(f'  <withdraw uri={quoteattr(el.uri)} hash="{el.hash}"/>\n')
    parts.append("</delta>\n")
    return "".join(parts).encode("utf-8")


def parse_rrdp(data: bytes) -> RrdpDocument:
    root = ET.fromstring(data)
    tag = root.tag
    if tag.startswith("{"):
        ns, _, tag = tag[1:].partition("}")
        if ns != RRDP_NS:
            raise ValueError(f"unexpected RRDP namespace {ns!r}")
    doc = RrdpDocument(
        kind=tag,
        session_id=root.attrib.get("session_id", ""),
        serial=int(root.attrib.get("serial", "0")),
    )
    if root.attrib.get("version") != "1":
        raise ValueError("unsupported RRDP version")
    for child in root:
        ctag = child.tag.rsplit("}", 1)[-1]
        if tag == "notification":
            if ctag == "snapshot":
                doc.snapshot_uri = child.attrib["uri"]
                doc.snapshot_hash = child.attrib["hash"]
            elif ctag == "delta":
                doc.deltas.append(
                    NotificationDelta(int(child.attrib["serial"]), child.attrib["uri"], child.attrib["hash"])
                )
        elif tag == "snapshot":
            if ctag == "publish":
                doc.publishes.append((child.attrib["uri"], base64.b64decode(child.text or "")))
        elif tag == "delta":
            if ctag == "publish":
                doc.elements.append(
                    DeltaElement("publish", child.attrib["uri"], base64.b64decode(child.text or ""), child.attrib.get("hash"))
                )
            elif ctag == "withdraw":
                doc.elements.append(DeltaElement("withdraw", child.attrib["uri"], None, child.attrib.get("hash")))
    return doc
