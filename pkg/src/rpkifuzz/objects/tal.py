"""Trust anchor locators: root certificate URIs plus the pinned public key."""

from __future__ import annotations

import base64
from dataclasses import dataclass


@dataclass
class TalDocument:
    uris: list[str]
    spki: bytes  # DER SubjectPublicKeyInfo


def render_tal(tal: TalDocument) -> bytes:
    if not tal.uris:
        raise ValueError("TAL requires at least one URI")
    b64 = base64.b64encode(tal.spki).decode("ascii")
    wrapped = [b64[i : i + 64] for i in range(0, len(b64), 64)]
    lines = list(tal.uris) + [""] + wrapped
    return ("\n".join(lines) + "\n").encode("ascii")


def parse_tal(data: bytes) -> TalDocument:
    text = data.decode("ascii", errors="strict")
    lines = text.splitlines()
    uris: list[str] = []
    b64_lines: list[str] = []
    seen_blank = False
    for line in lines:
        if not line.strip():
            seen_blank = True
            continue
        if seen_blank:
            b64_lines.append(line.strip())
        else:
            uris.append(line.strip())
    if not uris or not b64_lines:
        raise ValueError("malformed TAL: need URIs, blank line, base64 key")
    return TalDocument(uris=uris, spki=base64.b64decode("".join(b64_lines)))
