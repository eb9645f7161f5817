"""Ghostbuster record payloads: a vCard with contact details, CRLF line endings."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class GbrContent:
    full_name: str = "RPKI Contact"
    properties: list[tuple[str, str]] = field(default_factory=list)  # (ADR/TEL/EMAIL/..., value)


def render_vcard(gbr: GbrContent) -> bytes:
    lines = ["BEGIN:VCARD", "VERSION:4.0", f"FN:{gbr.full_name}"]
    lines.extend(f"{prop}:{value}" for prop, value in gbr.properties)
    lines.append("END:VCARD")
    return ("\r\n".join(lines) + "\r\n").encode("utf-8")


def parse_vcard(data: bytes) -> GbrContent:
    text = data.decode("utf-8", errors="replace")
    lines = [ln for ln in text.replace("\r\n", "\n").split("\n") if ln]
    if not lines or lines[0] != "BEGIN:VCARD" or lines[-1] != "END:VCARD":
        raise ValueError("missing vCard framing")
    gbr = GbrContent(full_name="")
    for line in lines[1:-1]:
        prop, _, value = line.partition(":")
        if prop == "FN":
            gbr.full_name = value
        elif prop != "VERSION":
            gbr.properties.append((prop, value))
    return gbr
