"""Command-line front end for the stub relying party.

Single-validation mode: read TALs, fetch and validate everything reachable,
write one VRP file, exit.  Exit code 0 means the validation round completed
(rejected objects are not errors); the fault-injection flags exist so
harnesses can rehearse crash and missing-output detection.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .quirks import PROFILES, QUIRK_FLAGS, resolve_quirks
from .validator import Fetcher, FaultInjection, StubCrash, StubValidator


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rpkifuzz-stub-rp", description=__doc__)
    parser.add_argument("--tal", required=True, help="TAL file or directory of .tal files")
    parser.add_argument("--output", required=True, help="VRP output path")
    parser.add_argument("--cache", default=None, help="working directory (kept for interface parity)")
    parser.add_argument("--hosts", default=None, help="JSON hosts-override map {domain: base_url}")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--quirks", choices=sorted(PROFILES), default="strict", help="validator profile")
    parser.add_argument(
        "--quirk", action="append", default=[], choices=sorted(QUIRK_FLAGS), help="additional quirk flag"
    )
    parser.add_argument("--die-on-pattern", default=None, help="hex pattern that triggers a simulated crash")
    parser.add_argument("--die-mode", choices=("exit", "silent", "hang"), default="exit")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def load_tals(path: Path) -> list[bytes]:
    if path.is_dir():
        return [p.read_bytes() for p in sorted(path.glob("*.tal"))]
    return [path.read_bytes()]


def write_vrps(path: Path, vrps, fmt: str) -> None:
    rows = sorted(vrps)
    if fmt == "csv":
        lines = ["ASN,IP Prefix,Max Length"]
        lines += [f"{asn},{prefix},{maxlen}" for asn, prefix, maxlen in rows]
        path.write_text("\n".join(lines) + "\n")
    else:
        path.write_text(
            json.dumps([{"asn": a, "prefix": p, "maxLength": m} for a, p, m in rows], indent=1)
        )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        stream=sys.stderr,
        format="stub-rp %(levelname)s %(message)s",
    )
    hosts = None
    if args.hosts:
        hosts = json.loads(Path(args.hosts).read_text())
    quirks = resolve_quirks(args.quirks, args.quirk)
    fault = FaultInjection(
        pattern=bytes.fromhex(args.die_on_pattern) if args.die_on_pattern else None,
        mode=args.die_mode,
    )
    validator = StubValidator(quirks=quirks, fetcher=Fetcher(hosts), fault=fault)
    tals = load_tals(Path(args.tal))
    if not tals:
        print("no TAL files found", file=sys.stderr)
        return 1
    try:
        run = validator.run(tals)
    except StubCrash as crash:
        if crash.mode == "silent":
            return 0  # die without producing output
        if crash.mode == "hang":
            time.sleep(3600)
            return 0
        print("fatal: injected crash", file=sys.stderr)
        return 134
    write_vrps(Path(args.output), run.vrps, args.format)
    for line in run.rejected:
        print(f"rejected {line}", file=sys.stderr)
    print(f"validation complete: {len(run.vrps)} VRPs, {len(run.rejected)} rejections", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
