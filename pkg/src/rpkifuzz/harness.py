"""Black-box execution of relying-party binaries and outcome analysis.

Every validator runs as an external process in single-validation mode with a
fresh cache directory; crashes are recognized purely from the outside: a
non-zero exit code, or a run that exits zero without producing a VRP file.
A crash report is only emitted after the culprit reproduces standalone, so a
crash finding always corresponds to a real failed validation run.
"""

from __future__ import annotations

import dataclasses
import datetime
import ipaddress
import json
import shutil
import socket
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

from .mutation import TestObject

CRASH_CLASSES = ("crash-exit", "crash-novrp")


@dataclass(frozen=True, order=True)
class VrpEntry:
    asn: int
    prefix: str
    max_length: int

    @classmethod
    def canonical(cls, asn, prefix, max_length=None) -> "VrpEntry":
        if isinstance(asn, str):
            asn = int(asn.strip().upper().removeprefix("AS"))
        net = ipaddress.ip_network(str(prefix).strip(), strict=False)
        if max_length in (None, ""):
            max_length = net.prefixlen
        return cls(asn=asn, prefix=str(net), max_length=int(max_length))


def canonical_set(entries) -> frozenset[VrpEntry]:
    out = set()
    for e in entries:
        if isinstance(e, VrpEntry):
            out.add(e)
        else:
            asn, prefix, maxlen = e
            out.add(VrpEntry.canonical(asn, prefix, maxlen))
    return frozenset(out)


# ---------------------------------------------------------------------------
# adapters

PLACEHOLDERS = ("{talDir}", "{outputPath}")


@dataclass
class RpAdapter:
    """How to run one validator: a command template plus output conventions.

    Known placeholders: {talDir} {cacheDir} {outputPath} {hostsFile} {rrdpRoot}.
    """

    name: str
    command: list[str]
    output_format: str = "csv"
    vrp_path: str = "{outputPath}"
    timeout: float = 300.0
    env: dict[str, str] = field(default_factory=dict)
    column_map: dict[str, object] | None = None

    def __post_init__(self):
        joined = " ".join(self.command)
        for ph in PLACEHOLDERS:
            if ph not in joined:
                raise ValueError(f"adapter {self.name!r} misconfigured: missing placeholder {ph}")

    @classmethod
    def stub(
        cls,
        name: str = "stub",
        profile: str = "strict",
        quirk_flags: tuple[str, ...] = (),
        die_on_pattern: str | None = None,
        die_mode: str = "exit",
        timeout: float = 120.0,
    ) -> "RpAdapter":
        cmd = [
            sys.executable,
            "-m",
            "rpkifuzz.stubrp",
            "--tal",
            "{talDir}",
            "--output",
            "{outputPath}",
            "--cache",
            "{cacheDir}",
            "--hosts",
            "{hostsFile}",
            "--quirks",
            profile,
        ]
        for flag in quirk_flags:
            cmd += ["--quirk", flag]
        if die_on_pattern:
            cmd += ["--die-on-pattern", die_on_pattern, "--die-mode", die_mode]
        return cls(name=name, command=cmd, timeout=timeout)


@dataclass
class RunOutcome:
    exit_code: int | None
    vrp_present: bool
    vrps: frozenset[VrpEntry] | None
    duration_ms: float
    stderr_tail: str
    classification: str

    @property
    def crashed(self) -> bool:
        return self.classification in CRASH_CLASSES


def classify(exit_code: int | None, vrp_present: bool, timed_out: bool) -> str:
    """Outcome classification; deterministic in its three inputs."""
    if timed_out:
        return "timeout"
    if exit_code != 0:
        return "crash-exit"
    if not vrp_present:
        return "crash-novrp"
    return "ok"


def run_once(
    adapter: RpAdapter,
    endpoints,
    tals: list[bytes] | None = None,
    *,
    reuse_cache_dir: str | None = None,
    workdir: str | None = None,
) -> RunOutcome:
    """One single-validation run against the published endpoints."""
    if not isinstance(endpoints, (list, tuple)):
        endpoints = [endpoints]
    if not endpoints:
        raise ValueError("run_once needs at least one endpoint")
    server = endpoints[0].server
    state = endpoints[0].state
    if tals is None:
        tals = [state.tal_bytes] + list(state.extra_tals)
    own_dir = workdir is None
    workdir = Path(workdir) if workdir else Path(tempfile.mkdtemp(prefix=f"rp-{adapter.name}-"))
    try:
        tal_dir = workdir / "tal"
        tal_dir.mkdir(parents=True, exist_ok=True)
        for i, blob in enumerate(tals):
            (tal_dir / f"ta-{i}.tal").write_bytes(blob)
        cache_dir = Path(reuse_cache_dir) if reuse_cache_dir else workdir / "cache"
        cache_dir.mkdir(parents=True, exist_ok=True)
        hosts_file = workdir / "hosts.json"
        hosts_file.write_text(json.dumps(server.hosts_map()))
        output_path = workdir / "vrps.out"
        subst = {
            "{talDir}": str(tal_dir),
            "{cacheDir}": str(cache_dir),
            "{outputPath}": str(output_path),
            "{hostsFile}": str(hosts_file),
            "{rrdpRoot}": server.base_url(),
        }

        def fill(token: str) -> str:
            for key, value in subst.items():
                token = token.replace(key, value)
            return token

        cmd = [fill(tok) for tok in adapter.command]
        env = None
        if adapter.env:
            import os

            env = dict(os.environ)
            env.update({k: fill(v) for k, v in adapter.env.items()})
        started = time.perf_counter()
        timed_out = False
        try:
            proc = subprocess.run(cmd, capture_output=True, timeout=adapter.timeout, env=env)
            exit_code = proc.returncode
            stderr = proc.stderr.decode(errors="replace")
        except subprocess.TimeoutExpired as exc:
            timed_out = True
            exit_code = None
            stderr = (exc.stderr or b"").decode(errors="replace")
        duration_ms = (time.perf_counter() - started) * 1000
        vrp_file = Path(fill(adapter.vrp_path))
        vrp_present = vrp_file.exists()
        vrps = None
        outcome_class = classify(exit_code, vrp_present, timed_out)
        if outcome_class == "ok":
            vrps = parse_vrps(vrp_file, adapter.output_format, adapter.column_map)
        return RunOutcome(
            exit_code=exit_code,
            vrp_present=vrp_present,
            vrps=vrps,
            duration_ms=duration_ms,
            stderr_tail=stderr[-4000:],
            classification=outcome_class,
        )
    finally:
        if own_dir:
            shutil.rmtree(workdir, ignore_errors=True)


# ---------------------------------------------------------------------------
# VRP parsing

def parse_vrps(path, output_format: str = "csv", column_map: dict | None = None) -> frozenset[VrpEntry]:
    """Canonicalized VRP set from a validator's export; duplicates collapse."""
    text = Path(path).read_text()
    entries: set[VrpEntry] = set()
    if output_format == "json":
        data = json.loads(text) if text.strip() else []
        if isinstance(data, dict):  # some exporters wrap the array
            for key in ("roas", "vrps", "data"):
                if key in data:
                    data = data[key]
                    break
        keys = {"asn": "asn", "prefix": "prefix", "max_length": "maxLength"}
        if column_map:
            keys.update(column_map)
        for row in data:
            max_len = row.get(keys["max_length"], row.get("maxlen", row.get("max_length")))
            entries.add(VrpEntry.canonical(row[keys["asn"]], row[keys["prefix"]], max_len))
        return frozenset(entries)
    cols = {"asn": 0, "prefix": 1, "max_length": 2}
    if column_map:
        cols.update(column_map)
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        try:
            asn_field = parts[cols["asn"]]
        except IndexError:
            continue
        if not asn_field.upper().removeprefix("AS").isdigit():
            continue  # header or garbage line
        try:
            max_len = parts[cols["max_length"]] if len(parts) > cols["max_length"] else None
            entries.add(VrpEntry.canonical(asn_field, parts[cols["prefix"]], max_len))
        except (ValueError, IndexError):
            continue
    return frozenset(entries)


# ---------------------------------------------------------------------------
# differential comparison

@dataclass
class InconsistencyReport:
    per_rp: dict[str, frozenset[VrpEntry]]
    agreed: frozenset[VrpEntry]
    missing: dict[str, list[tuple[VrpEntry, str | None]]]  # rp -> [(entry, source test id)]

    @property
    def is_empty(self) -> bool:
        return not any(self.missing.values())

    def to_json(self) -> dict:
        return {
            "agreed_count": len(self.agreed),
            "per_rp_counts": {rp: len(v) for rp, v in self.per_rp.items()},
            "missing": {
                rp: [
                    {"asn": e.asn, "prefix": e.prefix, "maxLength": e.max_length, "source": src}
                    for e, src in rows
                ]
                for rp, rows in self.missing.items()
            },
        }

    def to_text(self) -> str:
        lines = [f"VRP comparison across {len(self.per_rp)} validators"]
        lines.append(f"  agreed on {len(self.agreed)} entries")
        for rp, rows in sorted(self.missing.items()):
            if not rows:
                lines.append(f"  {rp}: complete")
                continue
            lines.append(f"  {rp}: missing {len(rows)} entries")
            for entry, src in rows:
                src_note = f" (from test object {src})" if src else ""
                lines.append(f"    AS{entry.asn} {entry.prefix} maxLength {entry.max_length}{src_note}")
        return "\n".join(lines)


def compare_vrps(outcomes: dict[str, frozenset[VrpEntry]], markers: dict[str, set]) -> InconsistencyReport:
    """Per-validator missing entries, each attributed to its source object."""
    attribution: dict[VrpEntry, str] = {}
    for tid, vrps in markers.items():
        for raw in vrps:
            attribution[next(iter(canonical_set([raw])))] = tid
    union: set[VrpEntry] = set()
    for vrps in outcomes.values():
        union |= vrps
    agreed = frozenset.intersection(*outcomes.values()) if outcomes else frozenset()
    missing = {}
    for rp, vrps in outcomes.items():
        rows = [(entry, attribution.get(entry)) for entry in sorted(union - vrps)]
        missing[rp] = rows
    return InconsistencyReport(per_rp=dict(outcomes), agreed=agreed, missing=missing)


# ---------------------------------------------------------------------------
# crash reporting and bisection

@dataclass
class CrashReport:
    rp_name: str
    classification: str
    culprit: dict  # provenance of the object that reproduces the crash
    repository_snapshot: str | None
    rp_log: str
    timestamp: str
    runs_used: int
    flaky: bool = False
    residual_crash: bool = False

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    def to_text(self) -> str:
        head = "nondeterministic crash (no single culprit)" if self.flaky else "crash reproduced"
        lines = [
            f"{head} in {self.rp_name} at {self.timestamp}",
            f"  classification: {self.classification}",
            f"  culprit provenance: {json.dumps(self.culprit)}",
            f"  bisection runs: {self.runs_used}",
        ]
        if self.residual_crash:
            lines.append("  residual crash remains in batch minus culprit")
        if self.repository_snapshot:
            lines.append(f"  repository snapshot: {self.repository_snapshot}")
        lines.append("  last log tail:")
        lines.extend("    " + ln for ln in self.rp_log.splitlines()[-15:])
        return "\n".join(lines)


@dataclass
class BisectResult:
    culprit: TestObject | None
    runs: int
    flaky: bool
    residual_crash: bool
    last_outcome: RunOutcome | None = None


def bisect(batch: list[TestObject], adapter: RpAdapter, endpoint_factory, *, check_residual: bool = True) -> BisectResult:
    """Binary-search the batch for an object that alone reproduces the crash.

    endpoint_factory(subset) must return a context manager yielding published
    endpoints for a repository scaffolded around exactly that subset.
    """
    runs = 0
    last: RunOutcome | None = None

    def crashes(subset: list[TestObject]) -> bool:
        nonlocal runs, last
        runs += 1
        with endpoint_factory(subset) as endpoints:
            last = run_once(adapter, endpoints)
        return last.crashed

    current = list(batch)
    while len(current) > 1:
        half = current[: len(current) // 2]
        current = half if crashes(half) else current[len(half):]
    culprit = current[0]
    if not crashes([culprit]):
        return BisectResult(None, runs, flaky=True, residual_crash=False, last_outcome=last)
    culprit_outcome = last
    residual = False
    if check_residual and len(batch) > 1:
        rest = [o for o in batch if o is not culprit]
        if rest and crashes(rest):
            residual = True
    return BisectResult(culprit, runs, flaky=False, residual_crash=residual, last_outcome=culprit_outcome)


def make_crash_report(adapter: RpAdapter, result: BisectResult, batch: list[TestObject], snapshot_path=None) -> CrashReport:
    if result.culprit is not None:
        culprit_info = dataclasses.asdict(result.culprit.provenance)
    else:
        culprit_info = {"batch": [dataclasses.asdict(o.provenance) for o in batch]}
    outcome = result.last_outcome
    return CrashReport(
        rp_name=adapter.name,
        classification=outcome.classification if outcome else "unknown",
        culprit=culprit_info,
        repository_snapshot=str(snapshot_path) if snapshot_path else None,
        rp_log=outcome.stderr_tail if outcome else "",
        timestamp=datetime.datetime.now(datetime.timezone.utc).isoformat(),
        runs_used=result.runs,
        flaky=result.flaky,
        residual_crash=result.residual_crash,
    )


# ---------------------------------------------------------------------------
# RTR probing

@dataclass
class RtrProbeResult:
    outcome: str  # reply | reset | timeout | refused | closed
    reply: bytes | None = None


def probe_rtr(host: str, port: int, pdu: bytes, expect_reply: bool = True, timeout: float = 5.0) -> RtrProbeResult:
    """Send one PDU and record what comes back; no semantic interpretation."""
    try:
        sock = socket.create_connection((host, port), timeout=timeout)
    except ConnectionRefusedError:
        return RtrProbeResult("refused")
    except OSError:
        return RtrProbeResult("refused")
    try:
        sock.settimeout(timeout)
        sock.sendall(pdu)
        if not expect_reply:
            sock.close()
            return RtrProbeResult("closed")
        try:
            reply = sock.recv(4096)
        except socket.timeout:
            return RtrProbeResult("timeout")
        except ConnectionResetError:
            return RtrProbeResult("reset")
        if reply == b"":
            return RtrProbeResult("reset")
        return RtrProbeResult("reply", reply)
    except (ConnectionResetError, BrokenPipeError):
        return RtrProbeResult("reset")
    finally:
        try:
            sock.close()
        except OSError:
            pass
