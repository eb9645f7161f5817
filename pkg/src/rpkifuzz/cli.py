"""Command-line entry points: batch campaigns, standalone analysis, utilities.

Exit codes: 0 clean, 1 findings produced (crashes or inconsistencies),
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import contextlib
import datetime
import json
import logging
import sys
import threading
import time
import uuid
from pathlib import Path

from . import keystore
from .bench import MODES as BENCH_MODES
from .bench import bench
from .casepack import cases_manifest, list_cases, matrix_markdown, run_conformance
from .fields import ReplacementStrategy
from .harness import RpAdapter, bisect, compare_vrps, make_crash_report, run_once
from .mutation import KINDS, corpus_feed
from .publisher import RrdpServer, publish
from .scaffold import ScaffoldConfig, ScaffoldContext
from .stubrp.quirks import PROFILES

log = logging.getLogger("rpkifuzz")

EXIT_CLEAN = 0
EXIT_FINDINGS = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration loading

def load_adapters(spec: str | None) -> list[RpAdapter]:
    """Adapter config: JSON list of records; 'type': 'stub' builds the bundled
    stub with a quirk profile, anything else needs a command template."""
    if spec is None:
        return [RpAdapter.stub("stub-strict", profile="strict")]
    data = json.loads(Path(spec).read_text())
    adapters = []
    for row in data:
        if row.get("type") == "stub":
            adapters.append(
                RpAdapter.stub(
                    row.get("name", "stub"),
                    profile=row.get("profile", "strict"),
                    quirk_flags=tuple(row.get("quirks", ())),
                    die_on_pattern=row.get("dieOnPattern"),
                    die_mode=row.get("dieMode", "exit"),
                    timeout=row.get("timeout", 120.0),
                )
            )
        else:
            try:
                adapters.append(
                    RpAdapter(
                        name=row["name"],
                        command=row["command"],
                        output_format=row.get("format", "csv"),
                        vrp_path=row.get("vrpPath", "{outputPath}"),
                        timeout=row.get("timeout", 300.0),
                        env=row.get("env", {}),
                        column_map=row.get("columnMap"),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise UsageError(f"bad adapter record: {exc}") from exc
    if not adapters:
        raise UsageError("adapter file defines no adapters")
    return adapters


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc


def load_or_create_pool(path: str | None, size: int, seed: int | None) -> keystore.KeyPool:
    if path and Path(path).exists():
        return keystore.pool_load(path)
    pool = keystore.pool_create(size, seed=seed)
    if path:
        keystore.pool_save(pool, path)
    return pool


def make_reports_dir(base: str, campaign_id: str) -> Path:
    root = Path(base) / campaign_id
    for sub in ("crashes", "inconsistencies", "conformance", "bench"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    return root


# ---------------------------------------------------------------------------
# batch mode

def cmd_batch(args) -> int:
    config = load_config(args.config)
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    workers = args.workers or config.get("workers", 4)
    adapters = load_adapters(args.adapters or config.get("adapters"))
    if args.kind not in KINDS:
        raise UsageError(f"unknown object kind {args.kind!r}")
    strategy = ReplacementStrategy(args.strategy)
    pool = load_or_create_pool(args.key_pool or config.get("keyPool"), args.pool_size, seed)
    campaign_id = args.campaign_id or f"{datetime.datetime.now():%Y%m%d-%H%M%S}-{seed}"
    reports = make_reports_dir(args.reports, campaign_id)
    ctx = ScaffoldContext(pool, ScaffoldConfig(seed=seed, workers=workers, strategy=strategy))
    findings = 0
    batches = 0
    deadline = time.monotonic() + args.duration if args.duration else None
    stop = threading.Event()
    feed = corpus_feed(
        args.corpus,
        args.batch_size,
        kind=args.kind,
        poll_interval=args.poll_interval,
        max_idle_polls=args.idle_polls,
        stop=stop,
    )
    log.info("campaign %s: adapters=%s corpus=%s", campaign_id, [a.name for a in adapters], args.corpus)
    try:
        for batch in feed:
            batches += 1
            findings += _run_batch(ctx, batch, adapters, reports)
            if deadline and time.monotonic() > deadline:
                log.info("campaign duration reached")
                break
            if args.max_batches and batches >= args.max_batches:
                break
    except KeyboardInterrupt:
        log.warning("interrupted; flushing partial reports")
        stop.set()
    finally:
        ctx.close()
    summary = {"campaign": campaign_id, "batches": batches, "findings": findings}
    (reports / "summary.json").write_text(json.dumps(summary, indent=1))
    print(json.dumps(summary))
    return EXIT_FINDINGS if findings else EXIT_CLEAN


def _run_batch(ctx: ScaffoldContext, batch, adapters, reports: Path) -> int:
    findings = 0
    state = ctx.repositoryfy(batch)
    with RrdpServer() as server:
        endpoints = publish(state, server)
        outcomes = {}
        results: dict[str, object] = {}
        threads = []

        def run_adapter(adapter):
            results[adapter.name] = run_once(adapter, endpoints)

        for adapter in adapters:
            t = threading.Thread(target=run_adapter, args=(adapter,))
            t.start()
            threads.append(t)
        for t in threads:
            t.join()
    for adapter in adapters:
        outcome = results[adapter.name]
        if outcome.crashed:
            findings += 1
            _handle_crash(ctx, batch, adapter, reports)
        elif outcome.classification == "ok":
            outcomes[adapter.name] = outcome.vrps
        else:
            log.warning("%s: %s", adapter.name, outcome.classification)
    if len(outcomes) >= 2:
        attribution = dict(state.markers)
        attribution.update({f"{tid}/content": v for tid, v in state.expected_vrps.items() if v})
        report = compare_vrps(outcomes, attribution)
        if not report.is_empty:
            findings += 1
            rid = uuid.uuid4().hex[:12]
            (reports / "inconsistencies" / f"inconsistency-{rid}.json").write_text(
                json.dumps(report.to_json(), indent=1)
            )
            (reports / "inconsistencies" / f"inconsistency-{rid}.txt").write_text(report.to_text())
            log.warning("inconsistency report %s written", rid)
    return findings


@contextlib.contextmanager
def _scaffold_endpoints(ctx: ScaffoldContext, subset):
    state = ctx.repositoryfy(subset)
    server = RrdpServer()
    try:
        yield publish(state, server)
    finally:
        server.close()


def _handle_crash(ctx, batch, adapter, reports: Path) -> None:
    result = bisect(batch, adapter, lambda subset: _scaffold_endpoints(ctx, subset))
    report = make_crash_report(adapter, result, batch)
    rid = uuid.uuid4().hex[:12]
    (reports / "crashes" / f"crash-{rid}.json").write_text(json.dumps(report.to_json(), indent=1))
    (reports / "crashes" / f"crash-{rid}.txt").write_text(report.to_text())
    log.warning("crash report %s written (culprit=%s flaky=%s)", rid, report.culprit, report.flaky)


# ---------------------------------------------------------------------------
# standalone mode

def cmd_standalone(args) -> int:
    config = load_config(args.config)
    adapters = load_adapters(args.adapters or config.get("adapters"))
    path = Path(args.object)
    if not path.is_file():
        raise UsageError(f"object file not found: {path}")
    if args.kind not in KINDS:
        raise UsageError(f"unknown object kind {args.kind!r}")
    from .mutation import Provenance, TestObject

    obj = TestObject(
        kind=args.kind,
        data=path.read_bytes(),
        provenance=Provenance("corpus", args.kind, parent_corpus_id=str(path)),
        replace_mask=None,
    )
    pool = load_or_create_pool(args.key_pool or config.get("keyPool"), args.pool_size, args.seed)
    # standalone is strictly sequential: no worker pool
    ctx = ScaffoldContext(pool, ScaffoldConfig(seed=args.seed or 0, workers=1,
                                               strategy=ReplacementStrategy(args.strategy)))
    state = ctx.repositoryfy([obj])
    lines = [f"standalone analysis of {path} (kind {args.kind}, strategy {args.strategy})"]
    findings = 0
    outcomes = {}
    with RrdpServer() as server:
        endpoints = publish(state, server)
        for adapter in adapters:
            outcome = run_once(adapter, endpoints)
            lines.append(
                f"  {adapter.name}: {outcome.classification}"
                f" (exit={outcome.exit_code}, {0 if outcome.vrps is None else len(outcome.vrps)} VRPs,"
                f" {outcome.duration_ms:.0f} ms)"
            )
            if outcome.crashed:
                findings += 1
                tail = [ln for ln in outcome.stderr_tail.splitlines() if ln][-5:]
                lines.extend("    log: " + ln for ln in tail)
            elif outcome.classification == "ok":
                outcomes[adapter.name] = outcome.vrps
    expected = state.all_expected_vrps()
    from .harness import canonical_set

    want = canonical_set(expected)
    for name, vrps in outcomes.items():
        missing = want - vrps
        if missing:
            lines.append(f"  {name}: missing {len(missing)} expected entries:")
            lines.extend(f"    AS{e.asn} {e.prefix} maxLength {e.max_length}" for e in sorted(missing))
    if len(outcomes) >= 2:
        report = compare_vrps(outcomes, dict(state.markers))
        if report.is_empty:
            lines.append("  VRP sets identical across adapters")
        else:
            findings += 1
            lines.append(report.to_text())
    print("\n".join(lines))
    return EXIT_FINDINGS if findings else EXIT_CLEAN


# ---------------------------------------------------------------------------
# conformance and bench

def cmd_conformance(args) -> int:
    if args.adapters:
        adapters = load_adapters(args.adapters)
    else:
        adapters = [RpAdapter.stub(name, profile=name) for name in sorted(PROFILES) if name != "strict"]
    case_ids = args.cases or list_cases()
    results = run_conformance(adapters, case_ids, seed=args.seed or 0)
    out_dir = Path(args.reports)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "cases.json").write_text(json.dumps(cases_manifest(), indent=1))
    report = {
        r.case_id: {rp: row for rp, row in r.rows.items()} for r in results
    }
    (out_dir / "conformance.json").write_text(json.dumps(report, indent=1))
    md = matrix_markdown(results)
    (out_dir / "conformance.md").write_text(md)
    print(md)
    deviations = sum(1 for r in results for row in r.rows.values() if row["note"])
    print(f"{len(results)} cases, {deviations} behavior-changed notes (informational)")
    return EXIT_CLEAN


def cmd_bench(args) -> int:
    if args.n <= 0:
        raise UsageError("bench needs --n >= 1")
    pool = None
    if args.key_pool and Path(args.key_pool).exists():
        pool = keystore.pool_load(args.key_pool)
    report = bench(args.mode, args.n, workers=args.workers, pool=pool, seed=args.seed)
    print(json.dumps(report.to_json(), indent=1))
    return EXIT_CLEAN


def cmd_keypool(args) -> int:
    if args.action == "create":
        pool = keystore.pool_create(args.size, seed=args.seed)
        keystore.pool_save(pool, args.path)
        print(f"wrote pool of {len(pool)} keys to {args.path}")
        return EXIT_CLEAN
    pool = keystore.pool_load(args.path)
    print(f"pool {args.path}: {len(pool)} RSA-2048 keys")
    for i, key in enumerate(pool.keys[:5]):
        print(f"  [{i}] keyId {key.key_id.hex()}")
    if len(pool) > 5:
        print(f"  ... {len(pool) - 5} more")
    return EXIT_CLEAN


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rpkifuzz", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("batch", help="continuous corpus-driven fuzzing campaign")
    p.add_argument("--corpus", required=True, help="directory of test objects")
    p.add_argument("--kind", required=True, help=f"object kind: {', '.join(KINDS)}")
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--strategy", choices=[s.value for s in ReplacementStrategy], default="targeted")
    p.add_argument("--adapters", help="JSON adapter config file")
    p.add_argument("--duration", type=float, default=0, help="seconds; 0 = until corpus exhausted")
    p.add_argument("--max-batches", type=int, default=0)
    p.add_argument("--idle-polls", type=int, default=3, help="empty scans before exiting")
    p.add_argument("--poll-interval", type=float, default=0.5)
    p.add_argument("--reports", default="reports")
    p.add_argument("--campaign-id", default=None)
    p.add_argument("--key-pool", default=None)
    p.add_argument("--pool-size", type=int, default=10000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--config", default=None, help="JSON campaign config")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("standalone", help="single-object analysis with a full report")
    p.add_argument("--object", required=True)
    p.add_argument("--kind", required=True)
    p.add_argument("--strategy", choices=[s.value for s in ReplacementStrategy], default="targeted")
    p.add_argument("--adapters", default=None)
    p.add_argument("--key-pool", default=None)
    p.add_argument("--pool-size", type=int, default=256)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_standalone)

    p = sub.add_parser("conformance", help="run the divergence case pack")
    p.add_argument("--adapters", default=None, help="JSON adapter config (default: bundled stub profiles)")
    p.add_argument("--cases", nargs="*", default=None, choices=list_cases(), help="case ids")
    p.add_argument("--reports", default="reports/conformance")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_conformance)

    p = sub.add_parser("bench", help="throughput benchmarks")
    p.add_argument("--mode", choices=BENCH_MODES, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--key-pool", default=None)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("keypool", help="key pool management")
    p.add_argument("action", choices=("create", "inspect"))
    p.add_argument("path")
    p.add_argument("--size", type=int, default=10000)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_keypool)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
