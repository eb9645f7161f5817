import contextlib
import random

import pytest

from rpkifuzz.harness import (
    RpAdapter,
    VrpEntry,
    bisect,
    canonical_set,
    classify,
    compare_vrps,
    make_crash_report,
    parse_vrps,
    run_once,
)
from rpkifuzz.publisher import RrdpServer, publish
from tests.conftest import benign_roa


# ---------------------------------------------------------------------------
# classification is a pure function

@pytest.mark.parametrize(
    "exit_code,vrp_present,timed_out,expected",
    [
        (0, True, False, "ok"),
        (0, False, False, "crash-novrp"),
        (1, True, False, "crash-exit"),
        (134, False, False, "crash-exit"),
        (None, False, True, "timeout"),
        (0, True, True, "timeout"),
    ],
)
def test_classification(exit_code, vrp_present, timed_out, expected):
    assert classify(exit_code, vrp_present, timed_out) == expected


# ---------------------------------------------------------------------------
# VRP parsing and canonicalization

def test_parse_vrps_csv(tmp_path):
    path = tmp_path / "v.csv"
    path.write_text("ASN,IP Prefix,Max Length\n65001,10.0.0.0/8,8\nAS65002,192.0.2.0/24,\n")
    entries = parse_vrps(path, "csv")
    assert entries == frozenset(
        {VrpEntry(65001, "10.0.0.0/8", 8), VrpEntry(65002, "192.0.2.0/24", 24)}
    )


def test_parse_vrps_json_equivalent(tmp_path):
    csv_path = tmp_path / "v.csv"
    csv_path.write_text("65001,10.0.0.0/8,8\n")
    json_path = tmp_path / "v.json"
    json_path.write_text('[{"asn": "AS65001", "prefix": "10.0.0.0/8", "maxLength": 8}]')
    assert parse_vrps(csv_path, "csv") == parse_vrps(json_path, "json")


def test_parse_vrps_v6_canonicalized(tmp_path):
    path = tmp_path / "v.csv"
    path.write_text("65001,2001:DB8:0000::/32,48\n65001,2001:db8::/32,48\n")
    entries = parse_vrps(path, "csv")
    assert entries == frozenset({VrpEntry(65001, "2001:db8::/32", 48)})  # collapsed + lowercase


def test_parse_vrps_column_map(tmp_path):
    path = tmp_path / "v.csv"
    path.write_text("x,65009,10.1.0.0/16,16\n")
    entries = parse_vrps(path, "csv", column_map={"asn": 1, "prefix": 2, "max_length": 3})
    assert entries == frozenset({VrpEntry(65009, "10.1.0.0/16", 16)})


# ---------------------------------------------------------------------------
# differential comparison

MARKERS = {
    "obj-a": {(64512, "10.128.0.0/24", 24)},
    "obj-b": {(64513, "10.128.1.0/24", 24)},
}


def _sets(*entries_lists):
    return [canonical_set(e) for e in entries_lists]


def test_compare_identical_sets_empty_report():
    a, b = _sets(MARKERS["obj-a"] | MARKERS["obj-b"], MARKERS["obj-a"] | MARKERS["obj-b"])
    report = compare_vrps({"rp1": a, "rp2": b}, MARKERS)
    assert report.is_empty
    assert report.agreed == a


def test_compare_missing_marker_attributed():
    full = canonical_set(MARKERS["obj-a"] | MARKERS["obj-b"])
    partial = canonical_set(MARKERS["obj-a"])
    report = compare_vrps({"rp1": full, "rp2": partial}, MARKERS)
    assert not report.is_empty
    assert report.missing["rp1"] == []
    [(entry, source)] = report.missing["rp2"]
    assert entry == VrpEntry(64513, "10.128.1.0/24", 24)
    assert source == "obj-b"
    assert "obj-b" in report.to_text() and report.to_json()["missing"]["rp2"][0]["source"] == "obj-b"


# ---------------------------------------------------------------------------
# run_once against the stub

def test_run_once_ok(scaffold_ctx):
    state = scaffold_ctx.repositoryfy([benign_roa(scaffold_ctx, 0)])
    with RrdpServer() as server:
        endpoints = publish(state, server)
        outcome = run_once(RpAdapter.stub(), endpoints)
    assert outcome.classification == "ok"
    assert outcome.exit_code == 0 and outcome.vrp_present
    assert outcome.vrps == canonical_set(state.all_expected_vrps())


def test_adapter_missing_placeholder_rejected():
    with pytest.raises(ValueError, match="placeholder"):
        RpAdapter(name="broken", command=["validator", "--out", "{outputPath}"])


# ---------------------------------------------------------------------------
# bisection

def _endpoint_factory(ctx):
    @contextlib.contextmanager
    def factory(subset):
        state = ctx.repositoryfy(subset)
        server = RrdpServer()
        try:
            yield publish(state, server)
        finally:
            server.close()

    return factory


def _killer_adapter(ctx, obj):
    state = ctx.repositoryfy([obj])
    blob = state.objects[state.test_index[obj.object_id]]
    # the eContent bytes survive re-wrapping; the head embeds the unique ASN
    from rpkifuzz.objects.cms import parse_signed_object

    pattern = parse_signed_object(blob).econtent[:12]
    return RpAdapter.stub("killer", die_on_pattern=pattern.hex(), timeout=60.0)


def test_bisect_finds_culprit_small_batch(scaffold_ctx):
    batch = [benign_roa(scaffold_ctx, i) for i in range(16)]
    culprit = batch[11]
    adapter = _killer_adapter(scaffold_ctx, culprit)
    result = bisect(batch, adapter, _endpoint_factory(scaffold_ctx))
    assert result.culprit is culprit
    assert not result.flaky and not result.residual_crash
    assert result.runs <= 2 * 4 + 2  # ceil(log2(16)) + verify + residual


def test_bisect_culprit_at_index_zero(scaffold_ctx):
    batch = [benign_roa(scaffold_ctx, i) for i in range(8)]
    adapter = _killer_adapter(scaffold_ctx, batch[0])
    result = bisect(batch, adapter, _endpoint_factory(scaffold_ctx))
    assert result.culprit is batch[0]


def test_bisect_two_culprits_flags_residual(scaffold_ctx):
    import dataclasses

    batch = [benign_roa(scaffold_ctx, i) for i in range(8)]
    a = batch[1]
    adapter = _killer_adapter(scaffold_ctx, a)
    # a twin carries the same content bytes, so the same pattern kills on both
    twin = dataclasses.replace(a, provenance=dataclasses.replace(a.provenance, seed=999))
    batch2 = [benign_roa(scaffold_ctx, 100), a, benign_roa(scaffold_ctx, 101), twin]
    result = bisect(batch2, adapter, _endpoint_factory(scaffold_ctx))
    assert result.culprit in (a, twin)
    assert result.residual_crash  # the other copy still crashes the remainder


def test_bisect_flaky_reported(scaffold_ctx):
    """A crash that stops reproducing ends as a nondeterministic report with
    the whole batch attached."""
    batch = [benign_roa(scaffold_ctx, i) for i in range(4)]
    state = scaffold_ctx.repositoryfy(batch)
    from rpkifuzz.objects.cms import parse_signed_object

    pattern = parse_signed_object(state.objects[state.test_index[batch[0].object_id]]).econtent[-10:].hex()
    adapter = RpAdapter.stub("flaky", die_on_pattern=pattern, timeout=60.0)
    calls = {"count": 0}
    pattern_slot = adapter.command.index("--die-on-pattern") + 1

    @contextlib.contextmanager
    def vanishing_factory(subset):
        calls["count"] += 1
        # crashes on the first bisection run, never again (order-dependent stand-in)
        adapter.command[pattern_slot] = pattern if calls["count"] == 1 else "ff00ff00ff00ff00"
        with _endpoint_factory(scaffold_ctx)(subset) as endpoints:
            yield endpoints

    result = bisect(batch, adapter, vanishing_factory, check_residual=False)
    assert result.flaky and result.culprit is None
    report = make_crash_report(adapter, result, batch)
    assert report.flaky and "batch" in report.culprit
    assert "nondeterministic" in report.to_text()
