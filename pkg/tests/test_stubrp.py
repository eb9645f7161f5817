import struct
import subprocess
import sys

import pytest

from rpkifuzz import keystore
from rpkifuzz.factory import make_rtr_pdu
from rpkifuzz.harness import RpAdapter, probe_rtr, run_once
from rpkifuzz.publisher import RrdpServer, publish
from rpkifuzz.stubrp.quirks import PROFILES, resolve_quirks
from rpkifuzz.stubrp.rtr import StubRtrServer
from rpkifuzz.stubrp.validator import Fetcher, StubValidator, check_path, rsa_verify_sha256
from tests.conftest import benign_roa


# ---------------------------------------------------------------------------
# path traversal check

@pytest.mark.parametrize(
    "path,ok",
    [
        ("repo/ca/file.roa", True),
        ("repo/ca/", True),
        ("repo/../../tals/fake.tal", False),
        ("repo/./x", False),
        ("..", False),
        ("repo//x", False),
        ("a/b/c", True),
    ],
)
def test_check_path(path, ok):
    assert check_path(path) is ok


# ---------------------------------------------------------------------------
# independent signature verification

def test_rsa_verify_accepts_our_signatures(key_pool):
    key = key_pool.keys[0]
    msg = b"cross-check between signer and pure-arithmetic verifier"
    sig = keystore.sign(key, msg)
    assert rsa_verify_sha256(key.spki, msg, sig)
    assert not rsa_verify_sha256(key.spki, msg + b"!", sig)
    assert not rsa_verify_sha256(key.spki, msg, sig[:-1])
    assert not rsa_verify_sha256(key.spki, msg, bytes(256))


def test_rsa_verify_rejects_garbage_spki():
    assert not rsa_verify_sha256(b"\x30\x00", b"m", b"\x00" * 256)


# ---------------------------------------------------------------------------
# validation engine against a served scaffold

def test_validates_benign_scaffold_exactly(scaffold_ctx):
    batch = [benign_roa(scaffold_ctx, i) for i in range(4)]
    state = scaffold_ctx.repositoryfy(batch)
    with RrdpServer() as server:
        publish(state, server)
        run = StubValidator(fetcher=Fetcher(server.hosts_map())).run([state.tal_bytes])
    assert run.rejected == []
    assert run.vrps == state.all_expected_vrps()


def test_rejects_wrong_tal_key(scaffold_ctx):
    state = scaffold_ctx.repositoryfy([benign_roa(scaffold_ctx, 0)])
    bad_tal = state.tal_bytes.replace(b"MII", b"MIJ", 1)
    with RrdpServer() as server:
        publish(state, server)
        run = StubValidator(fetcher=Fetcher(server.hosts_map())).run([bad_tal])
    assert run.vrps == set()
    assert any("SPKI" in r or "unparseable" in r for r in run.rejected)


def test_rejects_tampered_object(scaffold_ctx):
    batch = [benign_roa(scaffold_ctx, i) for i in range(2)]
    state = scaffold_ctx.repositoryfy(batch)
    pp = state.pps[scaffold_ctx.config.base_domain]
    victim = next(u for u in pp.publishes if u.endswith("test-0-1.roa"))
    blob = bytearray(pp.publishes[victim])
    blob[-40] ^= 0xFF  # flip inside the CMS signature
    pp.publishes[victim] = bytes(blob)
    from rpkifuzz.scaffold import build_rrdp_documents

    build_rrdp_documents(pp)
    with RrdpServer() as server:
        publish(state, server)
        run = StubValidator(fetcher=Fetcher(server.hosts_map())).run([state.tal_bytes])
    assert any("hash mismatch" in r for r in run.rejected)  # manifest catches the tamper
    untouched = {v for tid, vs in state.expected_vrps.items() for v in vs
                 if state.test_index[tid] != victim}
    assert untouched <= run.vrps


def test_traversal_uri_rejected(scaffold_ctx):
    from rpkifuzz.scaffold import make_traversal_notification

    state = make_traversal_notification(scaffold_ctx, "../../tals/fake.tal", b"evil")
    with RrdpServer() as server:
        publish(state, server)
        run = StubValidator(fetcher=Fetcher(server.hosts_map())).run([state.tal_bytes])
    assert any("path traversal" in r for r in run.rejected)
    assert run.vrps == state.all_expected_vrps()  # the benign content still validates


def test_profiles_resolve():
    assert resolve_quirks("octorpki") == PROFILES["octorpki"]
    assert resolve_quirks(None) == frozenset()
    merged = resolve_quirks("fort", ["drop-overlong-prefix"])
    assert "reject-nonstandard-issuer-attrs" in merged and "drop-overlong-prefix" in merged
    with pytest.raises(ValueError):
        resolve_quirks("strict", ["not-a-flag"])


# ---------------------------------------------------------------------------
# CLI process behavior

def test_cli_usage_error_exit_code():
    r = subprocess.run([sys.executable, "-m", "rpkifuzz.stubrp"], capture_output=True)
    assert r.returncode == 2  # argparse usage error


def test_cli_json_output(scaffold_ctx, tmp_path):
    state = scaffold_ctx.repositoryfy([benign_roa(scaffold_ctx, 0)])
    with RrdpServer() as server:
        endpoints = publish(state, server)
        adapter = RpAdapter.stub("stub-json")
        adapter.command += ["--format", "json"]
        adapter.output_format = "json"
        outcome = run_once(adapter, endpoints)
    assert outcome.classification == "ok"
    from rpkifuzz.harness import canonical_set

    assert outcome.vrps == canonical_set(state.all_expected_vrps())


def test_die_mode_hang_classified_timeout(scaffold_ctx):
    state = scaffold_ctx.repositoryfy([benign_roa(scaffold_ctx, 0)])
    pattern = state.tal_bytes[:4].hex()  # triggers on the TA cert fetch? use object bytes instead
    uri = next(iter(state.test_index.values()))
    pattern = state.objects[uri][60:66].hex()
    with RrdpServer() as server:
        endpoints = publish(state, server)
        adapter = RpAdapter.stub("hanger", die_on_pattern=pattern, die_mode="hang", timeout=3.0)
        outcome = run_once(adapter, endpoints)
    assert outcome.classification == "timeout"


# ---------------------------------------------------------------------------
# stub RTR server

def test_rtr_reset_query_gets_cache_response():
    with StubRtrServer() as server:
        result = probe_rtr("127.0.0.1", server.port, make_rtr_pdu("reset-query", 8, 0))
    assert result.outcome == "reply"
    version, pdu_type, session, length = struct.unpack(">BBHI", result.reply[:8])
    assert (version, pdu_type, length) == (1, 3, 8)  # Cache Response


def test_rtr_oversized_pdu_kills_configured_server():
    with StubRtrServer(die_on_oversize=4096) as server:
        pdu = make_rtr_pdu("reset-query", 2**31, 0)
        result = probe_rtr("127.0.0.1", server.port, pdu)
        assert result.outcome in ("reset", "timeout")
        assert server.crashed.wait(timeout=5)
        follow_up = probe_rtr("127.0.0.1", server.port, make_rtr_pdu("reset-query", 8, 0))
    assert follow_up.outcome in ("refused", "reset", "timeout")


def test_rtr_closed_port_refused():
    result = probe_rtr("127.0.0.1", 1, make_rtr_pdu("reset-query", 8, 0))
    assert result.outcome == "refused"
