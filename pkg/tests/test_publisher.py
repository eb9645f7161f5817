import copy
import urllib.error
import urllib.request

import pytest

from rpkifuzz import keystore
from rpkifuzz.objects.rrdp import parse_rrdp
from rpkifuzz.publisher import (
    CORRUPTION_KNOBS,
    PublishError,
    RrdpServer,
    TlsIdentity,
    bump,
    corrupt,
    publish,
)
from tests.conftest import benign_roa


def _get(endpoint, path: str, host: str | None = None) -> bytes:
    host = host or endpoint.domain
    req = urllib.request.Request(f"{endpoint.base_url()}{path}", headers={"Host": host})
    with urllib.request.urlopen(req, timeout=5) as resp:
        return resp.read()


@pytest.fixture()
def served_state(scaffold_ctx):
    batch = [benign_roa(scaffold_ctx, i) for i in range(3)]
    state = scaffold_ctx.repositoryfy(batch)
    server = RrdpServer()
    endpoints = publish(state, server)
    yield scaffold_ctx, state, server, endpoints
    server.close()


def test_publish_serves_notification_at_serial_1(served_state):
    _, _, _, endpoints = served_state
    assert len(endpoints) == 1
    notif = parse_rrdp(_get(endpoints[0], "/notification.xml"))
    assert notif.kind == "notification" and notif.serial == 1


def test_snapshot_hash_digest_oracle(served_state):
    _, _, _, endpoints = served_state
    notif = parse_rrdp(_get(endpoints[0], "/notification.xml"))
    snapshot = _get(endpoints[0], f"/snapshot-{notif.serial}.xml")
    assert keystore.sha256(snapshot).hex() == notif.snapshot_hash


def test_unknown_path_404(served_state):
    _, _, _, endpoints = served_state
    with pytest.raises(urllib.error.HTTPError) as exc:
        _get(endpoints[0], "/nope.xml")
    assert exc.value.code == 404


def test_tal_uri_resolves(served_state):
    _, state, _, endpoints = served_state
    uri = state.tal.uris[0]
    path = "/" + uri.split("/", 3)[3]
    assert _get(endpoints[0], path)  # the root certificate is fetchable


def test_bump_single_add_single_withdraw(served_state):
    ctx, state, server, endpoints = served_state
    ep = endpoints[0]
    new_state = copy.deepcopy(state)
    pp = new_state.pps[ep.domain]
    removed_uri = next(u for u in pp.publishes if u.endswith("test-0-0.roa"))
    del pp.publishes[removed_uri]
    pp.publishes[removed_uri.replace("test-0-0", "added")] = b"\x00new"
    bump(new_state, ep)
    assert ep.serial == 2
    delta = parse_rrdp(_get(ep, "/delta-2.xml"))
    publishes = [e for e in delta.elements if e.action == "publish"]
    withdraws = [e for e in delta.elements if e.action == "withdraw"]
    assert len(publishes) == 1 and publishes[0].uri.endswith("added.roa")
    assert len(withdraws) == 1 and withdraws[0].uri == removed_uri
    notif = parse_rrdp(_get(ep, "/notification.xml"))
    assert notif.serial == 2 and [d.serial for d in notif.deltas] == [2]


def test_old_snapshot_stays_reachable_after_bump(served_state):
    ctx, state, server, endpoints = served_state
    ep = endpoints[0]
    old_snapshot = _get(ep, "/snapshot-1.xml")
    bump(copy.deepcopy(state), ep)
    assert _get(ep, "/snapshot-1.xml") == old_snapshot  # no torn (new, old) pairs
    notif = parse_rrdp(_get(ep, "/notification.xml"))
    new_snapshot = _get(ep, f"/snapshot-{notif.serial}.xml")
    assert keystore.sha256(new_snapshot).hex() == notif.snapshot_hash


def test_bump_requires_derived_state(served_state, ctx_factory):
    ctx, state, server, endpoints = served_state
    other_ctx = ctx_factory(base_domain="other.example")
    other_state = other_ctx.repositoryfy([benign_roa(other_ctx, 0)])
    with pytest.raises(PublishError, match="not derived"):
        bump(other_state, endpoints[0])
    other_ctx.close()


def test_snapshot_replay_equals_deltas_applied(served_state):
    """Brute-force check: content at serial n == content at serial 0 with
    deltas 1..n applied."""
    ctx, state, server, endpoints = served_state
    ep = endpoints[0]
    base = dict(state.pps[ep.domain].publishes)
    current = copy.deepcopy(state)
    for step in range(4):
        current = copy.deepcopy(current)
        pp = current.pps[ep.domain]
        uri = f"rsync://{ep.domain}/repo/extra/file-{step}.bin"
        pp.publishes[uri] = bytes([step]) * 8
        if step == 2:
            victim = next(u for u in pp.publishes if u.endswith("marker-1.roa"))
            del pp.publishes[victim]
        bump(current, ep)
    notif = parse_rrdp(_get(ep, "/notification.xml"))
    replayed = dict(base)
    for dref in sorted(notif.deltas, key=lambda d: d.serial):
        delta = parse_rrdp(_get(ep, f"/delta-{dref.serial}.xml"))
        for el in delta.elements:
            if el.action == "publish":
                replayed[el.uri] = el.content
            else:
                replayed.pop(el.uri, None)
    snapshot = parse_rrdp(_get(ep, f"/snapshot-{notif.serial}.xml"))
    assert dict(snapshot.publishes) == replayed


# ---------------------------------------------------------------------------
# corruption knobs

def test_corrupt_session_mismatch(served_state):
    _, _, _, endpoints = served_state
    ep = endpoints[0]
    corrupt(ep, "session-mismatch")
    notif = parse_rrdp(_get(ep, "/notification.xml"))
    snap = parse_rrdp(_get(ep, f"/snapshot-{notif.serial}.xml"))
    assert snap.session_id != notif.session_id


def test_corrupt_bad_snapshot_hash(served_state):
    _, _, _, endpoints = served_state
    ep = endpoints[0]
    corrupt(ep, "bad-snapshot-hash")
    notif = parse_rrdp(_get(ep, "/notification.xml"))
    snapshot = _get(ep, f"/snapshot-{notif.serial}.xml")
    assert keystore.sha256(snapshot).hex() != notif.snapshot_hash


def test_corrupt_stale_serial(served_state):
    _, _, _, endpoints = served_state
    ep = endpoints[0]
    corrupt(ep, "stale-serial")
    notif = parse_rrdp(_get(ep, "/notification.xml"))
    assert notif.serial == ep.serial - 1


def test_corrupt_none_restores_consistency(served_state):
    _, _, _, endpoints = served_state
    ep = endpoints[0]
    corrupt(ep, "bad-snapshot-hash")
    corrupt(ep, None)
    notif = parse_rrdp(_get(ep, "/notification.xml"))
    snapshot = _get(ep, f"/snapshot-{notif.serial}.xml")
    assert keystore.sha256(snapshot).hex() == notif.snapshot_hash
    snap = parse_rrdp(snapshot)
    assert snap.session_id == notif.session_id


def test_corrupt_unknown_knob(served_state):
    _, _, _, endpoints = served_state
    with pytest.raises(PublishError):
        corrupt(endpoints[0], "no-such-knob")
    assert "session-mismatch" in CORRUPTION_KNOBS


def test_multi_domain_host_dispatch(scaffold_ctx):
    from rpkifuzz.mutation import generate_structured

    batch = [benign_roa(scaffold_ctx, 0), generate_structured("notification", 1, ())]
    state = scaffold_ctx.repositoryfy(batch)
    with RrdpServer() as server:
        endpoints = publish(state, server)
        assert len(endpoints) == 2
        for ep in endpoints:
            notif = parse_rrdp(_get(ep, "/notification.xml", host=ep.domain))
            if ep.pp.doc_override is None:
                assert notif.session_id == ep.session_id
        assert set(server.hosts_map()) == set(state.pps)


def test_tls_serving(scaffold_ctx):
    import ssl

    state = scaffold_ctx.repositoryfy([benign_roa(scaffold_ctx, 0)])
    domain = scaffold_ctx.config.base_domain
    tls = TlsIdentity([domain])
    server = RrdpServer(tls=tls)
    try:
        publish(state, server)
        ctx = tls.client_context()
        ctx.check_hostname = False  # we connect by IP; SAN carries the PP domain
        req = urllib.request.Request(f"https://127.0.0.1:{server.port}/notification.xml",
                                     headers={"Host": domain})
        with urllib.request.urlopen(req, timeout=5, context=ctx) as resp:
            body = resp.read()
        assert parse_rrdp(body).kind == "notification"
    finally:
        server.close()
