"""Serve repository states to relying parties over RRDP.

One OS listener dispatches on the Host header so any number of publication
point domains can be served; per-domain route tables are swapped atomically,
so a client fetching notification-then-snapshot sees a consistent pair (old
snapshots stay reachable under their serial-versioned paths).  TLS is
optional: a campaign root mints one leaf covering every served domain, and the
root certificate is exported for injection into validator trust stores.
"""

from __future__ import annotations

import datetime
import logging
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import keystore
from .objects.rrdp import RrdpDocument, render_rrdp
from .scaffold import PpState, RepositoryState, build_rrdp_documents

log = logging.getLogger(__name__)

CORRUPTION_KNOBS = ("session-mismatch", "bad-snapshot-hash", "stale-serial", "oversized-content-length")


class PublishError(ValueError):
    pass


def _content_type(path: str) -> str:
    if path.endswith(".xml"):
        return "application/xml"
    return "application/octet-stream"


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def do_GET(self):  # noqa: N802 (http.server API)
        server: RrdpServer = self.server  # type: ignore[assignment]
        host = (self.headers.get("Host") or "").split(":")[0]
        routes = server.routes_for(host)
        body = routes.get(self.path) if routes else None
        if body is None:
            self.send_response(404)
            self.send_header("Content-Length", "0")
            self.end_headers()
            return
        self.send_response(200)
        self.send_header("Content-Type", _content_type(self.path))
        declared = len(body)
        if server.oversize_content_length and self.path.endswith(".xml"):
            declared = len(body) + 4096
        self.send_header("Content-Length", str(declared))
        self.end_headers()
        try:
            self.wfile.write(body)
        except (BrokenPipeError, ConnectionResetError):
            pass

    def log_message(self, fmt, *args):
        log.debug("rrdp-server %s " + fmt, self.client_address[0], *args)


class RrdpServer(ThreadingHTTPServer):
    """Host-dispatching document server for any number of PP domains."""

    daemon_threads = True

    def __init__(self, host: str = "127.0.0.1", port: int = 0, tls: "TlsIdentity | None" = None):
        super().__init__((host, port), _Handler)
        self._routes: dict[str, dict[str, bytes]] = {}
        self.oversize_content_length = False
        self.tls = tls
        if tls is not None:
            self.socket = tls.server_context().wrap_socket(self.socket, server_side=True)
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()

    @property
    def port(self) -> int:
        return self.server_address[1]

    @property
    def scheme(self) -> str:
        return "https" if self.tls else "http"

    def base_url(self) -> str:
        return f"{self.scheme}://127.0.0.1:{self.port}"

    def routes_for(self, host: str) -> dict[str, bytes] | None:
        routes = self._routes.get(host)
        if routes is None and len(self._routes) == 1:
            return next(iter(self._routes.values()))
        return routes

    def set_routes(self, domain: str, routes: dict[str, bytes]) -> None:
        self._routes[domain] = dict(routes)  # atomic swap under the GIL

    def hosts_map(self) -> dict[str, str]:
        return {domain: self.base_url() for domain in self._routes}

    def close(self):
        self.shutdown()
        self.server_close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass
class PpEndpoint:
    domain: str
    server: RrdpServer
    pp: PpState
    state: RepositoryState
    knob: str | None = None

    @property
    def session_id(self) -> str:
        return self.pp.session_id

    @property
    def serial(self) -> int:
        return self.pp.serial

    def base_url(self) -> str:
        return self.server.base_url()


def _routes_from_pp(pp: PpState) -> dict[str, bytes]:
    routes: dict[str, bytes] = {}
    routes.update(pp.rrdp_docs)
    routes.update(pp.https_files)
    return routes


def publish(state: RepositoryState, server: RrdpServer | None = None) -> list[PpEndpoint]:
    """Expose every PP domain of a repository state on the server."""
    server = server or RrdpServer()
    endpoints = []
    for domain, pp in state.pps.items():
        if not pp.rrdp_docs:
            build_rrdp_documents(pp)
        server.set_routes(domain, _routes_from_pp(pp))
        endpoints.append(PpEndpoint(domain=domain, server=server, pp=pp, state=state))
    return endpoints


def bump(new_state: RepositoryState, endpoint: PpEndpoint) -> None:
    """Advance the endpoint to a derived state: serial+1, one delta, snapshot."""
    if endpoint.domain not in new_state.pps:
        raise PublishError(f"new state does not cover domain {endpoint.domain}; not derived from current")
    old = endpoint.pp
    new_publishes = new_state.pps[endpoint.domain].publishes
    from .objects.rrdp import DeltaElement

    elements = []
    for uri, data in new_publishes.items():
        prev = old.publishes.get(uri)
        if prev is None:
            elements.append(DeltaElement("publish", uri, data))
        elif prev != data:
            elements.append(DeltaElement("publish", uri, data, hash=keystore.sha256(prev).hex()))
    for uri, data in old.publishes.items():
        if uri not in new_publishes:
            elements.append(DeltaElement("withdraw", uri, None, hash=keystore.sha256(data).hex()))
    serial = old.serial + 1
    delta_bytes = render_rrdp(
        RrdpDocument("delta", old.session_id, serial, elements=elements)
    )
    merged = PpState(
        domain=endpoint.domain,
        session_id=old.session_id,
        serial=serial,
        publishes=dict(new_publishes),
        https_files=dict(new_state.pps[endpoint.domain].https_files) or dict(old.https_files),
        deltas=old.deltas + [(serial, delta_bytes)],
    )
    build_rrdp_documents(merged)
    # keep serving every older snapshot so concurrent clients never see a torn pair
    for path, body in old.rrdp_docs.items():
        if path.startswith("/snapshot-") and path not in merged.rrdp_docs:
            merged.rrdp_docs[path] = body
    endpoint.pp = merged
    endpoint.state = new_state
    endpoint.server.set_routes(endpoint.domain, _routes_from_pp(merged))
    if endpoint.knob:
        corrupt(endpoint, endpoint.knob)


def corrupt(endpoint: PpEndpoint, knob: str | None) -> None:
    """Apply one protocol-level corruption, or restore consistency with None."""
    pp = endpoint.pp
    endpoint.server.oversize_content_length = False
    if knob is None:
        endpoint.knob = None
        build_rrdp_documents(pp)
        endpoint.server.set_routes(endpoint.domain, _routes_from_pp(pp))
        return
    if knob not in CORRUPTION_KNOBS:
        raise PublishError(f"unknown corruption knob {knob!r}")
    endpoint.knob = knob
    build_rrdp_documents(pp)
    routes = _routes_from_pp(pp)
    snap_path = f"/snapshot-{pp.serial}.xml"
    if knob == "session-mismatch":
        mismatched = render_rrdp(
            RrdpDocument(
                "snapshot",
                pp.session_id[:-4] + "dead",
                pp.serial,
                publishes=list(pp.publishes.items()),
            )
        )
        routes[snap_path] = mismatched
    elif knob == "bad-snapshot-hash":
        snapshot = routes[snap_path]
        bad_hash = keystore.sha256(snapshot + b"x").hex()
        base = f"https://{pp.domain}"
        routes["/notification.xml"] = render_rrdp(
            RrdpDocument(
                "notification", pp.session_id, pp.serial,
                snapshot_uri=base + snap_path, snapshot_hash=bad_hash,
            )
        )
    elif knob == "stale-serial":
        base = f"https://{pp.domain}"
        snapshot = routes[snap_path]
        routes["/notification.xml"] = render_rrdp(
            RrdpDocument(
                "notification", pp.session_id, max(0, pp.serial - 1),
                snapshot_uri=base + snap_path, snapshot_hash=keystore.sha256(snapshot).hex(),
            ),
            fuzz=True,
        )
    elif knob == "oversized-content-length":
        endpoint.server.oversize_content_length = True
    endpoint.server.set_routes(endpoint.domain, routes)


# ---------------------------------------------------------------------------
# TLS plumbing: campaign root + per-campaign leaf covering all domains

class TlsIdentity:
    """Campaign-local TLS root and a leaf certificate minted from it."""

    def __init__(self, domains: list[str]):
        import ssl
        import tempfile

        from cryptography import x509
        from cryptography.hazmat.primitives import hashes, serialization
        from cryptography.hazmat.primitives.asymmetric import rsa
        from cryptography.x509.oid import NameOID

        self.domains = list(domains)
        now = datetime.datetime.now(datetime.timezone.utc)
        root_key = rsa.generate_private_key(public_exponent=65537, key_size=2048)
        root_name = x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, "rpkifuzz campaign root")])
        root_cert = (
            x509.CertificateBuilder()
            .subject_name(root_name)
            .issuer_name(root_name)
            .public_key(root_key.public_key())
            .serial_number(x509.random_serial_number())
            .not_valid_before(now - datetime.timedelta(minutes=5))
            .not_valid_after(now + datetime.timedelta(days=30))
            .add_extension(x509.BasicConstraints(ca=True, path_length=1), critical=True)
            .sign(root_key, hashes.SHA256())
        )
        leaf_key = rsa.generate_private_key(public_exponent=65537, key_size=2048)
        sans = [x509.DNSName(d) for d in self.domains] or [x509.DNSName("localhost")]
        leaf_cert = (
            x509.CertificateBuilder()
            .subject_name(x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, self.domains[0] if self.domains else "localhost")]))
            .issuer_name(root_name)
            .public_key(leaf_key.public_key())
            .serial_number(x509.random_serial_number())
            .not_valid_before(now - datetime.timedelta(minutes=5))
            .not_valid_after(now + datetime.timedelta(days=30))
            .add_extension(x509.SubjectAlternativeName(sans), critical=False)
            .sign(root_key, hashes.SHA256())
        )
        self._dir = tempfile.mkdtemp(prefix="rpkifuzz-tls-")
        self.root_pem = f"{self._dir}/root.pem"
        self.leaf_pem = f"{self._dir}/leaf.pem"
        self.key_pem = f"{self._dir}/leaf.key"
        with open(self.root_pem, "wb") as fh:
            fh.write(root_cert.public_bytes(serialization.Encoding.PEM))
        with open(self.leaf_pem, "wb") as fh:
            fh.write(leaf_cert.public_bytes(serialization.Encoding.PEM))
        with open(self.key_pem, "wb") as fh:
            fh.write(
                leaf_key.private_bytes(
                    serialization.Encoding.PEM,
                    serialization.PrivateFormat.TraditionalOpenSSL,
                    serialization.NoEncryption(),
                )
            )
        self._ssl = ssl

    def server_context(self):
        ctx = self._ssl.SSLContext(self._ssl.PROTOCOL_TLS_SERVER)
        ctx.load_cert_chain(self.leaf_pem, self.key_pem)
        return ctx

    def client_context(self):
        ctx = self._ssl.create_default_context(cafile=self.root_pem)
        return ctx
