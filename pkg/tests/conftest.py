import logging

import pytest

from rpkifuzz import keystore
from rpkifuzz.factory import make_roa
from rpkifuzz.mutation import Provenance, TestObject
from rpkifuzz.scaffold import ScaffoldConfig, ScaffoldContext

logging.getLogger("rpkifuzz").setLevel(logging.WARNING)


@pytest.fixture(scope="session")
def key_pool():
    """Shared seeded pool; wraps when a test draws more keys than it holds."""
    return keystore.pool_create(96, seed=20240901)


@pytest.fixture()
def scaffold_ctx(key_pool):
    ctx = ScaffoldContext(key_pool, ScaffoldConfig(seed=5))
    yield ctx
    ctx.close()


@pytest.fixture(scope="session")
def ctx_factory(key_pool):
    def make(**kwargs) -> ScaffoldContext:
        return ScaffoldContext(key_pool, ScaffoldConfig(**kwargs))

    return make


def benign_roa(ctx: ScaffoldContext, i: int, prefix: str | None = None) -> TestObject:
    """Factory-benign ROA test object under the context's payload CA.

    Default prefixes are pairwise distinct for i < 1024; the AS number is
    always unique per i, so VRP triples never collide either way.
    """
    ca = ctx.payload_ca()
    prefix = prefix or f"192.{168 + (i // 256) % 4}.{i % 256}.0/24"
    data = make_roa(ca.ident, 65000 + i, [(prefix, int(prefix.rsplit('/', 1)[1]))],
                    ctx.pool.acquire(), now=ctx.now)
    return TestObject("roa", data, Provenance("factory", "roa", seed=i), frozenset())
