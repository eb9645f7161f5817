"""Throughput benchmarks for the three optimization stages.

``keygen`` builds objects with a fresh RSA pair per object (the naive path),
``cached`` draws keys from a preloaded pool, and ``pipeline`` measures
end-to-end repository scaffolding with the worker pool.  The cached/keygen
ratio is the headline number: signing is cheap, key generation is not.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass

from . import keystore
from .factory import make_roa
from .keystore import KeyPool
from .mutation import Provenance, TestObject
from .scaffold import ScaffoldConfig, ScaffoldContext

MODES = ("keygen", "cached", "pipeline")


@dataclass
class BenchReport:
    mode: str
    objects: int
    workers: int
    seconds: float
    objects_per_second: float

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


def _benign_batch(ctx: ScaffoldContext, pool: KeyPool, n: int, start: int = 0) -> list[TestObject]:
    ca = ctx.payload_ca()
    out = []
    for i in range(start, start + n):
        data = make_roa(
            ca.ident,
            64512 + (i % 1000),
            [(f"10.{(i >> 8) % 64}.{i % 256}.0/24", 24)],
            pool.acquire(),
            now=ctx.now,
        )
        out.append(TestObject("roa", data, Provenance("factory", "roa", seed=i), frozenset()))
    return out


def bench(mode: str, n: int, workers: int = 1, pool: KeyPool | None = None, seed: int | None = 7) -> BenchReport:
    if n <= 0:
        raise ValueError("bench needs n >= 1")
    if mode not in MODES:
        raise ValueError(f"unknown bench mode {mode!r}; choose from {MODES}")
    if mode == "keygen":
        return _bench_object_build(n, workers, cached_pool=None)
    if pool is None:
        pool = keystore.pool_create(min(max(n + 64, 128), 4096), seed=seed)
    if mode == "cached":
        return _bench_object_build(n, workers, cached_pool=pool)
    return _bench_pipeline(n, workers, pool)


def _bench_object_build(n: int, workers: int, cached_pool: KeyPool | None) -> BenchReport:
    """Build one signed ROA per iteration; EE keys fresh or from the pool."""
    setup_pool = keystore.pool_create(2, seed=1)
    ctx = ScaffoldContext(setup_pool, ScaffoldConfig())
    ca = ctx.payload_ca()
    started = time.perf_counter()
    for i in range(n):
        ee_key = cached_pool.acquire() if cached_pool else keystore.generate_key()
        make_roa(ca.ident, 64512, [(f"10.0.{i % 256}.0/24", 24)], ee_key, now=ctx.now)
    seconds = time.perf_counter() - started
    mode = "cached" if cached_pool else "keygen"
    return BenchReport(mode, n, workers, seconds, n / seconds if seconds else float("inf"))


def _bench_pipeline(n: int, workers: int, pool: KeyPool) -> BenchReport:
    ctx = ScaffoldContext(pool, ScaffoldConfig(workers=workers))
    batch_size = min(100, n)
    batches = []
    built = 0
    while built < n:
        size = min(batch_size, n - built)
        batches.append(_benign_batch(ctx, pool, size, start=built))
        built += size
    ctx.repositoryfy(batches[0][:1])  # warm the auxiliary caches outside the clock
    started = time.perf_counter()
    for batch in batches:
        ctx.repositoryfy(batch)
    seconds = time.perf_counter() - started
    ctx.close()
    return BenchReport("pipeline", n, workers, seconds, n / seconds if seconds else float("inf"))
