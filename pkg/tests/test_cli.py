import json
import subprocess
import sys

import pytest

from rpkifuzz import keystore
from rpkifuzz.mutation import corpus_write, generate_structured


def run_cli(*args, timeout=300):
    return subprocess.run([sys.executable, "-m", "rpkifuzz.cli", *args],
                          capture_output=True, text=True, timeout=timeout)


@pytest.fixture(scope="module")
def pool_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("pool") / "pool.bin"
    keystore.pool_save(keystore.pool_create(48, seed=31), path)
    return str(path)


@pytest.fixture(scope="module")
def adapters_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("adapters") / "adapters.json"
    path.write_text(json.dumps([
        {"type": "stub", "name": "stub-strict", "profile": "strict"},
        {"type": "stub", "name": "stub-rtr", "profile": "routinator"},
    ]))
    return str(path)


def test_keypool_create_and_inspect(tmp_path):
    pool_path = tmp_path / "p.bin"
    r = run_cli("keypool", "create", str(pool_path), "--size", "3", "--seed", "2")
    assert r.returncode == 0, r.stderr
    r = run_cli("keypool", "inspect", str(pool_path))
    assert r.returncode == 0
    assert "3 RSA-2048 keys" in r.stdout


def test_batch_mode_clean_run(tmp_path, pool_file, adapters_file):
    corpus = tmp_path / "corpus"
    for i in range(10):
        corpus_write(corpus, generate_structured("roa", 1000 + i, ()))  # no mutations: benign
    r = run_cli(
        "batch", "--corpus", str(corpus), "--kind", "roa", "--batch-size", "4",
        "--adapters", adapters_file, "--key-pool", pool_file,
        "--idle-polls", "1", "--poll-interval", "0.05",
        "--reports", str(tmp_path / "reports"), "--campaign-id", "clean", "--workers", "2",
    )
    assert r.returncode == 0, r.stdout + r.stderr
    summary = json.loads((tmp_path / "reports" / "clean" / "summary.json").read_text())
    assert summary["batches"] == 3  # 4 + 4 + 2
    assert summary["findings"] == 0


def test_batch_mode_crash_produces_report(tmp_path, pool_file):
    corpus = tmp_path / "corpus"
    objs = [generate_structured("roa", 2000 + i, ()) for i in range(6)]
    for obj in objs:
        corpus_write(corpus, obj)
    victim = objs[3]
    from rpkifuzz.objects.cms import parse_signed_object

    pattern = parse_signed_object(victim.data).econtent[-12:].hex()
    adapters = tmp_path / "adapters.json"
    adapters.write_text(json.dumps([
        {"type": "stub", "name": "killer", "profile": "strict", "dieOnPattern": pattern},
    ]))
    r = run_cli(
        "batch", "--corpus", str(corpus), "--kind", "roa", "--batch-size", "6",
        "--adapters", str(adapters), "--key-pool", pool_file,
        "--idle-polls", "1", "--poll-interval", "0.05",
        "--reports", str(tmp_path / "reports"), "--campaign-id", "crashy",
    )
    assert r.returncode == 1, r.stdout + r.stderr  # findings produced
    crash_dir = tmp_path / "reports" / "crashy" / "crashes"
    reports = list(crash_dir.glob("crash-*.json"))
    assert len(reports) == 1
    data = json.loads(reports[0].read_text())
    assert data["culprit"]["generator"] == "corpus"
    assert data["culprit"]["parent_corpus_id"].endswith(f"{victim.object_id}.roa")
    assert not data["flaky"]
    assert (reports[0].with_suffix(".txt")).exists()


def test_standalone_mode_benign(tmp_path, pool_file, adapters_file):
    pool = keystore.pool_load(pool_file)
    from rpkifuzz.factory import CaIdentity, make_ca_cert, make_roa, ALL_RESOURCES_IP, ALL_RESOURCES_AS

    ca = CaIdentity.create("seed", pool.keys[0], "seed.test")
    make_ca_cert(ca, None, ALL_RESOURCES_IP, ALL_RESOURCES_AS)
    obj = tmp_path / "one.roa"
    obj.write_bytes(make_roa(ca, 65432, [("198.51.100.0/24", 24)], pool.keys[1]))
    r = run_cli("standalone", "--object", str(obj), "--kind", "roa",
                "--adapters", adapters_file, "--key-pool", pool_file)
    assert r.returncode == 0, r.stdout + r.stderr
    assert "VRP sets identical" in r.stdout
    assert "stub-strict: ok" in r.stdout


def test_standalone_missing_file_usage_error(pool_file, adapters_file):
    r = run_cli("standalone", "--object", "/nonexistent.roa", "--kind", "roa",
                "--adapters", adapters_file, "--key-pool", pool_file)
    assert r.returncode == 2
    assert "error:" in r.stderr


def test_standalone_unknown_kind_usage_error(tmp_path, pool_file):
    obj = tmp_path / "x.bin"
    obj.write_bytes(b"\x00")
    r = run_cli("standalone", "--object", str(obj), "--kind", "flying-saucer", "--key-pool", pool_file)
    assert r.returncode == 2


def test_conformance_subcommand_two_cases(tmp_path):
    r = run_cli("conformance", "--cases", "ee-validity-misaligned", "roa-asid-inherit",
                "--reports", str(tmp_path / "conf"))
    assert r.returncode == 0, r.stdout + r.stderr
    report = json.loads((tmp_path / "conf" / "conformance.json").read_text())
    assert set(report) == {"ee-validity-misaligned", "roa-asid-inherit"}
    assert (tmp_path / "conf" / "cases.json").exists()
    assert "| case |" in (tmp_path / "conf" / "conformance.md").read_text()


def test_bench_subcommand(pool_file):
    r = run_cli("bench", "--mode", "cached", "--n", "30", "--key-pool", pool_file)
    assert r.returncode == 0, r.stderr
    report = json.loads(r.stdout)
    assert report["mode"] == "cached" and report["objects"] == 30
    assert report["objects_per_second"] > 0


def test_bench_zero_n_usage_error(pool_file):
    r = run_cli("bench", "--mode", "cached", "--n", "0", "--key-pool", pool_file)
    assert r.returncode == 2
