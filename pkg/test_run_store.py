import json
from concurrent.futures import ProcessPoolExecutor

import pytest

import run_store
from errors import InputError


def test_json_is_written_atomically(tmp_path):
    path = tmp_path / "nested" / "doc.json"
    run_store.write_json(str(path), {"energy": -7.999999999999998, "N": 4})
    text = path.read_text()
    assert text.endswith("}\n")
    assert json.loads(text)["energy"] == -7.999999999999998
    assert not (tmp_path / "nested" / "doc.json.tmp").exists()


def test_trace_round_trip(tmp_path):
    path = str(tmp_path / "trace.csv")
    rows = [(1, -4.0, -4.0, 0.0), (2, -4.123456789012345, -4.123456789012345, 0.0)]
    run_store.write_trace(path, rows[:1])
    run_store.write_trace(path, rows[1:], append=True)
    assert run_store.read_trace(path) == rows
    with open(path, "rb") as f:
        content = f.read()
    assert content.startswith(b"eval,energy,best,seconds\n")
    assert b"\r" not in content


def test_truncate_trace(tmp_path):
    path = str(tmp_path / "trace.csv")
    run_store.write_trace(path, [(i, -1.0 * i, -1.0 * i, 0.0) for i in range(1, 6)])
    run_store.truncate_trace(path, 3)
    assert [r[0] for r in run_store.read_trace(path)] == [1, 2, 3]
    with pytest.raises(InputError):
        run_store.truncate_trace(path, 4)


def test_malformed_trace(tmp_path):
    path = tmp_path / "trace.csv"
    path.write_text("eval,energy,best,seconds\n1,-1.0,-1.0\n")
    with pytest.raises(InputError, match="line 2"):
        run_store.read_trace(str(path))
    path.write_text("step,value\n")
    with pytest.raises(InputError):
        run_store.read_trace(str(path))


def _checkpoint(**overrides):
    checkpoint = {
        "params": [0.1, 0.2],
        "evals": 7,
        "best_energy": -3.0,
        "best_params": [0.1, 0.2],
        "rng": {"generator": "philox", "next_eval": 8},
        "config_sha256": "0" * 64,
    }
    checkpoint.update(overrides)
    return checkpoint


def test_checkpoint_round_trip(tmp_path):
    run_store.write_checkpoint(str(tmp_path), _checkpoint())
    assert run_store.read_checkpoint(str(tmp_path)) == _checkpoint()


@pytest.mark.parametrize("broken", [{"params": [0.1]}, {"evals": -1}, {"evals": "7"}])
def test_corrupt_checkpoints(tmp_path, broken):
    run_store.write_checkpoint(str(tmp_path), _checkpoint(**broken))
    with pytest.raises(InputError, match="corrupt checkpoint"):
        run_store.read_checkpoint(str(tmp_path))


def test_missing_checkpoint_field(tmp_path):
    checkpoint = _checkpoint()
    del checkpoint["rng"]
    run_store.write_json(str(tmp_path / run_store.CHECKPOINT_FILE), checkpoint)
    with pytest.raises(InputError, match="rng"):
        run_store.read_checkpoint(str(tmp_path))


def test_run_index_replaces_by_run_dir(tmp_path):
    run_store.record_run(str(tmp_path), {"run_dir": "/a", "energy": -1.0})
    run_store.record_run(str(tmp_path), {"run_dir": "/b", "energy": -2.0})
    run_store.record_run(str(tmp_path), {"run_dir": "/a", "energy": -3.0})
    assert run_store.load_run_index(str(tmp_path)) == [
        {"run_dir": "/a", "energy": -3.0},
        {"run_dir": "/b", "energy": -2.0},
    ]


def _write_many(path, worker):
    for i in range(25):
        run_store.write_json(path, {"worker": worker, "i": i})
    return worker


@pytest.mark.slow
def test_concurrent_writers_do_not_collide(tmp_path):
    path = str(tmp_path / "shared.json")
    with ProcessPoolExecutor(max_workers=4) as pool:
        assert sorted(pool.map(_write_many, [path] * 4, range(4))) == [0, 1, 2, 3]
    assert json.loads((tmp_path / "shared.json").read_text())["i"] == 24
    assert sorted(p.name for p in tmp_path.iterdir()) == ["shared.json"]


def test_run_index_merges_batches(tmp_path):
    run_store.record_run(str(tmp_path), {"run_dir": "/a", "energy": -1.0})
    run_store.record_runs(str(tmp_path), [{"run_dir": "/b"}, {"run_dir": "/a", "energy": -2.0}])
    assert run_store.load_run_index(str(tmp_path)) == [{"run_dir": "/a", "energy": -2.0}, {"run_dir": "/b"}]


def test_corrupt_run_index_is_tolerated(tmp_path):
    (tmp_path / run_store.RUN_INDEX_FILE).write_text("{not json")
    assert run_store.load_run_index(str(tmp_path)) == []
    run_store.record_run(str(tmp_path), {"run_dir": "/c"})
    assert run_store.load_run_index(str(tmp_path)) == [{"run_dir": "/c"}]


def test_load_summaries(tmp_path):
    for n in (4, 6):
        run_store.write_json(str(tmp_path / f"N{n}" / "summary.json"), {"N": n, "energy": -2.0 * n})
    summaries = run_store.load_summaries([str(tmp_path / "*" / "summary.json")])
    assert [s["N"] for s in summaries] == [4, 6]
    assert summaries[0]["source_path"].endswith("summary.json")
    (tmp_path / "list.json").write_text("[1, 2]")
    with pytest.raises(InputError):
        run_store.load_summaries([str(tmp_path / "list.json")])
