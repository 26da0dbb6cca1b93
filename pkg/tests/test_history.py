import threading

import pytest

from hybridplan.errors import StorageError
from hybridplan.history import TraceDataset

from conftest import make_sample


def test_append_to_fresh_store(tmp_path):
    ds = TraceDataset(tmp_path / "h.jsonl")
    s = make_sample(12.5, "q11")
    ds.append(s)
    assert ds.read_all() == [s]


def test_order_preserved(tmp_path):
    ds = TraceDataset(tmp_path / "h.jsonl")
    a, b = make_sample(1.0), make_sample(2.0)
    ds.append(a)
    ds.append(b)
    assert ds.read_all() == [a, b]
    assert len(ds) == 2


def test_latest_features_for(tmp_path):
    ds = TraceDataset(tmp_path / "h.jsonl")
    ds.extend([make_sample(float(i + 1), "q11") for i in range(3)] + [make_sample(9.0, "q49")])
    got = ds.latest_features_for("q11", 2)
    assert [s.query_duration_s for s in got] == [3.0, 2.0]
    assert ds.latest_features_for("zzz", 5) == []
    assert len(ds.latest_features_for("q11", 100)) == 3
    with pytest.raises(ValueError):
        ds.latest_features_for("q11", 0)


def test_torn_trailing_line_is_ignored(tmp_path):
    path = tmp_path / "h.jsonl"
    ds = TraceDataset(path)
    ds.append(make_sample(4.0))
    with open(path, "a") as fh:
        fh.write('{"query_id": "q", "insta')
    assert len(ds.read_all()) == 1


def test_missing_file_reads_empty(tmp_path):
    assert TraceDataset(tmp_path / "none.jsonl").read_all() == []


def test_append_failure_is_storage_error(tmp_path):
    (tmp_path / "dir").mkdir()
    ds = TraceDataset(tmp_path / "dir")
    with pytest.raises(StorageError):
        ds.append(make_sample())


def test_concurrent_appends_keep_whole_records(tmp_path):
    ds = TraceDataset(tmp_path / "h.jsonl")

    def worker(k):
        for i in range(20):
            ds.append(make_sample(float(k * 100 + i + 1), f"w{k}"))

    threads = [threading.Thread(target=worker, args=(k,)) for k in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    rows = ds.read_all()
    assert len(rows) == 80
    for k in range(4):
        mine = [s.query_duration_s for s in rows if s.query_id == f"w{k}"]
        assert mine == sorted(mine)
