import json
import subprocess
import sys

import pytest

from hybridplan.cli import main
from hybridplan.history import TraceDataset


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["gen", "--history", str(d / "h.jsonl"), "--seed", "0"]) == 0
    assert main(["train", "--history", str(d / "h.jsonl"), "--model-dir", str(d / "m"), "--n-trees", "10"]) == 0
    return d


def test_gen_counts_and_is_reproducible(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert main(["gen", "--history", str(a), "--seed", "4"]) == 0
    assert main(["gen", "--history", str(b), "--seed", "4"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(TraceDataset(a)) == 100


def test_gen_small_grid(tmp_path):
    h = tmp_path / "h.jsonl"
    assert main(["gen", "--history", str(h), "--max-vm", "1", "--max-sl", "1", "--queries", "q11"]) == 0
    fleets = {s.features.fleet.as_tuple() for s in TraceDataset(h)}
    assert fleets == {(0, 1), (1, 0), (1, 1)}


def test_train_output(workdir, capsys, tmp_path):
    args = ["train", "--history", str(workdir / "h.jsonl"), "--model-dir", str(tmp_path / "m"), "--n-trees", "10"]
    assert main(args) == 0
    first = capsys.readouterr().out
    assert "augmented=1000 train=800 test=200" in first
    acc = float(first.split("within_10s=")[1].split()[0])
    assert acc >= 0.95
    assert main(args) == 0
    second = capsys.readouterr().out
    assert first.replace("model_version=1", "") == second.replace("model_version=2", "")
    assert json.loads((tmp_path / "m" / "registry.json").read_text()).keys() >= {"q11", "q82"}


def test_plan_json_and_epsilon(workdir, capsys):
    common = ["--model-dir", str(workdir / "m"), "--history", str(workdir / "h.jsonl")]
    assert main(["plan", "--query-id", "q11", "--epsilon", "0.2", "--json"] + common) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["predicted_time_s"] <= 1.2 * out["t_best_s"] + 1e-9
    assert main(["plan", "--sql", "SELECT a, b FROM t1 WHERE c > 1", "--n-map-tasks", "30"] + common) == 0
    assert "matched=" in capsys.readouterr().out


def test_sweep_rows(tmp_path, capsys):
    assert main(["sweep", "--n-tasks", "250"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 36 and lines[0].startswith("n_vm,n_sl")
    out = tmp_path / "s.csv"
    assert main(["sweep", "--out", str(out), "--max-vm", "1", "--max-sl", "2"]) == 0
    assert len(out.read_text().strip().splitlines()) == 6


def test_simulate(capsys):
    assert main(["simulate", "--fleet", "1,0", "--n-tasks", "10", "--policy", "vm-only"]) == 0
    assert "completion_s=75.000" in capsys.readouterr().out
    assert main(["simulate", "--fleet", "2,2", "--n-tasks", "100"]) == 0
    assert "relay req-0001 -> i-00000001" in capsys.readouterr().out


def test_compare(workdir, capsys):
    assert main(["compare", "--model-dir", str(workdir / "m"), "--runs", "2"]) == 0
    rows = capsys.readouterr().out.strip().splitlines()
    assert rows[0].startswith("seed,strategy") and len(rows) == 1 + 2 * 3


def test_errors_exit_one_line(tmp_path, capsys):
    assert main(["plan", "--query-id", "q11", "--model-dir", str(tmp_path / "none")]) == 1
    err = capsys.readouterr().err
    assert err.count("\n") == 1 and "error" in err
    assert main(["simulate", "--fleet", "2,1", "--policy", "segue"]) == 1
    assert main(["train", "--history", str(tmp_path / "empty.jsonl")]) == 1
    assert main(["plan", "--model-dir", str(tmp_path)]) == 1


def test_bad_flags_exit_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--fleet", "x"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "hybridplan", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "sweep" in r.stdout
