import threading
from dataclasses import replace

import pytest

from hybridplan import dynamics
from hybridplan.domain import EngineConfig
from hybridplan.dynamics import (AuditLog, ModelHolder, RetrainMonitor, check_trigger, choose_placement,
                                 run_retrain)
from hybridplan.errors import ModelStateError
from hybridplan.forest import Hyper, ModelStore, fit
from hybridplan.history import TraceDataset

CFG = EngineConfig(train_error_difference_trigger_s=10.0, train_max_batch=20)


def test_trigger_examples():
    assert not check_trigger(100, 105, 10).triggered
    ev = check_trigger(100, 115, 10, "q11", timestamp=1.0)
    assert ev.triggered and ev.abs_error_s == 15 and ev.query_id == "q11"
    assert check_trigger(7, 7, 10).abs_error_s == 0
    assert not check_trigger(100, 110, 10).triggered
    with pytest.raises(ValueError):
        check_trigger(1, 2, 0)


def test_holder_without_model():
    h = ModelHolder()
    assert h.version == 0
    with pytest.raises(ModelStateError):
        h.get()


def test_placement():
    cfg = replace(CFG, train_pref_same_instance=True, train_min_ram_gb=4.0)
    assert choose_placement(cfg, 8 * 1024 ** 3) == "in-process"
    assert choose_placement(cfg, 1024 ** 3) == "worker"
    assert choose_placement(replace(cfg, train_pref_same_instance=False), 64 * 1024 ** 3) == "worker"
    assert choose_placement(cfg) in ("in-process", "worker")


def test_run_retrain_persists_new_version(tmp_path, model, samples):
    hist = TraceDataset(tmp_path / "h.jsonl")
    hist.extend(samples[:15])
    store = ModelStore(tmp_path / "m")
    new = run_retrain(model, hist, CFG, Hyper(n_trees=3), store)
    assert new.version == model.version + 1
    assert store.current_version() == new.version
    assert new.training_stats["n_samples"] == model.training_stats["n_samples"] + 150


def test_audit_log_round_trip(tmp_path):
    log = AuditLog(tmp_path / "a" / "drift.jsonl")
    log.write({"event": "x", "v": 1})
    assert log.read() == [{"event": "x", "v": 1}]
    AuditLog(tmp_path).write({"bad": True})  # directory path: logged, not raised


def _monitor(tmp_path, model, samples, **kw):
    hist = TraceDataset(tmp_path / "h.jsonl")
    hist.extend(samples[:10])
    holder = ModelHolder(model)
    audit = AuditLog(tmp_path / "drift.jsonl")
    mon = RetrainMonitor(holder, hist, CFG, audit=audit, hyper=Hyper(n_trees=2), placement="in-process", **kw)
    return holder, mon, audit


def test_triggers_coalesce(tmp_path, model, samples, monkeypatch):
    gate, started = threading.Event(), threading.Event()
    calls = []
    real = dynamics.retrain_model

    def slow(current, batch, config, hyper):
        calls.append(current.version)
        started.set()
        gate.wait(10)
        return real(current, batch, config, hyper)

    monkeypatch.setattr(dynamics, "retrain_model", slow)
    holder, mon, audit = _monitor(tmp_path, model, samples)
    assert mon.observe(check_trigger(0, 100, 10))
    assert started.wait(10)
    for _ in range(5):
        mon.observe(check_trigger(0, 100, 10))
    assert mon.busy
    gate.set()
    assert mon.wait_idle(30)
    assert len(calls) == 2 and mon.completed == 2
    assert holder.version == model.version + 2
    records = audit.read()
    assert sum(r["event"] == "drift" for r in records) == 6
    assert [r["status"] for r in records if r["event"] == "retrain"] == ["ok", "ok"]


def test_untriggered_event_does_not_retrain(tmp_path, model, samples):
    holder, mon, _ = _monitor(tmp_path, model, samples)
    assert not mon.observe(check_trigger(10, 12, 10))
    assert mon.wait_idle(1) and mon.completed == 0 and holder.version == model.version


def test_failure_keeps_serving_model(tmp_path, model, samples, monkeypatch):
    def boom(*a):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(dynamics, "retrain_model", boom)
    holder, mon, audit = _monitor(tmp_path, model, samples)
    mon.request(check_trigger(0, 100, 10))
    assert mon.wait_idle(10)
    assert holder.get() is model and mon.failed == 1
    assert audit.read()[-1]["status"] == "failed"


def test_persist_failure_keeps_serving_model(tmp_path, model, samples):
    blocker = tmp_path / "not-a-dir"
    blocker.write_text("x")
    holder, mon, _ = _monitor(tmp_path, model, samples, store=ModelStore(blocker))
    mon.request(check_trigger(0, 100, 10))
    assert mon.wait_idle(30)
    assert holder.get() is model and mon.failed == 1


def test_worker_placement(tmp_path, model, samples):
    holder, mon, _ = _monitor(tmp_path, model, samples)
    mon.placement = "worker"
    mon.request(check_trigger(0, 100, 10))
    assert mon.wait_idle(120)
    assert mon.completed == 1 and holder.version == model.version + 1


def test_readers_see_whole_models(samples):
    x = samples[0].features
    m1 = replace(fit(samples[:20], Hyper(n_trees=2)), version=1)
    m2 = replace(fit(samples[20:40], Hyper(n_trees=3, seed=1)), version=2)
    expected = {1: m1.predict(x), 2: m2.predict(x)}
    holder = ModelHolder(m1)
    stop = threading.Event()
    bad = []

    def reader():
        while not stop.is_set():
            m = holder.get()
            if m.predict(x) != expected[m.version]:
                bad.append(m.version)

    threads = [threading.Thread(target=reader) for _ in range(4)]
    for t in threads:
        t.start()
    for i in range(200):
        holder.swap(m2 if i % 2 == 0 else m1)
    stop.set()
    for t in threads:
        t.join()
    assert not bad
