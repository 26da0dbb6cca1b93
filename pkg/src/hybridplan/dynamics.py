"""Drift detection and background retraining with an atomic model swap."""
from __future__ import annotations

import json
import logging
import threading
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from multiprocessing import get_context
from pathlib import Path

import psutil

from .domain import EngineConfig
from .errors import EmptyInputError, ModelStateError
from .forest import Hyper, ModelStore, PredictionModel, augment, warm_retrain
from .history import TraceDataset

log = logging.getLogger(__name__)

AUGMENT_FACTOR = 10
AUGMENT_JITTER = 0.05


@dataclass(frozen=True)
class DriftEvent:
    query_id: str
    predicted_s: float
    actual_s: float
    abs_error_s: float
    timestamp: float
    triggered: bool

    def to_record(self) -> dict:
        return {"event": "drift", **asdict(self)}


def check_trigger(predicted_s: float, actual_s: float, trigger_s: float,
                  query_id: str = "alien", timestamp: float | None = None) -> DriftEvent:
    if not trigger_s > 0:
        raise ValueError("trigger_s must be > 0")
    err = abs(predicted_s - actual_s)
    return DriftEvent(query_id, float(predicted_s), float(actual_s), err,
                      time.time() if timestamp is None else timestamp, err > trigger_s)


class ModelHolder:
    """The serving model reference; readers always see one whole model."""

    def __init__(self, model: PredictionModel | None = None):
        self._model = model
        self._lock = threading.Lock()

    def get(self) -> PredictionModel:
        model = self._model
        if model is None or not model.trained:
            raise ModelStateError("no trained model is being served")
        return model

    @property
    def version(self) -> int:
        return self._model.version if self._model is not None else 0

    def swap(self, model: PredictionModel) -> PredictionModel:
        with self._lock:
            old, self._model = self._model, model
        return old


class AuditLog:
    """JSON-lines log of drift events and retrain outcomes."""

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def write(self, record: dict) -> None:
        line = json.dumps(record, sort_keys=True) + "\n"
        with self._lock:
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(line)
            except OSError as exc:
                log.warning("audit log write failed: %s", exc)

    def read(self) -> list[dict]:
        if not self.path.exists():
            return []
        with open(self.path, encoding="utf-8") as fh:
            return [json.loads(x) for x in fh if x.strip()]


def retrain_batch(history: TraceDataset, config: EngineConfig):
    batch = history.latest(config.train_max_batch)
    if not batch:
        raise EmptyInputError("history has no samples to retrain on")
    return batch


def retrain_model(current: PredictionModel, batch, config: EngineConfig, hyper: Hyper) -> PredictionModel:
    aug = augment(batch, AUGMENT_FACTOR, AUGMENT_JITTER, seed=hyper.seed + current.version)
    return warm_retrain(current, aug, hyper, retire_error_s=config.train_error_difference_trigger_s)


def run_retrain(current: PredictionModel, history: TraceDataset, config: EngineConfig,
                hyper: Hyper = Hyper(), store: ModelStore | None = None) -> PredictionModel:
    """Warm-retrain on the most recent history batch and persist the result.

    The batch holds up to ``train_max_batch`` newest samples across all
    workloads, augmented tenfold. Old trees that miss any batch sample by
    more than the drift trigger are retired.
    """
    new = retrain_model(current, retrain_batch(history, config), config, hyper)
    if store is not None:
        store.save(new)
    return new


def choose_placement(config: EngineConfig, free_bytes: int | None = None) -> str:
    """``"in-process"`` when preferred and enough memory is free, else ``"worker"``."""
    free = psutil.virtual_memory().available if free_bytes is None else free_bytes
    if config.train_pref_same_instance and free >= config.train_min_ram_gb * 1024 ** 3:
        return "in-process"
    return "worker"


class RetrainMonitor:
    """One background retrainer with a latest-wins pending slot.

    A trigger arriving while a retrain runs replaces any earlier pending
    trigger, so a burst of triggers produces at most one follow-up run.
    """

    def __init__(self, holder: ModelHolder, history: TraceDataset, config: EngineConfig,
                 store: ModelStore | None = None, audit: AuditLog | None = None,
                 hyper: Hyper = Hyper(), placement: str | None = None):
        self.holder = holder
        self.history = history
        self.config = config
        self.store = store
        self.audit = audit
        self.hyper = hyper
        self.placement = placement
        self.completed = 0
        self.failed = 0
        self._cv = threading.Condition()
        self._pending: DriftEvent | None = None
        self._running = False
        self._thread: threading.Thread | None = None

    def observe(self, event: DriftEvent) -> bool:
        """Log ``event`` and schedule a retrain if it triggered."""
        if self.audit is not None:
            self.audit.write(event.to_record())
        if event.triggered:
            self.request(event)
        return event.triggered

    def request(self, event: DriftEvent) -> None:
        with self._cv:
            self._pending = event
            if not self._running:
                self._running = True
                self._thread = threading.Thread(target=self._loop, name="retrain", daemon=True)
                self._thread.start()

    @property
    def busy(self) -> bool:
        with self._cv:
            return self._running

    def wait_idle(self, timeout: float | None = None) -> bool:
        deadline = None if timeout is None else time.monotonic() + timeout
        with self._cv:
            while self._running:
                remaining = None if deadline is None else deadline - time.monotonic()
                if remaining is not None and remaining <= 0:
                    return False
                self._cv.wait(remaining)
        return True

    def _loop(self) -> None:
        while True:
            with self._cv:
                event, self._pending = self._pending, None
                if event is None:
                    self._running = False
                    self._cv.notify_all()
                    return
            self._retrain_once(event)

    def _retrain_once(self, event: DriftEvent) -> None:
        started = time.time()
        placement = self.placement or choose_placement(self.config)
        try:
            current = self.holder.get()
            batch = retrain_batch(self.history, self.config)
            if placement == "in-process":
                new = retrain_model(current, batch, self.config, self.hyper)
            else:
                with ProcessPoolExecutor(max_workers=1, mp_context=get_context("spawn")) as pool:
                    new = pool.submit(retrain_model, current, batch, self.config, self.hyper).result()
            if self.store is not None:
                self.store.save(new)
            self.holder.swap(new)
            self.completed += 1
            outcome = {"event": "retrain", "status": "ok", "version": new.version,
                       "retired_trees": new.training_stats.get("retired_trees", 0)}
        except Exception as exc:  # the serving model must survive any retrain failure
            self.failed += 1
            log.error("retrain failed, keeping model v%d: %s", self.holder.version, exc)
            outcome = {"event": "retrain", "status": "failed", "error": str(exc), "version": self.holder.version}
        outcome.update({"query_id": event.query_id, "placement": placement,
                        "started": started, "seconds": time.time() - started})
        if self.audit is not None:
            self.audit.write(outcome)
