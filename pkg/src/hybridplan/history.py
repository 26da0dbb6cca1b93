"""Append-only NDJSON trace log of workload samples."""
from __future__ import annotations

import json
import os
import threading
from pathlib import Path
from typing import Iterator

from .domain import WorkloadSample
from .errors import StorageError


class TraceDataset:
    """Samples persisted one JSON object per line.

    Each append writes a single complete line with one ``write`` call and an
    fsync, so a reader never sees a torn record. Appends are serialized by an
    internal lock; readers may run concurrently with the writer.
    """

    def __init__(self, source_path):
        self.source_path = Path(source_path)
        self._lock = threading.Lock()

    def append(self, sample: WorkloadSample) -> int:
        line = json.dumps(sample.to_record(), sort_keys=True) + "\n"
        with self._lock:
            try:
                self.source_path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.source_path, "a", encoding="utf-8") as fh:
                    fh.write(line)
                    fh.flush()
                    os.fsync(fh.fileno())
            except OSError as exc:
                raise StorageError(f"cannot append to {self.source_path}: {exc}") from exc
        return len(line)

    def extend(self, samples) -> None:
        for s in samples:
            self.append(s)

    def __iter__(self) -> Iterator[WorkloadSample]:
        if not self.source_path.exists():
            return
        with open(self.source_path, encoding="utf-8") as fh:
            for line in fh:
                # A partially written trailing line has no newline yet.
                if not line.endswith("\n"):
                    break
                line = line.strip()
                if line:
                    yield WorkloadSample.from_record(json.loads(line))

    def read_all(self) -> list[WorkloadSample]:
        return list(self)

    def __len__(self) -> int:
        return sum(1 for _ in self)

    def latest_features_for(self, query_id: str, n: int) -> list[WorkloadSample]:
        """Up to ``n`` most recent samples of ``query_id``, newest first."""
        if n < 1:
            raise ValueError("n must be >= 1")
        matches = [s for s in self if s.query_id == query_id]
        return matches[::-1][:n]

    def latest(self, n: int) -> list[WorkloadSample]:
        return self.read_all()[::-1][:n]
