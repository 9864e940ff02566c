"""Persistent preference store: append-only operation log with snapshot compaction.

Records are keyed by (user_id, domain, entity_type, entity_value, condition);
re-setting an existing key overwrites polarity and timestamp.  Timestamps are
a logical monotonic counter so replays are deterministic.
"""
from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional

POLARITIES = ("like", "dislike", "conditional")


class UnknownEntityTypeError(ValueError):
    pass


@dataclass(frozen=True)
class PreferenceRecord:
    user_id: str
    domain: str
    entity_type: str
    entity_value: str
    polarity: str
    condition: Optional[str] = None
    updated_at: int = 0

    def __post_init__(self):
        if self.polarity not in POLARITIES:
            raise ValueError(f"unknown polarity {self.polarity!r}")

    @property
    def key(self) -> tuple:
        return (self.user_id, self.domain, self.entity_type, self.entity_value, self.condition)

    def to_json(self) -> dict:
        d = {
            "user_id": self.user_id,
            "domain": self.domain,
            "entity_type": self.entity_type,
            "entity_value": self.entity_value,
            "polarity": self.polarity,
            "updated_at": self.updated_at,
        }
        if self.condition is not None:
            d["condition"] = self.condition
        return d

    @classmethod
    def from_json(cls, d: dict) -> "PreferenceRecord":
        return cls(
            user_id=d["user_id"],
            domain=d["domain"],
            entity_type=d["entity_type"],
            entity_value=d["entity_value"],
            polarity=d["polarity"],
            condition=d.get("condition"),
            updated_at=d.get("updated_at", 0),
        )


@dataclass(frozen=True)
class KbDelta:
    """One operation inside an update_kb batch: upsert | delete | delete_all."""

    op: str
    record: Optional[PreferenceRecord] = None

    def __post_init__(self):
        if self.op not in ("upsert", "delete", "delete_all"):
            raise ValueError(f"unknown delta op {self.op!r}")
        if self.op in ("upsert", "delete") and self.record is None:
            raise ValueError(f"{self.op} delta needs a record")

    def to_json(self) -> dict:
        d: dict = {"op": self.op}
        if self.record is not None:
            d["record"] = self.record.to_json()
        return d

    @classmethod
    def from_json(cls, d: dict) -> "KbDelta":
        rec = PreferenceRecord.from_json(d["record"]) if "record" in d else None
        return cls(op=d["op"], record=rec)


class PreferenceKB:
    """Durable per-user preference store.

    Layout under `path` (a directory): snapshot.json + log.jsonl.  Every
    update_kb call appends one log line (the whole batch, so replay is
    atomic per call) and fsyncs before returning.
    """

    COMPACT_EVERY = 1000

    def __init__(self, path: str | Path, entity_types: Optional[Iterable[str]] = None):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)
        self._snapshot_path = self.path / "snapshot.json"
        self._log_path = self.path / "log.jsonl"
        self._lock = threading.RLock()
        self._records: dict[tuple, PreferenceRecord] = {}
        self._clock = 0
        self._log_lines = 0
        self._entity_types = set(entity_types) if entity_types is not None else None
        self._load()

    def _load(self) -> None:
        if self._snapshot_path.exists():
            snap = json.loads(self._snapshot_path.read_text(encoding="utf-8"))
            self._clock = snap.get("clock", 0)
            for rd in snap.get("records", []):
                rec = PreferenceRecord.from_json(rd)
                self._records[rec.key] = rec
        if self._log_path.exists():
            with open(self._log_path, "r", encoding="utf-8") as f:
                for line in f:
                    line = line.strip()
                    if not line:
                        continue
                    self._log_lines += 1
                    entry = json.loads(line)
                    deltas = [KbDelta.from_json(d) for d in entry["deltas"]]
                    self._apply(entry["user_id"], deltas, persist_clock=entry["clock"])

    def _validate(self, deltas: list[KbDelta]) -> None:
        if self._entity_types is None:
            return
        for d in deltas:
            if d.record is not None and d.record.entity_type not in self._entity_types:
                raise UnknownEntityTypeError(f"unknown entity type {d.record.entity_type!r}")

    def _apply(self, user_id: str, deltas: list[KbDelta], persist_clock: Optional[int] = None) -> int:
        applied = 0
        for d in deltas:
            if d.op == "delete_all":
                doomed = [k for k in self._records if k[0] == user_id]
                for k in doomed:
                    del self._records[k]
                applied += len(doomed)
            elif d.op == "delete":
                key = replace(d.record, user_id=user_id).key  # type: ignore[arg-type]
                if key in self._records:
                    del self._records[key]
                    applied += 1
            else:
                self._clock += 1
                rec = replace(d.record, user_id=user_id, updated_at=self._clock)  # type: ignore[arg-type]
                self._records[rec.key] = rec
                applied += 1
        if persist_clock is not None:
            self._clock = max(self._clock, persist_clock)
        return applied

    def update_kb(self, user_id: str, deltas: list[KbDelta]) -> int:
        """Apply a batch of deltas atomically and durably; returns applied count."""
        with self._lock:
            self._validate(deltas)
            # simulate the clock advance the batch will cause so the log entry
            # carries the post-state clock for deterministic replay
            upserts = sum(1 for d in deltas if d.op == "upsert")
            entry = {
                "user_id": user_id,
                "clock": self._clock + upserts,
                "deltas": [d.to_json() for d in deltas],
            }
            with open(self._log_path, "a", encoding="utf-8") as f:
                f.write(json.dumps(entry, sort_keys=True) + "\n")
                f.flush()
                os.fsync(f.fileno())
            self._log_lines += 1
            applied = self._apply(user_id, deltas)
            if self._log_lines >= self.COMPACT_EVERY:
                self._compact_locked()
            return applied

    def retrieve_kb(
        self,
        user_id: str,
        domain: Optional[str] = None,
        entity_type: Optional[str] = None,
    ) -> list[PreferenceRecord]:
        """Records for a user sorted by (domain, entity_type, updated_at); [] if unknown."""
        with self._lock:
            out = [r for r in self._records.values() if r.user_id == user_id]
            if domain is not None:
                out = [r for r in out if r.domain == domain]
            if entity_type is not None:
                out = [r for r in out if r.entity_type == entity_type]
            return sorted(out, key=lambda r: (r.domain, r.entity_type, r.updated_at))

    def all_users(self) -> list[str]:
        with self._lock:
            return sorted({k[0] for k in self._records})

    def compact(self) -> None:
        with self._lock:
            self._compact_locked()

    def _compact_locked(self) -> None:
        snap = {
            "clock": self._clock,
            "records": [r.to_json() for r in sorted(self._records.values(), key=lambda r: r.key)],
        }
        tmp = self._snapshot_path.with_suffix(".json.tmp")
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(snap, f, sort_keys=True)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, self._snapshot_path)
        with open(self._log_path, "w", encoding="utf-8") as f:
            f.flush()
            os.fsync(f.fileno())
        self._log_lines = 0


def upsert(user_id: str, domain: str, entity_type: str, value: str,
           polarity: str = "like", condition: Optional[str] = None) -> KbDelta:
    return KbDelta("upsert", PreferenceRecord(user_id, domain, entity_type, value, polarity, condition))


def delete(user_id: str, domain: str, entity_type: str, value: str,
           condition: Optional[str] = None) -> KbDelta:
    return KbDelta("delete", PreferenceRecord(user_id, domain, entity_type, value, "like", condition))


def delete_all() -> KbDelta:
    return KbDelta("delete_all")
