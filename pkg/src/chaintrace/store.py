"""Append-only, time-indexed, file-backed event store.

Directory layout: ``NNNNNN.seg`` files in canonical event format (one
JSON record per line) plus ``index.json`` describing every segment.
Single writer, any number of readers; a reader sees everything flushed
before its query began.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, asdict
from typing import Iterable, Iterator

from .errors import IoFailure, OutOfOrder
from .events import LogEvent, decode_event, encode_event

DEFAULT_SEGMENT_EVENTS = 1 << 20

_INDEX_FILE = "index.json"


@dataclass
class StoreSegment:
    path: str
    min_ts: int
    max_ts: int
    min_id: int
    max_id: int
    count: int
    sealed: bool


class EventStore:
    """Segmented append-only store with (min_ts, max_ts) segment index."""

    def __init__(self, root: str, segment_events: int = DEFAULT_SEGMENT_EVENTS):
        self.root = root
        self.segment_events = segment_events
        self.segments: list[StoreSegment] = []
        self._active: StoreSegment | None = None
        self._fh = None
        try:
            os.makedirs(root, exist_ok=True)
            self._load_index()
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    # --- index handling ---

    def _index_path(self) -> str:
        return os.path.join(self.root, _INDEX_FILE)

    def _load_index(self) -> None:
        path = self._index_path()
        if not os.path.exists(path):
            return
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        self.segments = [StoreSegment(**seg) for seg in raw["segments"]]
        if self.segments and not self.segments[-1].sealed:
            self._active = self.segments[-1]

    def _write_index(self) -> None:
        payload = {"segments": [asdict(seg) for seg in self.segments]}
        tmp = self._index_path() + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self._index_path())

    # --- writer side ---

    @property
    def last_ts(self) -> int:
        return self.segments[-1].max_ts if self.segments else 0

    @property
    def last_id(self) -> int:
        return max((seg.max_id for seg in self.segments), default=0)

    def count(self) -> int:
        return sum(seg.count for seg in self.segments)

    def _open_segment(self) -> None:
        name = f"{len(self.segments):06d}.seg"
        seg = StoreSegment(
            path=name, min_ts=0, max_ts=0, min_id=0, max_id=0, count=0, sealed=False
        )
        self.segments.append(seg)
        self._active = seg
        if self._fh is not None:
            self._fh.close()
        self._fh = open(os.path.join(self.root, name), "a", encoding="utf-8")

    def append(self, events: Iterable[LogEvent]) -> int:
        """Append a (ts, id)-sorted batch; durable once this returns."""
        last_ts = self.last_ts
        last_id = self.last_id
        appended = 0
        try:
            for e in events:
                if e.ts < last_ts or e.id <= last_id:
                    raise OutOfOrder(
                        f"event id={e.id} ts={e.ts} regresses behind "
                        f"ts={last_ts} id={last_id}"
                    )
                if self._active is None or self._active.count >= self.segment_events:
                    if self._active is not None:
                        self._seal_active()
                    self._open_segment()
                elif self._fh is None:
                    self._reopen_active()
                self._fh.write(encode_event(e))
                self._fh.write("\n")
                seg = self._active
                if seg.count == 0:
                    seg.min_ts = e.ts
                    seg.min_id = e.id
                seg.max_ts = e.ts
                seg.max_id = e.id
                seg.count += 1
                last_ts, last_id = e.ts, e.id
                appended += 1
            if appended:
                self._fh.flush()
                os.fsync(self._fh.fileno())
                self._write_index()
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        return appended

    def _reopen_active(self) -> None:
        self._fh = open(
            os.path.join(self.root, self._active.path), "a", encoding="utf-8"
        )

    def _seal_active(self) -> None:
        self._active.sealed = True
        self._active = None
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def close(self) -> None:
        if self._fh is not None:
            self._fh.flush()
            os.fsync(self._fh.fileno())
            self._fh.close()
            self._fh = None
        self._write_index()

    # --- reader side ---

    def query(
        self,
        t0: int,
        t1: int,
        event_types: set[str] | None = None,
        source_hosts: set[str] | None = None,
        actors: set[str] | None = None,
    ) -> Iterator[LogEvent]:
        """Stream stored events with t0 <= ts < t1 passing every filter."""
        if t0 >= t1:
            raise ValueError(f"require t0 < t1, got [{t0}, {t1})")
        for seg in self.segments:
            if seg.count == 0 or seg.max_ts < t0 or seg.min_ts >= t1:
                continue
            try:
                fh = open(os.path.join(self.root, seg.path), "r", encoding="utf-8")
            except OSError as exc:
                raise IoFailure(str(exc)) from exc
            with fh:
                for n, line in enumerate(fh):
                    if n >= seg.count:
                        break  # rows flushed after this query began
                    e = decode_event(line)
                    if e.ts < t0:
                        continue
                    if e.ts >= t1:
                        return
                    if event_types is not None and e.event_type not in event_types:
                        continue
                    if source_hosts is not None and e.source_host not in source_hosts:
                        continue
                    if actors is not None and e.actor not in actors:
                        continue
                    yield e

    def query_all(self, **filters) -> Iterator[LogEvent]:
        """Full-range query convenience wrapper."""
        if self.count() == 0:
            return iter(())
        return self.query(1, self.last_ts + 1, **filters)
