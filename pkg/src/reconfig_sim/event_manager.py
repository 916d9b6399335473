"""
event_manager.py

What this file does:
  - Defines ReconfigurationEvent (degradation / improvement / spy)
  - Prices an event by its importance to the user
  - Keeps the EventQueue: every event is pending, deferred or consumed

This file does NOT:
  - Detect events (context_engine)
  - Search for a new configuration (heuristic_search)

Order: priority desc, then earlier `at`, then lower id. Pending events sharing a
culprit are merged into the one with the largest |mark_delta|; the merged ones
count as consumed. A deferred event waits for the next context change (rearm).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

from .qos_model import UserProfile

DEGRADATION = "degradation"
IMPROVEMENT = "improvement"
SPY = "spy"
EVENT_KINDS = (DEGRADATION, IMPROVEMENT, SPY)

PENDING = "pending"
DEFERRED = "deferred"
CONSUMED = "consumed"


@dataclass(frozen=True)
class ReconfigurationEvent:
    id: int
    at: int
    kind: str
    culprit: str
    affected_characteristics: Tuple[str, ...]
    mark_delta: float
    priority: float = 0.0
    point: str = ""

    def to_dict(self) -> Dict[str, object]:
        return {
            "id": self.id,
            "at": self.at,
            "kind": self.kind,
            "culprit": self.culprit,
            "affected": list(self.affected_characteristics),
            "mark_delta": self.mark_delta,
            "priority": self.priority,
            "point": self.point,
        }


def priority_of(ev: ReconfigurationEvent, user: UserProfile) -> float:
    return sum(user.weight_of(c) * abs(ev.mark_delta) for c in ev.affected_characteristics)


def _order_key(ev: ReconfigurationEvent) -> Tuple[float, int, int]:
    return (-ev.priority, ev.at, ev.id)


class EventQueue:
    def __init__(self) -> None:
        self._events: Dict[int, ReconfigurationEvent] = {}
        self._status: Dict[int, str] = {}
        self.merged_into: Dict[int, int] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._events)

    def enqueue(self, ev: ReconfigurationEvent, user: Optional[UserProfile] = None) -> ReconfigurationEvent:
        """Price (when a user is given), store and coalesce; returns the surviving event."""
        if user is not None:
            ev = replace(ev, priority=priority_of(ev, user))
        with self._lock:
            if ev.id in self._events:
                raise ValueError(f"event id {ev.id} already enqueued")
            self._events[ev.id] = ev
            self._status[ev.id] = PENDING
            survivor = self._coalesce(ev.culprit)
        return self._events[survivor]

    def _coalesce(self, culprit: str) -> int:
        same = sorted(i for i, s in self._status.items() if s == PENDING and self._events[i].culprit == culprit)
        keep = same[0]
        for i in same[1:]:
            if abs(self._events[i].mark_delta) > abs(self._events[keep].mark_delta):
                keep = i
        for i in same:
            if i != keep:
                self._status[i] = CONSUMED
                self.merged_into[i] = keep
        return keep

    def select_next(self) -> Optional[ReconfigurationEvent]:
        pending = [self._events[i] for i, s in self._status.items() if s == PENDING]
        if not pending:
            return None
        return min(pending, key=_order_key)

    def _move(self, event_id: int, status: str) -> None:
        with self._lock:
            current = self._status.get(event_id)
            if current != PENDING:
                raise ValueError(f"event {event_id} is {current or 'unknown'}, not pending")
            self._status[event_id] = status

    def consume(self, event_id: int) -> None:
        self._move(event_id, CONSUMED)

    def defer(self, event_id: int) -> None:
        self._move(event_id, DEFERRED)

    def rearm(self) -> List[int]:
        with self._lock:
            ids = sorted(i for i, s in self._status.items() if s == DEFERRED)
            for i in ids:
                self._status[i] = PENDING
            for culprit in sorted({self._events[i].culprit for i in ids}):
                self._coalesce(culprit)
        return ids

    def status(self, event_id: int) -> str:
        return self._status[event_id]

    def get(self, event_id: int) -> ReconfigurationEvent:
        return self._events[event_id]

    def ids_with(self, status: str) -> List[int]:
        return sorted(i for i, s in self._status.items() if s == status)

    def counts(self) -> Dict[str, int]:
        out = {PENDING: 0, DEFERRED: 0, CONSUMED: 0}
        for s in self._status.values():
            out[s] += 1
        out["enqueued"] = len(self._events)
        return out
