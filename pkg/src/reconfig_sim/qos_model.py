"""
qos_model.py

What this file does:
  - Marks a characteristic value against the user's wish (piecewise linear, clamped)
  - Aggregates marks into intrinsic / contextual criterion marks (weighted mean)
  - Applies the min rule per entity and walks Sub-Group -> Group -> application
  - Decides service proximity between two criterion pairs

This file does NOT:
  - Know how characteristic values are produced (see context_engine)
  - Hold any state; every function here is pure

Conventions:
  - An entity with no characteristic of one kind scores 1.0 on that criterion.
  - The min rule is applied per level for reporting; levels average the criterion
    marks per kind, never the min values.
  - Mark equality uses an absolute tolerance of MARK_TOL.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import AllWeightsZero, UnknownCharacteristic

if TYPE_CHECKING:
    from .app_model import Application

MARK_TOL = 1e-9

INTRINSIC = "intrinsic"
CONTEXTUAL = "contextual"
KINDS = (INTRINSIC, CONTEXTUAL)

# how a conduct treats the value while it crosses links
FLOW_ROLES = ("bitrate", "delay", "other")


@dataclass(frozen=True)
class Characteristic:
    id: str
    kind: str
    unit: str = ""
    description: str = ""
    higher_is_better: bool = True
    flow_role: str = "other"

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"characteristic '{self.id}': kind must be one of {KINDS}, got '{self.kind}'")
        if self.flow_role not in FLOW_ROLES:
            raise ValueError(f"characteristic '{self.id}': flow_role must be one of {FLOW_ROLES}")


@dataclass(frozen=True)
class WishFunction:
    characteristic: str
    breakpoints: Tuple[Tuple[float, float], ...]
    weight: float = 1.0

    def __post_init__(self) -> None:
        bps = tuple((float(v), float(m)) for v, m in self.breakpoints)
        object.__setattr__(self, "breakpoints", bps)
        if len(bps) < 2:
            raise ValueError(f"wish '{self.characteristic}': at least 2 breakpoints required")
        for (v0, _), (v1, _) in zip(bps, bps[1:]):
            if not v1 > v0:
                raise ValueError(f"wish '{self.characteristic}': breakpoints must be strictly ascending")
        for _, m in bps:
            if not 0.0 <= m <= 1.0:
                raise ValueError(f"wish '{self.characteristic}': mark {m} outside [0,1]")
        if not self.weight >= 0:
            raise ValueError(f"wish '{self.characteristic}': weight must be >= 0")


@dataclass(frozen=True)
class UserProfile:
    wishes: Mapping[str, WishFunction]
    subgroup_weights: Mapping[str, float] = field(default_factory=dict)
    group_weights: Mapping[str, float] = field(default_factory=dict)

    def wish(self, characteristic: str) -> Optional[WishFunction]:
        return self.wishes.get(characteristic)

    def weight_of(self, characteristic: str) -> float:
        w = self.wishes.get(characteristic)
        return w.weight if w is not None else 0.0

    # entities the user did not weigh count once
    def subgroup_weight(self, subgroup: str) -> float:
        return float(self.subgroup_weights.get(subgroup, 1.0))

    def group_weight(self, group: str) -> float:
        return float(self.group_weights.get(group, 1.0))


@dataclass(frozen=True)
class CriterionMarks:
    intrinsic: float = 1.0
    contextual: float = 1.0

    def __post_init__(self) -> None:
        for name in KINDS:
            v = getattr(self, name)
            if not (-MARK_TOL <= v <= 1.0 + MARK_TOL):
                raise ValueError(f"{name} mark {v} outside [0,1]")

    def get(self, kind: str) -> float:
        return self.intrinsic if kind == INTRINSIC else self.contextual

    def to_dict(self) -> Dict[str, float]:
        return {"intrinsic": self.intrinsic, "contextual": self.contextual}


@dataclass(frozen=True)
class QoSReport:
    application: CriterionMarks
    groups: Mapping[str, CriterionMarks]
    subgroups: Mapping[str, CriterionMarks]
    # measurement point -> characteristic -> mark
    point_marks: Mapping[str, Mapping[str, float]]
    overall: float
    timestamp: int = 0
    spy_marks: Mapping[str, float] = field(default_factory=dict)
    environment: Mapping[str, str] = field(default_factory=dict)
    config_id: str = ""
    flows: Any = None


def mark_characteristic(value: float, wish: WishFunction) -> float:
    xs = [v for v, _ in wish.breakpoints]
    ys = [m for _, m in wish.breakpoints]
    mark = float(np.interp(float(value), xs, ys))
    return min(1.0, max(0.0, mark))


def aggregate_criterion(marks: Sequence[Tuple[float, float]]) -> float:
    if not marks:
        return 1.0
    total = 0.0
    acc = 0.0
    for mark, weight in marks:
        if weight < 0:
            raise ValueError(f"negative weight {weight}")
        total += weight
        acc += mark * weight
    if total <= 0:
        raise AllWeightsZero("all weights are zero")
    lo = min(m for m, _ in marks)
    hi = max(m for m, _ in marks)
    return min(hi, max(lo, acc / total))


def entity_qos(cm: CriterionMarks) -> float:
    return min(cm.intrinsic, cm.contextual)


def service_proximity(
    a: CriterionMarks,
    b: CriterionMarks,
    eps_intrinsic: float = 0.05,
    eps_contextual: float = 0.05,
) -> bool:
    return (
        abs(a.intrinsic - b.intrinsic) <= eps_intrinsic + MARK_TOL
        and abs(a.contextual - b.contextual) <= eps_contextual + MARK_TOL
    )


def marks_close(a: float, b: float, tol: float = MARK_TOL) -> bool:
    return abs(a - b) <= tol


def _combine(parts: Iterable[Tuple[CriterionMarks, float]]) -> CriterionMarks:
    parts = list(parts)
    return CriterionMarks(
        intrinsic=aggregate_criterion([(cm.intrinsic, w) for cm, w in parts]),
        contextual=aggregate_criterion([(cm.contextual, w) for cm, w in parts]),
    )


def subgroup_criteria(
    app: "Application",
    subgroup_id: str,
    per_characteristic_marks: Mapping[Tuple[str, str], float],
    user: UserProfile,
) -> CriterionMarks:
    sg = app.subgroups[subgroup_id]
    split: Dict[str, list] = {INTRINSIC: [], CONTEXTUAL: []}
    for char_id in sg.characteristics:
        wish = user.wish(char_id)
        if wish is None:
            continue
        char = app.characteristics.get(char_id)
        if char is None:
            raise UnknownCharacteristic(char_id, f"sub-group '{subgroup_id}'")
        mark = per_characteristic_marks.get((subgroup_id, char_id))
        if mark is None:
            raise UnknownCharacteristic(char_id, f"sub-group '{subgroup_id}'")
        split[char.kind].append((mark, wish.weight))
    return CriterionMarks(
        intrinsic=aggregate_criterion(split[INTRINSIC]),
        contextual=aggregate_criterion(split[CONTEXTUAL]),
    )


def evaluate_hierarchy(
    app: "Application",
    per_characteristic_marks: Mapping[Tuple[str, str], float],
    user: UserProfile,
    *,
    timestamp: int = 0,
    point_marks: Optional[Mapping[str, Mapping[str, float]]] = None,
    spy_marks: Optional[Mapping[str, float]] = None,
    environment: Optional[Mapping[str, str]] = None,
    config_id: str = "",
    flows: Any = None,
) -> QoSReport:
    """
    Roll characteristic marks up the Group / Sub-Group tree.

    per_characteristic_marks is keyed by (sub-group id, characteristic id).
    Characteristics the user has no wish for are ignored.
    """
    subgroups: Dict[str, CriterionMarks] = {}
    for sg_id in sorted(app.subgroups):
        subgroups[sg_id] = subgroup_criteria(app, sg_id, per_characteristic_marks, user)

    groups: Dict[str, CriterionMarks] = {}
    for g_id in sorted(app.groups):
        g = app.groups[g_id]
        groups[g_id] = _combine((subgroups[s], user.subgroup_weight(s)) for s in g.subgroups)

    application = _combine((groups[g], user.group_weight(g)) for g in sorted(groups))
    return QoSReport(
        application=application,
        groups=groups,
        subgroups=subgroups,
        point_marks=dict(point_marks or {}),
        overall=entity_qos(application),
        timestamp=timestamp,
        spy_marks=dict(spy_marks or {}),
        environment=dict(environment or {}),
        config_id=config_id,
        flows=flows,
    )
