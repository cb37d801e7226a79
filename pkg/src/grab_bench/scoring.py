"""Per-trial performance metrics and category/gripper aggregation.

Success is {0, 0.5, 1}; stability is the held fraction of the transport
window; efficiency is a min-max normalized cycle time within each
(experiment level, gripper) group.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

from .errors import CoverageError, DomainError
from .geometry import ExecutablePose
from .scene import ClutterState, clutter_score


class GripperType(str, enum.Enum):
    RIGID = "rigid"
    FINRAY = "finray"
    SUCTION = "suction"


class ObjectCategory(str, enum.Enum):
    PLASTIC_BAG = "plastic_bag"
    PLASTIC_CONTAINER = "plastic_container"
    PLASTIC_PLATE = "plastic_plate"
    PLASTIC_BOTTLE = "plastic_bottle"
    LPB = "lpb"
    MESH_BAG = "mesh_bag"
    TIN_CAN = "tin_can"


class TrialOutcome(str, enum.Enum):
    SUCCESS = "success"
    DROPPED_TRANSIT = "dropped_transit"
    FAIL = "fail"


class FailureMode(str, enum.Enum):
    CL = "CL"      # collision with base or target object
    CLS = "CLS"    # collision with surrounding objects
    SL = "SL"      # slippage
    OP = "OP"      # object-property failure (suction seal loss)
    WGP = "WGP"    # wrong grasp pose (perception)
    EXEC = "EXEC"  # execution/control failure
    NONE = "none"


PHYSICAL_MODES = (FailureMode.CL, FailureMode.CLS, FailureMode.SL, FailureMode.OP)
PERCEPTION_MODES = (FailureMode.WGP,)
EXECUTION_MODES = (FailureMode.EXEC,)


@dataclass(frozen=True)
class HoldTimeline:
    """Grasp time t1, drop time t2, end time t3 (seconds)."""

    t1: float
    t2: float
    t3: float

    def __post_init__(self):
        if not self.t1 <= self.t2 <= self.t3:
            raise DomainError(f"need t1 <= t2 <= t3, got {self.t1}, {self.t2}, {self.t3}")
        if not self.t3 > self.t1:
            raise DomainError("degenerate hold window: t3 must exceed t1")


@dataclass(frozen=True)
class ForceSeries:
    """Time-ordered (time s, force/pressure) samples."""

    samples: tuple[tuple[float, float], ...]

    def __post_init__(self):
        samples = tuple((float(t), float(v)) for t, v in self.samples)
        if not samples:
            raise DomainError("force series is empty")
        times = [t for t, _ in samples]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise DomainError("sample times must be strictly increasing")
        object.__setattr__(self, "samples", samples)


@dataclass(frozen=True)
class TrialRecord:
    """One grasp attempt: graspability inputs, outcome, timings, failure mode."""

    experiment_level: int
    scene_id: str
    trial_index: int
    gripper: GripperType
    category: ObjectCategory
    object_id: str
    q_o: float
    q_p: float
    clutter: ClutterState | None
    outcome: TrialOutcome
    failure: FailureMode
    timeline: HoldTimeline | None
    cycle_time_s: float | None
    extra: dict | None = None

    def __post_init__(self):
        if not 1 <= self.experiment_level <= 4:
            raise DomainError(f"experiment_level must be 1..4, got {self.experiment_level}")
        for name in ("q_o", "q_p"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must be in [0, 1], got {v}")
        failed = self.outcome == TrialOutcome.FAIL
        if failed and self.cycle_time_s is not None:
            raise DomainError("failed trials must not carry a cycle time")
        if not failed and self.cycle_time_s is None:
            raise DomainError("non-failed trials must carry a cycle time")
        if failed and self.timeline is not None:
            raise DomainError("failed trials must not carry a hold timeline")
        if not failed and self.timeline is None:
            raise DomainError("non-failed trials must carry a hold timeline")
        if (self.failure == FailureMode.NONE) != (self.outcome == TrialOutcome.SUCCESS):
            raise DomainError("failure mode must be 'none' exactly for successful trials")

    @property
    def q_c(self) -> float:
        """Clutter score; 0 for single-object scenes (no clutter state)."""
        if self.clutter is None:
            return 0.0
        return clutter_score(self.clutter)


@dataclass(frozen=True)
class ScoredTrial:
    """Trial record joined with its computed performance scores."""

    record: TrialRecord
    s_p: float
    s_b: float
    s_f: float
    q_c: float


@dataclass(frozen=True)
class ProfileAggregate:
    """Mean scores for one (level, category, gripper) cell."""

    experiment_level: int
    category: ObjectCategory
    gripper: GripperType
    mean_sp: float
    mean_sb: float
    mean_sf: float
    n_trials: int


def grasp_score(filtered: Sequence[ExecutablePose]) -> float:
    """Quality of the top-ranked executable pose; 0 when none survived filtering."""
    if not filtered:
        return 0.0
    return filtered[0].quality


def success_score(outcome: TrialOutcome) -> float:
    if outcome == TrialOutcome.SUCCESS:
        return 1.0
    if outcome == TrialOutcome.DROPPED_TRANSIT:
        return 0.5
    return 0.0


def detect_drop(series: ForceSeries, zero_threshold: float | None,
                t1: float, t3: float) -> float:
    """Earliest time in [t1, t3] where force falls to ~zero and stays there.

    A momentary dip that recovers is not a drop; if the force never collapses,
    the drop time is t3. The default threshold is 2% of the window's peak.
    """
    if t3 <= t1:
        raise DomainError("need t3 > t1")
    times = [t for t, _ in series.samples]
    if times[0] > t1 or times[-1] < t3:
        raise CoverageError(f"series [{times[0]}, {times[-1]}] does not cover [{t1}, {t3}]")
    window = [(t, v) for t, v in series.samples if t1 <= t <= t3]
    if zero_threshold is None:
        zero_threshold = 0.02 * max(v for _, v in window)
    drop_time = None
    for t, v in reversed(window):
        if v <= zero_threshold:
            drop_time = t
        else:
            break
    return t3 if drop_time is None else drop_time


def stability_score(tl: HoldTimeline) -> float:
    """Held fraction of the hold window; 1 when held to the end."""
    if tl.t2 == tl.t3:
        return 1.0
    return (tl.t2 - tl.t1) / (tl.t3 - tl.t1)


def efficiency_score(t_c: float, t_min: float, t_max: float) -> float:
    """Min-max normalized inverse cycle time; degenerate pools score 1."""
    if not t_min <= t_c <= t_max:
        raise DomainError(f"cycle time {t_c} outside pool [{t_min}, {t_max}]")
    if t_max == t_min:
        return 1.0
    return 1.0 - (t_c - t_min) / (t_max - t_min)


def normalize_efficiency(records: Sequence[TrialRecord]) -> list[float]:
    """Efficiency score per record, normalized within (level, gripper) groups.

    The min/max pool contains the cycle times of successful trials only;
    dropped-in-transit and failed trials score 0.
    """
    pools: dict[tuple[int, GripperType], list[float]] = {}
    for r in records:
        if r.outcome == TrialOutcome.SUCCESS:
            pools.setdefault((r.experiment_level, r.gripper), []).append(r.cycle_time_s)
    out = []
    for r in records:
        if r.outcome != TrialOutcome.SUCCESS:
            out.append(0.0)
            continue
        pool = pools[(r.experiment_level, r.gripper)]
        out.append(efficiency_score(r.cycle_time_s, min(pool), max(pool)))
    return out


def score_trials(records: Sequence[TrialRecord]) -> list[ScoredTrial]:
    """Compute (s_p, s_b, s_f, q_c) for every record."""
    s_f = normalize_efficiency(records)
    scored = []
    for r, sf in zip(records, s_f):
        sp = success_score(r.outcome)
        sb = stability_score(r.timeline) if r.timeline is not None else 0.0
        scored.append(ScoredTrial(r, sp, sb, sf, r.q_c))
    return scored


def aggregate_profiles(records: Sequence[TrialRecord]) -> list[ProfileAggregate]:
    """Mean (S_P, S_B, S_F) per (level, category, gripper) cell.

    Failed trials contribute 0 to stability and efficiency. Records are folded
    in (scene_id, trial_index) order so the floating-point means are
    reproducible; empty cells are omitted.
    """
    scored = score_trials(records)
    groups: dict[tuple[int, ObjectCategory, GripperType], list[ScoredTrial]] = {}
    for st in scored:
        key = (st.record.experiment_level, st.record.category, st.record.gripper)
        groups.setdefault(key, []).append(st)
    out = []
    for key in sorted(groups, key=lambda k: (k[0], k[1].value, k[2].value)):
        members = sorted(groups[key], key=lambda st: (st.record.scene_id, st.record.trial_index))
        n = len(members)
        out.append(ProfileAggregate(
            key[0], key[1], key[2],
            sum(st.s_p for st in members) / n,
            sum(st.s_b for st in members) / n,
            sum(st.s_f for st in members) / n,
            n,
        ))
    return out
