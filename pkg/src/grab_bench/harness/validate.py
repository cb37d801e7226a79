"""Trial-log validation: protocol counts, clutter monotonicity, exclusions.

Violations are returned as data, never raised; a fresh simulate() log must
validate clean.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..scoring import GripperType, TrialRecord
from .io import TrialLog
from .protocol import SUCTION_EXCLUDED, ProtocolSpec


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str


def validate(log: TrialLog, protocol: ProtocolSpec | None = None) -> list[Violation]:
    """Check a log against the protocol structure.

    Verifies per-(level, gripper) trial counts, non-increasing clutter within
    each scene, exact zero clutter on level-1 records, and the suction
    category exclusions in clutter levels.
    """
    violations: list[Violation] = []
    records = log.records

    by_group: dict[tuple[int, GripperType], list[TrialRecord]] = {}
    for r in records:
        by_group.setdefault((r.experiment_level, r.gripper), []).append(r)

    for (level, gripper), group in sorted(by_group.items(),
                                          key=lambda kv: (kv[0][0], kv[0][1].value)):
        spec = protocol if protocol is not None and protocol.level == level else ProtocolSpec(level)
        expected = spec.expected_trials(gripper)
        if len(group) != expected:
            violations.append(Violation(
                "trial_count",
                f"level {level} {gripper.value}: {len(group)} trials, expected {expected}"))
        if level == 1:
            for r in group:
                if r.q_c != 0.0:
                    violations.append(Violation(
                        "level1_clutter",
                        f"{r.scene_id}[{r.trial_index}]: level-1 record has clutter score {r.q_c}"))
        if level >= 2 and gripper == GripperType.SUCTION:
            for r in group:
                if r.category in SUCTION_EXCLUDED:
                    violations.append(Violation(
                        "suction_exclusion",
                        f"{r.scene_id}[{r.trial_index}]: {r.category.value} is excluded "
                        f"for suction at level {level}"))

    by_scene: dict[str, list[TrialRecord]] = {}
    for r in records:
        if r.clutter is not None:
            by_scene.setdefault(r.scene_id, []).append(r)
    for scene_id in sorted(by_scene):
        ordered = sorted(by_scene[scene_id], key=lambda r: r.trial_index)
        for prev, cur in zip(ordered, ordered[1:]):
            if cur.clutter.n_before > prev.clutter.n_before:
                violations.append(Violation(
                    "clutter_monotonicity",
                    f"{scene_id}: n_before rises {prev.clutter.n_before} -> "
                    f"{cur.clutter.n_before} at trial {cur.trial_index}"))
            if cur.clutter.o_before > prev.clutter.o_before:
                violations.append(Violation(
                    "clutter_monotonicity",
                    f"{scene_id}: o_before rises {prev.clutter.o_before} -> "
                    f"{cur.clutter.o_before} at trial {cur.trial_index}"))
            if cur.q_c > prev.q_c:
                violations.append(Violation(
                    "clutter_monotonicity",
                    f"{scene_id}: clutter score rises {prev.q_c} -> {cur.q_c} "
                    f"at trial {cur.trial_index}"))
    return violations
