"""Synthetic trial generator for the four-level benchmark protocol.

Level 1 places single objects (7 categories x 3 objects x 5 positions per
gripper); levels 2-4 run clutter scenes (3 clusters/groups x 5 repetitions)
with 7/14/14 objects per scene, reduced to 5/10/10 for the suction gripper,
whose two porous/deformable categories are excluded from clutter levels.
Outcomes are sampled from a logit mean over the 12-column design with known
coefficients, so fits on generated logs have a recoverable ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..errors import DomainError
from ..inference import DESIGN_COLUMNS, design_row, _sigmoid
from ..scene import ClutterState
from ..scoring import (FailureMode, GripperType, HoldTimeline, ObjectCategory,
                       TrialOutcome, TrialRecord)
from .io import SCHEMA_VERSION, TrialLog

OBJECTS_PER_CATEGORY = 3
SUCTION_EXCLUDED = (ObjectCategory.PLASTIC_BAG, ObjectCategory.MESH_BAG)

_GRIPPER_INDEX = {g: i for i, g in enumerate(GripperType)}
_CATEGORY_INDEX = {c: i for i, c in enumerate(ObjectCategory)}


@dataclass(frozen=True)
class ProtocolSpec:
    """Scene structure for one experiment level."""

    level: int
    repetitions: int = 5
    n_scenes: int = 3   # clusters (level 2) or groups (levels 3-4)
    positions: int = 5  # single-object placements per object (level 1)

    def __post_init__(self):
        if not 1 <= self.level <= 4:
            raise DomainError(f"level must be 1..4, got {self.level}")

    def categories(self, gripper: GripperType) -> tuple[ObjectCategory, ...]:
        cats = tuple(ObjectCategory)
        if self.level >= 2 and gripper == GripperType.SUCTION:
            cats = tuple(c for c in cats if c not in SUCTION_EXCLUDED)
        return cats

    def objects_per_scene(self, gripper: GripperType) -> int:
        if self.level == 1:
            return 1
        per_category = 1 if self.level == 2 else 2
        return per_category * len(self.categories(gripper))

    def expected_trials(self, gripper: GripperType) -> int:
        if self.level == 1:
            return len(self.categories(gripper)) * OBJECTS_PER_CATEGORY * self.positions
        return self.objects_per_scene(gripper) * self.repetitions * self.n_scenes


@dataclass(frozen=True)
class CategoryLatent:
    """Per-category deformation latent: mean object score and geometry class."""

    q_o_mean: float
    q_o_sd: float
    geometry: str  # deformable | semi | rigid


def _default_latents() -> dict[ObjectCategory, CategoryLatent]:
    return {
        ObjectCategory.PLASTIC_BAG: CategoryLatent(0.80, 0.06, "deformable"),
        ObjectCategory.MESH_BAG: CategoryLatent(0.72, 0.06, "deformable"),
        ObjectCategory.LPB: CategoryLatent(0.55, 0.06, "semi"),
        ObjectCategory.PLASTIC_CONTAINER: CategoryLatent(0.45, 0.06, "semi"),
        ObjectCategory.PLASTIC_BOTTLE: CategoryLatent(0.32, 0.05, "semi"),
        ObjectCategory.PLASTIC_PLATE: CategoryLatent(0.18, 0.04, "rigid"),
        ObjectCategory.TIN_CAN: CategoryLatent(0.12, 0.04, "rigid"),
    }


@dataclass(frozen=True)
class GeneratorTruth:
    """Known coefficients and nuisance knobs behind the generated outcomes."""

    beta_sp: tuple[float, ...] = (-1.2, 1.6, 0.4, 1.8, 0.8, 1.4, -0.2, -0.1, -0.9, -0.6, -0.5, -2.4)
    beta_sb: tuple[float, ...] = (-0.8, 1.4, 0.3, 1.5, 0.6, 1.5, -0.1, 0.1, -0.7, -0.6, -0.6, -2.6)
    beta_sf: tuple[float, ...] = (-0.3, 0.9, 0.1, 1.0, 0.4, 1.1, -0.3, 0.1, -0.5, -0.4, -0.4, -1.6)
    category_latents: Mapping[ObjectCategory, CategoryLatent] = field(default_factory=_default_latents)
    p_no_pose: float = 0.05
    drop_share: float = 0.25        # dropped_transit share of unsuccessful executed grasps
    level4_eta_penalty: float = 0.6  # subtracted from the success/stability linear predictor
    level4_suction_op_boost: float = 2.0
    grasp_time_s: float = 2.0
    hold_window_s: float = 10.0
    cycle_time_base_s: float = 10.0
    cycle_time_spread_s: float = 20.0
    footprint_range: tuple[float, float] = (0.02, 0.05)

    def __post_init__(self):
        for name in ("beta_sp", "beta_sb", "beta_sf"):
            beta = tuple(float(b) for b in getattr(self, name))
            if len(beta) != len(DESIGN_COLUMNS) or not all(np.isfinite(beta)):
                raise DomainError(f"{name} must be {len(DESIGN_COLUMNS)} finite coefficients")
            object.__setattr__(self, name, beta)


def _object_q_o(seed: int, truth: GeneratorTruth,
                category: ObjectCategory, obj_index: int) -> float:
    latent = truth.category_latents[category]
    rng = np.random.default_rng(np.random.SeedSequence(
        [seed, 0xB0D1, _CATEGORY_INDEX[category], obj_index]))
    return float(np.clip(rng.normal(latent.q_o_mean, latent.q_o_sd), 0.0, 1.0))


def _draw_q_p(rng: np.random.Generator) -> float:
    return float(np.clip(rng.normal(0.7, 0.15), 0.05, 1.0))


def _mean(beta: Sequence[float], q_p: float, q_c: float, q_o: float,
          gripper: GripperType, eta_shift: float = 0.0) -> float:
    eta = float(design_row(q_p, q_c, q_o, gripper) @ np.asarray(beta)) + eta_shift
    return float(_sigmoid(np.array([eta]))[0])


def _failure_mode(rng: np.random.Generator, gripper: GripperType, level: int,
                  q_o: float, q_c: float, truth: GeneratorTruth) -> FailureMode:
    if gripper == GripperType.SUCTION:
        op = 2.0 * (truth.level4_suction_op_boost if level == 4 else 1.0)
        modes = [(FailureMode.OP, op), (FailureMode.WGP, 0.8 * q_o + 0.1),
                 (FailureMode.CLS, 0.15 * q_c)]
    else:
        modes = [(FailureMode.CL, 1.5 * (1.0 - q_o) + 0.2),
                 (FailureMode.CLS, 1.2 * q_c + 0.1),
                 (FailureMode.SL, 0.6),
                 (FailureMode.WGP, 0.8 * q_o + 0.1)]
        if gripper == GripperType.FINRAY:
            modes.append((FailureMode.EXEC, 0.02))
    weights = np.array([w for _, w in modes])
    pick = rng.choice(len(modes), p=weights / weights.sum())
    return modes[pick][0]


def _simulate_trial(rng: np.random.Generator, truth: GeneratorTruth, level: int,
                    gripper: GripperType, category: ObjectCategory, q_o: float,
                    q_c: float, force_fail_op: bool) -> dict:
    """Sample (q_p, outcome, failure, timeline, cycle time) for one attempt."""
    eta_shift = -truth.level4_eta_penalty if level == 4 else 0.0
    if rng.uniform() < truth.p_no_pose:
        return {"q_p": 0.0, "outcome": TrialOutcome.FAIL, "failure": FailureMode.WGP,
                "timeline": None, "cycle_time_s": None}
    q_p = _draw_q_p(rng)
    if force_fail_op:
        return {"q_p": q_p, "outcome": TrialOutcome.FAIL, "failure": FailureMode.OP,
                "timeline": None, "cycle_time_s": None}
    p_success = _mean(truth.beta_sp, q_p, q_c, q_o, gripper, eta_shift)
    u = rng.uniform()
    t1 = truth.grasp_time_s
    t3 = t1 + truth.hold_window_s
    if u < p_success:
        outcome = TrialOutcome.SUCCESS
        mu_sb = _mean(truth.beta_sb, q_p, q_c, q_o, gripper, eta_shift)
        if rng.uniform() < mu_sb:
            held = 1.0
            failure = FailureMode.NONE
        else:
            held = float(rng.uniform(0.3, 0.95))
            failure = FailureMode.NONE
        timeline = HoldTimeline(t1, t1 + held * (t3 - t1), t3)
    elif rng.uniform() < truth.drop_share:
        outcome = TrialOutcome.DROPPED_TRANSIT
        failure = FailureMode.OP if gripper == GripperType.SUCTION else FailureMode.SL
        held = float(rng.uniform(0.0, 0.25))
        timeline = HoldTimeline(t1, t1 + held * (t3 - t1), t3)
    else:
        outcome = TrialOutcome.FAIL
        failure = _failure_mode(rng, gripper, level, q_o, q_c, truth)
        timeline = None
    cycle = None
    if outcome != TrialOutcome.FAIL:
        mu_sf = _mean(truth.beta_sf, q_p, q_c, q_o, gripper, eta_shift)
        e = float(rng.beta(max(mu_sf, 1e-3) * 8.0, max(1.0 - mu_sf, 1e-3) * 8.0))
        cycle = truth.cycle_time_base_s + (1.0 - e) * truth.cycle_time_spread_s
    return {"q_p": q_p, "outcome": outcome, "failure": failure,
            "timeline": timeline, "cycle_time_s": cycle}


def _scene_rng(seed: int, level: int, gripper: GripperType, *parts: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(
        [seed, level, _GRIPPER_INDEX[gripper], *parts]))


def _single_object_records(seed: int, truth: GeneratorTruth, protocol: ProtocolSpec,
                           gripper: GripperType) -> list[TrialRecord]:
    records = []
    for category in protocol.categories(gripper):
        for obj in range(1, OBJECTS_PER_CATEGORY + 1):
            q_o = _object_q_o(seed, truth, category, obj)
            for pos in range(1, protocol.positions + 1):
                rng = _scene_rng(seed, protocol.level, gripper,
                                 _CATEGORY_INDEX[category], obj, pos)
                force_op = gripper == GripperType.SUCTION and category in SUCTION_EXCLUDED
                t = _simulate_trial(rng, truth, protocol.level, gripper, category,
                                    q_o, 0.0, force_op)
                records.append(TrialRecord(
                    experiment_level=protocol.level,
                    scene_id=f"L{protocol.level}-{gripper.value}-{category.value}-o{obj}-p{pos}",
                    trial_index=0,
                    gripper=gripper, category=category,
                    object_id=f"{category.value}-{obj}",
                    q_o=q_o, q_p=t["q_p"], clutter=None,
                    outcome=t["outcome"], failure=t["failure"],
                    timeline=t["timeline"], cycle_time_s=t["cycle_time_s"]))
    return records


def _scene_objects(protocol: ProtocolSpec, gripper: GripperType,
                   scene: int) -> list[tuple[ObjectCategory, int]]:
    """Deterministic object roster for cluster/group `scene` (1-based)."""
    cats = protocol.categories(gripper)
    if protocol.level == 2:
        return [(c, scene) for c in cats]
    pairings = {1: (1, 2), 2: (2, 3), 3: (1, 3)}
    a, b = pairings[scene]
    return [(c, o) for c in cats for o in (a, b)]


def _clutter_records(seed: int, truth: GeneratorTruth, protocol: ProtocolSpec,
                     gripper: GripperType) -> list[TrialRecord]:
    records = []
    for scene in range(1, protocol.n_scenes + 1):
        roster = _scene_objects(protocol, gripper, scene)
        for rep in range(1, protocol.repetitions + 1):
            rng = _scene_rng(seed, protocol.level, gripper, scene, rep)
            order = rng.permutation(len(roster))
            footprints = rng.uniform(*truth.footprint_range, size=len(roster))
            o_initial = float(min(np.sum(footprints), 0.95))
            scale = o_initial / float(np.sum(footprints))
            footprint_shares = [float(f) * scale for f in footprints]
            n_initial = len(roster)
            n_before = n_initial
            o_before = o_initial
            scene_id = f"L{protocol.level}-{gripper.value}-s{scene}-r{rep}"
            for trial_index, pick in enumerate(order):
                category, obj = roster[pick]
                q_o = _object_q_o(seed, truth, category, obj)
                clutter = ClutterState(n_initial, n_before, o_initial, o_before)
                q_c = (n_before / n_initial) * (o_before / o_initial)
                t = _simulate_trial(rng, truth, protocol.level, gripper, category,
                                    q_o, q_c, force_fail_op=False)
                records.append(TrialRecord(
                    experiment_level=protocol.level,
                    scene_id=scene_id, trial_index=trial_index,
                    gripper=gripper, category=category,
                    object_id=f"{category.value}-{obj}",
                    q_o=q_o, q_p=t["q_p"], clutter=clutter,
                    outcome=t["outcome"], failure=t["failure"],
                    timeline=t["timeline"], cycle_time_s=t["cycle_time_s"]))
                if t["outcome"] != TrialOutcome.FAIL:
                    # Grasped objects leave the scene.
                    n_before -= 1 if n_before > 1 else 0
                    o_before = float(max(o_before - footprint_shares[pick], 0.0))
    return records


def simulate(protocol: ProtocolSpec, truth: GeneratorTruth, seed: int,
             grippers: Sequence[GripperType] = tuple(GripperType)) -> TrialLog:
    """Generate a deterministic trial log for one level across the grippers."""
    if seed < 0:
        raise DomainError("seed must be non-negative")
    records = []
    for gripper in grippers:
        if protocol.level == 1:
            records.extend(_single_object_records(seed, truth, protocol, gripper))
        else:
            records.extend(_clutter_records(seed, truth, protocol, gripper))
    header = {"schema_version": SCHEMA_VERSION, "generator_seed": seed,
              "level": protocol.level, "grippers": [g.value for g in grippers]}
    return TrialLog(header, tuple(records))
