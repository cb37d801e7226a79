"""Radar-profile comparison, failure breakdowns, box statistics, and report files.

All emitters produce deterministic bytes for identical inputs: fixed float
formatting (6 significant digits in CSV, 3 decimals in JSON), fixed ordering,
LF newlines.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError
from .inference import (FitResult, PdpCurve, format_odds_ratio_row,
                        odds_ratio_table, pdp_curves_csv)
from .scoring import (EXECUTION_MODES, PERCEPTION_MODES, PHYSICAL_MODES, FailureMode,
                      GripperType, ProfileAggregate, TrialRecord, score_trials)

RADAR_AXES = ("s_p", "s_b", "s_f")
GRIPPER_COLORS = {GripperType.RIGID: "#4472c4",
                  GripperType.FINRAY: "#e06fa4",
                  GripperType.SUCTION: "#70ad47"}
MAJOR_CATEGORY_OF = {m: "physical" for m in PHYSICAL_MODES}
MAJOR_CATEGORY_OF.update({m: "perception" for m in PERCEPTION_MODES})
MAJOR_CATEGORY_OF.update({m: "execution" for m in EXECUTION_MODES})

INFLUENCE_STRONG = 0.15
INFLUENCE_MODERATE = 0.05


@dataclass(frozen=True)
class RadarProfile:
    """Per-gripper mean (success, stability, efficiency) triple."""

    gripper: GripperType
    axes: tuple[float, float, float]

    def __post_init__(self):
        axes = tuple(float(a) for a in self.axes)
        if len(axes) != 3 or any(not 0.0 <= a <= 1.0 for a in axes):
            raise DomainError(f"axes must be three values in [0, 1], got {self.axes}")
        object.__setattr__(self, "axes", axes)


@dataclass(frozen=True)
class RadarPolygon:
    vertices: tuple[tuple[float, float], tuple[float, float], tuple[float, float]]
    area: float


@dataclass(frozen=True)
class GripperRanking:
    """Largest-area winner; `winner` is None when the top area is shared."""

    areas: tuple[tuple[GripperType, float], ...]
    winner: GripperType | None
    tied: tuple[GripperType, ...]


@dataclass(frozen=True)
class FailureBreakdown:
    """Failure-mode counts and major-category shares per gripper."""

    mode_counts: dict[GripperType, dict[FailureMode, int]]
    category_shares: dict[GripperType, dict[str, float]]


@dataclass(frozen=True)
class BoxStats:
    """Five-number summary with 1.5×IQR outliers; min/max are data extremes."""

    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    outliers: tuple[float, ...]


def radar_polygon(profile: RadarProfile) -> RadarPolygon:
    """Triangle vertices on three axes at 120° spacing plus the enclosed area.

    Display floors are a rendering concern only (see the SVG emitter); the
    area always comes from the raw axis values.
    """
    verts = []
    for i, value in enumerate(profile.axes):
        theta = math.radians(90.0 + 120.0 * i)
        verts.append((value * math.cos(theta), value * math.sin(theta)))
    (x1, y1), (x2, y2), (x3, y3) = verts
    area = abs(x1 * (y2 - y3) + x2 * (y3 - y1) + x3 * (y1 - y2)) / 2.0
    return RadarPolygon((verts[0], verts[1], verts[2]), area)


def best_gripper(profiles: Sequence[RadarProfile]) -> GripperRanking:
    """Gripper whose performance polygon encloses the largest area."""
    if not profiles:
        raise DomainError("no profiles to compare")
    areas = tuple((p.gripper, radar_polygon(p).area) for p in profiles)
    top = max(a for _, a in areas)
    tied = tuple(g for g, a in areas if a == top)
    return GripperRanking(areas, tied[0] if len(tied) == 1 else None, tied)


def failure_breakdown(records: Sequence[TrialRecord]) -> FailureBreakdown:
    """Per-gripper failure-mode counts and major-category shares."""
    counts: dict[GripperType, dict[FailureMode, int]] = {}
    for r in records:
        if r.failure == FailureMode.NONE:
            continue
        per = counts.setdefault(r.gripper, {})
        per[r.failure] = per.get(r.failure, 0) + 1
    shares: dict[GripperType, dict[str, float]] = {}
    for gripper, per in counts.items():
        total = sum(per.values())
        by_cat = {"physical": 0, "perception": 0, "execution": 0}
        for mode, c in per.items():
            by_cat[MAJOR_CATEGORY_OF[mode]] += c
        shares[gripper] = {cat: c / total for cat, c in by_cat.items()}
    return FailureBreakdown(counts, shares)


def box_stats(values: Sequence[float]) -> BoxStats:
    """Quartiles by linear interpolation (type 7); outliers beyond 1.5×IQR."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise DomainError("no values for box statistics")
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    outliers = tuple(float(x) for x in sorted(v[(v < lo_fence) | (v > hi_fence)]))
    return BoxStats(float(v.min()), float(q1), float(med), float(q3), float(v.max()), outliers)


def failure_box_stats(records: Sequence[TrialRecord]) -> list[tuple[FailureMode, GripperType, str, BoxStats]]:
    """Box statistics of each graspability parameter per (failure mode, gripper)."""
    scored = score_trials(records)
    groups: dict[tuple[FailureMode, GripperType, str], list[float]] = {}
    for st in scored:
        if st.record.failure == FailureMode.NONE:
            continue
        for param, value in (("q_o", st.record.q_o), ("q_p", st.record.q_p), ("q_c", st.q_c)):
            groups.setdefault((st.record.failure, st.record.gripper, param), []).append(value)
    out = []
    for key in sorted(groups, key=lambda k: (k[0].value, k[1].value, k[2])):
        out.append((key[0], key[1], key[2], box_stats(groups[key])))
    return out


def influence_annex(records: Sequence[TrialRecord],
                    strong: float = INFLUENCE_STRONG,
                    moderate: float = INFLUENCE_MODERATE) -> list[dict]:
    """Heuristic strong/moderate/weak labels per (gripper, failure mode, parameter).

    Thresholds the absolute gap between the parameter's median within a
    failure mode and its median over all other trials of that gripper. A
    reporting heuristic only; labeled as such in the summary output.
    """
    scored = score_trials(records)
    per_gripper: dict[GripperType, list] = {}
    for st in scored:
        per_gripper.setdefault(st.record.gripper, []).append(st)
    rows = []
    for gripper in sorted(per_gripper, key=lambda g: g.value):
        trials = per_gripper[gripper]
        modes = sorted({st.record.failure for st in trials if st.record.failure != FailureMode.NONE},
                       key=lambda m: m.value)
        for mode in modes:
            inside = [st for st in trials if st.record.failure == mode]
            outside = [st for st in trials if st.record.failure != mode]
            if not outside:
                continue
            for param in ("q_o", "q_p", "q_c"):
                pick = {"q_o": lambda s: s.record.q_o,
                        "q_p": lambda s: s.record.q_p,
                        "q_c": lambda s: s.q_c}[param]
                gap = abs(float(np.median([pick(s) for s in inside]))
                          - float(np.median([pick(s) for s in outside])))
                label = "strong" if gap >= strong else ("moderate" if gap >= moderate else "weak")
                rows.append({"gripper": gripper.value, "failure_mode": mode.value,
                             "parameter": param, "median_gap": gap, "influence": label})
    return rows


def _fmt(x: float) -> str:
    """CSV float formatting: 6 significant digits."""
    return f"{x:.6g}"


def _round3(obj):
    if isinstance(obj, float):
        return round(obj, 3)
    if isinstance(obj, dict):
        return {k: _round3(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round3(v) for v in obj]
    return obj


def _radar_svg(profiles: Sequence[RadarProfile], title: str, display_floor: float) -> str:
    """Standalone SVG radar chart: three axes plus one polygon per gripper."""
    if display_floor < 0:
        raise DomainError("display floor must be >= 0")
    size = 360.0
    cx = cy = size / 2.0
    radius = 140.0
    lines = [f'<?xml version="1.0" encoding="UTF-8"?>',
             f'<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0f}" height="{size:.0f}" '
             f'viewBox="0 0 {size:.0f} {size:.0f}">',
             f'<title>{title}</title>']
    for i, axis in enumerate(RADAR_AXES):
        theta = math.radians(90.0 + 120.0 * i)
        x = cx + radius * math.cos(theta)
        y = cy - radius * math.sin(theta)
        lines.append(f'<line x1="{_fmt(cx)}" y1="{_fmt(cy)}" x2="{_fmt(x)}" y2="{_fmt(y)}" '
                     f'stroke="#999999" stroke-width="1"/>')
        lx = cx + (radius + 14.0) * math.cos(theta)
        ly = cy - (radius + 14.0) * math.sin(theta)
        lines.append(f'<text x="{_fmt(lx)}" y="{_fmt(ly)}" font-size="12" '
                     f'text-anchor="middle">{axis}</text>')
    span = 1.0 + display_floor
    for profile in profiles:
        poly = radar_polygon(profile)
        pts = []
        for i, (vx, vy) in enumerate(poly.vertices):
            theta = math.radians(90.0 + 120.0 * i)
            r = (profile.axes[i] + display_floor) / span * radius
            pts.append(f"{_fmt(cx + r * math.cos(theta))},{_fmt(cy - r * math.sin(theta))}")
        color = GRIPPER_COLORS[profile.gripper]
        lines.append(f'<polygon points="{" ".join(pts)}" fill="{color}" fill-opacity="0.25" '
                     f'stroke="{color}" stroke-width="2">'
                     f'<desc>{profile.gripper.value} area={_fmt(poly.area)} '
                     f'vertices={" ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in poly.vertices)}</desc>'
                     f'</polygon>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def emit_report(aggregates: Sequence[ProfileAggregate],
                fits: dict[str, FitResult],
                breakdown: FailureBreakdown,
                boxes: Sequence[tuple[FailureMode, GripperType, str, BoxStats]],
                destination: str | Path,
                correlations: np.ndarray | None = None,
                influence: Sequence[dict] = (),
                pdp: dict[str, Sequence[PdpCurve]] | None = None,
                display_floor: float = 0.0) -> list[Path]:
    """Write the report bundle; returns the written paths.

    Layout: radar/<level>_<category>.svg, tables/fit_<outcome>.csv,
    tables/aggregates.csv, failures.csv, summary.json, plus
    tables/pdp_<outcome>.csv when PDP curves are supplied.
    """
    dest = Path(destination)
    written = []

    def write(path: Path, text: str) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(text.encode("utf-8"))
        written.append(path)

    # Aggregates table.
    agg_lines = ["level,category,gripper,mean_sp,mean_sb,mean_sf,n_trials"]
    for a in aggregates:
        agg_lines.append(f"{a.experiment_level},{a.category.value},{a.gripper.value},"
                         f"{_fmt(a.mean_sp)},{_fmt(a.mean_sb)},{_fmt(a.mean_sf)},{a.n_trials}")
    write(dest / "tables" / "aggregates.csv", "\n".join(agg_lines) + "\n")

    # Radar chart per (level, category) cell, plus the area-based winner.
    cells: dict[tuple[int, str], list[RadarProfile]] = {}
    for a in aggregates:
        profile = RadarProfile(a.gripper, (a.mean_sp, a.mean_sb, a.mean_sf))
        cells.setdefault((a.experiment_level, a.category.value), []).append(profile)
    winners = {}
    for (level, category), profiles in sorted(cells.items()):
        profiles.sort(key=lambda p: p.gripper.value)
        svg = _radar_svg(profiles, f"level {level} {category}", display_floor)
        write(dest / "radar" / f"{level}_{category}.svg", svg)
        ranking = best_gripper(profiles)
        winners[f"{level}/{category}"] = {
            "winner": ranking.winner.value if ranking.winner else "tie",
            "tied": [g.value for g in ranking.tied],
            "areas": {g.value: a for g, a in ranking.areas},
        }

    # Fit tables.
    for outcome in sorted(fits):
        fit = fits[outcome]
        fit_lines = ["term,coef,odds_ratio,p_value,ci_low,ci_high,separation_flag"]
        rows = odds_ratio_table(fit)
        flags = {name: flag for name, flag in zip(fit.columns, fit.separation_flags)}
        for row in rows:
            cells_row = format_odds_ratio_row(row)
            fit_lines.append(",".join(cells_row) + f",{int(flags[row.term])}")
        write(dest / "tables" / f"fit_{outcome}.csv", "\n".join(fit_lines) + "\n")

    # Partial dependence curves.
    if pdp:
        for outcome in sorted(pdp):
            write(dest / "tables" / f"pdp_{outcome}.csv", pdp_curves_csv(pdp[outcome]))

    # Failure modes: per-mode counts with per-gripper shares summing to 1.
    fail_lines = ["gripper,failure_mode,major_category,count,share"]
    for gripper in sorted(breakdown.mode_counts, key=lambda g: g.value):
        per = breakdown.mode_counts[gripper]
        total = sum(per.values())
        for mode in sorted(per, key=lambda m: m.value):
            fail_lines.append(f"{gripper.value},{mode.value},{MAJOR_CATEGORY_OF[mode]},"
                              f"{per[mode]},{_fmt(per[mode] / total)}")
    write(dest / "failures.csv", "\n".join(fail_lines) + "\n")

    # Machine-readable summary.
    summary = {
        "radar_winners": winners,
        "failure_category_shares": {g.value: shares for g, shares in
                                    sorted(breakdown.category_shares.items(), key=lambda kv: kv[0].value)},
        "models": {
            outcome: {
                "converged": fits[outcome].converged,
                "log_likelihood": fits[outcome].log_likelihood,
                "n_obs": fits[outcome].n_obs,
                "terms": {row.term: {"coef": row.coef, "odds_ratio": row.odds_ratio,
                                     "p_value": row.p_value,
                                     "ci": [row.ci_low, row.ci_high]}
                          for row in odds_ratio_table(fits[outcome])},
            } for outcome in sorted(fits)
        },
        "graspability_boxes": [
            {"failure_mode": mode.value, "gripper": gripper.value, "parameter": param,
             "min": bs.minimum, "q1": bs.q1, "median": bs.median, "q3": bs.q3,
             "max": bs.maximum, "n_outliers": len(bs.outliers)}
            for mode, gripper, param, bs in boxes
        ],
        "influence_annex": {"note": "heuristic thresholding of median gaps, not a fitted quantity",
                            "rows": list(influence)},
    }
    if correlations is not None:
        summary["predictor_correlations"] = {
            "order": ["q_o", "q_p", "q_c"],
            "matrix": [[float(v) for v in row] for row in correlations],
        }
    write(dest / "summary.json",
          json.dumps(_round3(summary), indent=2, sort_keys=True) + "\n")
    return written
