import json
import math
import xml.etree.ElementTree as ET

import pytest

from grab_bench.errors import DomainError
from grab_bench.inference import ModelSpec, ModelOutcome, build_design, fit_fractional_logit
from grab_bench.reporting import (RadarProfile, best_gripper,
                                  box_stats, emit_report, failure_box_stats,
                                  failure_breakdown, influence_annex, radar_polygon)
from grab_bench.scene import ClutterState
from grab_bench.scoring import (FailureMode, GripperType, HoldTimeline, ObjectCategory,
                                TrialOutcome, TrialRecord, aggregate_profiles)


def make_record(level=2, scene="s1", index=0, gripper=GripperType.RIGID,
                category=ObjectCategory.TIN_CAN, q_o=0.2, q_p=0.7,
                outcome=TrialOutcome.SUCCESS, failure=None, o_before=0.3):
    if failure is None:
        failure = FailureMode.NONE if outcome == TrialOutcome.SUCCESS else FailureMode.SL
    timeline = None if outcome == TrialOutcome.FAIL else HoldTimeline(2.0, 12.0, 12.0)
    cycle = None if outcome == TrialOutcome.FAIL else 14.0
    return TrialRecord(level, scene, index, gripper, category, "obj", q_o, q_p,
                       ClutterState(7, 7, 0.3, o_before), outcome, failure,
                       timeline, cycle)


class TestRadarPolygon:
    def test_unit_triangle_area(self):
        poly = radar_polygon(RadarProfile(GripperType.RIGID, (1, 1, 1)))
        assert poly.area == pytest.approx(3 * math.sqrt(3) / 4, abs=1e-9)

    def test_degenerate_point(self):
        poly = radar_polygon(RadarProfile(GripperType.RIGID, (0, 0, 0)))
        assert poly.area == 0.0

    def test_two_spokes(self):
        poly = radar_polygon(RadarProfile(GripperType.RIGID, (1, 1, 0)))
        assert poly.area == pytest.approx(math.sqrt(3) / 4, abs=1e-9)

    def test_vertices_on_axes(self):
        poly = radar_polygon(RadarProfile(GripperType.RIGID, (1, 1, 1)))
        expected = [(math.cos(math.radians(90 + 120 * i)),
                     math.sin(math.radians(90 + 120 * i))) for i in range(3)]
        for (x, y), (ex, ey) in zip(poly.vertices, expected):
            assert x == pytest.approx(ex, abs=1e-12)
            assert y == pytest.approx(ey, abs=1e-12)

    def test_single_axis_monotonicity(self, rng):
        for _ in range(200):
            axes = rng.uniform(0.05, 1.0, size=3)
            axis = int(rng.integers(3))
            bumped = axes.copy()
            bumped[axis] = min(axes[axis] + 0.1, 1.0)
            if bumped[axis] == axes[axis]:
                continue
            a0 = radar_polygon(RadarProfile(GripperType.RIGID, tuple(axes))).area
            a1 = radar_polygon(RadarProfile(GripperType.RIGID, tuple(bumped))).area
            assert a1 > a0

    def test_axis_range_validated(self):
        with pytest.raises(DomainError):
            RadarProfile(GripperType.RIGID, (1.2, 0, 0))


class TestBestGripper:
    def test_single_profile(self):
        p = RadarProfile(GripperType.FINRAY, (0.5, 0.5, 0.5))
        assert best_gripper([p]).winner == GripperType.FINRAY

    def test_strict_dominance(self):
        big = RadarProfile(GripperType.RIGID, (1, 1, 1))
        small = RadarProfile(GripperType.SUCTION, (0.5, 0.5, 0.5))
        assert best_gripper([big, small]).winner == GripperType.RIGID

    def test_identical_profiles_tie(self):
        a = RadarProfile(GripperType.RIGID, (0.6, 0.6, 0.6))
        b = RadarProfile(GripperType.FINRAY, (0.6, 0.6, 0.6))
        ranking = best_gripper([a, b])
        assert ranking.winner is None
        assert set(ranking.tied) == {GripperType.RIGID, GripperType.FINRAY}

    def test_permutation_invariant(self, rng):
        profiles = [RadarProfile(g, tuple(rng.uniform(0.1, 1.0, size=3)))
                    for g in GripperType]
        base = best_gripper(profiles)
        for perm in ([2, 0, 1], [1, 2, 0], [2, 1, 0]):
            shuffled = [profiles[i] for i in perm]
            assert best_gripper(shuffled).winner == base.winner

    def test_empty_rejected(self):
        with pytest.raises(DomainError):
            best_gripper([])


class TestFailureBreakdown:
    def test_no_failures(self):
        records = [make_record(index=i) for i in range(3)]
        breakdown = failure_breakdown(records)
        assert breakdown.mode_counts == {}
        assert breakdown.category_shares == {}

    def test_share_arithmetic(self):
        records = []
        for i in range(7):
            records.append(make_record(index=i, outcome=TrialOutcome.FAIL,
                                       failure=FailureMode.CL))
        for i in range(7, 10):
            records.append(make_record(index=i, outcome=TrialOutcome.FAIL,
                                       failure=FailureMode.WGP))
        breakdown = failure_breakdown(records)
        shares = breakdown.category_shares[GripperType.RIGID]
        assert shares["physical"] == pytest.approx(0.7)
        assert shares["perception"] == pytest.approx(0.3)
        assert shares["execution"] == 0.0

    def test_shares_sum_to_one(self, rng):
        modes = [FailureMode.CL, FailureMode.CLS, FailureMode.SL, FailureMode.WGP]
        records = []
        for i in range(40):
            gripper = list(GripperType)[int(rng.integers(3))]
            failed = rng.uniform() < 0.5
            records.append(make_record(
                index=i, gripper=gripper,
                outcome=TrialOutcome.FAIL if failed else TrialOutcome.SUCCESS,
                failure=modes[int(rng.integers(len(modes)))] if failed else FailureMode.NONE))
        breakdown = failure_breakdown(records)
        for shares in breakdown.category_shares.values():
            assert sum(shares.values()) == pytest.approx(1.0, abs=1e-12)

    def test_physical_dominant_shape(self):
        records = []
        for i in range(8):
            records.append(make_record(index=i, outcome=TrialOutcome.FAIL,
                                       failure=FailureMode.CL))
        records.append(make_record(index=8, outcome=TrialOutcome.FAIL,
                                   failure=FailureMode.WGP))
        breakdown = failure_breakdown(records)
        assert breakdown.category_shares[GripperType.RIGID]["physical"] > 0.7


class TestBoxStats:
    def test_odd_set_type7(self):
        bs = box_stats([1, 2, 3, 4, 5])
        assert (bs.q1, bs.median, bs.q3) == (2, 3, 4)
        assert (bs.minimum, bs.maximum) == (1, 5)
        assert bs.outliers == ()

    def test_constant_values(self):
        bs = box_stats([2.0] * 6)
        assert bs.minimum == bs.q1 == bs.median == bs.q3 == bs.maximum == 2.0
        assert bs.outliers == ()

    def test_extreme_point_is_outlier(self):
        bs = box_stats([1, 2, 3, 4, 5, 100])
        assert 100 in bs.outliers

    def test_matches_sorted_interpolation_oracle(self, rng):
        for n in range(1, 13):
            values = sorted(rng.uniform(size=n))
            bs = box_stats(values)
            for q, got in ((0.25, bs.q1), (0.5, bs.median), (0.75, bs.q3)):
                # type-7: linear interpolation at h = (n-1)q
                h = (n - 1) * q
                lo = math.floor(h)
                hi = min(lo + 1, n - 1)
                expected = values[lo] + (h - lo) * (values[hi] - values[lo])
                assert got == pytest.approx(expected, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(DomainError):
            box_stats([])


class TestFailureBoxStats:
    def test_groups_and_ordering(self):
        records = [
            make_record(index=0, outcome=TrialOutcome.FAIL, failure=FailureMode.CL, q_o=0.1),
            make_record(index=1, outcome=TrialOutcome.FAIL, failure=FailureMode.CL, q_o=0.3),
            make_record(index=2, outcome=TrialOutcome.FAIL, failure=FailureMode.WGP, q_o=0.8),
            make_record(index=3),
        ]
        rows = failure_box_stats(records)
        keys = [(m.value, g.value, p) for m, g, p, _ in rows]
        assert keys == sorted(keys)
        cl_qo = next(bs for m, g, p, bs in rows
                     if m == FailureMode.CL and p == "q_o")
        assert cl_qo.median == pytest.approx(0.2)


class TestInfluenceAnnex:
    def test_labels_respect_thresholds(self):
        records = []
        for i in range(10):
            records.append(make_record(index=i, q_o=0.9,
                                       outcome=TrialOutcome.FAIL, failure=FailureMode.WGP))
        for i in range(10, 20):
            records.append(make_record(index=i, q_o=0.1))
        rows = influence_annex(records)
        wgp_qo = next(r for r in rows if r["failure_mode"] == "WGP" and r["parameter"] == "q_o")
        assert wgp_qo["influence"] == "strong"
        wgp_qp = next(r for r in rows if r["failure_mode"] == "WGP" and r["parameter"] == "q_p")
        assert wgp_qp["influence"] == "weak"


def _report_inputs(rng):
    records = []
    idx = 0
    for gripper in GripperType:
        for category in (ObjectCategory.TIN_CAN, ObjectCategory.LPB):
            for i in range(6):
                failed = rng.uniform() < 0.3
                records.append(make_record(
                    scene=f"{gripper.value}-{category.value}", index=idx,
                    gripper=gripper, category=category,
                    q_o=float(rng.uniform()), q_p=float(rng.uniform()),
                    o_before=float(rng.uniform(0.05, 0.3)),
                    outcome=TrialOutcome.FAIL if failed else TrialOutcome.SUCCESS,
                    failure=FailureMode.CL if failed else FailureMode.NONE))
                idx += 1
    aggregates = aggregate_profiles(records)
    fit = fit_fractional_logit(build_design(records, ModelSpec(ModelOutcome.SB)))
    breakdown = failure_breakdown(records)
    boxes = failure_box_stats(records)
    influence = influence_annex(records)
    return records, aggregates, {"sb": fit}, breakdown, boxes, influence


class TestEmitReport:
    def test_bundle_layout_and_determinism(self, rng, tmp_path):
        _, aggregates, fits, breakdown, boxes, influence = _report_inputs(rng)
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        for out in (out1, out2):
            emit_report(aggregates, fits, breakdown, boxes, out, influence=influence)
        files1 = sorted(p.relative_to(out1) for p in out1.rglob("*") if p.is_file())
        files2 = sorted(p.relative_to(out2) for p in out2.rglob("*") if p.is_file())
        assert files1 == files2
        assert any(str(f).startswith("radar/") for f in files1)
        assert (out1 / "tables" / "aggregates.csv").exists()
        assert (out1 / "tables" / "fit_sb.csv").exists()
        assert (out1 / "failures.csv").exists()
        assert (out1 / "summary.json").exists()
        for f in files1:
            assert (out1 / f).read_bytes() == (out2 / f).read_bytes()

    def test_svg_well_formed_and_echoes_geometry(self, rng, tmp_path):
        _, aggregates, fits, breakdown, boxes, influence = _report_inputs(rng)
        # force one perfect profile to pin the analytic vertices
        from grab_bench.scoring import ProfileAggregate
        aggregates = [ProfileAggregate(1, ObjectCategory.TIN_CAN, GripperType.RIGID,
                                       1.0, 1.0, 1.0, 5)]
        emit_report(aggregates, {}, breakdown, boxes, tmp_path / "r")
        svg_path = tmp_path / "r" / "radar" / "1_tin_can.svg"
        root = ET.parse(svg_path).getroot()  # well-formed XML
        text = svg_path.read_text()
        for i in range(3):
            x = math.cos(math.radians(90 + 120 * i))
            y = math.sin(math.radians(90 + 120 * i))
            assert f"{x:.6g},{y:.6g}" in text

    def test_empty_aggregates_headers_only(self, tmp_path):
        from grab_bench.reporting import FailureBreakdown
        emit_report([], {}, FailureBreakdown({}, {}), [], tmp_path / "r")
        agg = (tmp_path / "r" / "tables" / "aggregates.csv").read_text()
        assert agg == "level,category,gripper,mean_sp,mean_sb,mean_sf,n_trials\n"
        failures = (tmp_path / "r" / "failures.csv").read_text()
        assert failures == "gripper,failure_mode,major_category,count,share\n"

    def test_failure_csv_shares_sum_to_one(self, rng, tmp_path):
        _, aggregates, fits, breakdown, boxes, influence = _report_inputs(rng)
        emit_report(aggregates, fits, breakdown, boxes, tmp_path / "r")
        lines = (tmp_path / "r" / "failures.csv").read_text().strip().splitlines()[1:]
        per_gripper = {}
        for line in lines:
            gripper, _, _, _, share = line.split(",")
            per_gripper[gripper] = per_gripper.get(gripper, 0.0) + float(share)
        for total in per_gripper.values():
            assert total == pytest.approx(1.0, abs=1e-9)

    def test_summary_three_decimals(self, rng, tmp_path):
        _, aggregates, fits, breakdown, boxes, influence = _report_inputs(rng)
        emit_report(aggregates, fits, breakdown, boxes, tmp_path / "r",
                    influence=influence)
        summary = json.loads((tmp_path / "r" / "summary.json").read_text())
        def check(node):
            if isinstance(node, float):
                assert node == pytest.approx(round(node, 3), abs=0)
            elif isinstance(node, dict):
                for v in node.values():
                    check(v)
            elif isinstance(node, list):
                for v in node:
                    check(v)
        check(summary)
