"""Command-line interface: `grab <command>`.

Exit codes: 0 success, 1 data errors, 2 usage errors (argparse).
"""

from __future__ import annotations

import argparse
import json
import sys

from . import reporting
from .deformation import DcdParams, aligned_dcd
from .errors import GrabError
from .harness import (GeneratorTruth, ProtocolSpec, read_depth_pgm, read_mask_pgm,
                      read_point_cloud, read_trial_log, simulate, validate,
                      write_trial_log)
from .inference import (PREDICTOR_ORDER, HalfTreatment, ModelOutcome, ModelSpec,
                        build_design, fit_fractional_logit, fit_logistic,
                        format_odds_ratio_row, odds_ratio_table,
                        partial_dependence, pearson_correlations)
from .scene import scene_occupancy
from .scoring import GripperType, aggregate_profiles


def _cmd_dcd(args) -> int:
    params = DcdParams(alpha=args.alpha)
    pre = read_point_cloud(args.pre)
    values = {}
    for label, path in (("x", args.deformed_x), ("y", args.deformed_y)):
        values[label] = aligned_dcd(read_point_cloud(path), pre, params)
    q_o = (values["x"] + values["y"]) / 2.0
    print(json.dumps({"dcd_x": values["x"], "dcd_y": values["y"],
                      "object_score": q_o, "alpha": args.alpha}, sort_keys=True))
    return 0


def _cmd_occupancy(args) -> int:
    depth = read_depth_pgm(args.depth)
    mask = read_mask_pgm(args.mask)
    result = scene_occupancy(depth, mask.bits.astype("uint8") * 255,
                             min_mm=args.min_mm, max_mm=args.max_mm,
                             h_margin=args.trim, v_margin=args.trim)
    print(json.dumps({"workspace_pixels": result.workspace_pixels,
                      "object_pixels": result.object_pixels,
                      "ratio": result.ratio}, sort_keys=True))
    return 0


def _read_records(paths) -> list:
    records = []
    for path in paths:
        records.extend(read_trial_log(path).records)
    return records


def _cmd_score(args) -> int:
    records = _read_records(args.log)
    print("level,category,gripper,mean_sp,mean_sb,mean_sf,n_trials")
    for a in aggregate_profiles(records):
        print(f"{a.experiment_level},{a.category.value},{a.gripper.value},"
              f"{a.mean_sp:.6g},{a.mean_sb:.6g},{a.mean_sf:.6g},{a.n_trials}")
    return 0


def _fit_one(records, outcome: ModelOutcome, half_as: HalfTreatment):
    design = build_design(records, ModelSpec(outcome, half_as))
    if outcome == ModelOutcome.SP:
        return fit_logistic(design)
    return fit_fractional_logit(design)


def _cmd_fit(args) -> int:
    records = _read_records(args.log)
    fit = _fit_one(records, ModelOutcome(args.outcome), HalfTreatment(args.half_as))
    if args.json:
        payload = {
            "outcome": args.outcome,
            "family": fit.family,
            "converged": fit.converged,
            "log_likelihood": fit.log_likelihood,
            "n_obs": fit.n_obs,
            "columns": list(fit.columns),
            "estimates": [float(v) for v in fit.estimates],
            "std_errors": [float(v) for v in fit.std_errors],
            "p_values": [float(v) for v in fit.p_values],
            "odds_ratios": [float(v) for v in fit.odds_ratios],
            "ci_low": [float(v) for v in fit.ci_low],
            "ci_high": [float(v) for v in fit.ci_high],
            "separation_flags": list(fit.separation_flags),
        }
        print(json.dumps(payload, sort_keys=True))
    else:
        print("term,coef,odds_ratio,p_value,ci_low,ci_high")
        for row in odds_ratio_table(fit):
            print(",".join(format_odds_ratio_row(row)))
        if not fit.converged or any(fit.separation_flags):
            flagged = [name for name, f in zip(fit.columns, fit.separation_flags) if f]
            print(f"# warning: converged={fit.converged} separation_flags={flagged}",
                  file=sys.stderr)
    return 0


def _cmd_report(args) -> int:
    records = _read_records(args.log)
    aggregates = aggregate_profiles(records)
    fits = {}
    for outcome in ModelOutcome:
        try:
            fits[outcome.value] = _fit_one(records, outcome, HalfTreatment(args.half_as))
        except GrabError as e:
            print(f"# skipping {outcome.value} model: {e}", file=sys.stderr)
    breakdown = reporting.failure_breakdown(records)
    boxes = reporting.failure_box_stats(records)
    influence = reporting.influence_annex(records)
    try:
        correlations = pearson_correlations(records)
    except GrabError:
        correlations = None
    grid = [round(0.05 * i, 2) for i in range(21)]
    pdp = {outcome: [partial_dependence(fit, records, predictor, gripper, grid)
                     for predictor in PREDICTOR_ORDER for gripper in GripperType]
           for outcome, fit in fits.items()}
    written = reporting.emit_report(aggregates, fits, breakdown, boxes, args.out,
                                    correlations=correlations, influence=influence,
                                    pdp=pdp)
    for path in written:
        print(path)
    return 0


def _cmd_simulate(args) -> int:
    grippers = tuple(GripperType) if args.gripper == "all" else (GripperType(args.gripper),)
    log = simulate(ProtocolSpec(args.level), GeneratorTruth(), args.seed, grippers)
    write_trial_log(log, args.out)
    print(f"{args.out}: {len(log.records)} records")
    return 0


def _cmd_validate(args) -> int:
    log = read_trial_log(args.log)
    violations = validate(log)
    for v in violations:
        print(f"{v.kind}: {v.message}")
    if violations:
        print(f"{len(violations)} violation(s)", file=sys.stderr)
        return 1
    print("ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grab",
        description="Offline grasp-benchmark evaluation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dcd", help="object score from pre-grasp and deformed clouds")
    p.add_argument("pre", help="pre-grasp point cloud (PLY ascii or XYZ)")
    p.add_argument("deformed_x", help="cloud compressed along the x plane")
    p.add_argument("deformed_y", help="cloud compressed along the y plane")
    p.add_argument("--alpha", type=float, default=DcdParams().alpha,
                   help="chamfer sensitivity (default %(default)s)")
    p.set_defaults(func=_cmd_dcd)

    p = sub.add_parser("occupancy", help="workspace occupancy from depth + mask PGMs")
    p.add_argument("depth", help="16-bit depth PGM (millimeters)")
    p.add_argument("mask", help="8-bit workspace mask PGM")
    p.add_argument("--min-mm", type=float, default=250.0)
    p.add_argument("--max-mm", type=float, default=525.0)
    p.add_argument("--trim", type=int, default=2, help="trim margin in pixels")
    p.set_defaults(func=_cmd_occupancy)

    p = sub.add_parser("score", help="aggregate trial scores per level/category/gripper")
    p.add_argument("log", nargs="+", help="trial log(s) (JSONL)")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("fit", help="fit one outcome model")
    p.add_argument("log", nargs="+", help="trial log(s) (JSONL)")
    p.add_argument("--outcome", required=True, choices=[o.value for o in ModelOutcome])
    p.add_argument("--half-as", default=HalfTreatment.FAIL.value,
                   choices=[h.value for h in HalfTreatment],
                   help="treatment of 0.5 success outcomes (default %(default)s)")
    p.add_argument("--json", action="store_true", help="emit JSON instead of CSV")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("report", help="write the full report bundle")
    p.add_argument("log", nargs="+", help="trial log(s) (JSONL)")
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.add_argument("--half-as", default=HalfTreatment.FAIL.value,
                   choices=[h.value for h in HalfTreatment])
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("simulate", help="generate a synthetic protocol log")
    p.add_argument("--level", type=int, required=True, choices=[1, 2, 3, 4])
    p.add_argument("--gripper", default="all",
                   choices=["all"] + [g.value for g in GripperType])
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("-o", "--out", required=True, help="output log path (JSONL)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("validate", help="check a log against the protocol")
    p.add_argument("log", help="trial log (JSONL)")
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GrabError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
