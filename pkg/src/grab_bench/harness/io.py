"""File codecs: JSONL trial logs, PLY/XYZ point clouds, 16-bit PGM depth images.

Trial logs are line-delimited JSON — one header line, then one record per
line — so parse errors are line-addressable and logs diff cleanly. Writers
emit deterministic bytes (sorted keys, LF newlines).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..deformation import PointCloud
from ..errors import DataError, DomainError, FormatError, ParseError, SchemaError
from ..scene import BinaryMask, ClutterState, DepthImage
from ..scoring import (FailureMode, GripperType, HoldTimeline, ObjectCategory,
                       TrialOutcome, TrialRecord)

SCHEMA_VERSION = 1

_RECORD_FIELDS = {
    "experiment_level", "scene_id", "trial_index", "gripper", "category",
    "object_id", "q_o", "q_p", "clutter", "outcome", "failure", "timeline",
    "cycle_time_s",
}


@dataclass(frozen=True)
class TrialLog:
    """Header metadata plus the ordered trial records."""

    header: dict
    records: tuple[TrialRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))

    @property
    def schema_version(self) -> int:
        return int(self.header.get("schema_version", -1))


def record_to_dict(record: TrialRecord) -> dict:
    out = {
        "experiment_level": record.experiment_level,
        "scene_id": record.scene_id,
        "trial_index": record.trial_index,
        "gripper": record.gripper.value,
        "category": record.category.value,
        "object_id": record.object_id,
        "q_o": record.q_o,
        "q_p": record.q_p,
        "outcome": record.outcome.value,
        "failure": record.failure.value,
    }
    if record.clutter is not None:
        c = record.clutter
        out["clutter"] = {"n_initial": c.n_initial, "n_before": c.n_before,
                          "o_initial": c.o_initial, "o_before": c.o_before}
    if record.timeline is not None:
        t = record.timeline
        out["timeline"] = {"t1": t.t1, "t2": t.t2, "t3": t.t3}
    if record.cycle_time_s is not None:
        out["cycle_time_s"] = record.cycle_time_s
    if record.extra:
        for k, v in record.extra.items():
            out.setdefault(k, v)
    return out


def record_from_dict(data: dict) -> TrialRecord:
    try:
        clutter = None
        if data.get("clutter") is not None:
            c = data["clutter"]
            clutter = ClutterState(int(c["n_initial"]), int(c["n_before"]),
                                   float(c["o_initial"]), float(c["o_before"]))
        timeline = None
        if data.get("timeline") is not None:
            t = data["timeline"]
            timeline = HoldTimeline(float(t["t1"]), float(t["t2"]), float(t["t3"]))
        cycle = data.get("cycle_time_s")
        extra = {k: v for k, v in data.items() if k not in _RECORD_FIELDS}
        return TrialRecord(
            experiment_level=int(data["experiment_level"]),
            scene_id=str(data["scene_id"]),
            trial_index=int(data["trial_index"]),
            gripper=GripperType(data["gripper"]),
            category=ObjectCategory(data["category"]),
            object_id=str(data["object_id"]),
            q_o=float(data["q_o"]),
            q_p=float(data["q_p"]),
            clutter=clutter,
            outcome=TrialOutcome(data["outcome"]),
            failure=FailureMode(data["failure"]),
            timeline=timeline,
            cycle_time_s=None if cycle is None else float(cycle),
            extra=extra or None,
        )
    except KeyError as e:
        raise DataError(f"missing field {e.args[0]!r}") from e
    except ValueError as e:
        raise DataError(str(e)) from e


def read_trial_log(path: str | Path) -> TrialLog:
    """Parse a JSONL trial log; invariant violations are rejected with line numbers."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = None
    records = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(number, f"malformed JSON: {e.msg}") from e
        if header is None:
            if not isinstance(data, dict) or "schema_version" not in data:
                raise SchemaError("first line must be a header with schema_version")
            if int(data["schema_version"]) != SCHEMA_VERSION:
                raise SchemaError(f"unsupported schema_version {data['schema_version']}")
            header = data
            continue
        if not isinstance(data, dict):
            raise ParseError(number, "record line is not a JSON object")
        try:
            records.append(record_from_dict(data))
        except DataError as e:
            raise ParseError(number, str(e)) from e
    if header is None:
        raise SchemaError("log file has no header line")
    return TrialLog(header, tuple(records))


def write_trial_log(log: TrialLog, path: str | Path) -> None:
    """Serialize deterministically: sorted keys, compact separators, LF lines."""
    def dump(obj) -> str:
        return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)

    lines = [dump(log.header)]
    lines.extend(dump(record_to_dict(r)) for r in log.records)
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def read_point_cloud(path: str | Path) -> PointCloud:
    """Read an ascii PLY (element vertex with x,y,z) or whitespace XYZ file."""
    raw = Path(path).read_bytes()
    head = raw[:256].lstrip()
    if head[:3] == b"ply":
        return _read_ply_ascii(raw, path)
    return _read_xyz(raw.decode("utf-8"), path)


def _read_ply_ascii(raw: bytes, path) -> PointCloud:
    try:
        text = raw.decode("ascii")
    except UnicodeDecodeError as e:
        raise FormatError(f"{path}: binary PLY payloads are unsupported") from e
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise FormatError(f"{path}: not a PLY file")
    vertex_count = None
    in_vertex_element = False
    vertex_props: list[str] = []
    body_start = None
    for i, line in enumerate(lines[1:], start=1):
        tokens = line.split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            if tokens[1] != "ascii":
                raise FormatError(f"{path}: binary PLY is unsupported (format {tokens[1]})")
        elif tokens[0] == "element":
            in_vertex_element = tokens[1] == "vertex"
            if in_vertex_element:
                vertex_count = int(tokens[2])
        elif tokens[0] == "property" and in_vertex_element:
            vertex_props.append(tokens[-1])
        elif tokens[0] == "end_header":
            body_start = i + 1
            break
    if body_start is None or vertex_count is None:
        raise FormatError(f"{path}: PLY header lacks end_header or element vertex")
    try:
        cols = [vertex_props.index(axis) for axis in ("x", "y", "z")]
    except ValueError as e:
        raise FormatError(f"{path}: vertex element lacks x/y/z properties") from e
    points = []
    body = [ln for ln in lines[body_start:] if ln.strip()]
    if len(body) < vertex_count:
        raise DataError(f"{path}: expected {vertex_count} vertex lines, found {len(body)}")
    for line in body[:vertex_count]:
        values = line.split()
        try:
            points.append([float(values[c]) for c in cols])
        except (ValueError, IndexError) as e:
            raise DataError(f"{path}: bad vertex line {line!r}") from e
    return _finish_cloud(points, path)


def _read_xyz(text: str, path) -> PointCloud:
    points = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        values = line.split()
        if len(values) < 3:
            raise ParseError(number, f"expected 3 coordinates, got {len(values)}")
        try:
            points.append([float(v) for v in values[:3]])
        except ValueError as e:
            raise ParseError(number, str(e)) from e
    return _finish_cloud(points, path)


def _finish_cloud(points: list, path) -> PointCloud:
    arr = np.array(points, dtype=float).reshape(-1, 3)
    if arr.size and not np.all(np.isfinite(arr)):
        raise DataError(f"{path}: point cloud contains non-finite coordinates")
    return PointCloud(arr)


def _vertex_line(x, y, z) -> str:
    return f"{float(x)!r} {float(y)!r} {float(z)!r}"


def write_point_cloud_xyz(cloud: PointCloud, path: str | Path) -> None:
    lines = [_vertex_line(*p) for p in cloud.points]
    Path(path).write_bytes(("\n".join(lines) + ("\n" if lines else "")).encode("ascii"))


def write_point_cloud_ply(cloud: PointCloud, path: str | Path) -> None:
    header = ["ply", "format ascii 1.0",
              f"element vertex {len(cloud)}",
              "property float x", "property float y", "property float z",
              "end_header"]
    lines = header + [_vertex_line(*p) for p in cloud.points]
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("ascii"))


def _read_pgm_header(raw: bytes, path) -> tuple[int, int, int, int]:
    """Parse P5 header tokens (width, height, maxval); returns payload offset."""
    if raw[:2] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (P5) file")
    tokens = []
    i = 2
    while len(tokens) < 3:
        if i >= len(raw):
            raise DataError(f"{path}: truncated PGM header")
        c = raw[i:i + 1]
        if c == b"#":
            while i < len(raw) and raw[i:i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(raw) and not raw[j:j + 1].isspace() and raw[j:j + 1] != b"#":
                j += 1
            tokens.append(raw[i:j])
            i = j
    i += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as e:
        raise DataError(f"{path}: non-numeric PGM header token") from e
    if width <= 0 or height <= 0:
        raise DataError(f"{path}: bad PGM dimensions {width}x{height}")
    return width, height, maxval, i


def read_depth_pgm(path: str | Path) -> DepthImage:
    """16-bit binary PGM, big-endian samples, values in millimeters."""
    raw = Path(path).read_bytes()
    width, height, maxval, offset = _read_pgm_header(raw, path)
    if maxval != 65535:
        raise FormatError(f"{path}: depth PGM must have maxval 65535, got {maxval}")
    expected = width * height * 2
    payload = raw[offset:offset + expected]
    if len(payload) != expected:
        raise DataError(f"{path}: expected {expected} payload bytes, got {len(payload)}")
    values = np.frombuffer(payload, dtype=">u2").reshape(height, width)
    return DepthImage(values.astype(np.uint16))


def write_depth_pgm(image: DepthImage, path: str | Path) -> None:
    values = np.asarray(image.values)
    if np.any(values > 65535):
        raise DomainError("depth values exceed 16-bit range")
    header = f"P5\n{image.width} {image.height}\n65535\n".encode("ascii")
    Path(path).write_bytes(header + values.astype(">u2").tobytes())


def read_mask_pgm(path: str | Path) -> BinaryMask:
    """8-bit binary PGM; nonzero pixels are true."""
    raw = Path(path).read_bytes()
    width, height, maxval, offset = _read_pgm_header(raw, path)
    if maxval != 255:
        raise FormatError(f"{path}: mask PGM must have maxval 255, got {maxval}")
    expected = width * height
    payload = raw[offset:offset + expected]
    if len(payload) != expected:
        raise DataError(f"{path}: expected {expected} payload bytes, got {len(payload)}")
    return BinaryMask(np.frombuffer(payload, dtype=np.uint8).reshape(height, width) != 0)


def write_mask_pgm(mask: BinaryMask, path: str | Path) -> None:
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    payload = np.where(mask.bits, 255, 0).astype(np.uint8).tobytes()
    Path(path).write_bytes(header + payload)
