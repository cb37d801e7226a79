"""Workspace occupancy from depth images and the clutter score.

Pixel coordinates are (x, y) = (column, row); depth values are millimeters
with 0 marking invalid pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DomainError

DEPTH_MIN_MM = 250
DEPTH_MAX_MM = 525
CONTOUR_EPSILON = 0.5
TRIM_MARGIN = 2

# Moore neighbourhood in clockwise order for x-right / y-down images.
_DIRS = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))


@dataclass(frozen=True)
class DepthImage:
    """Per-pixel depth in millimeters, shape (height, width)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2 or v.size == 0:
            raise DataError(f"depth image must be a non-empty 2D array, got shape {v.shape}")
        if np.any(v < 0):
            raise DataError("depth values must be >= 0")
        object.__setattr__(self, "values", v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class BinaryMask:
    """Boolean pixel mask, shape (height, width)."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2 or b.size == 0:
            raise DataError(f"mask must be a non-empty 2D array, got shape {b.shape}")
        object.__setattr__(self, "bits", b.astype(bool))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def count(self) -> int:
        return int(np.count_nonzero(self.bits))


@dataclass(frozen=True)
class Contour:
    """Closed polygon of (x, y) pixel vertices."""

    vertices: tuple[tuple[int, int], ...]

    def __post_init__(self):
        verts = tuple((int(x), int(y)) for x, y in self.vertices)
        if len(verts) < 3:
            raise DomainError(f"contour needs at least 3 vertices, got {len(verts)}")
        for a, b in zip(verts, verts[1:] + verts[:1]):
            if a == b:
                raise DomainError("contour has two equal consecutive vertices")
        object.__setattr__(self, "vertices", verts)

    def area(self) -> float:
        """Enclosed area by the shoelace formula (absolute value)."""
        xs = np.array([v[0] for v in self.vertices], dtype=float)
        ys = np.array([v[1] for v in self.vertices], dtype=float)
        return float(abs(np.sum(xs * np.roll(ys, -1) - np.roll(xs, -1) * ys)) / 2.0)


@dataclass(frozen=True)
class OccupancyResult:
    workspace_pixels: int
    object_pixels: int
    ratio: float


@dataclass(frozen=True)
class ClutterState:
    """Object counts and occupancy ratios at scene start and before a trial."""

    n_initial: int
    n_before: int
    o_initial: float
    o_before: float

    def __post_init__(self):
        if not 1 <= self.n_before <= self.n_initial:
            raise DomainError(f"need 1 <= n_before <= n_initial, got {self.n_before}/{self.n_initial}")
        if not 0.0 < self.o_initial <= 1.0:
            raise DomainError(f"o_initial must be in (0, 1], got {self.o_initial}")
        if not 0.0 <= self.o_before <= 1.0:
            raise DomainError(f"o_before must be in [0, 1], got {self.o_before}")


def _image_values(image) -> np.ndarray:
    if isinstance(image, DepthImage):
        return image.values
    return np.asarray(image)


def binarize(gray, threshold) -> BinaryMask:
    """Pixel true iff its value is >= threshold."""
    return BinaryMask(_image_values(gray) >= threshold)


def extract_outer_contours(mask: BinaryMask) -> list[Contour]:
    """Outer boundary of each 8-connected foreground component.

    Moore-neighbour tracing, starting at the component's topmost-then-leftmost
    pixel and walking clockwise; interior holes are ignored. Components whose
    boundary has fewer than 3 vertices (1- and 2-pixel specks) are dropped.
    """
    bits = mask.bits
    h, w = bits.shape
    seen = np.zeros_like(bits, dtype=bool)
    contours = []
    for y0 in range(h):
        for x0 in range(w):
            if not bits[y0, x0] or seen[y0, x0]:
                continue
            component = _flood_component(bits, x0, y0, seen)
            trace = _moore_trace(component, (x0, y0))
            if len(trace) >= 3:
                contours.append(Contour(tuple(trace)))
    return contours


def _flood_component(bits: np.ndarray, x0: int, y0: int, seen: np.ndarray) -> set[tuple[int, int]]:
    h, w = bits.shape
    stack = [(x0, y0)]
    seen[y0, x0] = True
    component = {(x0, y0)}
    while stack:
        x, y = stack.pop()
        for dx, dy in _DIRS:
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h and bits[ny, nx] and not seen[ny, nx]:
                seen[ny, nx] = True
                component.add((nx, ny))
                stack.append((nx, ny))
    return component


def _moore_trace(component: set[tuple[int, int]], start: tuple[int, int]) -> list[tuple[int, int]]:
    def sweep(p, backtrack):
        # Clockwise over the Moore neighbours of p, beginning just after the
        # backtrack pixel; returns (next boundary pixel, new backtrack).
        dx, dy = backtrack[0] - p[0], backtrack[1] - p[1]
        begin = _DIRS.index((dx, dy)) + 1
        prev_bg = backtrack
        for k in range(8):
            d = _DIRS[(begin + k) % 8]
            q = (p[0] + d[0], p[1] + d[1])
            if q in component:
                return q, prev_bg
            prev_bg = q
        return None, backtrack

    contour = [start]
    first, back = sweep(start, (start[0] - 1, start[1]))
    if first is None:
        return contour
    cur = first
    cap = 4 * len(component) + 8
    for _ in range(cap):
        nxt, nback = sweep(cur, back)
        if cur == start and nxt == first:
            break
        contour.append(cur)
        cur, back = nxt, nback
    return contour


def _point_segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0:
        return np.linalg.norm(points - a, axis=1)
    t = np.clip((points - a) @ ab / denom, 0.0, 1.0)
    return np.linalg.norm(points - (a + t[:, None] * ab), axis=1)


def compress_contour(c: Contour, epsilon: float = CONTOUR_EPSILON) -> Contour:
    """Prune vertices that stay within epsilon of the simplified polygon.

    A vertex is removed only when every original vertex covered by the segment
    joining its retained neighbours lies within epsilon of that segment, so
    all removed vertices stay within epsilon of the final polygon.
    """
    original = np.asarray(c.vertices, dtype=float)
    n = len(original)
    retained = list(range(n))

    def removable(pos: int) -> bool:
        a = retained[(pos - 1) % len(retained)]
        b = retained[(pos + 1) % len(retained)]
        covered = []
        k = (a + 1) % n
        while k != b:
            covered.append(k)
            k = (k + 1) % n
        if not covered:
            return False
        dist = _point_segment_distance(original[covered], original[a], original[b])
        return bool(np.all(dist <= epsilon))

    changed = True
    while changed and len(retained) > 3:
        changed = False
        pos = 0
        while pos < len(retained) and len(retained) > 3:
            if removable(pos):
                del retained[pos]
                changed = True
            else:
                pos += 1
    return Contour(tuple(c.vertices[i] for i in retained))


def largest_contour(cs: list[Contour]) -> Contour:
    """Contour with the maximum enclosed area; ties go to the first in the list."""
    if not cs:
        raise DomainError("no contours to choose from")
    best = cs[0]
    best_area = best.area()
    for contour in cs[1:]:
        area = contour.area()
        if area > best_area:
            best, best_area = contour, area
    return best


def fill_contour(c: Contour, width: int, height: int) -> BinaryMask:
    """Rasterize the closed polygon: interior pixels (even-odd rule at pixel
    centers) plus the boundary pixels of each edge."""
    bits = np.zeros((height, width), dtype=bool)
    verts = list(c.vertices)
    edges = list(zip(verts, verts[1:] + verts[:1]))
    crossings: dict[int, list[float]] = {}
    for (x1, y1), (x2, y2) in edges:
        if y1 == y2:
            continue
        lo, hi = (y1, y2) if y1 < y2 else (y2, y1)
        for y in range(max(lo, 0), min(hi, height)):  # half-open [lo, hi)
            crossings.setdefault(y, []).append(x1 + (y - y1) * (x2 - x1) / (y2 - y1))
    for y, xs in crossings.items():
        xs.sort()
        for xa, xb in zip(xs[::2], xs[1::2]):
            left = max(int(np.ceil(xa)), 0)
            right = min(int(np.floor(xb)), width - 1)
            if left <= right:
                bits[y, left:right + 1] = True
    for (x1, y1), (x2, y2) in edges:
        for x, y in _bresenham(x1, y1, x2, y2):
            if 0 <= x < width and 0 <= y < height:
                bits[y, x] = True
    return BinaryMask(bits)


def _bresenham(x1: int, y1: int, x2: int, y2: int):
    dx, dy = abs(x2 - x1), -abs(y2 - y1)
    sx = 1 if x1 < x2 else -1
    sy = 1 if y1 < y2 else -1
    err = dx + dy
    x, y = x1, y1
    while True:
        yield x, y
        if x == x2 and y == y2:
            return
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


def trim_region(mask: BinaryMask, h_margin: int = TRIM_MARGIN, v_margin: int = TRIM_MARGIN) -> BinaryMask:
    """Clear pixels within the margins of the true region's bounding box."""
    if h_margin < 0 or v_margin < 0:
        raise DomainError("margins must be >= 0")
    bits = mask.bits
    ys, xs = np.nonzero(bits)
    if len(xs) == 0:
        return BinaryMask(bits.copy())
    xmin, xmax = int(xs.min()), int(xs.max())
    ymin, ymax = int(ys.min()), int(ys.max())
    if 2 * h_margin >= xmax - xmin + 1 or 2 * v_margin >= ymax - ymin + 1:
        raise DomainError("margins exceed half the region size")
    out = bits.copy()
    out[:, :xmin + h_margin] = False
    out[:, xmax - h_margin + 1:] = False
    out[:ymin + v_margin, :] = False
    out[ymax - v_margin + 1:, :] = False
    return BinaryMask(out)


def depth_filter(d: DepthImage, min_mm: float = DEPTH_MIN_MM, max_mm: float = DEPTH_MAX_MM) -> BinaryMask:
    """Pixels within [min_mm, max_mm] inclusive; zero-depth pixels are invalid."""
    if not min_mm < max_mm:
        raise DomainError(f"need min_mm < max_mm, got {min_mm} >= {max_mm}")
    v = d.values
    return BinaryMask((v >= min_mm) & (v <= max_mm) & (v > 0))


def occupancy(workspace: BinaryMask, objects: BinaryMask) -> OccupancyResult:
    """Ratio of object pixels inside the workspace to workspace pixels."""
    if workspace.bits.shape != objects.bits.shape:
        raise DomainError(f"mask shapes differ: {workspace.bits.shape} vs {objects.bits.shape}")
    total = workspace.count()
    if total == 0:
        raise DomainError("workspace mask is empty")
    hit = int(np.count_nonzero(workspace.bits & objects.bits))
    return OccupancyResult(total, hit, hit / total)


def workspace_from_mask(gray, threshold: float = 128,
                        epsilon: float = CONTOUR_EPSILON,
                        h_margin: int = TRIM_MARGIN,
                        v_margin: int = TRIM_MARGIN) -> BinaryMask:
    """Workspace pixels: binarize, take the largest outer contour, fill, trim."""
    mask = binarize(gray, threshold)
    contours = extract_outer_contours(mask)
    if not contours:
        raise DomainError("no workspace contour found")
    region = compress_contour(largest_contour(contours), epsilon)
    filled = fill_contour(region, mask.width, mask.height)
    return trim_region(filled, h_margin, v_margin)


def scene_occupancy(depth: DepthImage, workspace_gray,
                    min_mm: float = DEPTH_MIN_MM, max_mm: float = DEPTH_MAX_MM,
                    mask_threshold: float = 128,
                    h_margin: int = TRIM_MARGIN, v_margin: int = TRIM_MARGIN) -> OccupancyResult:
    """Full occupancy pipeline from a depth image and a workspace mask image."""
    workspace = workspace_from_mask(workspace_gray, mask_threshold,
                                    h_margin=h_margin, v_margin=v_margin)
    objects = depth_filter(depth, min_mm, max_mm)
    return occupancy(workspace, objects)


def clutter_score(state: ClutterState | None, initial_scene_count: int | None = None) -> float:
    """Clutter score: object ratio times occupancy ratio, clamped to [0, 1].

    Single-object scenes (initial count 1) score 0 by definition; `state` may
    be omitted in that case.
    """
    if initial_scene_count is None:
        if state is None:
            raise DomainError("clutter state required when initial_scene_count is not given")
        initial_scene_count = state.n_initial
    if initial_scene_count <= 0:
        raise DomainError(f"initial scene count must be >= 1, got {initial_scene_count}")
    if initial_scene_count == 1:
        return 0.0
    if state is None:
        raise DomainError("clutter state required for multi-object scenes")
    value = (state.n_before / state.n_initial) * (state.o_before / state.o_initial)
    return float(min(max(value, 0.0), 1.0))
