"""Object-quality scoring from point clouds.

Pipeline: coarse principal-axis alignment, point-to-point ICP refinement, then
the density-aware chamfer distance (DCD) averaged over the two compression
axes to produce the object score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DataError, DegenerateGeometryError, DomainError
from .geometry import RigidTransform

DEFAULT_ALPHA = 40.0
ICP_MAX_ITERATIONS = 50
ICP_TOLERANCE = 1e-6
VOXEL_THIN_THRESHOLD = 50_000
VOXEL_THIN_SIZE = 0.002  # meters


@dataclass(frozen=True)
class PointCloud:
    """Unordered 3D point set, meters."""

    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 2 or p.shape[1] != 3:
            p = p.reshape(-1, 3)
        if not np.all(np.isfinite(p)):
            raise DataError("point cloud contains non-finite coordinates")
        object.__setattr__(self, "points", p)

    def __len__(self) -> int:
        return self.points.shape[0]

    def transformed(self, t: RigidTransform) -> "PointCloud":
        return PointCloud(t.apply(self.points))


@dataclass(frozen=True)
class DcdParams:
    """Sensitivity scalar for the chamfer exponential."""

    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if self.alpha <= 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")


@dataclass(frozen=True)
class AlignmentResult:
    transform: RigidTransform
    rms_residual: float
    iterations: int
    converged: bool
    residual_history: tuple[float, ...]


@dataclass(frozen=True)
class ObjectScoreInput:
    """Pre-grasp cloud plus the clouds compressed along the x and y planes."""

    pre_grasp: PointCloud
    deformed_x: PointCloud
    deformed_y: PointCloud

    def __post_init__(self):
        for name in ("pre_grasp", "deformed_x", "deformed_y"):
            if len(getattr(self, name)) == 0:
                raise DomainError(f"{name} cloud is empty")


def _require_points(cloud: PointCloud, name: str) -> np.ndarray:
    if len(cloud) == 0:
        raise DomainError(f"{name} cloud is empty")
    return cloud.points


def nearest_neighbor(query, cloud: PointCloud) -> tuple[int, float]:
    """Index and distance of the closest cloud point; ties go to the smallest index."""
    pts = _require_points(cloud, "search")
    d = np.linalg.norm(pts - np.asarray(query, dtype=float), axis=1)
    idx = int(np.argmin(d))
    return idx, float(d[idx])


def _nearest_bulk(queries: np.ndarray, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """KD-tree nearest neighbour for many queries: (distances, indices)."""
    dist, idx = cKDTree(points).query(queries, k=1)
    return np.asarray(dist, dtype=float), np.asarray(idx, dtype=int)


def density_counts(s1: PointCloud, s2: PointCloud) -> np.ndarray:
    """Reverse-match counts for s2: how many s1 points pick each s2 point as
    nearest neighbour, clamped to a minimum of 1."""
    p1 = _require_points(s1, "s1")
    p2 = _require_points(s2, "s2")
    _, idx = _nearest_bulk(p1, p2)
    counts = np.bincount(idx, minlength=len(p2))
    return np.maximum(counts, 1)


def dcd(s1: PointCloud, s2: PointCloud, params: DcdParams = DcdParams()) -> float:
    """Density-aware chamfer distance in [0, 1]; 0 for identical clouds.

    Each directed term averages 1 − exp(−alpha·d)/n̂ over the cloud, where n̂
    is the reverse-match count of the matched point; the two directions are
    averaged, making the metric symmetric.
    """
    p1 = _require_points(s1, "s1")
    p2 = _require_points(s2, "s2")
    d12, i12 = _nearest_bulk(p1, p2)
    d21, i21 = _nearest_bulk(p2, p1)
    n2 = np.maximum(np.bincount(i12, minlength=len(p2)), 1)
    n1 = np.maximum(np.bincount(i21, minlength=len(p1)), 1)
    term12 = np.mean(1.0 - np.exp(-params.alpha * d12) / n2[i12])
    term21 = np.mean(1.0 - np.exp(-params.alpha * d21) / n1[i21])
    return float(0.5 * (term12 + term21))


def _principal_basis(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Centroid and sign-canonicalized principal axes (columns, variance-descending)."""
    centroid = points.mean(axis=0)
    centered = points - centroid
    cov = centered.T @ centered / len(points)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    axes = evecs[:, order]
    if evals[0] <= 0 or evals[2] / evals[0] < 1e-9:
        raise DegenerateGeometryError("point cloud covariance is rank deficient (coplanar or collinear)")
    # Canonicalize axis signs from third moments of the projections so the
    # basis is rotation-equivariant; symmetric axes fall back to the largest
    # absolute component.
    moments = np.empty(3)
    for k in range(3):
        proj = centered @ axes[:, k]
        m3 = float(np.sum(proj ** 3))
        moments[k] = m3
        if m3 < 0 or (m3 == 0 and axes[np.argmax(np.abs(axes[:, k])), k] < 0):
            axes[:, k] = -axes[:, k]
            moments[k] = -m3
    if np.linalg.det(axes) < 0:
        k = int(np.argmin(np.abs(moments)))
        axes[:, k] = -axes[:, k]
    return centroid, axes


def pca_align(source: PointCloud, target: PointCloud) -> RigidTransform:
    """Coarse registration mapping source's centroid and principal axes onto target's."""
    ps = _require_points(source, "source")
    pt = _require_points(target, "target")
    if len(ps) < 4 or len(pt) < 4:
        raise DegenerateGeometryError("principal-axis alignment needs at least 4 points per cloud")
    cs, bs = _principal_basis(ps)
    ct, bt = _principal_basis(pt)
    rotation = bt @ bs.T
    return RigidTransform(rotation, ct - rotation @ cs)


def _best_fit_rigid(source: np.ndarray, target: np.ndarray) -> RigidTransform:
    """Least-squares rigid transform source→target via SVD of the cross-covariance."""
    cs = source.mean(axis=0)
    ct = target.mean(axis=0)
    h = (source - cs).T @ (target - ct)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rotation = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return RigidTransform(rotation, ct - rotation @ cs)


def voxel_thin(cloud: PointCloud, voxel: float = VOXEL_THIN_SIZE) -> PointCloud:
    """Uniform thinning: keep the first point in each voxel, input order preserved."""
    pts = cloud.points
    keys = np.floor(pts / voxel).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    return PointCloud(pts[np.sort(first)])


def icp(source: PointCloud, target: PointCloud,
        init: RigidTransform | None = None,
        max_iterations: int = ICP_MAX_ITERATIONS,
        tolerance: float = ICP_TOLERANCE) -> AlignmentResult:
    """Point-to-point ICP refining `init` so source maps onto target.

    Alternates nearest-neighbour correspondence with the closed-form rigid
    update; the RMS nearest-neighbour residual is non-increasing across
    iterations. Convergence when the residual improves by less than
    `tolerance` between iterations.
    """
    src = _require_points(source, "source")
    tgt = _require_points(target, "target")
    if len(src) > VOXEL_THIN_THRESHOLD:
        src = voxel_thin(PointCloud(src)).points
    if len(tgt) > VOXEL_THIN_THRESHOLD:
        tgt = voxel_thin(PointCloud(tgt)).points
    transform = init if init is not None else RigidTransform.identity()
    tree = cKDTree(tgt)

    def residual_and_matches(t: RigidTransform) -> tuple[float, np.ndarray]:
        dist, idx = tree.query(t.apply(src), k=1)
        return float(np.sqrt(np.mean(np.square(dist)))), np.asarray(idx, dtype=int)

    rms, idx = residual_and_matches(transform)
    history = [rms]
    converged = False
    iterations = 0
    for _ in range(max_iterations):
        candidate = _best_fit_rigid(src, tgt[idx])
        new_rms, new_idx = residual_and_matches(candidate)
        if new_rms <= rms:
            transform, idx = candidate, new_idx
        else:
            new_rms = rms  # keep the current transform; update cannot improve
        iterations += 1
        history.append(new_rms)
        if rms - new_rms < tolerance:
            rms = new_rms
            converged = True
            break
        rms = new_rms
    return AlignmentResult(transform, rms, iterations, converged, tuple(history))


def aligned_dcd(deformed: PointCloud, reference: PointCloud,
                params: DcdParams = DcdParams()) -> float:
    """DCD after registering `deformed` onto `reference` (coarse PCA then ICP)."""
    coarse = pca_align(deformed, reference)
    refined = icp(deformed, reference, init=coarse)
    return dcd(deformed.transformed(refined.transform), reference, params)


def object_score(inp: ObjectScoreInput, params: DcdParams = DcdParams()) -> float:
    """Mean DCD of the two aligned deformed clouds against the pre-grasp cloud."""
    dx = aligned_dcd(inp.deformed_x, inp.pre_grasp, params)
    dy = aligned_dcd(inp.deformed_y, inp.pre_grasp, params)
    return float((dx + dy) / 2.0)
