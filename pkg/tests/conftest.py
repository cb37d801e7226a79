import numpy as np
import pytest

from grab_bench.geometry import RigidTransform


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform-ish random rotation via QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_rigid(rng: np.random.Generator, translation_scale: float = 1.0) -> RigidTransform:
    return RigidTransform(random_rotation(rng), rng.normal(scale=translation_scale, size=3))


def rotation_about_z(angle_rad: float) -> np.ndarray:
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def asymmetric_cloud(rng: np.random.Generator, n: int = 500) -> np.ndarray:
    """Anisotropic, skewed cloud so principal axes and their signs are well-defined."""
    pts = rng.normal(size=(n, 3)) * np.array([0.08, 0.03, 0.012])
    pts[:, 0] += 0.04 * np.abs(pts[:, 1]) / 0.03   # skew breaks mirror symmetry
    pts[:, 1] += 0.3 * pts[:, 0]
    pts[:, 2] += 0.02 * np.square(pts[:, 0]) / 0.08
    return pts


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
