import numpy as np
import pytest
from hypothesis import given, strategies as st

from grab_bench.errors import (DomainError, InvalidDepthError, InvalidPoseError,
                               InvalidRotationError)
from grab_bench.geometry import (CameraIntrinsics, ExecutablePose, KinematicChain,
                                 ParallelGraspPose, Quaternion, RigidTransform,
                                 SuctionPose, WorkbenchPlane, approach_angle,
                                 camera_to_world, compose_chain, filter_poses,
                                 final_grasp_score, grasp_to_executable,
                                 pixel_to_camera, poses_from_json, poses_to_json,
                                 pre_grasp_offset, rotation_to_quaternion)
from conftest import random_rigid, random_rotation, rotation_about_z

GROUND = WorkbenchPlane(np.array([0.0, 0.0, 1.0]), 0.0)


def make_pose(translation, approach=(0.0, 0.0, -1.0), quality=0.5) -> ExecutablePose:
    a = np.asarray(approach, dtype=float)
    a = a / np.linalg.norm(a)
    # build a frame with +z = approach
    ref = np.array([1.0, 0.0, 0.0])
    if abs(np.dot(ref, a)) > 0.99:
        ref = np.array([0.0, 1.0, 0.0])
    x = ref - np.dot(ref, a) * a
    x /= np.linalg.norm(x)
    y = np.cross(a, x)
    r = np.column_stack([x, y, a])
    return ExecutablePose(np.asarray(translation, dtype=float),
                          rotation_to_quaternion(r), quality)


class TestPixelToCamera:
    def test_principal_point_ray(self):
        intr = CameraIntrinsics(600, 600, 320, 240)
        assert np.allclose(pixel_to_camera(intr, 320, 240, 1.0), [0, 0, 1.0])

    def test_unit_offset(self):
        intr = CameraIntrinsics(600, 600, 320, 240)
        assert np.allclose(pixel_to_camera(intr, 920, 240, 1.0), [1.0, 0, 1.0])

    def test_hand_evaluated_backprojection(self):
        intr = CameraIntrinsics(600, 500, 300, 200)
        assert np.allclose(pixel_to_camera(intr, 450, 450, 2.0), [0.5, 1.0, 2.0])

    def test_rejects_nonpositive_depth(self):
        intr = CameraIntrinsics(600, 600, 320, 240)
        with pytest.raises(InvalidDepthError):
            pixel_to_camera(intr, 320, 240, 0.0)
        with pytest.raises(InvalidDepthError):
            pixel_to_camera(intr, 320, 240, -0.5)

    def test_rejects_nonpositive_focal(self):
        with pytest.raises(DomainError):
            CameraIntrinsics(0, 600, 320, 240)


class TestComposeChain:
    def test_identity_chain(self):
        eye = RigidTransform.identity()
        out = compose_chain(KinematicChain((eye, eye)))
        assert np.allclose(out.rotation, np.eye(3))
        assert np.allclose(out.translation, 0)

    def test_inverse_cancellation(self, rng):
        t = random_rigid(rng)
        out = compose_chain(KinematicChain((t, t.inverse())))
        assert np.allclose(out.rotation, np.eye(3), atol=1e-12)
        assert np.allclose(out.translation, 0, atol=1e-12)

    def test_matches_direct_matrix_product(self, rng):
        # oracle: multiply 4x4 homogeneous matrices directly
        links = [random_rigid(rng) for _ in range(3)]
        homo = np.eye(4)
        for t in links:
            m = np.eye(4)
            m[:3, :3] = t.rotation
            m[:3, 3] = t.translation
            homo = homo @ m
        out = compose_chain(KinematicChain(tuple(links)))
        assert np.allclose(out.rotation, homo[:3, :3], atol=1e-12)
        assert np.allclose(out.translation, homo[:3, 3], atol=1e-12)

    def test_associativity(self, rng):
        links = [random_rigid(rng) for _ in range(4)]
        left = compose_chain(KinematicChain((compose_chain(KinematicChain(links[:2])),
                                             compose_chain(KinematicChain(links[2:])))))
        right = compose_chain(KinematicChain(tuple(links)))
        assert np.allclose(left.rotation, right.rotation, atol=1e-12)
        assert np.allclose(left.translation, right.translation, atol=1e-12)

    def test_empty_chain_rejected(self):
        with pytest.raises(DomainError):
            KinematicChain(())


class TestCameraToWorld:
    def test_identity(self):
        assert np.allclose(camera_to_world(RigidTransform.identity(), [1, 2, 3]), [1, 2, 3])

    def test_pure_translation(self):
        t = RigidTransform(np.eye(3), [0.1, 0, 0])
        assert np.allclose(camera_to_world(t, [0, 0, 0]), [0.1, 0, 0])

    def test_z_rotation_oracle(self):
        t = RigidTransform(rotation_about_z(np.pi / 2), np.zeros(3))
        assert np.allclose(camera_to_world(t, [1, 0, 0]), [0, 1, 0], atol=1e-12)


class TestRotationQuaternion:
    def test_identity(self):
        q = rotation_to_quaternion(np.eye(3))
        assert (q.x, q.y, q.z, q.w) == (0, 0, 0, 1)

    def test_half_turn_about_z(self):
        q = rotation_to_quaternion(rotation_about_z(np.pi))
        assert np.allclose([q.x, q.y, q.z, q.w], [0, 0, 1, 0], atol=1e-12)

    def test_round_trip_random(self, rng):
        for _ in range(100):
            r = random_rotation(rng)
            q = rotation_to_quaternion(r)
            assert np.max(np.abs(q.to_rotation() - r)) < 1e-9
            assert q.w >= 0

    def test_round_trip_from_quaternion(self, rng):
        # quaternion -> matrix -> quaternion is identity on canonical quaternions
        for _ in range(100):
            v = rng.normal(size=4)
            v /= np.linalg.norm(v)
            if v[3] < 0:
                v = -v
            q = Quaternion(*v)
            q2 = rotation_to_quaternion(q.to_rotation())
            assert np.allclose([q.x, q.y, q.z, q.w], [q2.x, q2.y, q2.z, q2.w], atol=1e-9)

    def test_rejects_non_rotation(self):
        with pytest.raises(InvalidRotationError):
            rotation_to_quaternion(np.diag([1.0, 1.0, 2.0]))
        with pytest.raises(InvalidRotationError):
            rotation_to_quaternion(np.diag([1.0, 1.0, -1.0]))  # det -1


class TestFinalGraspScore:
    def test_arithmetic(self):
        assert final_grasp_score(0.8, 0.25, False) == pytest.approx(0.6)

    def test_collision_zeroes(self):
        assert final_grasp_score(0.9, 0.1, True) == 0.0
        assert final_grasp_score(1.0, 0.0, True) == 0.0

    def test_identity_case(self):
        assert final_grasp_score(1.0, 0.0, False) == 1.0

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            final_grasp_score(1.2, 0.0, False)
        with pytest.raises(DomainError):
            final_grasp_score(0.5, -0.1, False)

    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
    def test_monotonicity(self, a, b, s):
        lo, hi = sorted((a, b))
        assert final_grasp_score(lo, s, False) <= final_grasp_score(hi, s, False)
        assert final_grasp_score(s, lo, False) >= final_grasp_score(s, hi, False)


class TestGraspToExecutable:
    def test_parallel_identity(self):
        g = ParallelGraspPose(np.eye(3), [0, 0, 0.5], 0.08, 0.9, 0.2)
        pose = grasp_to_executable(g, RigidTransform.identity())
        assert np.allclose(pose.translation, [0, 0, 0.5])
        assert (pose.orientation.x, pose.orientation.y,
                pose.orientation.z, pose.orientation.w) == (0, 0, 0, 1)
        assert pose.quality == pytest.approx(0.9 * 0.8)

    def test_suction_approach_into_surface(self):
        g = SuctionPose([0, 0, 0.3], [0, 0, 1.0], 0.7)
        pose = grasp_to_executable(g, RigidTransform.identity())
        # orientation's z axis maps to -z (into the surface)
        assert np.allclose(pose.approach_axis, [0, 0, -1], atol=1e-12)
        assert np.allclose(pose.translation, [0, 0, 0.3])
        assert pose.quality == 0.7

    def test_translation_matches_camera_to_world(self, rng):
        t = random_rigid(rng)
        g = ParallelGraspPose(random_rotation(rng), [0.1, -0.2, 0.6], 0.05, 0.8, 0.1)
        pose = grasp_to_executable(g, t)
        assert np.allclose(pose.translation, camera_to_world(t, g.center), atol=1e-12)

    def test_suction_frame_is_right_handed(self, rng):
        for _ in range(50):
            d = rng.normal(size=3)
            d /= np.linalg.norm(d)
            g = SuctionPose([0, 0, 0.3], d, 0.5)
            pose = grasp_to_executable(g, random_rigid(rng))
            r = pose.orientation.to_rotation()
            assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-9)

    def test_zero_direction_rejected(self):
        with pytest.raises(InvalidPoseError):
            SuctionPose([0, 0, 0.3], [0, 0, 0], 0.5)


class TestApproachAngle:
    def test_perpendicular_descent(self):
        pose = make_pose([0, 0, 0.3], approach=(0, 0, -1))
        assert approach_angle(pose, GROUND) == pytest.approx(90.0)

    def test_in_plane(self):
        pose = make_pose([0, 0, 0.3], approach=(1, 0, 0))
        assert approach_angle(pose, GROUND) == pytest.approx(0.0)

    def test_45_degrees(self):
        pose = make_pose([0, 0, 0.3], approach=(1, 0, -1))
        assert approach_angle(pose, GROUND) == pytest.approx(45.0, abs=1e-9)

    def test_invariant_under_normal_scaling(self):
        pose = make_pose([0, 0, 0.3], approach=(1, 0, -1))
        scaled = WorkbenchPlane([0, 0, 7.0], 0.0)
        assert approach_angle(pose, scaled) == pytest.approx(approach_angle(pose, GROUND), abs=1e-9)

    def test_invariant_under_common_rigid_motion(self, rng):
        pose = make_pose([0.1, 0.2, 0.3], approach=(1, 1, -1), quality=0.4)
        base = approach_angle(pose, GROUND)
        for _ in range(20):
            t = random_rigid(rng)
            moved_pose = ExecutablePose(
                t.apply(pose.translation),
                rotation_to_quaternion(t.rotation @ pose.orientation.to_rotation()),
                pose.quality)
            moved_plane = GROUND.transform(t)
            assert approach_angle(moved_pose, moved_plane) == pytest.approx(base, abs=1e-9)


class TestFilterPoses:
    def test_caps_at_top_eight(self):
        poses = [make_pose([0, 0, 0.3], quality=0.1 + 0.05 * i) for i in range(10)]
        out = filter_poses(poses, GROUND)
        assert len(out) == 8
        qualities = [p.quality for p in out]
        assert qualities == sorted(qualities, reverse=True)
        # the two weakest candidates were cut before filtering
        assert min(qualities) == pytest.approx(0.2)

    def test_shallow_angle_excluded(self):
        pose = make_pose([0, 0, 0.3], approach=(1, 0, -0.2))
        assert approach_angle(pose, GROUND) < 30
        assert filter_poses([pose], GROUND) == []

    def test_clearance_excluded(self):
        low = make_pose([0, 0, 0.01], quality=0.9)
        high = make_pose([0, 0, 0.10], quality=0.8)
        out = filter_poses([low, high], GROUND, gripper_clearance=0.02)
        assert out == [high]

    def test_equal_quality_preserves_input_order(self):
        a = make_pose([0, 0, 0.3], quality=0.5)
        b = make_pose([0, 0, 0.4], quality=0.5)
        c = make_pose([0, 0, 0.5], quality=0.5)
        assert filter_poses([a, b, c], GROUND) == [a, b, c]

    def test_output_subset_sorted(self, rng):
        poses = [make_pose([0, 0, float(rng.uniform(0, 0.5))],
                           approach=(rng.normal(), rng.normal(), -abs(rng.normal()) - 0.1),
                           quality=float(rng.uniform()))
                 for _ in range(20)]
        out = filter_poses(poses, GROUND)
        assert len(out) <= 8
        assert all(p in poses for p in out)
        qs = [p.quality for p in out]
        assert qs == sorted(qs, reverse=True)


class TestPreGraspOffset:
    def test_backs_off_along_approach(self):
        pose = make_pose([0, 0, 0.2], approach=(0, 0, -1))
        out = pre_grasp_offset(pose, 0.1)
        assert np.allclose(out.translation, [0, 0, 0.3])
        assert out.orientation == pose.orientation

    def test_zero_distance_rejected(self):
        pose = make_pose([0, 0, 0.2])
        with pytest.raises(DomainError):
            pre_grasp_offset(pose, 0.0)

    def test_round_trip(self, rng):
        for _ in range(20):
            pose = make_pose(rng.normal(size=3), approach=rng.normal(size=3) - [0, 0, 2])
            d = float(rng.uniform(0.01, 0.3))
            back = pre_grasp_offset(pose, d)
            forward = back.translation + d * back.approach_axis
            assert np.allclose(forward, pose.translation, atol=1e-12)


class TestPoseSerialization:
    def test_round_trip(self, rng):
        poses = [make_pose(rng.normal(size=3), approach=(0.3, -0.2, -1.0),
                           quality=float(rng.uniform())) for _ in range(5)]
        out = poses_from_json(poses_to_json(poses))
        assert out == poses

    def test_shape(self):
        text = poses_to_json([make_pose([0, 0, 0.5], quality=0.25)])
        import json
        rows = json.loads(text)
        assert set(rows[0]) == {"translation", "quaternion", "quality"}
        assert len(rows[0]["translation"]) == 3
        assert len(rows[0]["quaternion"]) == 4
