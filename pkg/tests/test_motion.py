import json

import numpy as np
import pytest

from motionfield import rotations as rot
from motionfield.kinematics import forward_kinematics
from motionfield.motion import (MotionSequence, MotionError, TrajectorySpec, canonicalize,
                                decanonicalize, facing_direction, heading_angle, load_motion,
                                resample, save_motion, NEUTRAL_ROOT)
from motionfield.synth import GaitParams, biped_skeleton, generate_walk
from test_rotations import random_rotation


def small_walk(frames=32, fps=30.0, **kw):
    return generate_walk(GaitParams(**kw), frames, fps)


def raw_sequence(rng, frames=8):
    """Non-canonical sequence: root rotation in xr[0], identity ro."""
    sk = biped_skeleton()
    xr = np.zeros((frames, sk.n_joints, 6))
    for t in range(frames):
        for j in range(sk.n_joints):
            xr[t, j] = rot.matrix_to_rot6d(random_rotation(rng))
    ro = np.tile(rot.IDENTITY_6D, (frames, 1))
    root = rng.normal(size=(frames, 3)) * 10
    return MotionSequence.from_rotations(sk, 30.0, xr, ro, root)


class TestInvariants:
    def test_xp_is_fk_at_origin(self):
        seq = small_walk()
        mats = seq.local_rotation_matrices()
        recomputed = forward_kinematics(seq.skeleton, mats, np.zeros((seq.n_frames, 3)))
        assert np.max(np.abs(seq.xp - recomputed)) <= 1e-6

    def test_velocities_self_consistent(self):
        from motionfield.kinematics import finite_difference_velocity
        seq = small_walk()
        again = finite_difference_velocity(seq.xp, 1.0 / seq.fps)
        assert np.array_equal(seq.xpv, again)

    def test_root_height_is_vertical_component(self):
        seq = small_walk()
        assert np.array_equal(seq.root_height, seq.root_pos[:, 2])

    def test_save_load_bit_exact(self, tmp_path):
        seq = small_walk()
        path = tmp_path / "walk.motion.json"
        save_motion(seq, path)
        back = load_motion(path)
        assert np.array_equal(back.xr, seq.xr)
        assert np.array_equal(back.ro, seq.ro)
        assert np.array_equal(back.root_pos, seq.root_pos)
        assert back.fps == seq.fps
        # derived data recomputed identically
        assert np.array_equal(back.xp, seq.xp)

    def test_version_checked(self, tmp_path):
        seq = small_walk()
        d = seq.to_dict()
        d["version"] = 99
        with pytest.raises(MotionError):
            MotionSequence.from_dict(d)

    def test_too_few_frames(self):
        sk = biped_skeleton()
        with pytest.raises(MotionError):
            MotionSequence.from_rotations(
                sk, 30.0, np.tile(rot.IDENTITY_6D, (1, sk.n_joints, 1)),
                np.tile(rot.IDENTITY_6D, (1, 1)), np.zeros((1, 3)))


class TestCanonicalize:
    def test_already_canonical_unchanged(self):
        seq = small_walk()
        assert seq.is_canonical()
        out = canonicalize(seq)
        assert np.max(np.abs(out.xr - seq.xr)) <= 1e-9
        assert np.max(np.abs(out.ro - seq.ro)) <= 1e-9

    def test_pre_rotation_moves_into_ro(self):
        rng = np.random.default_rng(0)
        raw = raw_sequence(rng)
        pre = rot.rotation_z(np.pi / 2)
        xr2 = raw.xr.copy()
        mats0 = rot.rot6d_to_matrix(raw.xr[:, 0])
        xr2[:, 0] = rot.matrix_to_rot6d(pre @ mats0)
        rotated = MotionSequence.from_rotations(
            raw.skeleton, raw.fps, xr2, raw.ro.copy(),
            (pre @ raw.root_pos.T).T)
        ca, cb = canonicalize(raw), canonicalize(rotated)
        # identical local motion
        assert np.max(np.abs(ca.xr - cb.xr)) <= 1e-9
        assert np.max(np.abs(ca.xp - cb.xp)) <= 1e-9
        # ro differs by exactly the pre-rotation
        ra = ca.root_orientation_matrices()
        rb = cb.root_orientation_matrices()
        assert np.max(np.abs(rb - pre @ ra)) <= 1e-9

    def test_roundtrip(self):
        rng = np.random.default_rng(1)
        raw = raw_sequence(rng)
        back = decanonicalize(canonicalize(raw))
        assert np.max(np.abs(back.xr - raw.xr)) <= 1e-6
        # world positions preserved through both directions
        assert np.max(np.abs(back.world_positions() - raw.world_positions())) <= 1e-6


class TestResample:
    def test_endpoints_preserved(self):
        seq = small_walk()
        out = resample(seq, 24.0)
        assert np.max(np.abs(out.xr[0] - seq.xr[0])) <= 1e-9
        assert np.max(np.abs(out.xr[-1] - seq.xr[-1])) <= 1e-9
        assert np.allclose(out.root_pos[0], seq.root_pos[0])
        assert np.allclose(out.root_pos[-1], seq.root_pos[-1])

    def test_double_then_decimate(self):
        seq = small_walk()
        doubled = resample(seq, 60.0)
        assert doubled.n_frames == 2 * seq.n_frames - 1
        back = MotionSequence.from_rotations(
            seq.skeleton, seq.fps, doubled.xr[::2], doubled.ro[::2], doubled.root_pos[::2])
        assert np.max(np.abs(back.xr - seq.xr)) <= 1e-9
        assert np.max(np.abs(back.root_pos - seq.root_pos)) <= 1e-9

    def test_midpoint_half_angle(self):
        sk = biped_skeleton()
        angle = 0.8
        xr = np.tile(rot.IDENTITY_6D, (2, sk.n_joints, 1))
        xr[1, 1] = rot.matrix_to_rot6d(rot.rotation_z(angle))
        ro = np.tile(rot.matrix_to_rot6d(NEUTRAL_ROOT), (2, 1))
        seq = MotionSequence.from_rotations(sk, 30.0, xr, ro, np.zeros((2, 3)))
        out = resample(seq, 60.0)
        mid = rot.rot6d_to_matrix(out.xr[1, 1])
        assert np.max(np.abs(mid - rot.rotation_z(angle / 2))) <= 1e-9

    def test_bad_fps(self):
        with pytest.raises(MotionError):
            resample(small_walk(), 0.0)


class TestFacing:
    def test_neutral_faces_plus_y(self):
        f = facing_direction(NEUTRAL_ROOT[None])
        assert np.allclose(f, [[0.0, 1.0]])
        assert abs(heading_angle(f[0])) < 1e-12

    def test_heading_tracks_z_rotation(self):
        for phi in [-1.2, -0.3, 0.0, 0.4, 2.0]:
            ro = rot.rotation_z(phi) @ NEUTRAL_ROOT
            f = facing_direction(ro[None])[0]
            assert abs(heading_angle(f) - phi) < 1e-12

    def test_degenerate_falls_back(self):
        f = facing_direction(np.eye(3)[None])
        assert np.allclose(f, [[0.0, 1.0]])


class TestTrajectorySpec:
    def test_tangents_unit_and_reused(self):
        pts = np.array([[0.0, 0], [1, 0], [1, 0], [2, 0], [2, 1]])
        spec = TrajectorySpec(points=pts)
        norms = np.linalg.norm(spec.tangents, axis=1)
        assert np.allclose(norms, 1.0)
        # repeated point reuses the previous tangent (central diff skips it anyway)
        assert np.allclose(spec.tangents[0], [1, 0])

    def test_polyline_resample_count_and_spacing(self):
        spec = TrajectorySpec.from_polyline([[0.0, 0.0], [10.0, 0.0]], frames=6)
        assert spec.n_frames == 6
        assert np.allclose(spec.points[:, 0], np.linspace(0, 10, 6))
        assert np.allclose(spec.points[:, 1], 0.0)

    def test_polyline_multi_segment(self):
        spec = TrajectorySpec.from_polyline([[0, 0], [1, 0], [1, 1]], frames=5)
        assert spec.n_frames == 5
        seg = np.linalg.norm(np.diff(spec.points, axis=0), axis=1)
        assert np.allclose(seg, 0.5)

    def test_too_short(self):
        with pytest.raises(MotionError):
            TrajectorySpec(points=np.zeros((1, 2)))

    def test_json_roundtrip(self):
        spec = TrajectorySpec.from_polyline([[0, 0], [5, 5]], frames=4)
        again = TrajectorySpec(points=json.loads(json.dumps(spec.to_list())))
        assert np.array_equal(again.points, spec.points)
