import numpy as np
import pytest

from motionfield import autodiff as ad
from motionfield.features import local_feature_matrix
from motionfield.globalmotion import (GlobalMotionConfig, GlobalMotionModel,
                                      GlobalTrainConfig, GlobalTrainingDivergedError,
                                      integrate_trajectory, predict_root,
                                      predict_root_sequence, train_global)
from motionfield.generative import sample_prior
from motionfield.rotations import rot6d_to_matrix
from motionfield.synth import GaitParams, generate_idle, generate_walk


class TestIntegration:
    def test_zero_velocity_constant(self):
        v = np.zeros((10, 3))
        h = np.full(10, 85.0)
        path = integrate_trajectory(v, h, 30.0, np.array([3.0, 4.0, 0.0]))
        assert np.allclose(path[:, 0], 3.0) and np.allclose(path[:, 1], 4.0)
        assert np.allclose(path[:, 2], 85.0)

    def test_constant_velocity_per_frame_step(self):
        v = np.tile([30.0, 0.0, 0.0], (6, 1))
        path = integrate_trajectory(v, np.zeros(6), 30.0, np.zeros(3))
        assert np.allclose(path[:, 0], np.arange(6) * 1.0)

    def test_linear_in_velocity(self):
        rng = np.random.default_rng(0)
        v = rng.normal(size=(12, 3)) * 20
        h = rng.normal(size=12)
        a = integrate_trajectory(3.0 * v, h, 30.0, np.zeros(3))
        b = integrate_trajectory(v, h, 30.0, np.zeros(3))
        assert np.allclose(a[:, :2], 3.0 * b[:, :2], atol=1e-9)

    def test_height_taken_absolutely(self):
        v = np.ones((5, 3)) * 100
        h = np.array([80, 81, 82, 83, 84.0])
        path = integrate_trajectory(v, h, 30.0, np.zeros(3))
        assert np.array_equal(path[:, 2], h)


class TestPrediction:
    def test_world_rotation_consistency(self, tiny_global, heldout):
        seq = heldout[0]
        feats = local_feature_matrix(seq, tiny_global.config.scales)
        v_world, h = predict_root(tiny_global, feats, seq.ro)
        with tiny_global.params.frozen():
            v_canon, h2 = tiny_global.forward_canonical(ad.constant(feats))
        ro = rot6d_to_matrix(seq.ro)
        expected = np.einsum("tij,tj->ti", ro, v_canon.value)
        assert np.allclose(v_world, expected, atol=1e-12)
        assert np.array_equal(h, h2.value)

    def test_walk_in_place_low_speed(self, tiny_global, tiny_dataset):
        in_place = generate_walk(GaitParams(stride_len=0.0, stride_hz=0.9), 64, 30.0)
        v, _ = predict_root_sequence(tiny_global, in_place)
        walk = generate_walk(GaitParams(stride_len=25.0, stride_hz=0.9), 64, 30.0)
        walk_speed = np.linalg.norm(np.diff(walk.root_pos[:, :2], axis=0) * 30.0, axis=1).mean()
        assert np.linalg.norm(v[:, :2], axis=1).mean() <= 0.2 * walk_speed

    def test_finite_on_prior_samples(self, tiny_generative, tiny_global):
        seq = sample_prior(tiny_generative, 1, seed=11)[0]
        v, h = predict_root_sequence(tiny_global, seq)
        assert np.all(np.isfinite(v)) and np.all(np.isfinite(h))

    def test_standing_height_near_rest(self, tiny_global):
        standing = generate_idle(GaitParams(sway=0.0, base_height=87.5, bob=0.0), 64, 30.0)
        _, h = predict_root_sequence(tiny_global, standing)
        from motionfield.synth import REST_ROOT_HEIGHT
        assert np.abs(h.mean() - REST_ROOT_HEIGHT) <= 2.0

    def test_circle_walk_path_rmse(self, tiny_global):
        params = GaitParams(stride_len=25.0, stride_hz=0.9, turn_rate=0.45)
        seq = generate_walk(params, 64, 30.0)
        radius = params.stride_len * params.stride_hz / params.turn_rate
        v, h = predict_root_sequence(tiny_global, seq)
        path = integrate_trajectory(v, h, seq.fps, seq.root_pos[0])
        rmse = np.sqrt(((path[:, :2] - seq.root_pos[:, :2]) ** 2).sum(axis=1).mean())
        assert rmse <= 0.1 * radius

    def test_height_prediction_is_local(self, tiny_global, heldout):
        # splicing different context outside the receptive field leaves the
        # center prediction unchanged
        seq_a, seq_b = heldout[0], heldout[1]
        fa = local_feature_matrix(seq_a, tiny_global.config.scales)
        fb = local_feature_matrix(seq_b, tiny_global.config.scales)
        rf = tiny_global.config.receptive_field
        pad = rf // 2 + 1
        window = slice(24, 40)
        spliced = fb.copy()
        spliced[window.start - pad:window.stop + pad] = fa[window.start - pad:window.stop + pad]
        with tiny_global.params.frozen():
            _, ha = tiny_global.forward_canonical(ad.constant(fa))
            _, hs = tiny_global.forward_canonical(ad.constant(spliced))
        assert np.allclose(ha.value[window], hs.value[window], atol=1e-9)


class TestTraining:
    def test_loss_drops_75_percent(self, tiny_dataset):
        model = GlobalMotionModel(GlobalMotionConfig(n_joints=9, hidden=24, seed=1),
                                  tiny_dataset[0].skeleton)
        hist = train_global(model, tiny_dataset[:12],
                            GlobalTrainConfig(epochs=40, batch_size=6, lr=2e-3, seed=0))
        assert hist[-1]["loss"] <= 0.25 * hist[0]["loss"]

    def test_empty_dataset_rejected(self, tiny_global):
        with pytest.raises(ValueError):
            train_global(tiny_global, [], GlobalTrainConfig(epochs=1))

    def test_seeded_reproducibility(self, tiny_dataset):
        finals = []
        for _ in range(2):
            model = GlobalMotionModel(GlobalMotionConfig(n_joints=9, hidden=16, seed=2),
                                      tiny_dataset[0].skeleton)
            hist = train_global(model, tiny_dataset[:6],
                                GlobalTrainConfig(epochs=5, batch_size=3, seed=4))
            finals.append(hist[-1]["loss"])
        assert finals[0] == finals[1]

    def test_checkpoint_roundtrip(self, tiny_global, tmp_path):
        path = tmp_path / "glob.json"
        tiny_global.save(path)
        back = GlobalMotionModel.load(path)
        for name, node in tiny_global.params.items():
            assert np.array_equal(back.params[name].value, node.value)
