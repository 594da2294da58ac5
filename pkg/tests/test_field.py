import numpy as np
import pytest

from motionfield.encoding import PositionalEncodingConfig, encode_time, frame_times
from motionfield.field import (FieldConfig, FieldModel, FitConfig, fit, field_forward,
                               mean_per_joint_speed, sample_at_fps, FitDivergedError)
from motionfield.losses import LossWeights, kl_divergence
from motionfield.metrics import mpe, mre
from motionfield import autodiff as ad
from motionfield.synth import GaitParams, biped_skeleton, generate_idle, generate_walk


@pytest.fixture(scope="module")
def walk_seq():
    return generate_walk(GaitParams(stride_len=25.0, turn_rate=0.2), 128, 30.0)


@pytest.fixture(scope="module")
def fitted(walk_seq):
    model, history = fit(walk_seq, FitConfig(epochs=500, lr=2e-3, seed=0))
    return model, history


class TestEncoding:
    def test_t0_l2(self):
        out = encode_time(np.array([0.0]), PositionalEncodingConfig(octaves=2, include_raw_t=False))
        assert np.allclose(out, [[0, 1, 0, 1]])

    def test_t1_l1(self):
        out = encode_time(np.array([1.0]), PositionalEncodingConfig(octaves=1, include_raw_t=False))
        assert np.allclose(out, [[np.sin(np.pi), np.cos(np.pi)]])
        assert abs(out[0, 0]) < 1e-12 and abs(out[0, 1] + 1) < 1e-12

    def test_dim_l7(self):
        assert PositionalEncodingConfig(octaves=7, include_raw_t=False).dim == 14
        assert PositionalEncodingConfig(octaves=7, include_raw_t=True).dim == 15

    def test_octave_bounds(self):
        with pytest.raises(ValueError):
            PositionalEncodingConfig(octaves=0)
        with pytest.raises(ValueError):
            PositionalEncodingConfig(octaves=22)

    def test_frame_times(self):
        t = frame_times(5)
        assert np.allclose(t, [-1, -0.5, 0, 0.5, 1])
        with pytest.raises(ValueError):
            frame_times(1)

    def test_differentiable_in_t(self):
        cfg = PositionalEncodingConfig(octaves=3)
        store = ad.ParamStore()
        t = store.add("t", np.array([0.3, -0.2]))
        out = encode_time(t, cfg)
        ad.backward(ad.sum_(out))
        assert t.grad is not None and np.all(np.isfinite(t.grad))


class TestForward:
    def test_fresh_model_finite(self):
        sk = biped_skeleton()
        model = FieldModel(FieldConfig(n_joints=9, frames=64, fps=30.0), sk)
        xr, ro = field_forward(model, np.array([-1.0, 0.0, 1.0]))
        assert np.all(np.isfinite(xr)) and np.all(np.isfinite(ro))
        assert xr.shape == (3, 9, 6) and ro.shape == (3, 6)

    def test_deterministic(self):
        sk = biped_skeleton()
        model = FieldModel(FieldConfig(n_joints=9, frames=64, fps=30.0), sk)
        a = field_forward(model, np.array([0.25]))
        b = field_forward(model, np.array([0.25]))
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


class TestFit:
    def test_constant_pose_converges(self):
        seq = generate_idle(GaitParams(sway=0.0, base_height=86.0, bob=0.0), 16, 30.0)
        model, _ = fit(seq, FitConfig(epochs=500, lr=2e-3, seed=0))
        recon = sample_at_fps(model, 30.0)
        assert mre(recon, seq) <= 0.1

    def test_walk_meets_error_targets(self, walk_seq, fitted):
        model, _ = fitted
        recon = sample_at_fps(model, 30.0)
        assert mre(recon, walk_seq) <= 1.0
        assert mpe(recon, walk_seq) <= 0.5

    def test_loss_decreases_below_one_percent(self, fitted):
        _, history = fitted
        assert history[-1]["total"] < 0.01 * history[0]["total"]

    def test_smoothed_history_monotone(self, fitted):
        _, history = fitted
        totals = np.array([h["total"] for h in history])
        window = 50
        smoothed = np.convolve(totals, np.ones(window) / window, mode="valid")
        # smoothed curve never rises by more than 5% of its running level
        rises = np.diff(smoothed) / smoothed[:-1]
        assert rises.max() <= 0.05

    def test_seed_reproducible(self, walk_seq):
        _, h1 = fit(walk_seq, FitConfig(epochs=20, lr=2e-3, seed=3))
        _, h2 = fit(walk_seq, FitConfig(epochs=20, lr=2e-3, seed=3))
        assert abs(h1[-1]["total"] - h2[-1]["total"]) <= 1e-12

    def test_position_weight_zero_still_converges(self, walk_seq):
        weights = LossWeights(rot=1.0, ori=1.0, pos=0.0)
        model, history = fit(walk_seq, FitConfig(epochs=300, lr=2e-3, weights=weights, seed=0))
        recon = sample_at_fps(model, 30.0)
        assert mre(recon, walk_seq) <= 2.0
        assert history[-1]["rot"] < history[0]["rot"]

    def test_divergence_aborts_with_epoch(self, walk_seq, monkeypatch):
        # rotations stay normalized through decoding, so the loss cannot blow
        # up numerically on its own; inject a NaN to exercise the abort path
        from motionfield import field as field_mod
        from motionfield import autodiff as ad_mod
        real = field_mod.reconstruction_terms
        calls = {"n": 0}

        def poisoned(*args, **kwargs):
            out = real(*args, **kwargs)
            calls["n"] += 1
            if calls["n"] >= 4:
                out["total"] = ad_mod.constant(np.nan)
            return out

        monkeypatch.setattr(field_mod, "reconstruction_terms", poisoned)
        with pytest.raises(FitDivergedError) as exc:
            fit(walk_seq, FitConfig(epochs=50, lr=2e-3, seed=0))
        assert exc.value.epoch == 3


class TestSampling:
    def test_training_fps_reproduces_fit(self, walk_seq, fitted):
        model, _ = fitted
        out = sample_at_fps(model, 30.0)
        xr, ro = field_forward(model, frame_times(128))
        assert np.array_equal(out.xr, xr)
        assert np.array_equal(out.ro, ro)
        assert np.array_equal(out.root_pos, walk_seq.root_pos)

    def test_upsampling_counts(self, fitted):
        model, _ = fitted
        assert sample_at_fps(model, 60.0).n_frames == 255
        assert sample_at_fps(model, 240.0).n_frames == 1017

    def test_displacement_bound_at_240(self, fitted):
        # adjacent-frame displacement at 240 fps stays within 4x the
        # per-frame displacement of the 30 fps sampling
        model, _ = fitted
        s30 = sample_at_fps(model, 30.0)
        s240 = sample_at_fps(model, 240.0)
        d30 = np.linalg.norm(np.diff(s30.xp, axis=0), axis=-1).mean()
        d240 = np.linalg.norm(np.diff(s240.xp, axis=0), axis=-1)
        assert np.all(np.isfinite(d240))
        assert d240.max() <= 4.0 * d30

    def test_continuity_lipschitz(self, fitted):
        model, _ = fitted
        t_grid = frame_times(model.config.frames)
        xr_grid, _ = field_forward(model, t_grid)
        frame_step = 2.0 / (model.config.frames - 1)
        rate = np.abs(np.diff(xr_grid, axis=0)).max() / frame_step
        eps = 1e-3
        rng = np.random.default_rng(0)
        ts = rng.uniform(-1, 1 - eps, size=12)
        a, _ = field_forward(model, ts)
        b, _ = field_forward(model, ts + eps)
        assert np.abs(b - a).max() <= 10.0 * max(rate, 1e-3) * eps


class TestCheckpoint:
    def test_roundtrip_bit_exact(self, fitted, tmp_path):
        model, _ = fitted
        path = tmp_path / "field.json"
        model.save(path)
        back = FieldModel.load(path)
        for name, node in model.params.items():
            assert np.array_equal(back.params[name].value, node.value)
        a = field_forward(model, np.array([0.123]))
        b = field_forward(back, np.array([0.123]))
        assert np.array_equal(a[0], b[0])


class TestKL:
    def test_standard_normal_zero(self):
        mu = ad.constant(np.zeros(4))
        logvar = ad.constant(np.zeros(4))
        assert kl_divergence(mu, logvar).value.item() == 0.0

    def test_unit_mean_half(self):
        mu = ad.constant(np.array([1.0, 0.0, 0.0]))
        logvar = ad.constant(np.zeros(3))
        assert abs(kl_divergence(mu, logvar).value.item() - 0.5) < 1e-12

    def test_matches_monte_carlo(self):
        rng = np.random.default_rng(0)
        mu = np.array([1.2, -0.8, 0.5])
        logvar = np.array([0.4, -0.3, 0.2])
        sigma = np.exp(0.5 * logvar)
        closed = kl_divergence(ad.constant(mu), ad.constant(logvar)).value.item()
        z = mu + sigma * rng.standard_normal((100_000, 3))
        log_q = -0.5 * (((z - mu) / sigma) ** 2 + np.log(2 * np.pi) + logvar).sum(axis=1)
        log_p = -0.5 * (z ** 2 + np.log(2 * np.pi)).sum(axis=1)
        mc = (log_q - log_p).mean()
        assert abs(closed - mc) <= 0.02 * abs(closed)
