"""Command-line interface: dataset generation, fitting, training, sampling,
task optimization, evaluation, and the HTTP service.

Conventions: progress goes to stderr; machine-readable results go to stdout
and files under --out. Every command accepts --config pointing at a JSON
file whose keys mirror the flags; explicit flags win over the file, which
wins over built-in defaults. The effective configuration is written next to
the outputs so a run can be replayed exactly. MOTIONFIELD_SEED provides the
default seed. Exit codes: 0 ok, 2 usage, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .baselines import inertialize_inbetween, slerp_inbetween
from .encoding import PositionalEncodingConfig
from .energy import EnergySpec, EnergyWeights, Keyframe, init_latent, optimize
from .field import FieldModel, FitConfig, fit, mean_per_joint_speed, sample_at_fps
from .generative import (GenerativeConfig, GenerativeModel, TrainConfig, encode,
                         sample_prior, train)
from .globalmotion import (GlobalMotionConfig, GlobalMotionModel, GlobalTrainConfig,
                           train_global)
from .losses import LossWeights
from .metrics import ContactConfig, paired_report, set_report
from .motion import MotionSequence, TrajectorySpec, load_motion, save_motion
from .synth import SynthConfig, synth_dataset


class UsageError(Exception):
    """Bad flag combination; exits with the usage status code."""


def log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _default_seed() -> int:
    return int(os.environ.get("MOTIONFIELD_SEED", "0"))


def _merge_config(args: argparse.Namespace, parser_defaults: dict) -> dict:
    """flags > config file > defaults, resolved per key."""
    merged = dict(parser_defaults)
    if getattr(args, "config", None):
        loaded = json.loads(Path(args.config).read_text())
        unknown = set(loaded) - set(parser_defaults)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        merged.update(loaded)
    for key, default in parser_defaults.items():
        value = getattr(args, key)
        if value != default:
            merged[key] = value
    return merged


def _dump_effective(out_dir: Path, command: str, cfg: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run_config.json").write_text(json.dumps({"command": command, **cfg}, indent=2))


def _load_dataset(path: Path) -> list:
    files = sorted(Path(path).glob("*.motion.json"))
    if not files:
        raise FileNotFoundError(f"no .motion.json files under {path}")
    return [load_motion(f) for f in files]


def _write_history_csv(path: Path, history: list) -> None:
    if not history:
        path.write_text("")
        return
    keys = list(history[0])
    rows = [",".join(keys)]
    rows += [",".join(repr(h[k]) if isinstance(h[k], float) else str(h[k]) for k in keys)
             for h in history]
    path.write_text("\n".join(rows) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(cfg: dict) -> int:
    out = Path(cfg["out"])
    _dump_effective(out, "synth", cfg)
    data = synth_dataset(SynthConfig(
        n_sequences=cfg["n"], frames=cfg["frames"], fps=cfg["fps"], seed=cfg["seed"],
        idle_fraction=cfg["idle_fraction"]))
    for i, seq in enumerate(data):
        save_motion(seq, out / f"seq_{i:04d}.motion.json")
    log(f"wrote {len(data)} sequences to {out}")
    print(json.dumps({"sequences": len(data), "out": str(out)}))
    return 0


def cmd_fit(cfg: dict) -> int:
    out = Path(cfg["out"])
    _dump_effective(out, "fit", cfg)
    seq = load_motion(cfg["motion"])
    hyper = FitConfig(epochs=cfg["epochs"], lr=cfg["lr"], seed=cfg["seed"],
                      weights=LossWeights(rot=cfg["lambda_rot"], ori=cfg["lambda_ori"],
                                          pos=cfg["lambda_pos"]))
    encoding = PositionalEncodingConfig(octaves=cfg["octaves"])

    def progress(rec):
        if rec["epoch"] % 200 == 0:
            log(f"epoch {rec['epoch']}: loss {rec['total']:.6f}")

    model, history = fit(seq, hyper, encoding=encoding, on_epoch=progress)
    model.save(out / "field.ckpt.json")
    _write_history_csv(out / "loss.csv", history)
    recon = sample_at_fps(model, seq.fps)
    report = paired_report(recon, seq)
    (out / "report.json").write_text(report.to_json())
    print(report.to_json())
    return 0


def cmd_resample(cfg: dict) -> int:
    out = Path(cfg["out"])
    _dump_effective(out, "resample", cfg)
    if cfg["sweep_octaves"]:
        if not cfg["motion"]:
            raise UsageError("--sweep-L needs --motion to refit at each octave count")
        lo, hi = (int(x) for x in cfg["sweep_octaves"].split(".."))
        seq = load_motion(cfg["motion"])
        rows = ["octaves,v_base,v_double,ratio"]
        for octaves in range(lo, hi + 1):
            model, _ = fit(seq, FitConfig(epochs=cfg["epochs"], seed=cfg["seed"]),
                           encoding=PositionalEncodingConfig(octaves=octaves))
            v_base = mean_per_joint_speed(sample_at_fps(model, seq.fps))
            v_double = mean_per_joint_speed(sample_at_fps(model, 2 * seq.fps))
            rows.append(f"{octaves},{v_base!r},{v_double!r},{v_double / v_base!r}")
            log(f"L={octaves}: v{seq.fps:g}={v_base:.3f} v{2 * seq.fps:g}={v_double:.3f}")
        (out / "velocity_sweep.csv").write_text("\n".join(rows) + "\n")
        print(json.dumps({"csv": str(out / "velocity_sweep.csv")}))
        return 0
    model = FieldModel.load(cfg["ckpt"])
    seq = sample_at_fps(model, cfg["fps"])
    save_motion(seq, out / "resampled.motion.json")
    print(json.dumps({"frames": seq.n_frames, "fps": seq.fps,
                      "mean_joint_speed": mean_per_joint_speed(seq)}))
    return 0


def cmd_train(cfg: dict) -> int:
    out = Path(cfg["out"])
    _dump_effective(out, "train", cfg)
    data = _load_dataset(Path(cfg["dataset"]))
    first = data[0]
    model = GenerativeModel(GenerativeConfig(
        n_joints=first.n_joints, frames=cfg["frames"], fps=first.fps,
        z_local=cfg["z_local"], z_global=cfg["z_global"], seed=cfg["seed"]),
        first.skeleton)
    hyper = TrainConfig(epochs=cfg["epochs"], batch_size=cfg["batch"], lr=cfg["lr"],
                        kl_weight=cfg["kl_weight"], seed=cfg["seed"],
                        checkpoint_every=cfg["checkpoint_every"],
                        checkpoint_dir=str(out) if cfg["checkpoint_every"] else None)
    history = train(model, data, hyper,
                    on_epoch=lambda r: log(f"epoch {r['epoch']}: rec {r['rec']:.4f} "
                                           f"kl {r['kl_local']:.2f}/{r['kl_global']:.2f}"))
    model.save(out / "generative.ckpt.json")
    _write_history_csv(out / "history.csv", history)
    print(json.dumps({"final_rec": history[-1]["rec"], "epochs": len(history)}))
    return 0


def cmd_train_global(cfg: dict) -> int:
    out = Path(cfg["out"])
    _dump_effective(out, "train-global", cfg)
    data = _load_dataset(Path(cfg["dataset"]))
    model = GlobalMotionModel(GlobalMotionConfig(n_joints=data[0].n_joints,
                                                 fps=data[0].fps, seed=cfg["seed"]),
                              data[0].skeleton)
    history = train_global(model, data,
                           GlobalTrainConfig(epochs=cfg["epochs"], batch_size=cfg["batch"],
                                             lr=cfg["lr"], seed=cfg["seed"]),
                           on_epoch=lambda r: log(f"epoch {r['epoch']}: loss {r['loss']:.4f}"))
    model.save(out / "global.ckpt.json")
    _write_history_csv(out / "history.csv", history)
    print(json.dumps({"final_loss": history[-1]["loss"], "epochs": len(history)}))
    return 0


def cmd_sample(cfg: dict) -> int:
    out = Path(cfg["out"])
    _dump_effective(out, "sample", cfg)
    model = GenerativeModel.load(cfg["ckpt"])
    global_model = GlobalMotionModel.load(cfg["global_ckpt"]) if cfg["global_ckpt"] else None
    motions = sample_prior(model, cfg["n"], frames=cfg["frames"] or None,
                           seed=cfg["seed"], global_model=global_model)
    for i, seq in enumerate(motions):
        save_motion(seq, out / f"sample_{i:04d}.motion.json")
    print(json.dumps({"samples": len(motions), "out": str(out)}))
    return 0


def _spec_common(cfg: dict) -> dict:
    return {"gamma": cfg["gamma"], "budget": cfg["budget"], "lr": cfg["opt_lr"],
            "seed": cfg["seed"]}


def cmd_inbetween(cfg: dict) -> int:
    out = Path(cfg["out"])
    _dump_effective(out, "inbetween", cfg)
    gen = GenerativeModel.load(cfg["ckpt"])
    glob = GlobalMotionModel.load(cfg["global_ckpt"])
    if cfg["clips"]:
        path_a, path_b = cfg["clips"].split(",")
        clip_a, clip_b = load_motion(path_a), load_motion(path_b)
        frames = clip_a.n_frames + cfg["gap"] + clip_b.n_frames
        if frames > gen.config.frames:
            raise UsageError(f"clips plus gap need {frames} frames; model supports "
                             f"{gen.config.frames}")
        observed = [Keyframe.from_sequence(clip_a, t) for t in range(clip_a.n_frames)]
        offset = clip_a.n_frames + cfg["gap"]
        for t in range(clip_b.n_frames):
            k = Keyframe.from_sequence(clip_b, t)
            k.frame = offset + t
            observed.append(k)
    else:
        seq = load_motion(cfg["motion"])
        frames = cfg["frames"] or seq.n_frames
        key_frames = [int(x) for x in cfg["keyframes"].split(",")]
        observed = [Keyframe.from_sequence(seq, t) for t in key_frames]
    spec = EnergySpec(kind="inbetween", frames=frames, fps=gen.config.fps,
                      observed=observed, **_spec_common(cfg))
    result = optimize(gen, glob, spec,
                      on_iteration=lambda i, e, b: log(f"iter {i}: {e:.5f} (best {b:.5f})")
                      if i % 50 == 0 else None)
    save_motion(result.motion, out / "result.motion.json")
    _write_history_csv(out / "trace.csv", result.trace)
    summary = {"initial_energy": result.initial_energy, "best_energy": result.best_energy,
               "terms": result.terms, "frames": result.motion.n_frames}
    (out / "report.json").write_text(json.dumps(summary))
    print(json.dumps(summary))
    return 0


def _preset_trajectory(preset: str, frames: int) -> TrajectorySpec:
    kind, _, arg = preset.partition(":")
    length = float(arg) if arg else 200.0
    t = np.linspace(0.0, 1.0, frames)
    if kind == "straight":
        pts = np.stack([np.zeros(frames), length * t], axis=1)
    elif kind == "sine":
        pts = np.stack([0.25 * length * np.sin(2 * np.pi * t), length * t], axis=1)
    else:
        raise UsageError(f"unknown trajectory preset {preset!r}")
    return TrajectorySpec(points=pts)


def cmd_renavigate(cfg: dict) -> int:
    out = Path(cfg["out"])
    _dump_effective(out, "renavigate", cfg)
    gen = GenerativeModel.load(cfg["ckpt"])
    glob = GlobalMotionModel.load(cfg["global_ckpt"])
    reference = load_motion(cfg["reference"])
    frames = cfg["frames"] or reference.n_frames
    if cfg["trajectory"]:
        points = np.asarray(json.loads(Path(cfg["trajectory"]).read_text()))
        traj = TrajectorySpec.from_polyline(points, frames)
    else:
        traj = _preset_trajectory(cfg["preset"], frames)
    spec = EnergySpec(kind="renavigate", frames=frames, fps=gen.config.fps,
                      trajectory=traj, reference=reference, **_spec_common(cfg))
    result = optimize(gen, glob, spec,
                      on_iteration=lambda i, e, b: log(f"iter {i}: {e:.5f} (best {b:.5f})")
                      if i % 50 == 0 else None)
    save_motion(result.motion, out / "result.motion.json")
    _write_history_csv(out / "trace.csv", result.trace)
    deviation = float(np.linalg.norm(
        result.motion.root_pos[:, :2] - traj.points, axis=1).mean())
    summary = {"initial_energy": result.initial_energy, "best_energy": result.best_energy,
               "terms": result.terms, "mean_projected_deviation_cm": deviation}
    (out / "report.json").write_text(json.dumps(summary))
    print(json.dumps(summary))
    return 0


def cmd_evaluate(cfg: dict) -> int:
    contact = ContactConfig(height_threshold=cfg["contact_height"],
                            speed_threshold=cfg["contact_speed"])
    if cfg["pred"]:
        if not cfg["gt"]:
            raise UsageError("--pred needs --gt")
        report = paired_report(load_motion(cfg["pred"]), load_motion(cfg["gt"]), contact)
    else:
        if not (cfg["set_a"] and cfg["set_b"]):
            raise UsageError("need --pred/--gt or --set-a/--set-b")
        report = set_report(_load_dataset(Path(cfg["set_a"])),
                            _load_dataset(Path(cfg["set_b"])),
                            seed=cfg["seed"], contact=contact)
    if cfg["out"]:
        out = Path(cfg["out"])
        _dump_effective(out, "evaluate", cfg)
        (out / "metrics.json").write_text(report.to_json())
        (out / "metrics.csv").write_text(report.to_csv())
    print(report.to_json())
    return 0


def cmd_serve(cfg: dict) -> int:
    import uvicorn

    from .service import build_app
    app = build_app(checkpoint=cfg["ckpt"], global_checkpoint=cfg["global_ckpt"],
                    data_dir=cfg["data_dir"] or None, max_jobs=cfg["max_jobs"])
    log(f"serving on {cfg['host']}:{cfg['port']}")
    uvicorn.run(app, host=cfg["host"], port=cfg["port"], log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="motionfield",
                                     description="neural motion fields toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **arguments):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON file of flag defaults")
        for flag, spec in arguments.items():
            p.add_argument(f"--{flag.replace('_', '-')}", dest=flag, **spec)
        p.set_defaults(fn=fn)
        return p

    seed = {"type": int, "default": _default_seed()}
    add("synth", cmd_synth,
        n={"type": int, "default": 8}, frames={"type": int, "default": 128},
        fps={"type": float, "default": 30.0}, seed=seed,
        idle_fraction={"type": float, "default": 0.15},
        out={"default": "synth_out"})
    add("fit", cmd_fit,
        motion={"required": True}, epochs={"type": int, "default": 2500},
        lr={"type": float, "default": 2e-3}, octaves={"type": int, "default": 7},
        lambda_rot={"type": float, "default": 1.0},
        lambda_ori={"type": float, "default": 1.0},
        lambda_pos={"type": float, "default": 0.1},
        seed=seed, out={"default": "fit_out"})
    add("resample", cmd_resample,
        ckpt={"default": None}, fps={"type": float, "default": 60.0},
        motion={"default": None}, sweep_octaves={"default": None, "metavar": "LO..HI"},
        epochs={"type": int, "default": 1200}, seed=seed, out={"default": "resample_out"})
    add("train", cmd_train,
        dataset={"required": True}, epochs={"type": int, "default": 60},
        batch={"type": int, "default": 8}, lr={"type": float, "default": 1e-3},
        kl_weight={"type": float, "default": 1e-3}, frames={"type": int, "default": 128},
        z_local={"type": int, "default": 64}, z_global={"type": int, "default": 8},
        checkpoint_every={"type": int, "default": 0},
        seed=seed, out={"default": "train_out"})
    add("train-global", cmd_train_global,
        dataset={"required": True}, epochs={"type": int, "default": 150},
        batch={"type": int, "default": 8}, lr={"type": float, "default": 2e-3},
        seed=seed, out={"default": "train_global_out"})
    add("sample", cmd_sample,
        ckpt={"required": True}, global_ckpt={"default": None},
        n={"type": int, "default": 4}, frames={"type": int, "default": 0},
        seed=seed, out={"default": "sample_out"})
    task_common = {
        "gamma": {"type": float, "default": 0.1},
        "budget": {"type": int, "default": 500},
        "opt_lr": {"type": float, "default": 0.05},
    }
    add("inbetween", cmd_inbetween,
        ckpt={"required": True}, global_ckpt={"required": True},
        motion={"default": None}, keyframes={"default": None},
        clips={"default": None, "metavar": "A.json,B.json"},
        gap={"type": int, "default": 30}, frames={"type": int, "default": 0},
        seed=seed, out={"default": "inbetween_out"}, **task_common)
    add("renavigate", cmd_renavigate,
        ckpt={"required": True}, global_ckpt={"required": True},
        reference={"required": True}, trajectory={"default": None},
        preset={"default": "straight:200"}, frames={"type": int, "default": 0},
        seed=seed, out={"default": "renavigate_out"}, **task_common)
    add("evaluate", cmd_evaluate,
        pred={"default": None}, gt={"default": None},
        set_a={"default": None}, set_b={"default": None},
        contact_height={"type": float, "default": 3.0},
        contact_speed={"type": float, "default": 2.0},
        seed=seed, out={"default": None})
    add("serve", cmd_serve,
        ckpt={"required": True}, global_ckpt={"required": True},
        host={"default": "127.0.0.1"}, port={"type": int, "default": 8080},
        data_dir={"default": None}, max_jobs={"type": int, "default": 2},
        seed=seed)
    return parser


def main(argv: list | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    defaults = {k: parser._subparsers._group_actions[0].choices[args.command]
                .get_default(k) for k in vars(args) if k not in ("command", "fn", "config")}
    try:
        cfg = _merge_config(args, defaults)
        return args.fn(cfg)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 2
    except SystemExit:
        raise
    except Exception as err:  # runtime failures exit 3 with a structured line
        print(json.dumps({"error": type(err).__name__, "message": str(err)}),
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
