"""Latent-space optimization: differentiable task energies over the
generative model's latent code, minimized with Adam while all network
parameters stay frozen.

Two tasks share the machinery: in-betweening (match observed poses at a
sparse frame set, plus an L1 term on integrated root positions) and
re-navigating (soft-DTW style similarity to a reference, L1 to a target
ground trajectory, and a soft-DTW facing/tangent alignment term).

A latent code always decodes the model's full training window; a task that
asks for T frames uses the first T frames of that window, so T may not
exceed the model's training length.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .encoding import frame_times
from .features import decoded_local_features
from .generative import GenerativeModel, LatentCode, encode
from .globalmotion import GlobalMotionModel, integrate_trajectory, predict_root
from .kinematics import forward_kinematics
from .losses import position_loss, rotation_loss
from .motion import MotionSequence, TrajectorySpec
from .nn import cosine_lr
from .rotations import rot6d_to_matrix
from .sdtw import soft_dtw

ENERGY_SPEC_VERSION = 1


class EnergyError(ValueError):
    pass


@dataclass
class EnergyWeights:
    rot: float = 1.0
    ori: float = 1.0
    pos: float = 0.1
    trans: float = 0.1
    sim: float = 1.0
    traj: float = 0.5
    angle: float = 0.5

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if value < 0:
                raise EnergyError(f"weight {name} must be >= 0, got {value}")

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "EnergyWeights":
        return cls(**d)


@dataclass
class Keyframe:
    frame: int
    xr: np.ndarray        # (J, 6)
    ro: np.ndarray        # (6,)
    root_pos: np.ndarray  # (3,)

    def __post_init__(self):
        self.xr = np.asarray(self.xr, dtype=np.float64)
        self.ro = np.asarray(self.ro, dtype=np.float64)
        self.root_pos = np.asarray(self.root_pos, dtype=np.float64)

    @classmethod
    def from_sequence(cls, seq: MotionSequence, frame: int) -> "Keyframe":
        return cls(frame=frame, xr=seq.xr[frame].copy(), ro=seq.ro[frame].copy(),
                   root_pos=seq.root_pos[frame].copy())

    def to_dict(self) -> dict:
        return {"frame": self.frame, "xr": self.xr.tolist(), "ro": self.ro.tolist(),
                "root_pos": self.root_pos.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Keyframe":
        return cls(frame=int(d["frame"]), xr=d["xr"], ro=d["ro"], root_pos=d["root_pos"])


@dataclass
class EnergySpec:
    kind: str                       # "inbetween" | "renavigate"
    frames: int
    fps: float = 30.0
    observed: list = field(default_factory=list)
    trajectory: TrajectorySpec | None = None
    reference: MotionSequence | None = None
    weights: EnergyWeights = field(default_factory=EnergyWeights)
    gamma: float = 0.1
    budget: int = 500
    lr: float = 0.05
    lr_end: float = 2e-3  # cosine-decayed; the L1 terms dither otherwise
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("inbetween", "renavigate"):
            raise EnergyError(f"unknown task kind {self.kind!r}")
        if self.gamma <= 0:
            raise EnergyError(f"gamma must be positive, got {self.gamma}")
        if self.budget < 0:
            raise EnergyError(f"budget must be >= 0, got {self.budget}")
        if self.kind == "inbetween":
            if not self.observed:
                raise EnergyError("in-betweening needs a non-empty observed frame set")
            frames_seen = [k.frame for k in self.observed]
            if len(set(frames_seen)) != len(frames_seen):
                raise EnergyError("observed frames must be unique")
            if min(frames_seen) < 0 or max(frames_seen) >= self.frames:
                raise EnergyError(
                    f"observed frame outside range [0, {self.frames}): {sorted(frames_seen)}")
        if self.kind == "renavigate":
            if self.trajectory is None or self.trajectory.n_frames == 0:
                raise EnergyError("re-navigating needs a target trajectory")
            if self.trajectory.n_frames != self.frames:
                raise EnergyError(
                    f"trajectory length {self.trajectory.n_frames} != frames {self.frames}")
            if self.reference is None:
                raise EnergyError("re-navigating needs a reference motion")

    def to_dict(self) -> dict:
        return {
            "version": ENERGY_SPEC_VERSION,
            "kind": self.kind,
            "frames": self.frames,
            "fps": self.fps,
            "observed": [k.to_dict() for k in self.observed],
            "trajectory": self.trajectory.to_list() if self.trajectory else None,
            "reference": self.reference.to_dict() if self.reference else None,
            "weights": self.weights.to_dict(),
            "gamma": self.gamma,
            "budget": self.budget,
            "lr": self.lr,
            "lr_end": self.lr_end,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "EnergySpec":
        if d.get("version") != ENERGY_SPEC_VERSION:
            raise EnergyError(f"unsupported energy spec version {d.get('version')!r}")
        return cls(
            kind=d["kind"], frames=int(d["frames"]), fps=float(d.get("fps", 30.0)),
            observed=[Keyframe.from_dict(k) for k in d.get("observed") or []],
            trajectory=(TrajectorySpec(points=np.asarray(d["trajectory"]))
                        if d.get("trajectory") else None),
            reference=(MotionSequence.from_dict(d["reference"])
                       if d.get("reference") else None),
            weights=EnergyWeights.from_dict(d["weights"]) if d.get("weights") else EnergyWeights(),
            gamma=float(d.get("gamma", 0.1)), budget=int(d.get("budget", 500)),
            lr=float(d.get("lr", 0.05)), lr_end=float(d.get("lr_end", 2e-3)),
            seed=int(d.get("seed", 0)))

    @classmethod
    def from_json(cls, text: str) -> "EnergySpec":
        return cls.from_dict(json.loads(text))


@dataclass
class OptResult:
    z: LatentCode
    motion: MotionSequence
    trace: list                 # per-iteration {iteration, energy, best_energy}
    terms: dict                 # term breakdown at the best iterate
    best_energy: float
    initial_energy: float


def _task_times(model: GenerativeModel, frames: int) -> np.ndarray:
    if frames < 2 or frames > model.config.frames:
        raise EnergyError(
            f"task frames must be in [2, {model.config.frames}], got {frames}")
    return frame_times(model.config.frames)[:frames]


def _decode_task(gen: GenerativeModel, glob: GlobalMotionModel,
                 z_l: ad.Node, z_g: ad.Node, spec: EnergySpec):
    """Decode + global motion for the task window, all as graph nodes."""
    t_grid = _task_times(gen, spec.frames)
    xr, ro = gen.decode_nodes(z_l, z_g, t_grid)
    feats = decoded_local_features(gen.skeleton, xr, spec.fps, glob.config.scales)
    velocities, heights = predict_root(glob, feats, ro)
    return xr, ro, velocities, heights


def _root_positions(velocities: ad.Node, heights: ad.Node, spec: EnergySpec,
                    pin_frame: int, pin_xy: np.ndarray) -> ad.Node:
    """Integrate and shift horizontally so frame pin_frame sits at pin_xy."""
    raw = integrate_trajectory(velocities, heights, spec.fps, np.zeros(3))
    shift = ad.constant(pin_xy.reshape(1, 2)) - raw[pin_frame:pin_frame + 1, 0:2]
    xy = raw[:, 0:2] + shift
    return ad.concat([xy, raw[:, 2:3]], axis=1)


def inbetween_energy_terms(gen: GenerativeModel, glob: GlobalMotionModel,
                           z_l: ad.Node, z_g: ad.Node, spec: EnergySpec) -> dict:
    if spec.kind != "inbetween":
        raise EnergyError(f"expected an inbetween spec, got {spec.kind!r}")
    xr, ro, velocities, heights = _decode_task(gen, glob, z_l, z_g, spec)
    obs = sorted(spec.observed, key=lambda k: k.frame)
    idx = np.array([k.frame for k in obs])
    target_xr = rot6d_to_matrix(np.stack([k.xr for k in obs]))
    target_ro = rot6d_to_matrix(np.stack([k.ro for k in obs]))
    target_root = np.stack([k.root_pos for k in obs])

    pred_xr = xr[idx]
    pred_ro = ro[idx]
    pred_mats = rot6d_to_matrix(pred_xr)
    pred_ro_mats = rot6d_to_matrix(pred_ro)
    n_obs = len(obs)
    target_xp = forward_kinematics(gen.skeleton, target_xr, np.zeros((n_obs, 3)))
    pred_xp = forward_kinematics(gen.skeleton, pred_mats,
                                 ad.constant(np.zeros((n_obs, 3))))
    w = spec.weights
    terms = {
        "rot": rotation_loss(pred_mats, target_xr),
        "ori": rotation_loss(pred_ro_mats, target_ro),
        "pos": position_loss(pred_xp, target_xp),
    }
    root = _root_positions(velocities, heights, spec, int(idx[0]), target_root[0, 0:2])
    terms["trans"] = ad.mean(ad.absolute(root[idx] - ad.constant(target_root)))
    terms["total"] = (w.rot * terms["rot"] + w.ori * terms["ori"]
                      + w.pos * terms["pos"] + w.trans * terms["trans"])
    return terms


def _facing_nodes(ro_mats: ad.Node) -> ad.Node:
    """Differentiable ground-plane facing vectors from orientation matrices."""
    f = ro_mats[..., 0:2, 2]
    norm = ad.sqrt(ad.sum_(f * f, axis=-1, keepdims=True) + 1e-9)
    return f / norm


def _reference_sim_series(spec: EnergySpec, scale: float) -> np.ndarray:
    ref = spec.reference
    t = ref.n_frames
    return ref.xp.reshape(t, -1) / scale


def _reference_angle_series(spec: EnergySpec) -> np.ndarray:
    ref = spec.reference
    traj = TrajectorySpec(points=ref.root_pos[:, 0:2])
    dots = np.sum(ref.facing() * traj.tangents, axis=1)
    return dots.reshape(-1, 1)


SIM_FEATURE_SCALE = 10.0  # canonical positions in decimeters for the sDTW cost


def renavigate_energy_terms(gen: GenerativeModel, glob: GlobalMotionModel,
                            z_l: ad.Node, z_g: ad.Node, spec: EnergySpec) -> dict:
    if spec.kind != "renavigate":
        raise EnergyError(f"expected a renavigate spec, got {spec.kind!r}")
    xr, ro, velocities, heights = _decode_task(gen, glob, z_l, z_g, spec)
    t = spec.frames
    j = gen.skeleton.n_joints
    mats = rot6d_to_matrix(xr)
    xp = forward_kinematics(gen.skeleton, mats, ad.constant(np.zeros((t, 3))))
    w = spec.weights

    # style similarity on canonical joint positions, length-normalized
    pred_series = ad.reshape(xp, (t, 3 * j)) / SIM_FEATURE_SCALE
    ref_series = _reference_sim_series(spec, SIM_FEATURE_SCALE)
    sim = soft_dtw(pred_series, ad.constant(ref_series), spec.gamma) * (1.0 / t)

    # trajectory following: L1 between projected root and the target points
    root = _root_positions(velocities, heights, spec, 0, spec.trajectory.points[0])
    traj = ad.mean(ad.absolute(root[:, 0:2] - ad.constant(spec.trajectory.points)))

    # facing/tangent alignment, also via soft-DTW, also length-normalized
    pred_facing = _facing_nodes(rot6d_to_matrix(ro))
    pred_dots = ad.sum_(pred_facing * ad.constant(spec.trajectory.tangents),
                        axis=1, keepdims=True)
    ref_dots = _reference_angle_series(spec)
    angle = soft_dtw(pred_dots, ad.constant(ref_dots), spec.gamma) * (1.0 / t)

    terms = {"sim": sim, "traj": traj, "angle": angle}
    terms["total"] = w.sim * sim + w.traj * traj + w.angle * angle
    return terms


def energy_terms(gen: GenerativeModel, glob: GlobalMotionModel,
                 z_l: ad.Node, z_g: ad.Node, spec: EnergySpec) -> dict:
    if spec.kind == "inbetween":
        return inbetween_energy_terms(gen, glob, z_l, z_g, spec)
    return renavigate_energy_terms(gen, glob, z_l, z_g, spec)


def inbetween_energy(gen: GenerativeModel, glob: GlobalMotionModel,
                     z: LatentCode, spec: EnergySpec) -> float:
    with gen.params.frozen(), glob.params.frozen():
        terms = inbetween_energy_terms(gen, glob, ad.constant(z.z_local),
                                       ad.constant(z.z_global), spec)
    return terms["total"].value.item()


def renavigate_energy(gen: GenerativeModel, glob: GlobalMotionModel,
                      z: LatentCode, spec: EnergySpec) -> float:
    with gen.params.frozen(), glob.params.frozen():
        terms = renavigate_energy_terms(gen, glob, ad.constant(z.z_local),
                                        ad.constant(z.z_global), spec)
    return terms["total"].value.item()


def slerp_fill(skeleton, spec: EnergySpec) -> MotionSequence:
    """Dense sequence from sparse keyframes: SLERP joints, linear root."""
    from .baselines import slerp_inbetween
    return slerp_inbetween(skeleton, spec.observed, spec.frames, spec.fps)


def init_latent(gen: GenerativeModel, spec: EnergySpec) -> LatentCode:
    """Task initialization: encoder means of a SLERP fill for in-betweening;
    encoder mean of the reference plus a fresh prior draw of the orientation
    latent for re-navigating."""
    if spec.kind == "inbetween":
        if len(spec.observed) < 2:
            raise EnergyError("in-betweening initialization needs at least 2 keyframes")
        filled = slerp_fill(gen.skeleton, spec)
        posterior = encode(gen, filled)
        return posterior.mean_code()
    posterior = encode(gen, spec.reference)
    rng = np.random.default_rng(spec.seed)
    return LatentCode(posterior.mu_local.copy(),
                      rng.standard_normal(gen.config.z_global))


def decode_result(gen: GenerativeModel, glob: GlobalMotionModel, z: LatentCode,
                  spec: EnergySpec) -> MotionSequence:
    """Decode a latent to a motion whose root is pinned like the energy's."""
    with gen.params.frozen(), glob.params.frozen():
        xr, ro, velocities, heights = _decode_task(
            gen, glob, ad.constant(z.z_local), ad.constant(z.z_global), spec)
        if spec.kind == "inbetween":
            obs = min(spec.observed, key=lambda k: k.frame)
            root = _root_positions(velocities, heights, spec, obs.frame,
                                   obs.root_pos[0:2])
        else:
            root = _root_positions(velocities, heights, spec, 0,
                                   spec.trajectory.points[0])
    return MotionSequence.from_rotations(gen.skeleton, spec.fps, xr.value, ro.value,
                                         root.value)


def optimize(gen: GenerativeModel, glob: GlobalMotionModel, spec: EnergySpec,
             z_init: LatentCode | None = None, on_iteration=None) -> OptResult:
    """Adam over (z_local, z_global) with all network parameters frozen.

    Keeps the best iterate seen; deterministic for a fixed spec seed.
    """
    z0 = z_init or init_latent(gen, spec)
    store = ad.ParamStore()
    z_l = store.add("z_local", z0.z_local.copy())
    z_g = store.add("z_global", z0.z_global.copy())
    opt = ad.Adam(store, lr=spec.lr)
    trace = []
    best = {"energy": np.inf, "z": z0, "iteration": -1}
    with gen.params.frozen(), glob.params.frozen():
        for it in range(spec.budget):
            opt.config.lr = cosine_lr(spec.lr, spec.lr_end, it, spec.budget)
            store.zero_grad()
            terms = energy_terms(gen, glob, z_l, z_g, spec)
            total = terms["total"]
            energy = total.value.item()
            if not np.isfinite(energy):
                raise EnergyError(
                    f"non-finite energy at iteration {it}; trace so far: "
                    f"{[round(r['energy'], 6) for r in trace[-5:]]}")
            if energy < best["energy"]:
                best = {"energy": energy,
                        "z": LatentCode(z_l.value.copy(), z_g.value.copy()),
                        "iteration": it}
            trace.append({"iteration": it, "energy": energy,
                          "best_energy": min(energy, trace[-1]["best_energy"] if trace else energy)})
            if on_iteration is not None:
                on_iteration(it, energy, trace[-1]["best_energy"])
            ad.backward(total)
            opt.step()
    if spec.budget == 0:
        best = {"energy": np.nan, "z": z0, "iteration": -1}
        with gen.params.frozen(), glob.params.frozen():
            terms = energy_terms(gen, glob, ad.constant(z0.z_local),
                                 ad.constant(z0.z_global), spec)
        best["energy"] = terms["total"].value.item()
    else:
        with gen.params.frozen(), glob.params.frozen():
            terms = energy_terms(gen, glob, ad.constant(best["z"].z_local),
                                 ad.constant(best["z"].z_global), spec)
    motion = decode_result(gen, glob, best["z"], spec)
    return OptResult(
        z=best["z"], motion=motion, trace=trace,
        terms={k: v.value.item() for k, v in terms.items()},
        best_energy=best["energy"],
        initial_energy=trace[0]["energy"] if trace else best["energy"])
