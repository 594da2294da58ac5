"""motionfield: continuous neural motion fields for skeletal animation.

A motion is represented as a continuous function of time realized by an
MLP with positional encoding; a VAE extension turns the field generative
over a latent style code, and animation tasks (in-betweening,
re-navigating) are solved by optimizing that latent against differentiable
energies.
"""

__version__ = "0.1.0"

from .kinematics import Skeleton, forward_kinematics
from .motion import MotionSequence, TrajectorySpec, canonicalize, load_motion, resample, save_motion
from .synth import GaitParams, SynthConfig, biped_skeleton, generate_walk, synth_dataset
from .bvh import load_bvh
from .field import FieldModel, FitConfig, fit, field_forward, sample_at_fps
from .generative import (GenerativeConfig, GenerativeModel, LatentCode, PosteriorParams,
                         TrainConfig, decode, decode_motion, elbo_loss, encode,
                         interpolate_latent, reparameterize, sample_prior, swap_latents, train)
from .globalmotion import (GlobalMotionConfig, GlobalMotionModel, GlobalTrainConfig,
                           integrate_trajectory, predict_root, train_global)
from .energy import EnergySpec, EnergyWeights, Keyframe, OptResult, init_latent, optimize
from .sdtw import hard_dtw, soft_dtw
from .baselines import inertialize_inbetween, slerp_inbetween
from .metrics import (MetricReport, diversity, fde, feature_vector, fid, foot_skate,
                      mpe, mre, mte, moe, paired_report, set_report)

__all__ = [
    "Skeleton", "forward_kinematics",
    "MotionSequence", "TrajectorySpec", "canonicalize", "load_motion", "resample",
    "save_motion", "load_bvh",
    "GaitParams", "SynthConfig", "biped_skeleton", "generate_walk", "synth_dataset",
    "FieldModel", "FitConfig", "fit", "field_forward", "sample_at_fps",
    "GenerativeConfig", "GenerativeModel", "LatentCode", "PosteriorParams", "TrainConfig",
    "decode", "decode_motion", "elbo_loss", "encode", "interpolate_latent",
    "reparameterize", "sample_prior", "swap_latents", "train",
    "GlobalMotionConfig", "GlobalMotionModel", "GlobalTrainConfig",
    "integrate_trajectory", "predict_root", "train_global",
    "EnergySpec", "EnergyWeights", "Keyframe", "OptResult", "init_latent", "optimize",
    "hard_dtw", "soft_dtw",
    "inertialize_inbetween", "slerp_inbetween",
    "MetricReport", "diversity", "fde", "feature_vector", "fid", "foot_skate",
    "mpe", "mre", "mte", "moe", "paired_report", "set_report",
]
