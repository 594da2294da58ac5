"""Session fixtures: a small synthetic dataset and tiny trained models shared
across test modules so training cost is paid once."""

import numpy as np
import pytest

from motionfield.generative import GenerativeConfig, GenerativeModel, TrainConfig, train
from motionfield.globalmotion import (GlobalMotionConfig, GlobalMotionModel,
                                      GlobalTrainConfig, train_global)
from motionfield.synth import SynthConfig, synth_dataset


TINY_FRAMES = 64
TINY_FPS = 30.0


@pytest.fixture(scope="session")
def tiny_dataset():
    return synth_dataset(SynthConfig(n_sequences=24, frames=TINY_FRAMES, fps=TINY_FPS, seed=5))


@pytest.fixture(scope="session")
def tiny_generative(tiny_dataset):
    cfg = GenerativeConfig(
        n_joints=9, frames=TINY_FRAMES, fps=TINY_FPS, z_local=16, z_global=4,
        encoder_channels=(48, 48, 48), orient_encoder_channels=(16, 16, 16),
        decoder_hidden=(96, 96, 96), orient_hidden=(32, 32), seed=0)
    model = GenerativeModel(cfg, tiny_dataset[0].skeleton)
    train(model, tiny_dataset[:20],
          TrainConfig(epochs=40, batch_size=4, lr=1.5e-3, kl_weight=5e-4, seed=0))
    return model


@pytest.fixture(scope="session")
def tiny_global(tiny_dataset):
    model = GlobalMotionModel(GlobalMotionConfig(n_joints=9, hidden=32, seed=0),
                              tiny_dataset[0].skeleton)
    train_global(model, tiny_dataset[:20],
                 GlobalTrainConfig(epochs=150, batch_size=8, lr=2e-3, seed=0))
    return model


@pytest.fixture(scope="session")
def heldout(tiny_dataset):
    return tiny_dataset[20:]
