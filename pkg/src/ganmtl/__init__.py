"""Adversarial multi-task acoustic model training at desk scale.

A self-contained study framework: a tape-based autodiff core, recurrent
generator and convolutional discriminator models, multi-task GAN losses, a
synthetic parametric-speech corpus with a known conditional-mean oracle,
objective speech metrics, and a CLI that trains, synthesizes, and reports.
"""

__version__ = "0.1.0"

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import ConfigError, ExperimentConfig, TrainConfig, load_experiment
from .corpus import CorpusConfig, Dataset, GroundTruth, Utterance, generate_corpus
from .dataio import FormatError, read_dataset, write_dataset
from .losses import LossConfig
from .metrics import MetricsReport, evaluate
from .optim import AdamConfig
from .rng import Rng
from .trainer import TrainingDivergedError, TrainLog, synthesize, train

__all__ = [
    "AdamConfig", "Checkpoint", "ConfigError", "CorpusConfig", "Dataset",
    "ExperimentConfig", "FormatError", "GroundTruth", "LossConfig",
    "MetricsReport", "Rng", "TrainConfig", "TrainLog",
    "TrainingDivergedError", "Utterance", "evaluate", "generate_corpus",
    "load_checkpoint", "load_experiment", "read_dataset", "save_checkpoint",
    "synthesize", "train", "write_dataset",
]
