"""Acoustic bearing-fault diagnosis with a from-scratch convolutional LSTM."""
__version__ = "0.1.0"

from .audio_io import AudioClip, Frame, frame_signal, read_wav, write_wav
from .features import StandardizationStats, TimeFreqFeature, build_feature, compute_standardization
from .labels import CLASS_NAMES, FaultLabel
from .model import Model, ModelConfig, build_model, param_summary
from .synth import Split, SplitDataset, SynthConfig, build_dataset, gen_clip
from .train_eval import TrainConfig, evaluate, train

__all__ = [
    "AudioClip", "Frame", "frame_signal", "read_wav", "write_wav",
    "StandardizationStats", "TimeFreqFeature", "build_feature", "compute_standardization",
    "CLASS_NAMES", "FaultLabel",
    "Model", "ModelConfig", "build_model", "param_summary",
    "Split", "SplitDataset", "SynthConfig", "build_dataset", "gen_clip",
    "TrainConfig", "evaluate", "train",
]
