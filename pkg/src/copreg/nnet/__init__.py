from .layers import BatchNorm, Conv1D, Dense, Dropout, Flatten, MaxPool1D
from .network import Network
from .presets import build_cnn, build_ffn
from .training import AdamState, TrainConfig, train, train_with_history

__all__ = [
    "BatchNorm", "Conv1D", "Dense", "Dropout", "Flatten", "MaxPool1D",
    "Network", "build_cnn", "build_ffn",
    "AdamState", "TrainConfig", "train", "train_with_history",
]
