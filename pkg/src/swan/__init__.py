"""Infrared small-target detection with wavelet convolutions, shifted
window attention, and dual-channel decoder fusion, on a self-contained
numpy autograd engine."""

from .network import (ModelConfig, SwanOutputs, TrainConfig, bce_loss,
                      build_swan, count_parameters, deep_supervision_loss,
                      infer, swan_forward)
from .tensor import Tensor, backprop, no_grad

__all__ = [
    "ModelConfig", "TrainConfig", "SwanOutputs", "Tensor", "backprop",
    "bce_loss", "build_swan", "count_parameters", "deep_supervision_loss",
    "infer", "no_grad", "swan_forward",
]

__version__ = "0.1.0"
