from .adam import AdamState, adam_step, init_adam
from .checkpoint import load_mlp, save_mlp
from .mlp import (
    ACTIVATIONS,
    LINEAR,
    RELU,
    SIGMOID,
    DenseLayer,
    GradientTape,
    Gradients,
    Mlp,
    backward,
    forward,
    freeze_all,
    init_mlp,
    parameter_checksum,
    parameter_count,
    set_frozen,
)

__all__ = [
    "ACTIVATIONS", "LINEAR", "RELU", "SIGMOID",
    "DenseLayer", "GradientTape", "Gradients", "Mlp",
    "AdamState", "adam_step", "init_adam",
    "backward", "forward", "freeze_all", "init_mlp",
    "parameter_checksum", "parameter_count", "set_frozen",
    "load_mlp", "save_mlp",
]
