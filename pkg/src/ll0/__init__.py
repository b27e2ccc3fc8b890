"""LL0: a dynamic neural network for lifelong learning that starts from zero nodes."""
from .graph import (
    ActivationMap,
    Edge,
    Network,
    Node,
    NodeKind,
    extension_set,
    forward,
    init_from_first_point,
    predict_batch,
    prediction,
    remove_concept,
    validate,
)
from .kernels import BACKEND

__version__ = "0.1.0"
