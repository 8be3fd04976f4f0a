from .engine import Graph, Tensor, active_graph, as_tensor, backward, no_grad
from .adam import AdamState, adam_step
from . import ops
from .ops import (absolute, add, arccos, broadcast_to, clip, concat_last_axis, div, dropout,
                  elementwise, gather_frames, linear_layer, matmul, mul, narrow, neg,
                  reduce_mean, reduce_sum, relu, reshape, sigmoid, softmax, sqrt, stack,
                  sub, take, tanh, transpose_last2)

__all__ = [
    "Graph", "Tensor", "active_graph", "as_tensor", "backward", "no_grad",
    "AdamState", "adam_step", "ops",
    "absolute", "add", "arccos", "broadcast_to", "clip", "concat_last_axis", "div",
    "dropout", "elementwise", "gather_frames", "linear_layer", "matmul", "mul", "narrow",
    "neg", "reduce_mean", "reduce_sum", "relu", "reshape", "sigmoid", "softmax", "sqrt",
    "stack", "sub", "take", "tanh", "transpose_last2",
]
