"""The ported blocks: forward/backward ops and the layer classes wrapping them."""

from .base import Layer, Params, out_dim, xavier_fill
from .conv import ConvParams, ConvolutionLayer, col2im, conv_backward, conv_forward, im2col
from .data import DataLayer, DataParams
from .inner_product import InnerProductLayer, IpParams, ip_backward, ip_forward
from .pooling import PoolParams, PoolingLayer, pool_backward, pool_forward
from .relu import ReluLayer, ReluParams, relu_backward, relu_forward
from .softmax import (
    AccuracyLayer,
    AccuracyParams,
    LossParams,
    SoftmaxLayer,
    SoftmaxWithLossLayer,
    accuracy,
    softmax_backward,
    softmax_forward,
    softmax_loss_backward,
    softmax_loss_forward,
)

LAYER_TYPES: dict[str, type[Layer]] = {
    cls.type_name: cls
    for cls in (DataLayer, ConvolutionLayer, PoolingLayer, InnerProductLayer, ReluLayer,
                SoftmaxLayer, SoftmaxWithLossLayer, AccuracyLayer)
}

# Known features deliberately not ported.
UNSUPPORTED_FEATURES = (
    "convolution groups",
    "convolution dilation",
    "N-D (more than 2 spatial axes) convolution",
    "accuracy with ignore_label",
    "per-class accuracy output",
    "accuracy over a non-default axis",
)

__all__ = [
    "LAYER_TYPES", "UNSUPPORTED_FEATURES", "Layer", "Params", "out_dim", "xavier_fill",
    "ConvParams", "ConvolutionLayer", "im2col", "col2im", "conv_forward", "conv_backward",
    "DataLayer", "DataParams",
    "IpParams", "InnerProductLayer", "ip_forward", "ip_backward",
    "PoolParams", "PoolingLayer", "pool_forward", "pool_backward",
    "ReluParams", "ReluLayer", "relu_forward", "relu_backward",
    "SoftmaxLayer", "SoftmaxWithLossLayer", "AccuracyLayer", "AccuracyParams", "LossParams",
    "softmax_forward", "softmax_backward", "softmax_loss_forward", "softmax_loss_backward",
    "accuracy",
]
