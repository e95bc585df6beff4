from .layers import (BatchNormLayer, ConvLayer, activation, batchnorm,
                     conv3x3_grouped, conv3x3_grouped_backward, maxpool,
                     maxpool_backward, sigmoid)
from .optim import OptimizerState, rmsprop_step

__all__ = [
    "BatchNormLayer", "ConvLayer", "OptimizerState", "activation", "batchnorm",
    "conv3x3_grouped", "conv3x3_grouped_backward", "maxpool", "maxpool_backward",
    "rmsprop_step", "sigmoid",
]
