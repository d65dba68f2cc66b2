from .binarize import clip, sign_forward, ste_backward
from .bitpack import pack_bits, packed_matmul, unpack_bits, xnor_popcount_dot
from .layers import (
    BatchNorm,
    BinaryLayer,
    DegenerateBatchError,
    binary_conv2d_forward,
    binary_dense_forward,
    conv2d,
)
from .model import ModelSpec, TinyBinNet, TrainingDiverged, softmax_cross_entropy, train_epoch
from .optim import Adam

__all__ = [
    "Adam",
    "BatchNorm",
    "BinaryLayer",
    "DegenerateBatchError",
    "ModelSpec",
    "TinyBinNet",
    "TrainingDiverged",
    "binary_conv2d_forward",
    "binary_dense_forward",
    "clip",
    "conv2d",
    "pack_bits",
    "packed_matmul",
    "sign_forward",
    "softmax_cross_entropy",
    "ste_backward",
    "train_epoch",
    "unpack_bits",
    "xnor_popcount_dot",
]
