from src.nn.module import Module
from src.nn.layers import BatchNorm, Conv1d, ConvBNAct, RFGroupDepthwise, pointwise
from src.nn.blocks import Block, DepthToSpace, SpaceToDepth

__all__ = [
    "BatchNorm", "Block", "Conv1d", "ConvBNAct", "DepthToSpace", "Module",
    "RFGroupDepthwise", "SpaceToDepth", "pointwise",
]
