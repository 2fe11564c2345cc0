from src.dynpool.pooling import (
    PoolingTrace, dynamic_pool, output_length, pool_from_positions, renormalize_batch,
)
from src.dynpool.layer import DynamicPool, SubsamplingLayer

__all__ = [
    "DynamicPool", "PoolingTrace", "SubsamplingLayer", "dynamic_pool", "output_length",
    "pool_from_positions", "renormalize_batch",
]
