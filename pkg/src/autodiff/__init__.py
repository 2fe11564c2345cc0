from src.autodiff.tensor import Parameter, Tensor, default_dtype, use_dtype
from src.autodiff.tape import Tape, backward, current_tape
from src.autodiff.ops import OPS, apply_op, forward, register_op

__all__ = [
    "OPS", "Parameter", "Tape", "Tensor", "apply_op", "backward", "current_tape",
    "default_dtype", "forward", "register_op", "use_dtype",
]
