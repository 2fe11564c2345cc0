"""
Module tree with dotted parameter/buffer names, train/eval mode and state dicts.
"""
from __future__ import annotations

from typing import Iterator, Mapping

import numpy as np

from src.autodiff.tensor import Parameter
from src.errors import CheckpointError


class Module:
    def __init__(self):
        self._params: dict[str, Parameter] = {}
        self._buffers: dict[str, np.ndarray] = {}
        self._children: dict[str, Module] = {}
        self.training = True

    # ── registration ─────────────────────────────────────────────────────────
    def add_param(self, name: str, value: np.ndarray) -> Parameter:
        param = Parameter(name, value)
        self._params[name] = param
        return param

    def add_buffer(self, name: str, value: np.ndarray) -> None:
        self._buffers[name] = np.asarray(value, dtype=np.float32).copy()

    def set_buffer(self, name: str, value: np.ndarray) -> None:
        if name not in self._buffers:
            raise KeyError(name)
        self._buffers[name] = np.asarray(value, dtype=np.float32).reshape(self._buffers[name].shape)

    def buffer(self, name: str) -> np.ndarray:
        return self._buffers[name]

    def add_child(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    # ── traversal ────────────────────────────────────────────────────────────
    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, param in self._params.items():
            full = f"{prefix}{name}"
            param.name = full
            yield full, param
        for cname, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{cname}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, "Module", str]]:
        for name in self._buffers:
            yield f"{prefix}{name}", self, name
        for cname, child in self._children.items():
            yield from child.named_buffers(f"{prefix}{cname}.")

    def modules(self) -> Iterator["Module"]:
        yield self
        for child in self._children.values():
            yield from child.modules()

    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    # ── state ────────────────────────────────────────────────────────────────
    def state_dict(self) -> dict[str, np.ndarray]:
        state = {name: p.value.data for name, p in self.named_parameters()}
        for full, owner, local in self.named_buffers():
            state[full] = owner._buffers[local]
        return state

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        buffers = {full: (owner, local) for full, owner, local in self.named_buffers()}
        expected = set(params) | set(buffers)
        missing = sorted(expected - set(state))
        unexpected = sorted(set(state) - expected)
        if missing or unexpected:
            raise CheckpointError("checkpoint does not match the model", missing, unexpected)
        for name, param in params.items():
            arr = np.asarray(state[name])
            if arr.shape != param.shape:
                raise CheckpointError(f"tensor {name}: expected shape {param.shape}, got {arr.shape}")
            param.assign(arr)
        for name, (owner, local) in buffers.items():
            arr = np.asarray(state[name])
            if arr.shape != owner._buffers[local].shape:
                raise CheckpointError(f"buffer {name}: expected shape {owner._buffers[local].shape}, got {arr.shape}")
            owner.set_buffer(local, arr)

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError
