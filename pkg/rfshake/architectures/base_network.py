from abc import ABC, abstractmethod
from typing import Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from rfshake.tensor_engine import Mode, RunningStats, Tensor
from .specs import ArchSpec


class Module(ABC):
    """Holds named parameters, running statistics and child modules."""

    def __init__(self) -> None:
        self._parameters: Dict[str, Tensor] = {}
        self._children: Dict[str, 'Module'] = {}

    def register_parameter(self, name: str, tensor: Tensor) -> Tensor:
        self._parameters[name] = tensor
        return tensor

    def add_child(self, name: str, module: 'Module') -> 'Module':
        self._children[name] = module
        return module

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, tensor in self._parameters.items():
            yield prefix + name, tensor
        for child_name, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{child_name}.")

    def named_running_stats(self, prefix: str = "") -> Iterator[Tuple[str, RunningStats]]:
        for child_name, child in self._children.items():
            yield from child.named_running_stats(f"{prefix}{child_name}.")

    @abstractmethod
    def forward(self, x: Tensor, mode: Union[Mode, str] = Mode.TRAIN) -> Tensor:
        ...

    def __call__(self, x: Tensor, mode: Union[Mode, str] = Mode.TRAIN) -> Tensor:
        return self.forward(x, mode)


class BaseNetwork(Module):
    """A network assembled from an `ArchSpec`; the layers are built on first use."""
    spec: ArchSpec
    _layers: Optional[List[Tuple[str, Module]]] = None

    @property
    def layers(self) -> List[Tuple[str, Module]]:
        if self._layers is None:
            self._layers = self.build_layers()
            for name, layer in self._layers:
                self.add_child(name, layer)
        return self._layers

    @abstractmethod
    def build_layers(self) -> List[Tuple[str, Module]]:
        ...

    def __init__(self, spec: ArchSpec) -> None:
        Module.__init__(self)
        self.spec = spec
        self._layers = None

    def parameters(self) -> Dict[str, Tensor]:
        self.layers
        return dict(self.named_parameters())

    def running_buffers(self) -> Dict[str, np.ndarray]:
        """Running statistics flattened to `<layer>.running_mean` / `<layer>.running_var` arrays."""
        self.layers
        buffers: Dict[str, np.ndarray] = {}
        for name, stats in self.named_running_stats():
            buffers[f"{name}.running_mean"] = stats.mean
            buffers[f"{name}.running_var"] = stats.var
        return buffers

    def load_running_buffers(self, buffers: Dict[str, np.ndarray]) -> None:
        self.layers
        for name, stats in self.named_running_stats():
            stats.mean = np.array(buffers[f"{name}.running_mean"], dtype=stats.mean.dtype)
            stats.var = np.array(buffers[f"{name}.running_var"], dtype=stats.var.dtype)
