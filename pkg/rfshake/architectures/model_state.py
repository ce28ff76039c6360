from typing import Dict, Optional, Union

import numpy as np
from loguru import logger

from rfshake.tensor_engine import Mode, Tensor, as_tensor
from rfshake.tensor_engine.ops import BN_MOMENTUM
from .network import ConvNet
from .specs import ArchSpec


class ModelState:
    """Parameters, batchnorm running statistics and Adam moments of one network."""
    arch_spec: ArchSpec
    network: ConvNet
    adam_m: Dict[str, np.ndarray]
    adam_v: Dict[str, np.ndarray]
    step_count: int

    def __init__(self, network: ConvNet) -> None:
        self.network = network
        self.arch_spec = network.spec
        self.adam_m = {name: np.zeros_like(t.data) for name, t in self.parameters.items()}
        self.adam_v = {name: np.zeros_like(t.data) for name, t in self.parameters.items()}
        self.step_count = 0

    @property
    def parameters(self) -> Dict[str, Tensor]:
        return self.network.parameters()

    @property
    def buffers(self) -> Dict[str, np.ndarray]:
        return self.network.running_buffers()

    @property
    def dtype(self) -> np.dtype:
        return next(iter(self.parameters.values())).dtype

    def parameter_count(self) -> int:
        return int(sum(t.size for t in self.parameters.values()))

    def forward(self, x: Union[Tensor, np.ndarray], mode: Union[Mode, str] = Mode.TRAIN) -> Tensor:
        x = as_tensor(np.asarray(x.data if isinstance(x, Tensor) else x, dtype=self.dtype))
        return self.network(x, mode)

    def predict_proba(self, x: Union[Tensor, np.ndarray]) -> np.ndarray:
        x = as_tensor(np.asarray(x.data if isinstance(x, Tensor) else x, dtype=self.dtype))
        return self.network.predict_proba(x)

    def zero_grad(self) -> None:
        for tensor in self.parameters.values():
            tensor.zero_grad()

    def gradients(self) -> Dict[str, np.ndarray]:
        return {
            name: (t.grad if t.grad is not None else np.zeros_like(t.data))
            for name, t in self.parameters.items()
        }


def instantiate(
    spec: ArchSpec,
    seed: int,
    dtype: Union[str, type, np.dtype] = np.float32,
    bn_momentum: float = BN_MOMENTUM,
) -> ModelState:
    """Allocate every parameter of `spec` from a seeded generator.

    Convs use He fan-in normal init, batchnorm starts at gamma=1, beta=0 with
    running mean 0 and variance 1.
    """
    network = ConvNet(spec, seed=seed, bn_momentum=bn_momentum)
    dtype = np.dtype(dtype)
    for tensor in network.parameters().values():
        tensor.data = tensor.data.astype(dtype)
    for _, stats in network.named_running_stats():
        stats.mean = stats.mean.astype(dtype)
        stats.var = stats.var.astype(dtype)

    state = ModelState(network)
    logger.debug(f"Instantiated {spec.name}: {state.parameter_count()} parameters, seed={seed}, dtype={dtype}")
    return state
