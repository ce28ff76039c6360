"""Runnable networks built from an `ArchSpec`.

Convs inside blocks follow conv -> batchnorm -> ReLU. Residual blocks add the
(possibly projected) identity before the final ReLU. The head is a 1×1 conv
to `n_classes`, batchnorm and global average pooling; `predict_proba` applies
the sigmoid.
"""
from typing import Iterator, List, Optional, Tuple, Union

import numpy as np

from rfshake.tensor_engine import (
    Mode, RunningStats, Tensor, add, batchnorm2d, conv2d, global_avg_pool,
    maxpool2d, parameter, relu, sigmoid, sum_pool2d, get_default_dtype,
)
from rfshake.tensor_engine.ops import BN_MOMENTUM
from rfshake.shake_shake import block_streams, sample_coefficients, shake_combine
from .base_network import BaseNetwork, Module
from .specs import ArchSpec, BlockSpec


def he_normal(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    """He (fan-in) scaled normal init for conv filters [C_out, C_in, k, k]."""
    fan_in = shape[1] * shape[2] * shape[3]
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


class Conv2d(Module):
    def __init__(self, c_in: int, c_out: int, k: int, rng: np.random.Generator, stride: int = 1) -> None:
        super().__init__()
        self.stride = stride
        self.padding = k // 2
        self.weight = self.register_parameter(
            "weight", parameter(he_normal(rng, (c_out, c_in, k, k)), name="weight")
        )

    def forward(self, x: Tensor, mode: Union[Mode, str] = Mode.TRAIN) -> Tensor:
        return conv2d(x, self.weight, stride=self.stride, padding=self.padding)


class BatchNorm2d(Module):
    def __init__(self, channels: int, momentum: float = BN_MOMENTUM) -> None:
        super().__init__()
        dtype = get_default_dtype()
        self.gamma = self.register_parameter("gamma", parameter(np.ones(channels), name="gamma"))
        self.beta = self.register_parameter("beta", parameter(np.zeros(channels), name="beta"))
        self.stats = RunningStats(channels, momentum, dtype=dtype)

    def named_running_stats(self, prefix: str = "") -> Iterator[Tuple[str, RunningStats]]:
        yield prefix.rstrip("."), self.stats

    def forward(self, x: Tensor, mode: Union[Mode, str] = Mode.TRAIN) -> Tensor:
        return batchnorm2d(x, self.gamma, self.beta, self.stats, mode)


class ConvBN(Module):
    def __init__(self,
        c_in: int, c_out: int, k: int, rng: np.random.Generator,
        stride: int = 1, activate: bool = True, momentum: float = BN_MOMENTUM,
    ) -> None:
        super().__init__()
        self.activate = activate
        self.conv = self.add_child("conv", Conv2d(c_in, c_out, k, rng, stride))
        self.bn = self.add_child("bn", BatchNorm2d(c_out, momentum))

    def forward(self, x: Tensor, mode: Union[Mode, str] = Mode.TRAIN) -> Tensor:
        out = self.bn(self.conv(x, mode), mode)
        return relu(out) if self.activate else out


class Branch(Module):
    """conv-bn-relu, conv-bn: the residual function of one block."""

    def __init__(self, c_in: int, block: BlockSpec, rng: np.random.Generator, momentum: float) -> None:
        super().__init__()
        self.convs: List[ConvBN] = []
        c = c_in
        last = len(block.kernel_sizes) - 1
        for index, k in enumerate(block.kernel_sizes):
            self.convs.append(self.add_child(
                f"conv{index + 1}",
                ConvBN(c, block.channels, k, rng, activate=index != last, momentum=momentum),
            ))
            c = block.channels

    def forward(self, x: Tensor, mode: Union[Mode, str] = Mode.TRAIN) -> Tensor:
        for conv in self.convs:
            x = conv(x, mode)
        return x


class ResidualBlock(Module):
    def __init__(self,
        c_in: int, block: BlockSpec, rng: np.random.Generator,
        shake_rng: Optional[np.random.Generator] = None, momentum: float = BN_MOMENTUM,
    ) -> None:
        super().__init__()
        self.shake_rng = shake_rng
        self.branches: List[Branch] = [
            self.add_child(f"branch{index}", Branch(c_in, block, rng, momentum))
            for index in range(block.shake_branches)
        ]
        self.projection: Optional[Conv2d] = None
        if c_in != block.channels:
            self.projection = self.add_child("projection", Conv2d(c_in, block.channels, 1, rng))

    def forward(self, x: Tensor, mode: Union[Mode, str] = Mode.TRAIN) -> Tensor:
        mode = Mode(mode)
        identity = self.projection(x, mode) if self.projection is not None else x
        if len(self.branches) == 1:
            return relu(add(identity, self.branches[0](x, mode)))

        b1, b2 = (branch(x, mode) for branch in self.branches)
        coeffs = sample_coefficients(x.shape[0], self.shake_rng, mode)
        return relu(shake_combine(identity, b1, b2, coeffs))


class PlainBlock(Module):
    """VGG block: every remaining conv is conv-bn-relu; no shortcut."""

    def __init__(self, c_in: int, block: BlockSpec, rng: np.random.Generator, momentum: float = BN_MOMENTUM) -> None:
        super().__init__()
        self.convs: List[ConvBN] = []
        c = c_in
        for index, k in enumerate(block.kernel_sizes):
            self.convs.append(self.add_child(
                f"conv{index + 1}", ConvBN(c, block.channels, k, rng, momentum=momentum)
            ))
            c = block.channels

    def forward(self, x: Tensor, mode: Union[Mode, str] = Mode.TRAIN) -> Tensor:
        for conv in self.convs:
            x = conv(x, mode)
        return x


class MaxPool(Module):
    def __init__(self, k: int, stride: int) -> None:
        super().__init__()
        self.k, self.stride = k, stride

    def forward(self, x: Tensor, mode: Union[Mode, str] = Mode.TRAIN) -> Tensor:
        return maxpool2d(x, self.k, self.stride)


class ClassifierHead(Module):
    """1×1 conv to class logits, batchnorm, then global average pooling, as in the CP-ResNet head."""

    def __init__(self, c_in: int, n_classes: int, rng: np.random.Generator, momentum: float = BN_MOMENTUM) -> None:
        super().__init__()
        self.conv = self.add_child("conv", ConvBN(c_in, n_classes, 1, rng, activate=False, momentum=momentum))

    def forward(self, x: Tensor, mode: Union[Mode, str] = Mode.TRAIN) -> Tensor:
        return global_avg_pool(self.conv(x, mode))


class ConvNet(BaseNetwork):
    """CP_ResNet, SS ResNet or VGG, depending on the blocks it is built from."""

    def __init__(self, spec: ArchSpec, seed: int = 0, bn_momentum: float = BN_MOMENTUM) -> None:
        super().__init__(spec)
        self.seed = seed
        self.bn_momentum = bn_momentum

    def build_layers(self) -> List[Tuple[str, Module]]:
        init_seq, shake_seq = np.random.SeedSequence(self.seed).spawn(2)
        rng = np.random.default_rng(init_seq)
        shake_streams = block_streams(shake_seq, len(self.spec.blocks))
        momentum = self.bn_momentum

        stem = self.spec.input_conv
        layers: List[Tuple[str, Module]] = [(
            "input_conv",
            ConvBN(self.spec.in_channels, stem.channels, stem.k, rng, stride=stem.stride, momentum=momentum),
        )]
        c_in = stem.channels
        n_pools = 0
        for index, block in enumerate(self.spec.blocks, start=1):
            if block.kernel_sizes:
                if block.residual:
                    shake_rng = shake_streams[index - 1] if block.shake_branches == 2 else None
                    module: Module = ResidualBlock(c_in, block, rng, shake_rng, momentum)
                else:
                    module = PlainBlock(c_in, block, rng, momentum)
                layers.append((f"block{index}", module))
                c_in = block.channels
            if block.followed_by_pool:
                n_pools += 1
                layers.append((f"pool{n_pools}", MaxPool(self.spec.pool_k, self.spec.pool_stride)))

        layers.append(("head", ClassifierHead(c_in, self.spec.n_classes, rng, momentum)))
        return layers

    def forward(self, x: Tensor, mode: Union[Mode, str] = Mode.TRAIN) -> Tensor:
        """Logits of shape (N, n_classes)."""
        for _, layer in self.layers:
            x = layer(x, mode)
        return x

    def predict_proba(self, x: Tensor) -> np.ndarray:
        return sigmoid(self.forward(x, Mode.EVAL)).data


class ProbeConv(Module):
    def __init__(self, k: int, stride: int) -> None:
        super().__init__()
        self.stride = stride
        self.padding = k // 2
        self.weight = Tensor(np.ones((1, 1, k, k), dtype=np.float64))

    def forward(self, x: Tensor, mode: Union[Mode, str] = Mode.EVAL) -> Tensor:
        return conv2d(x, self.weight, stride=self.stride, padding=self.padding)


class SumPool(Module):
    def __init__(self, k: int, stride: int) -> None:
        super().__init__()
        self.k, self.stride = k, stride

    def forward(self, x: Tensor, mode: Union[Mode, str] = Mode.EVAL) -> Tensor:
        return sum_pool2d(x, self.k, self.stride)


class ReceptiveFieldProbe(BaseNetwork):
    """Single-channel linear twin of an architecture's main path.

    Positive filters, identity activations and sum pooling instead of max
    pooling, so the input-gradient support of one output neuron is exactly
    its geometric receptive field.
    """

    def build_layers(self) -> List[Tuple[str, Module]]:
        layers: List[Tuple[str, Module]] = []
        for layer in self.spec.layers():
            if layer.kind == 'pool':
                layers.append((layer.name, SumPool(layer.k, layer.stride)))
            else:
                layers.append((layer.name, ProbeConv(layer.k, layer.stride)))
        return layers

    def forward(self, x: Tensor, mode: Union[Mode, str] = Mode.EVAL) -> Tensor:
        for _, layer in self.layers:
            x = layer(x, mode)
        return x
