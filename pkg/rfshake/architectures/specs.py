"""Structural description of the networks: what layers exist, in which order."""
from typing import List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from rfshake.errors import ArgumentError

ArchName = Literal['cp_resnet', 'vgg', 'ss_resnet']
LayerKind = Literal['input', 'conv', 'pool']


class ConvSpec(BaseModel):
    k: int = Field(ge=1)
    stride: int = Field(default=1, ge=1)
    channels: int = Field(ge=1)

    @property
    def padding(self) -> int:
        """'Same'-style padding: 2 for the 5×5 input conv, 1 for 3×3, 0 for 1×1."""
        return self.k // 2


class BlockSpec(BaseModel):
    """One line of the architecture table.

    `kernel_sizes` holds the filter sizes of the block's convs in order; a
    residual block always has two, a VGG block may have lost some (or all)
    of them to removal.
    """
    kernel_sizes: List[int]
    channels: int = Field(ge=1)
    followed_by_pool: bool = False
    residual: bool = True
    shake_branches: int = Field(default=1, ge=1, le=2)

    @field_validator('kernel_sizes')
    @classmethod
    def _check_kernels(cls, kernels: List[int]) -> List[int]:
        if len(kernels) > 2:
            raise ValueError(f"a block holds at most two convs, got {kernels}")
        if any(k < 1 or k % 2 == 0 for k in kernels):
            raise ValueError(f"block filter sizes must be odd and positive, got {kernels}")
        return kernels

    @model_validator(mode='after')
    def _check_residual(self) -> 'BlockSpec':
        if self.residual and len(self.kernel_sizes) != 2:
            raise ValueError("a residual block needs exactly two convs")
        if self.shake_branches == 2 and not self.residual:
            raise ValueError("shake-shake needs residual blocks")
        return self

    @property
    def conv1_k(self) -> Optional[int]:
        return self.kernel_sizes[0] if len(self.kernel_sizes) > 0 else None

    @property
    def conv2_k(self) -> Optional[int]:
        return self.kernel_sizes[1] if len(self.kernel_sizes) > 1 else None


class LayerDescriptor(BaseModel):
    """A receptive-field-affecting layer on the network's main path."""
    name: str
    kind: LayerKind
    k: int
    stride: int

    @property
    def padding(self) -> int:
        return self.k // 2 if self.kind != 'pool' else 0


class ArchSpec(BaseModel):
    name: str
    arch: ArchName
    rho: Optional[int] = None
    n_removed: Optional[int] = None
    in_channels: int = Field(default=1, ge=1)
    input_conv: ConvSpec
    blocks: List[BlockSpec]
    n_classes: int = Field(ge=1)
    pool_k: int = Field(default=2, ge=1)
    pool_stride: int = Field(default=2, ge=1)

    @property
    def head_in_channels(self) -> int:
        channels = self.input_conv.channels
        for block in self.blocks:
            if block.kernel_sizes:
                channels = block.channels
        return channels

    def layers(self) -> List[LayerDescriptor]:
        """Flatten the architecture: input conv, block convs, pools, then the 1×1 head conv."""
        layers = [LayerDescriptor(
            name="input_conv", kind='input',
            k=self.input_conv.k, stride=self.input_conv.stride,
        )]
        n_pools = 0
        for index, block in enumerate(self.blocks, start=1):
            for conv_no, k in enumerate(block.kernel_sizes, start=1):
                layers.append(LayerDescriptor(
                    name=f"block{index}.conv{conv_no}", kind='conv', k=k, stride=1,
                ))
            if block.followed_by_pool:
                n_pools += 1
                layers.append(LayerDescriptor(
                    name=f"pool{n_pools}", kind='pool',
                    k=self.pool_k, stride=self.pool_stride,
                ))
        layers.append(LayerDescriptor(name="head.conv", kind='conv', k=1, stride=1))
        return layers

    def to_text(self) -> str:
        """Human-readable block embedded in checkpoints and printed by the CLI."""
        return self.model_dump_json(indent=2)

    @classmethod
    def from_text(cls, text: str) -> 'ArchSpec':
        return cls.model_validate_json(text)


def check_range(name: str, value: int, low: int, high: int) -> None:
    if not isinstance(value, int) or isinstance(value, bool) or not low <= value <= high:
        raise ArgumentError(f"{name} must be an integer in [{low}, {high}], got {value!r}")
