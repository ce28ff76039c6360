"""Builders for the CP_ResNet(ρ), VGG-removal and Shake-Shake ResNet families.

Layout (one line per residual block, P = 2×2 max pool after the block):

    input   5×5 stride 2
    1       3×3, 1×1, P
    2       x1, x2, P
    3       x3, x4
    4       x5, x6, P
    5..12   x7 .. x22

Channels: 128 for blocks 1-4, 256 for 5-8, 512 for 9-12. ρ sets x_k = 3 for
k <= ρ and 1 otherwise.
"""
from typing import List, Optional, Sequence, Tuple

from rfshake.errors import ArgumentError
from .specs import ArchName, ArchSpec, BlockSpec, ConvSpec, check_range

N_BLOCKS = 12
N_SLOTS = 22
MAX_RHO = 21
POOLED_BLOCKS = (1, 2, 4)
DEFAULT_CHANNELS: Tuple[int, int, int] = (128, 256, 512)
INPUT_CONV_K = 5
INPUT_CONV_STRIDE = 2
FIRST_BLOCK_KERNELS = (3, 1)


def rho_to_kernels(rho: int) -> List[int]:
    """x_1..x_22 for a given ρ."""
    check_range("rho", rho, 0, MAX_RHO)
    return [3 if k <= rho else 1 for k in range(1, N_SLOTS + 1)]


def block_channels(block_no: int, channels: Sequence[int] = DEFAULT_CHANNELS, width_multiplier: float = 1.0) -> int:
    stage = 0 if block_no <= 4 else (1 if block_no <= 8 else 2)
    return max(1, int(round(channels[stage] * width_multiplier)))


def _check_width(channels: Sequence[int], width_multiplier: float) -> None:
    if len(channels) != 3 or any(c < 1 for c in channels):
        raise ArgumentError(f"channels must be three positive stage widths, got {tuple(channels)}")
    if width_multiplier <= 0:
        raise ArgumentError(f"width_multiplier must be positive, got {width_multiplier}")


def _table_blocks(
    slots: List[Optional[int]],
    residual: bool,
    shake_branches: int,
    channels: Sequence[int],
    width_multiplier: float,
) -> List[BlockSpec]:
    """Blocks 1..12; `slots[k-1]` is x_k, or None where a VGG conv was removed."""
    blocks = []
    for block_no in range(1, N_BLOCKS + 1):
        if block_no == 1:
            kernels = list(FIRST_BLOCK_KERNELS)
        else:
            pair = slots[2 * block_no - 4: 2 * block_no - 2]
            kernels = [k for k in pair if k is not None]
        blocks.append(BlockSpec(
            kernel_sizes=kernels,
            channels=block_channels(block_no, channels, width_multiplier),
            followed_by_pool=block_no in POOLED_BLOCKS,
            residual=residual,
            shake_branches=shake_branches,
        ))
    return blocks


def _input_conv(channels: Sequence[int], width_multiplier: float) -> ConvSpec:
    return ConvSpec(
        k=INPUT_CONV_K, stride=INPUT_CONV_STRIDE,
        channels=block_channels(1, channels, width_multiplier),
    )


def build_cp_resnet(
    rho: int,
    n_classes: int,
    channels: Sequence[int] = DEFAULT_CHANNELS,
    width_multiplier: float = 1.0,
    in_channels: int = 1,
    shake_branches: int = 1,
) -> ArchSpec:
    check_range("rho", rho, 0, MAX_RHO)
    if n_classes < 1:
        raise ArgumentError(f"n_classes must be >= 1, got {n_classes}")
    _check_width(channels, width_multiplier)

    arch = 'ss_resnet' if shake_branches == 2 else 'cp_resnet'
    return ArchSpec(
        name=f"{arch}_rho{rho}",
        arch=arch,
        rho=rho,
        in_channels=in_channels,
        input_conv=_input_conv(channels, width_multiplier),
        blocks=_table_blocks(rho_to_kernels(rho), True, shake_branches, channels, width_multiplier),
        n_classes=n_classes,
    )


def build_ss_resnet(
    rho: int,
    n_classes: int,
    channels: Sequence[int] = DEFAULT_CHANNELS,
    width_multiplier: float = 1.0,
    in_channels: int = 1,
) -> ArchSpec:
    """CP_ResNet(ρ) with every block duplicated into two shaken branches."""
    return build_cp_resnet(rho, n_classes, channels, width_multiplier, in_channels, shake_branches=2)


def build_vgg(
    n_removed: int,
    n_classes: int,
    channels: Sequence[int] = DEFAULT_CHANNELS,
    width_multiplier: float = 1.0,
    in_channels: int = 1,
) -> ArchSpec:
    """The table layout without shortcuts, all x_k = 3, minus the last `n_removed` convs.

    Removed layers are deleted outright (not turned into 1×1); pooling stays
    where it was.
    """
    check_range("n_removed", n_removed, 0, N_SLOTS)
    if n_classes < 1:
        raise ArgumentError(f"n_classes must be >= 1, got {n_classes}")
    _check_width(channels, width_multiplier)

    slots: List[Optional[int]] = [3] * N_SLOTS
    for index in range(N_SLOTS - n_removed, N_SLOTS):
        slots[index] = None

    return ArchSpec(
        name=f"vgg_removed{n_removed}",
        arch='vgg',
        n_removed=n_removed,
        in_channels=in_channels,
        input_conv=_input_conv(channels, width_multiplier),
        blocks=_table_blocks(slots, False, 1, channels, width_multiplier),
        n_classes=n_classes,
    )


def build_spec(
    arch: ArchName,
    value: int,
    n_classes: int,
    channels: Sequence[int] = DEFAULT_CHANNELS,
    width_multiplier: float = 1.0,
    in_channels: int = 1,
) -> ArchSpec:
    """Dispatch on the architecture name; `value` is ρ, or the removal count for VGG."""
    builders = {
        'cp_resnet': build_cp_resnet,
        'ss_resnet': build_ss_resnet,
        'vgg': build_vgg,
    }
    if arch not in builders:
        raise ArgumentError(f"Unknown architecture: {arch!r}")
    return builders[arch](value, n_classes, channels, width_multiplier, in_channels)


def parameter_count(spec: ArchSpec) -> int:
    """Closed-form count of trainable parameters (batchnorm affine included)."""

    def conv_bn(c_in: int, c_out: int, k: int) -> int:
        return c_in * c_out * k * k + 2 * c_out

    total = conv_bn(spec.in_channels, spec.input_conv.channels, spec.input_conv.k)
    c_in = spec.input_conv.channels
    for block in spec.blocks:
        if not block.kernel_sizes:
            continue
        branch = 0
        c = c_in
        for k in block.kernel_sizes:
            branch += conv_bn(c, block.channels, k)
            c = block.channels
        total += branch * block.shake_branches
        if block.residual and c_in != block.channels:
            total += c_in * block.channels
        c_in = block.channels
    total += conv_bn(c_in, spec.n_classes, 1)
    return total
