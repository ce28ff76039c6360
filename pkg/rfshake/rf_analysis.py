"""Receptive field of every layer on a network's main path.

For layer n with filter size k_n and stride s_n:

    S_n  = S_{n-1} * s_n
    RF_n = RF_{n-1} + (k_n - 1) * S_{n-1}

starting from S_0 = 1, RF_0 = 1. The growth term uses the spacing of the
layer's input grid, S_{n-1}. Max pooling enters as a layer with k = s = 2.
The network's RF is the RF of its last conv (the 1×1 head).
"""
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel

from rfshake.errors import ArgumentError, ClippedReceptiveFieldError, NoSolutionError
from rfshake.architectures import ArchSpec, MAX_RHO, N_SLOTS, ReceptiveFieldProbe, build_cp_resnet, build_vgg
from rfshake.architectures.specs import LayerKind, check_range
from rfshake.tensor_engine import Tensor, mul, sum as tensor_sum

RF_TABLE_COLUMNS = ["layer_index", "name", "kind", "k", "s", "input_stride", "cumulative_stride", "rf"]


class LayerTrace(BaseModel):
    layer_index: int
    name: str
    kind: LayerKind
    k: int
    s: int
    input_stride: int
    """S_{n-1}: spacing, in input pixels, of the grid this layer reads"""
    cumulative_stride: int
    """S_n"""
    rf: int
    """RF_n in input-spectrogram pixels"""


class RFReport(BaseModel):
    network_name: str
    traces: List[LayerTrace]
    max_rf: int


def compute_rf(spec: ArchSpec) -> RFReport:
    layers = spec.layers() if isinstance(spec, ArchSpec) else list(spec or [])
    if not layers:
        raise ArgumentError("compute_rf needs a non-empty spec")
    if not any(layer.kind in ('input', 'conv') for layer in layers):
        raise ArgumentError("compute_rf needs at least one conv layer")

    traces: List[LayerTrace] = []
    stride, rf = 1, 1
    for index, layer in enumerate(layers, start=1):
        input_stride = stride
        rf = rf + (layer.k - 1) * input_stride
        stride = input_stride * layer.stride
        traces.append(LayerTrace(
            layer_index=index, name=layer.name, kind=layer.kind,
            k=layer.k, s=layer.stride,
            input_stride=input_stride, cumulative_stride=stride, rf=rf,
        ))

    name = spec.name if isinstance(spec, ArchSpec) else "layers"
    return RFReport(network_name=name, traces=traces, max_rf=traces[-1].rf)


def rf_for_rho(rho: int) -> int:
    check_range("rho", rho, 0, MAX_RHO)
    return compute_rf(build_cp_resnet(rho, n_classes=1)).max_rf


def rf_table() -> Dict[int, int]:
    """ρ -> max RF of CP_ResNet(ρ), for every ρ in 0..21."""
    return {rho: rf_for_rho(rho) for rho in range(MAX_RHO + 1)}


def vgg_rf_table() -> Dict[int, int]:
    """removal count -> max RF of the VGG variant."""
    return {n: compute_rf(build_vgg(n, n_classes=1)).max_rf for n in range(N_SLOTS + 1)}


def inverse_rho(target_rf: int) -> int:
    """Largest ρ whose RF does not exceed `target_rf`."""
    table = rf_table()
    if target_rf < table[0]:
        raise NoSolutionError(f"no rho gives an RF <= {target_rf}; the smallest is {table[0]}")
    return max(rho for rho, rf in table.items() if rf <= target_rf)


def empirical_rf(spec: ArchSpec, input_size: int, analytic_rf: Optional[int] = None) -> int:
    """Side length of the input-gradient support of one central output neuron.

    Runs the architecture's main path as a `ReceptiveFieldProbe` (all-positive filters,
    identity activations, sum pooling) in float64.
    """
    analytic_rf = analytic_rf or compute_rf(spec).max_rf
    if input_size <= analytic_rf:
        raise ClippedReceptiveFieldError(
            f"input of {input_size} px cannot hold an RF of {analytic_rf} px"
        )

    probe = ReceptiveFieldProbe(spec)
    x = Tensor(np.zeros((1, 1, input_size, input_size)), requires_grad=True, dtype=np.float64)
    out = probe(x)
    h_out, w_out = out.shape[2], out.shape[3]
    selector = np.zeros(out.shape)
    selector[0, 0, h_out // 2, w_out // 2] = 1.0
    tensor_sum(mul(out, selector)).backward()

    support = np.argwhere(x.grad[0, 0] != 0)
    top, left = support.min(axis=0)
    bottom, right = support.max(axis=0)
    if top == 0 or left == 0 or bottom == input_size - 1 or right == input_size - 1:
        raise ClippedReceptiveFieldError(
            f"gradient support touches the border of a {input_size} px input"
        )
    height, width = bottom - top + 1, right - left + 1
    logger.debug(f"{spec.name}: gradient support {height}x{width} (analytic {analytic_rf})")
    return int(max(height, width))


def rf_report_frame(report: RFReport) -> pd.DataFrame:
    return pd.DataFrame(
        [trace.model_dump() for trace in report.traces], columns=RF_TABLE_COLUMNS
    )


def format_rf_table(report: RFReport) -> str:
    """Aligned text table of the traces, closing with the network's max RF."""
    frame = rf_report_frame(report)
    lines = [frame.to_string(index=False)]
    lines.append(f"{report.network_name}: max RF {report.max_rf}x{report.max_rf}")
    return "\n".join(lines)
