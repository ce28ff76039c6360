from .specs import (
    ArchName,
    ArchSpec,
    BlockSpec,
    ConvSpec,
    LayerDescriptor,
)
from .builders import (
    DEFAULT_CHANNELS,
    MAX_RHO,
    N_SLOTS,
    build_cp_resnet,
    build_spec,
    build_ss_resnet,
    build_vgg,
    parameter_count,
    rho_to_kernels,
)
from .base_network import BaseNetwork, Module
from .network import (
    ClassifierHead,
    ConvNet,
    PlainBlock,
    ReceptiveFieldProbe,
    ResidualBlock,
)
from .model_state import ModelState, instantiate
