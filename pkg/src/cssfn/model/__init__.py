from .accounting import compute_depth, count_params, millions, param_breakdown
from .config import BIF_MODES, GFF_MODES, NetworkConfig
from .network import (
    Network,
    NetworkStateError,
    build_network,
    cssfb_forward,
    cssfu_forward,
    init_layers,
    mar_unit_forward,
    plain_unit_forward,
    trace_network,
    unit_layer_specs,
)

__all__ = [
    "BIF_MODES",
    "GFF_MODES",
    "Network",
    "NetworkConfig",
    "NetworkStateError",
    "build_network",
    "compute_depth",
    "count_params",
    "cssfb_forward",
    "cssfu_forward",
    "init_layers",
    "mar_unit_forward",
    "millions",
    "param_breakdown",
    "plain_unit_forward",
    "trace_network",
    "unit_layer_specs",
]
