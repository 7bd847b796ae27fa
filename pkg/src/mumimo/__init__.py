"""Multiuser massive MIMO link-level simulation library."""

from .channel import ChannelSet, Link, Scenario, generate_channels, stack_composite
from .metrics import ResultTable, SnrPoint, count_bit_errors, noise_variance_for, sum_rate
from .precoders import PowerBudget, PrecoderOutput
from .simkernel import (
    Experiment,
    ExperimentSpec,
    paired_streams,
    run_downlink_sumrate,
    run_experiment,
    run_uplink_ber,
)
from .streams import RandomStream

__version__ = "0.1.0"

__all__ = [
    "ChannelSet",
    "Experiment",
    "ExperimentSpec",
    "Link",
    "PowerBudget",
    "PrecoderOutput",
    "RandomStream",
    "ResultTable",
    "Scenario",
    "SnrPoint",
    "count_bit_errors",
    "generate_channels",
    "noise_variance_for",
    "paired_streams",
    "run_downlink_sumrate",
    "run_experiment",
    "run_uplink_ber",
    "stack_composite",
    "sum_rate",
]
