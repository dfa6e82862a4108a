"""Software neuromorphic starter kit: engine, coders, virtual pipeline, car demo and GA trainer."""

from nskit.snn import (
    Engine,
    Network,
    Neuron,
    OutputRecord,
    SpikeEvent,
    StdpRule,
    Synapse,
    validate_network,
)

__version__ = "0.1.0"

__all__ = [
    "Engine",
    "Network",
    "Neuron",
    "OutputRecord",
    "SpikeEvent",
    "StdpRule",
    "Synapse",
    "validate_network",
]
