"""Qudit-assisted multi-controlled Toffoli toolkit."""

from .core import (
    CapacityError,
    Circuit,
    Controlled,
    CyclicShift,
    StateVector,
    SubspaceFlip,
    SubspaceHadamard,
    SubspacePhase,
    SubspaceSwap,
    ValidationError,
    apply_gate,
    circuit_unitary,
    classical_map,
    gate_unitary,
)
from .decomposer import Topology, build_encoder, build_full_mct

__version__ = "0.1.0"
