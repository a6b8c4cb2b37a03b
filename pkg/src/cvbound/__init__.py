"""Certification, synthesis and statistical verification of bound entangled Gaussian states."""

__version__ = "0.1.0"

from .certifier import certify, entanglement_measure, ppt_measure
from .circuit import paper_circuit, simulate_circuit
from .gaussian import GaussianState, ModePartition, physicality_margin, symplectic_eigenvalues

__all__ = [
    "GaussianState",
    "ModePartition",
    "certify",
    "entanglement_measure",
    "paper_circuit",
    "physicality_margin",
    "ppt_measure",
    "simulate_circuit",
    "symplectic_eigenvalues",
]
