"""Composer circuits: closed forms, nodal-analysis oracle and decomposers."""

from .calibration import calibrate_minimax, calibrate_monotone
from .composers import (
    CorrectionCircuit,
    ProbabilityComposer,
    add_current,
    add_mul_current,
    add_mul_network,
    add_network,
    add_voltage,
    composer_conductance,
    correction_for,
    mul_current,
    mul_network,
    mul_voltage,
    readout_current,
    readout_network,
    readout_voltage,
    solve_output,
)
from .decomposer import DecomposerLadder, calibrate_ladder, decompose, decomposer_element
from .mna import ResistiveNetwork, mna_solve

__all__ = [
    "CorrectionCircuit", "DecomposerLadder", "ProbabilityComposer", "ResistiveNetwork",
    "add_current", "add_mul_current", "add_mul_network", "add_network", "add_voltage",
    "calibrate_ladder", "calibrate_minimax", "calibrate_monotone", "composer_conductance",
    "correction_for", "decompose", "decomposer_element", "mna_solve", "mul_current",
    "mul_network", "mul_voltage", "readout_current", "readout_network", "readout_voltage",
    "solve_output",
]
