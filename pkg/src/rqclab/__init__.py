"""Numerical laboratory for decoupling with random quantum circuits.

Submodules:

* :mod:`rqclab.pauli` -- bit-packed Pauli strings.
* :mod:`rqclab.weight_chain` -- the birth-death chain on Pauli weights.
* :mod:`rqclab.string_chain` -- the Markov chain on full Pauli strings.
* :mod:`rqclab.gambler` -- generalized gambler's ruin.
* :mod:`rqclab.circuit` -- random circuits, greedy leveling, coverage.
* :mod:`rqclab.decoupler` -- dense density-matrix engine.
* :mod:`rqclab.cli` -- CSV-emitting experiment driver.
"""

from rqclab.errors import CapacityError, DomainError, RejectionCapError
from rqclab.pauli import PauliString

__all__ = ["CapacityError", "DomainError", "PauliString", "RejectionCapError"]
__version__ = "0.1.0"
