"""Spin-chain dynamics lab: disordered XY chains with sparse ZZ bonds.

Exact Pauli-string algebra, dense propagators, commutator-norm measurements
under disorder averaging, and analytic Lieb-Robinson bound evaluators, tied
together by the ``lightcone-lab`` command line tool.
"""

from .pauli import (
    PauliString,
    SpinOperator,
    pauli_mul,
    pauli_commutator,
    to_dense,
    exp_zz,
    conjugate_by_zz,
    parse_pauli,
    format_pauli,
)

__version__ = "0.1.0"

__all__ = [
    "PauliString",
    "SpinOperator",
    "pauli_mul",
    "pauli_commutator",
    "to_dense",
    "exp_zz",
    "conjugate_by_zz",
    "parse_pauli",
    "format_pauli",
    "__version__",
]
