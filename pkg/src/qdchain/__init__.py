"""Periodic q-Darboux chains of difference operators on the integer lattice."""

from .chain_r2 import (
    ChainParams,
    KappaConstraint,
    ValidationReport,
    build_pair,
    c_coeff,
    chain_L,
    chain_operator,
    eta,
    kappa_constraint,
    validate,
    xi,
)
from .darboux import (
    DarbouxChain,
    EigenPair,
    SpectrumTable,
    accumulation_point,
    completeness_defect,
    eigenbasis,
    eigenvalue_table,
    ground_state,
    ladder,
)
from .lattice import (
    FirstOrderOp,
    LatticeFunction,
    LatticeWindow,
    TridiagonalOp,
    apply,
    apply_adjoint,
    chain_residual,
    lower_product,
    make_first_order,
    norm_bound,
    raise_product,
    shift_conjugate,
)
from .tridiag import compare_spectra, oracle_spectrum, smallest_eigenvalues, sturm_count

__version__ = "0.1.0"
