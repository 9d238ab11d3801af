"""Entropic disturbance, Jones index and toric-code experiments on finite block algebras."""
__version__ = "0.1.0"

from .gf2 import BACKEND as GF2_BACKEND
from .linalg import holevo_chi, relative_entropy, von_neumann_entropy
from .blockalg import (
    BlockAlgebra,
    BlockElement,
    ConditionalExpectation,
    Ensemble,
    OptimizerConfig,
    block_average_expectation,
    chain_rule_residual,
    entropic_disturbance,
    identity_expectation,
    invariant_state_check,
    maximize_disturbance,
    pimsner_popa_constant,
    quantum_privacy,
    tensor_power,
)
from .pauli import CosetMixtureState, PauliString, StabilizerGroup, commutes, multiply
from .lattice import build_region, load_geometry
from .toric import disturbance_experiment, omega_decomposition

__all__ = [
    "GF2_BACKEND", "holevo_chi", "relative_entropy", "von_neumann_entropy",
    "BlockAlgebra", "BlockElement", "ConditionalExpectation", "Ensemble", "OptimizerConfig",
    "block_average_expectation", "chain_rule_residual", "entropic_disturbance",
    "identity_expectation", "invariant_state_check", "maximize_disturbance",
    "pimsner_popa_constant", "quantum_privacy", "tensor_power",
    "CosetMixtureState", "PauliString", "StabilizerGroup", "commutes", "multiply",
    "build_region", "load_geometry", "disturbance_experiment", "omega_decomposition",
]
