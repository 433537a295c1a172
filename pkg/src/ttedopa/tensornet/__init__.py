"""Matrix product states, the chain MPO and the bond-adaptive TDVP integrator."""

from .mpo import MpoOperator, build_chain_mpo
from .mps import MpsState, canonical_errors, init_state, product_state
from .tdvp import EvolutionConfig, TdvpIntegrator, tdvp_step

__all__ = [
    "EvolutionConfig",
    "MpoOperator",
    "MpsState",
    "TdvpIntegrator",
    "build_chain_mpo",
    "canonical_errors",
    "init_state",
    "product_state",
    "tdvp_step",
]
