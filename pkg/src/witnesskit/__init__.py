"""Entanglement witnesses for bipartite states, their local measurement
decompositions, and noise robustness analysis."""

from .analysis import (
    canonical_witness,
    classify,
    estimate_p,
    expectation,
    mc_error_study,
    simulate_measurement,
    upb_noise_threshold,
)
from .decomp import (
    PseudoMixture,
    Setting,
    SettingDecomposition,
    generalization_counts,
    generic_setting_decomposition,
    onp_two_qubit,
    ons_two_qubit,
    settings_lower_bound,
    upb_onp_decomposition,
    upb_witness_pseudomixture,
    upb_witness_settings,
    verify_decomposition,
)
from .opalg import BipartiteDims, partial_trace, partial_transpose
from .states import BipartiteState, MemoryChannelParams, memory_channel_state, noisy_target, upb_rho_be
from .witness import (
    Witness,
    edge_witness,
    optimize_epsilon,
    optimize_epsilon_ratio,
    shifted_witness,
    tau_bound,
    witness_from_npt,
)

__version__ = "0.1.0"
