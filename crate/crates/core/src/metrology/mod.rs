//! Quantum Fisher information, skew information and the master inequality
//! `F(λ_p) ≤ Var(ρ_S, E*) − Q(ρ_S, E*)`.

mod qfi;
mod report;
mod skew;

pub use qfi::{
    fidelity, qfi_commuting_closed_form, qfi_fidelity_oracle, qfi_from_derivative, qfi_spectral,
    state_derivative, Qfi, MAX_SKIPPED_FRACTION, NEGLIGIBLE_WEIGHT, PAIR_SKIP,
};
pub use report::{
    k_general_expansion, master_inequality_report, ExpansionParts, KExpansion, ReportMetadata,
    ReportTolerances, UncertaintyReport, EXPANSION_COMMUTATOR_TOL, GAP_FLOOR,
};
pub use skew::{
    classical_k_alpha, classical_k_avg, classical_k_quadrature, log_mean, scalar_log_inequality,
    scalar_log_margin, skew_decomposition, var_minus_q, wyd_skew_alpha, wyd_skew_avg,
    wyd_skew_avg_quadrature, xi_bracket, xi_term, SkewDecomposition,
};
