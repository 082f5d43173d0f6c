//! Prior distributions and Q-matrix identifiability predicates.

mod ibp;
mod identifiability;
mod partition;
mod rates;

pub use ibp::{
    alpha_grid_weights, ibp_infinite_log_prior, ibp_infinite_loglik, log_prior_hstar,
    log_prior_hstar_counts, sample_alpha_grid, AlphaPrior, StatePriorSpec,
};
pub use identifiability::{
    canonical_witness, check_c1, check_c2, check_c2_if_feasible, check_c3, q_in_constraint_set,
    singleton_counts, C2_MAX_STATES,
};
pub use partition::{log_eppf, log_eppf_sizes, PartitionPrior, PartitionPriorSpec, PkFamily};
pub use rates::{
    log_beta_density, sample_truncated_beta, sample_truncated_beta_guarded, RatePriorSpec,
};
