//! Generative-model kernels: ideal responses, likelihoods and the cluster
//! marginal likelihood with latent states integrated out.

mod gamma;
mod joint;
mod likelihood;
mod marginal;
mod types;

pub use gamma::{build_gamma, build_gamma_dina, build_gamma_dino, gamma_row_into};
pub use joint::{joint_logpost, JointTerms, ModelHyper};
pub use likelihood::{cluster_loglik, loglik_from_counts, response_prob, FeatureCounts, LogRates};
pub use marginal::{
    marginal_loglik_g, rcm_state_blocks, GScratch, MarginalKernel, StateLogProbs,
    DEFAULT_MAX_BLOCK_STATES,
};
pub use types::{BinaryDataMatrix, DesignMatrix, LatentStateMatrix, QMatrix, RateParams, Rule};
