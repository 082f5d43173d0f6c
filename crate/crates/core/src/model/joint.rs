use crate::bits::words_for;
use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::priors::{
    log_beta_density, log_eppf, log_prior_hstar_counts, q_in_constraint_set, AlphaPrior,
    PartitionPrior, RatePriorSpec,
};

use super::gamma::gamma_row_into;
use super::likelihood::{loglik_from_counts, FeatureCounts, LogRates};
use super::types::{BinaryDataMatrix, LatentStateMatrix, QMatrix, RateParams, Rule};

/// Fixed hyperparameters entering the joint density.
#[derive(Clone, Debug)]
pub struct ModelHyper<'a> {
    pub rule: Rule,
    pub partition: &'a PartitionPrior,
    pub rates: &'a RatePriorSpec,
    pub alpha2: f64,
    pub alpha: AlphaPrior,
    /// Reject Q outside the constraint set.
    pub strict: bool,
}

/// The joint log density split into its parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointTerms {
    pub loglik: f64,
    pub rate_prior: f64,
    pub state_prior: f64,
    pub partition_prior: f64,
    pub alpha_prior: f64,
}

impl JointTerms {
    pub fn total(&self) -> f64 {
        self.loglik + self.rate_prior + self.state_prior + self.partition_prior + self.alpha_prior
    }
}

/// Unnormalized log joint density of (Y, Z, H*, Q, θ, ψ, α₁); the state
/// probabilities are integrated out. Row j of `hstar` belongs to block j of
/// `z`.
#[allow(clippy::too_many_arguments)]
pub fn joint_logpost(
    y: &BinaryDataMatrix,
    z: &Partition,
    hstar: &LatentStateMatrix,
    q: &QMatrix,
    rates: &RateParams,
    alpha1: f64,
    hyper: &ModelHyper<'_>,
) -> Result<JointTerms> {
    let l = y.n_features();
    if z.n_items() != y.n_subjects() {
        return Err(Error::Dimension("partition and data disagree on N".into()));
    }
    if hstar.n_rows() != z.n_blocks() {
        return Err(Error::Dimension(format!(
            "H* has {} rows for {} clusters",
            hstar.n_rows(),
            z.n_blocks()
        )));
    }
    if hstar.n_states() != q.n_states() || q.n_features() != l || rates.n_features() != l {
        return Err(Error::Dimension(
            "H*, Q, rates and Y dimensions disagree".into(),
        ));
    }
    if hyper.strict && !q_in_constraint_set(q) {
        return Err(Error::Identifiability(
            "Q is outside the constraint set".into(),
        ));
    }
    let log_rates = LogRates::new(rates);
    let mut gamma = vec![0u64; words_for(l)];
    let mut loglik = 0.0;
    for (j, members) in z.blocks().iter().enumerate() {
        gamma_row_into(|m| hstar.get(j, m), q, hyper.rule, &mut gamma);
        loglik += loglik_from_counts(
            &FeatureCounts::from_subjects(y, members),
            &gamma,
            &log_rates,
        );
    }

    let pr = hyper.rates;
    let mut rate_prior = 0.0;
    for ll in 0..l {
        let (t, p) = (rates.theta[ll], rates.psi[ll]);
        if t <= pr.theta_lower(ll) || p >= pr.psi_upper(ll) {
            rate_prior = f64::NEG_INFINITY;
            break;
        }
        rate_prior += log_beta_density(t, pr.a_theta[ll], pr.b_theta[ll])
            + log_beta_density(p, pr.a_psi[ll], pr.b_psi[ll]);
    }

    let s: Vec<usize> = (0..hstar.n_states()).map(|m| hstar.column_sum(m)).collect();
    let state_prior =
        log_prior_hstar_counts(&s, hstar.n_rows(), alpha1, hyper.alpha2, q.n_states());
    let partition_prior = log_eppf(z, hyper.partition)?;
    // density of α₁ induced by β = α₁/(1+α₁) ~ Beta(a, b)
    let beta = alpha1 / (1.0 + alpha1);
    let alpha_prior =
        log_beta_density(beta, hyper.alpha.a_beta, hyper.alpha.b_beta) - 2.0 * (1.0 + alpha1).ln();

    Ok(JointTerms {
        loglik,
        rate_prior,
        state_prior,
        partition_prior,
        alpha_prior,
    })
}
