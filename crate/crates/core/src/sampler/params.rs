//! Conjugate and grid updates for the state vectors, rates, α₁ and p.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{
    FeatureCounts, GScratch, LogRates, MarginalKernel, QMatrix, RateParams, Rule, StateLogProbs,
};
use crate::numeric::sample_beta;
use crate::priors::{
    log_prior_hstar_counts, sample_alpha_grid, sample_truncated_beta_guarded, AlphaPrior,
    RatePriorSpec,
};

use super::state::ClusterState;

/// Redraws every cluster's state vector from its full conditional. Without
/// a kernel (likelihood off) the draw is from the Bernoulli(p) prior.
pub fn update_hstar<R: Rng + ?Sized>(
    st: &mut ClusterState,
    kernel: Option<&MarginalKernel>,
    rates: &LogRates,
    p: &[f64],
    sc: &mut GScratch,
    rng: &mut R,
) {
    let probs = StateLogProbs::new_unchecked(p);
    for j in 0..st.n_clusters() {
        let mut eta = std::mem::take(&mut st.cluster_mut(j).eta);
        match kernel {
            Some(k) => {
                k.sample_states(&st.cluster(j).counts, rates, &probs, sc, rng, &mut eta);
            }
            None => {
                for (e, &pm) in eta.iter_mut().zip(p) {
                    *e = rng.random::<f64>() < pm;
                }
            }
        }
        st.cluster_mut(j).eta = eta;
    }
}

/// Counts of positive and negative responses split by the ideal response,
/// per feature: (on ones, on zeros, off ones, off zeros).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RateTallies {
    pub on1: Vec<u32>,
    pub on0: Vec<u32>,
    pub off1: Vec<u32>,
    pub off0: Vec<u32>,
}

pub fn rate_tallies(st: &ClusterState, q: &QMatrix, rule: Rule) -> RateTallies {
    let l = q.n_features();
    let mut t = RateTallies {
        on1: vec![0; l],
        on0: vec![0; l],
        off1: vec![0; l],
        off0: vec![0; l],
    };
    for (c, g) in st.clusters().iter().zip(st.gammas(q, rule)) {
        add_cluster(&mut t, &c.counts, &g);
    }
    t
}

fn add_cluster(t: &mut RateTallies, counts: &FeatureCounts, gamma: &[u64]) {
    for l in 0..t.on1.len() {
        let on = crate::bits::get_bit(gamma, l);
        let (n1, n0) = (counts.n1(l), counts.n0(l));
        if on {
            t.on1[l] += n1;
            t.on0[l] += n0;
        } else {
            t.off1[l] += n1;
            t.off0[l] += n0;
        }
    }
}

/// ψ_ℓ then θ_ℓ from their truncated Beta full conditionals.
pub fn update_rates<R: Rng + ?Sized>(
    current: &RateParams,
    tallies: &RateTallies,
    prior: &RatePriorSpec,
    rng: &mut R,
) -> Result<RateParams> {
    let l = current.n_features();
    let mut theta = current.theta.clone();
    let mut psi = current.psi.clone();
    for ll in 0..l {
        let hi = theta[ll].min(prior.psi_upper(ll));
        psi[ll] = sample_truncated_beta_guarded(
            tallies.off1[ll] as f64 + prior.a_psi[ll],
            tallies.off0[ll] as f64 + prior.b_psi[ll],
            0.0,
            hi,
            rng,
        );
        let lo = psi[ll].max(prior.theta_lower(ll));
        theta[ll] = sample_truncated_beta_guarded(
            tallies.on1[ll] as f64 + prior.a_theta[ll],
            tallies.on0[ll] as f64 + prior.b_theta[ll],
            lo,
            1.0,
            rng,
        );
    }
    RateParams::new(theta, psi).map_err(|e| Error::Numeric(format!("rate update: {e}")))
}

/// Draws rates from the jointly truncated prior by rejection, falling back
/// to sequential truncated draws.
pub fn draw_rates_from_prior<R: Rng + ?Sized>(
    prior: &RatePriorSpec,
    rng: &mut R,
) -> Result<RateParams> {
    let l = prior.n_features();
    let mut theta = vec![0.0; l];
    let mut psi = vec![0.0; l];
    for ll in 0..l {
        let (tl, pu) = (prior.theta_lower(ll), prior.psi_upper(ll));
        let mut done = false;
        for _ in 0..1000 {
            let t = sample_beta(prior.a_theta[ll], prior.b_theta[ll], rng);
            let p = sample_beta(prior.a_psi[ll], prior.b_psi[ll], rng);
            if p < t && t > tl && p < pu {
                theta[ll] = t;
                psi[ll] = p;
                done = true;
                break;
            }
        }
        if !done {
            psi[ll] = sample_truncated_beta_guarded(
                prior.a_psi[ll],
                prior.b_psi[ll],
                0.0,
                pu.min(1.0),
                rng,
            );
            theta[ll] = sample_truncated_beta_guarded(
                prior.a_theta[ll],
                prior.b_theta[ll],
                psi[ll].max(tl),
                1.0,
                rng,
            );
        }
    }
    RateParams::new(theta, psi)
}

/// α₁ from its grid full conditional given the state counts of the T
/// cluster state vectors.
pub fn update_alpha1<R: Rng + ?Sized>(
    s: &[usize],
    t: usize,
    alpha2: f64,
    prior: &AlphaPrior,
    rng: &mut R,
) -> f64 {
    let m = s.len();
    sample_alpha_grid(prior, |a| log_prior_hstar_counts(s, t, a, alpha2, m), rng)
}

/// α₁ drawn from its hyperprior.
pub fn draw_alpha1_from_prior<R: Rng + ?Sized>(prior: &AlphaPrior, rng: &mut R) -> f64 {
    let b = sample_beta(prior.a_beta, prior.b_beta, rng).clamp(1e-6, 1.0 - 1e-6);
    b / (1.0 - b)
}

/// p_m ~ Beta(s_m + α₁α₂/M, T − s_m + α₂).
pub fn update_p<R: Rng + ?Sized>(
    s: &[usize],
    t: usize,
    alpha1: f64,
    alpha2: f64,
    rng: &mut R,
) -> Vec<f64> {
    let a = alpha1 * alpha2 / s.len() as f64;
    s.iter()
        .map(|&sm| sample_beta(sm as f64 + a, (t - sm) as f64 + alpha2, rng))
        .collect()
}
