use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{QMatrix, RateParams, Rule, DEFAULT_MAX_BLOCK_STATES};
use crate::partition::Partition;
use crate::priors::{AlphaPrior, PartitionPriorSpec, RatePriorSpec};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Truncated at M† latent states.
    #[default]
    Finite,
    /// Number of states learned by slice sampling.
    Infinite,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "finite" => Ok(Mode::Finite),
            "infinite" => Ok(Mode::Infinite),
            _ => Err(Error::Config(format!(
                "unknown mode {s:?} (finite|infinite)"
            ))),
        }
    }
}

/// Prior hyperparameters shared by all features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub partition: PartitionPriorSpec,
    pub alpha2: f64,
    pub alpha: AlphaPrior,
    pub a_theta: f64,
    pub b_theta: f64,
    pub a_psi: f64,
    pub b_psi: f64,
    pub theta_lower: Option<f64>,
    pub psi_upper: Option<f64>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            partition: PartitionPriorSpec::default(),
            alpha2: 1.0,
            alpha: AlphaPrior::default(),
            a_theta: 1.0,
            b_theta: 1.0,
            a_psi: 1.0,
            b_psi: 1.0,
            theta_lower: None,
            psi_upper: None,
        }
    }
}

impl PriorConfig {
    pub fn rate_prior(&self, l: usize) -> RatePriorSpec {
        RatePriorSpec::uniform(l, self.a_theta, self.b_theta, self.a_psi, self.b_psi)
            .with_bounds(self.theta_lower, self.psi_upper)
    }
}

/// Everything a chain needs besides the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Total iterations, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub n_chains: usize,
    pub seed: u64,
    /// Truncation level M† (finite mode) or initial state count (infinite mode).
    pub m_dagger: usize,
    pub rule: Rule,
    pub mode: Mode,
    /// Must-link blocks: subjects sharing a block always share a cluster.
    pub partial_clusters: Option<Partition>,
    /// Hold the partition at `partial_clusters` instead of sampling it.
    pub fix_partition: bool,
    /// Intermediate restricted scans used to reach a split-merge launch state.
    pub split_merge_scans: usize,
    pub priors: PriorConfig,
    /// Initialization: probability of a one in an eligible Q column.
    pub p_init: f64,
    /// Initialization: columns with marginal rate above this are eligible.
    pub tau1: f64,
    pub max_block_states: usize,
    /// Infinite mode: hard cap on the number of represented states.
    pub max_states: Option<usize>,
    pub fixed_q: Option<QMatrix>,
    pub fixed_rates: Option<RateParams>,
    pub fixed_alpha1: Option<f64>,
    /// Disable the likelihood and sample from the prior.
    pub prior_only: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            iterations: 20_000,
            burn_in: 10_000,
            thin: 1,
            n_chains: 3,
            seed: 1,
            m_dagger: 5,
            rule: Rule::Dino,
            mode: Mode::Finite,
            partial_clusters: None,
            fix_partition: false,
            split_merge_scans: 5,
            priors: PriorConfig::default(),
            p_init: 0.1,
            tau1: 0.3,
            max_block_states: DEFAULT_MAX_BLOCK_STATES,
            max_states: None,
            fixed_q: None,
            fixed_rates: None,
            fixed_alpha1: None,
            prior_only: false,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self, n: usize, l: usize) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(Error::Config(format!(
                "iterations ({}) must exceed burn_in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.thin == 0 || self.n_chains == 0 {
            return Err(Error::Config("thin and chains must be at least 1".into()));
        }
        if self.m_dagger == 0 {
            return Err(Error::Config("M† must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.p_init) || !(0.0..=1.0).contains(&self.tau1) {
            return Err(Error::Config("p_init and tau1 must lie in [0,1]".into()));
        }
        if !(self.priors.alpha2 > 0.0) || self.priors.alpha.grid < 2 {
            return Err(Error::Config(
                "alpha2 must be positive and the alpha grid at least 2 points".into(),
            ));
        }
        if !(self.priors.alpha.a_beta > 0.0 && self.priors.alpha.b_beta > 0.0) {
            return Err(Error::Config("a_beta and b_beta must be positive".into()));
        }
        self.priors.rate_prior(l).validate()?;
        if let Some(p) = &self.partial_clusters {
            if p.n_items() != n {
                return Err(Error::Config(format!(
                    "partial clusters cover {} subjects, data has {n}",
                    p.n_items()
                )));
            }
        }
        if self.fix_partition && self.partial_clusters.is_none() {
            return Err(Error::Config("fix_partition needs partial clusters".into()));
        }
        if let Some(q) = &self.fixed_q {
            if q.n_features() != l {
                return Err(Error::Config(format!(
                    "fixed Q has {} columns, data has {l}",
                    q.n_features()
                )));
            }
            if self.mode == Mode::Infinite {
                return Err(Error::Config("a fixed Q requires finite mode".into()));
            }
        }
        if let Some(r) = &self.fixed_rates {
            if r.n_features() != l {
                return Err(Error::Config("fixed rates have the wrong length".into()));
            }
        }
        if let Some(a) = self.fixed_alpha1 {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::Config("fixed alpha1 must be positive".into()));
            }
        }
        let m = self.n_states();
        if self.mode == Mode::Finite && self.fixed_q.is_none() && !self.prior_only && 2 * m >= l {
            return Err(Error::Identifiability(format!(
                "a Q in the constraint set needs L > 2M; got M = {m}, L = {l}"
            )));
        }
        Ok(())
    }

    /// Number of states in finite mode.
    pub fn n_states(&self) -> usize {
        self.fixed_q
            .as_ref()
            .map_or(self.m_dagger, |q| q.n_states())
    }

    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    /// Hex SHA-256 of the canonical JSON form of the configuration with the
    /// seed excluded, so chains of one run share a hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.seed = 0;
        let json = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_settings() {
        let c = ChainConfig::default();
        assert_eq!((c.n_chains, c.burn_in, c.retained()), (3, 10_000, 10_000));
        assert_eq!((c.p_init, c.tau1), (0.1, 0.3));
        assert_eq!((c.priors.alpha.a_beta, c.priors.alpha.b_beta), (1.0, 1.0));
        assert_eq!(c.split_merge_scans, 5);
    }

    #[test]
    fn validation() {
        let mut c = ChainConfig {
            iterations: 10,
            burn_in: 10,
            ..Default::default()
        };
        assert!(c.validate(5, 20).is_err());
        c.iterations = 11;
        assert!(c.validate(5, 20).is_ok());
        c.m_dagger = 11;
        assert!(c.validate(5, 20).is_err());
    }

    #[test]
    fn hash_ignores_seed_only() {
        let a = ChainConfig::default();
        let b = ChainConfig {
            seed: 99,
            ..a.clone()
        };
        let c = ChainConfig {
            thin: 2,
            ..a.clone()
        };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}
