use std::collections::HashMap;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::numeric::ln_rising;
use crate::partition::Partition;

/// Prior on the number of mixture components K ≥ 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PkFamily {
    /// P(K = k) = s (1 − s)^{k−1}.
    Geometric { success: f64 },
    /// K − 1 ~ Poisson(rate).
    ShiftedPoisson { rate: f64 },
}

impl Default for PkFamily {
    fn default() -> Self {
        PkFamily::Geometric { success: 0.1 }
    }
}

impl PkFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PkFamily::Geometric { success } if success > 0.0 && success <= 1.0 => Ok(()),
            PkFamily::ShiftedPoisson { rate } if rate > 0.0 => Ok(()),
            other => Err(Error::InvalidParameter(format!(
                "bad p_K parameters: {other:?}"
            ))),
        }
    }

    pub fn ln_pmf(&self, k: usize) -> f64 {
        if k == 0 {
            return f64::NEG_INFINITY;
        }
        match *self {
            PkFamily::Geometric { success } => {
                if success == 1.0 {
                    return if k == 1 { 0.0 } else { f64::NEG_INFINITY };
                }
                success.ln() + (k - 1) as f64 * (-success).ln_1p()
            }
            PkFamily::ShiftedPoisson { rate } => {
                let j = (k - 1) as f64;
                j * rate.ln() - rate - ln_gamma(j + 1.0)
            }
        }
    }
}

/// Mixture-of-finite-mixtures partition prior: symmetric Dirichlet(γ)
/// weights and K ~ p_K.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionPriorSpec {
    pub gamma: f64,
    pub pk: PkFamily,
}

impl Default for PartitionPriorSpec {
    fn default() -> Self {
        PartitionPriorSpec {
            gamma: 1.0,
            pk: PkFamily::default(),
        }
    }
}

/// A partition prior with a shared cache of log V_N(t).
#[derive(Debug)]
pub struct PartitionPrior {
    spec: PartitionPriorSpec,
    cache: RwLock<HashMap<(usize, usize), f64>>,
}

impl Clone for PartitionPrior {
    fn clone(&self) -> Self {
        PartitionPrior {
            spec: self.spec,
            cache: RwLock::new(self.cache.read().unwrap().clone()),
        }
    }
}

const TAIL_NATS: f64 = 40.0;
const MAX_TERMS: usize = 10_000_000;

impl PartitionPrior {
    pub fn new(spec: PartitionPriorSpec) -> Result<Self> {
        if !(spec.gamma > 0.0 && spec.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {}",
                spec.gamma
            )));
        }
        spec.pk.validate()?;
        Ok(PartitionPrior {
            spec,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn spec(&self) -> &PartitionPriorSpec {
        &self.spec
    }

    /// log V_N(t) = log Σ_k k_(t) / (γk)^(N) p_K(k).
    pub fn log_vn(&self, t: usize, n: usize) -> Result<f64> {
        if t == 0 || t > n {
            return Err(Error::InvalidParameter(format!(
                "V_N(t) needs 1 <= t <= N, got t={t}, N={n}"
            )));
        }
        if let Some(&v) = self.cache.read().unwrap().get(&(n, t)) {
            return Ok(v);
        }
        let v = self.compute_log_vn(t, n)?;
        self.cache.write().unwrap().insert((n, t), v);
        Ok(v)
    }

    fn compute_log_vn(&self, t: usize, n: usize) -> Result<f64> {
        let g = self.spec.gamma;
        let (mut max, mut acc) = (f64::NEG_INFINITY, 0.0f64);
        for k in t.. {
            if k > MAX_TERMS {
                return Err(Error::Numeric(format!(
                    "V_N({t}) with N={n} did not converge"
                )));
            }
            let lp = self.spec.pk.ln_pmf(k);
            let term = if lp == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                let falling: f64 = (0..t).map(|i| ((k - i) as f64).ln()).sum();
                let rising = if n <= 256 {
                    (0..n).map(|i| (g * k as f64 + i as f64).ln()).sum()
                } else {
                    ln_rising(g * k as f64, n)
                };
                falling - rising + lp
            };
            if term > max {
                acc = acc * (max - term).exp() + 1.0;
                max = term;
            } else if term > f64::NEG_INFINITY {
                acc += (term - max).exp();
            }
            if k > n
                && (term < max - TAIL_NATS
                    || (term == f64::NEG_INFINITY && max > f64::NEG_INFINITY))
            {
                break;
            }
        }
        if max == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(max + acc.ln())
    }

    /// log γ^(n), the ascending factorial of the Dirichlet parameter.
    #[inline]
    pub fn ln_rising_gamma(&self, n: usize) -> f64 {
        ln_rising(self.spec.gamma, n)
    }

    pub fn log_eppf_sizes(&self, sizes: &[usize]) -> Result<f64> {
        let n: usize = sizes.iter().sum();
        let mut v = self.log_vn(sizes.len(), n)?;
        for &s in sizes {
            v += self.ln_rising_gamma(s);
        }
        Ok(v)
    }
}

/// log p(C) = log V_N(|C|) + Σ_blocks log γ^(|block|).
pub fn log_eppf(c: &Partition, prior: &PartitionPrior) -> Result<f64> {
    prior.log_eppf_sizes(&c.block_sizes())
}

pub fn log_eppf_sizes(sizes: &[usize], prior: &PartitionPrior) -> Result<f64> {
    prior.log_eppf_sizes(sizes)
}
