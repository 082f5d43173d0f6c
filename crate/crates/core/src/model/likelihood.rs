use crate::bits::{get_bit, iter_ones, words_for};
use crate::error::{Error, Result};

use super::gamma::gamma_row_into;
use super::types::{BinaryDataMatrix, QMatrix, RateParams, Rule};

/// Response probability for one entry: θ when the ideal response is on, ψ otherwise.
pub fn response_prob(gamma: bool, theta: f64, psi: f64) -> Result<f64> {
    if !(0.0 < psi && psi < theta && theta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < psi < theta < 1, got psi={psi}, theta={theta}"
        )));
    }
    Ok(if gamma { theta } else { psi })
}

/// Logs of θ, 1−θ, ψ, 1−ψ per feature.
///
/// Unlike [`RateParams`] this does not insist on ψ < θ, so degenerate
/// configurations (θ = ψ) can be evaluated.
#[derive(Clone, Debug)]
pub struct LogRates {
    pub(crate) lt: Vec<f64>,
    pub(crate) l1t: Vec<f64>,
    pub(crate) lp: Vec<f64>,
    pub(crate) l1p: Vec<f64>,
}

impl LogRates {
    pub fn from_probs(theta: &[f64], psi: &[f64]) -> Result<Self> {
        if theta.len() != psi.len() {
            return Err(Error::Dimension("rate vectors differ in length".into()));
        }
        for &v in theta.iter().chain(psi) {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter(format!("rate {v} outside (0,1)")));
            }
        }
        Ok(LogRates {
            lt: theta.iter().map(|t| t.ln()).collect(),
            l1t: theta.iter().map(|t| (-t).ln_1p()).collect(),
            lp: psi.iter().map(|p| p.ln()).collect(),
            l1p: psi.iter().map(|p| (-p).ln_1p()).collect(),
        })
    }

    pub fn new(rates: &RateParams) -> Self {
        Self::from_probs(&rates.theta, &rates.psi).expect("validated rates")
    }

    /// A uniform "no information" kernel: every log term is zero, so every
    /// likelihood evaluates to 1. Used for prior-only runs.
    pub fn flat(l: usize) -> Self {
        LogRates {
            lt: vec![0.0; l],
            l1t: vec![0.0; l],
            lp: vec![0.0; l],
            l1p: vec![0.0; l],
        }
    }

    pub fn n_features(&self) -> usize {
        self.lt.len()
    }

    /// Log-likelihood contribution of feature l when the ideal response is on.
    #[inline]
    pub fn on(&self, l: usize, n1: u32, n0: u32) -> f64 {
        n1 as f64 * self.lt[l] + n0 as f64 * self.l1t[l]
    }

    #[inline]
    pub fn off(&self, l: usize, n1: u32, n0: u32) -> f64 {
        n1 as f64 * self.lp[l] + n0 as f64 * self.l1p[l]
    }
}

/// Sufficient statistics of a set of subjects: its size and the number of
/// ones in each feature.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureCounts {
    pub size: u32,
    pub ones: Vec<u32>,
}

impl FeatureCounts {
    pub fn zeros(l: usize) -> Self {
        FeatureCounts {
            size: 0,
            ones: vec![0; l],
        }
    }

    pub fn from_subjects(y: &BinaryDataMatrix, subjects: &[usize]) -> Self {
        let mut c = Self::zeros(y.n_features());
        for &i in subjects {
            c.add_subject(y, i);
        }
        c
    }

    pub fn add_subject(&mut self, y: &BinaryDataMatrix, i: usize) {
        self.size += 1;
        for l in iter_ones(y.row(i)) {
            self.ones[l] += 1;
        }
    }

    pub fn add(&mut self, other: &FeatureCounts) {
        self.size += other.size;
        for (a, b) in self.ones.iter_mut().zip(&other.ones) {
            *a += *b;
        }
    }

    pub fn sub(&mut self, other: &FeatureCounts) {
        debug_assert!(self.size >= other.size);
        self.size -= other.size;
        for (a, b) in self.ones.iter_mut().zip(&other.ones) {
            debug_assert!(*a >= *b);
            *a -= *b;
        }
    }

    pub fn sum(a: &FeatureCounts, b: &FeatureCounts) -> FeatureCounts {
        let mut c = a.clone();
        c.add(b);
        c
    }

    #[inline]
    pub fn n1(&self, l: usize) -> u32 {
        self.ones[l]
    }

    #[inline]
    pub fn n0(&self, l: usize) -> u32 {
        self.size - self.ones[l]
    }
}

/// Log-likelihood of a cluster from its counts and its ideal response row.
pub fn loglik_from_counts(counts: &FeatureCounts, gamma: &[u64], rates: &LogRates) -> f64 {
    let mut s = 0.0;
    for l in 0..counts.ones.len() {
        let (n1, n0) = (counts.n1(l), counts.n0(l));
        s += if get_bit(gamma, l) {
            rates.on(l, n1, n0)
        } else {
            rates.off(l, n1, n0)
        };
    }
    s
}

/// Log-likelihood of the subjects in `members`, all sharing state vector `eta`.
pub fn cluster_loglik(
    y: &BinaryDataMatrix,
    members: &[usize],
    eta: &[bool],
    q: &QMatrix,
    rule: Rule,
    rates: &LogRates,
) -> Result<f64> {
    if eta.len() != q.n_states() {
        return Err(Error::Dimension(format!(
            "state vector has length {} but Q has {} rows",
            eta.len(),
            q.n_states()
        )));
    }
    if q.n_features() != y.n_features() || rates.n_features() != y.n_features() {
        return Err(Error::Dimension(
            "feature counts of Y, Q and rates differ".into(),
        ));
    }
    if members.is_empty() {
        return Err(Error::InvalidParameter("empty cluster".into()));
    }
    let mut g = vec![0u64; words_for(q.n_features())];
    gamma_row_into(|m| eta[m], q, rule, &mut g);
    Ok(loglik_from_counts(
        &FeatureCounts::from_subjects(y, members),
        &g,
        rates,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn response_probabilities() {
        assert_eq!(response_prob(true, 0.9, 0.1).unwrap(), 0.9);
        assert_eq!(response_prob(false, 0.9, 0.15).unwrap(), 0.15);
        assert_eq!(response_prob(true, 0.8, 0.15).unwrap(), 0.8);
        assert!(response_prob(true, 0.3, 0.3).is_err());
        assert!(response_prob(true, 0.3, 0.5).is_err());
    }

    #[test]
    fn single_entry() {
        let y = BinaryDataMatrix::from_rows(&[vec![1u8]]).unwrap();
        let q = QMatrix::from_rows(&[vec![1u8]]).unwrap();
        let r = LogRates::from_probs(&[0.8], &[0.15]).unwrap();
        let v = cluster_loglik(&y, &[0], &[true], &q, Rule::Dino, &r).unwrap();
        assert!((v - 0.8f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn degenerate_rates_ignore_state() {
        let y = BinaryDataMatrix::from_rows(&[vec![1u8, 0, 1], vec![0, 0, 1]]).unwrap();
        let q = QMatrix::from_rows(&[vec![1u8, 1, 0], vec![0, 1, 1]]).unwrap();
        let r = LogRates::from_probs(&[0.4; 3], &[0.4; 3]).unwrap();
        let base = cluster_loglik(&y, &[0, 1], &[false, false], &q, Rule::Dino, &r).unwrap();
        for eta in [[true, false], [false, true], [true, true]] {
            let v = cluster_loglik(&y, &[0, 1], &eta, &q, Rule::Dino, &r).unwrap();
            assert!((v - base).abs() < 1e-12);
        }
    }

    #[test]
    fn counts_match_per_subject_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let (n, l, m) = (5, 8, 3);
            let y = BinaryDataMatrix::from_rows(
                &(0..n)
                    .map(|_| (0..l).map(|_| rng.random_range(0..2u8)).collect::<Vec<_>>())
                    .collect::<Vec<_>>(),
            )
            .unwrap();
            let q = QMatrix::from_rows(
                &(0..m)
                    .map(|_| (0..l).map(|_| rng.random_range(0..2u8)).collect::<Vec<_>>())
                    .collect::<Vec<_>>(),
            )
            .unwrap();
            let theta: Vec<f64> = (0..l).map(|_| rng.random_range(0.5..0.99)).collect();
            let psi: Vec<f64> = (0..l).map(|_| rng.random_range(0.01..0.5)).collect();
            let eta: Vec<bool> = (0..m).map(|_| rng.random()).collect();
            let rates = LogRates::from_probs(&theta, &psi).unwrap();
            for rule in [Rule::Dino, Rule::Dina] {
                let fast = cluster_loglik(&y, &(0..n).collect::<Vec<_>>(), &eta, &q, rule, &rates)
                    .unwrap();
                let mut naive = 1.0f64;
                for i in 0..n {
                    for ll in 0..l {
                        let covered =
                            (0..m).any(|mm| q.get(mm, ll) && eta[mm] == (rule == Rule::Dino));
                        let gamma = match rule {
                            Rule::Dino => covered,
                            Rule::Dina => !covered,
                        };
                        let lam = if gamma { theta[ll] } else { psi[ll] };
                        naive *= if y.get(i, ll) { lam } else { 1.0 - lam };
                    }
                }
                assert!(
                    (fast - naive.ln()).abs() < 1e-12,
                    "{fast} vs {}",
                    naive.ln()
                );
            }
        }
    }

    #[test]
    fn counts_add_and_subtract() {
        let y = BinaryDataMatrix::from_rows(&[vec![1u8, 0], vec![1, 1], vec![0, 1]]).unwrap();
        let mut a = FeatureCounts::from_subjects(&y, &[0, 1]);
        let b = FeatureCounts::from_subjects(&y, &[2]);
        a.add(&b);
        assert_eq!(a, FeatureCounts::from_subjects(&y, &[0, 1, 2]));
        a.sub(&b);
        assert_eq!(a.ones, vec![2, 1]);
        assert_eq!(a.n0(1), 1);
    }
}
