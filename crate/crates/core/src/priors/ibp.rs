use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::LatentStateMatrix;
use crate::numeric::{ln_rising, log_sum_exp};
use statrs::function::gamma::ln_gamma;

/// Finite-M Beta-Bernoulli prior on latent states: p_m ~ Beta(α₁α₂/M, α₂)
/// and η*_jm | p_m ~ Bernoulli(p_m).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatePriorSpec {
    pub alpha1: f64,
    pub alpha2: f64,
    pub m: usize,
}

/// log P(H*) with the state probabilities integrated out.
pub fn log_prior_hstar(h: &LatentStateMatrix, spec: &StatePriorSpec) -> f64 {
    let s: Vec<usize> = (0..h.n_states()).map(|m| h.column_sum(m)).collect();
    log_prior_hstar_counts(&s, h.n_rows(), spec.alpha1, spec.alpha2, spec.m)
}

/// Same as [`log_prior_hstar`] from the column sums `s` of a T-row matrix.
/// `m` is the truncation level entering α₁α₂/M; usually `s.len()`.
pub fn log_prior_hstar_counts(s: &[usize], t: usize, alpha1: f64, alpha2: f64, m: usize) -> f64 {
    // B(a+s, α₂+T−s)/B(a, α₂) = a^(s) α₂^(T−s) / (a+α₂)^(T) in rising factorials
    let a = alpha1 * alpha2 / m as f64;
    let norm = ln_rising(a + alpha2, t);
    s.iter()
        .map(|&sm| ln_rising(a, sm) + ln_rising(alpha2, t - sm) - norm)
        .sum()
}

/// Log-likelihood of α under the infinite IBP with `kplus` active states
/// among `t` rows, up to terms free of α.
pub fn ibp_infinite_loglik(kplus: usize, t: usize, alpha: f64) -> f64 {
    let harmonic: f64 = (1..=t).map(|i| 1.0 / i as f64).sum();
    kplus as f64 * alpha.ln() - alpha * harmonic
}

/// log P of the left-ordered class of H* under the infinite IBP(α); zero
/// columns are ignored.
pub fn ibp_infinite_log_prior(h: &LatentStateMatrix, alpha: f64) -> f64 {
    let t = h.n_rows();
    let mut cols: Vec<Vec<bool>> = (0..h.n_states())
        .map(|m| (0..t).map(|j| h.get(j, m)).collect::<Vec<bool>>())
        .filter(|c| c.iter().any(|&v| v))
        .collect();
    let kplus = cols.len();
    let mut lp = ibp_infinite_loglik(kplus, t, alpha);
    for c in &cols {
        let mk = c.iter().filter(|&&v| v).count();
        lp += ln_gamma((t - mk + 1) as f64) + ln_gamma(mk as f64) - ln_gamma((t + 1) as f64);
    }
    cols.sort();
    let mut i = 0;
    while i < cols.len() {
        let mut j = i;
        while j < cols.len() && cols[j] == cols[i] {
            j += 1;
        }
        lp -= ln_gamma((j - i + 1) as f64);
        i = j;
    }
    lp
}

/// Beta prior on β = α₁/(1 + α₁), evaluated on a midpoint grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaPrior {
    pub a_beta: f64,
    pub b_beta: f64,
    pub grid: usize,
}

impl Default for AlphaPrior {
    fn default() -> Self {
        AlphaPrior {
            a_beta: 1.0,
            b_beta: 1.0,
            grid: 4096,
        }
    }
}

/// Log weights of the α posterior at the grid midpoints β_i = (i + ½)/n.
pub fn alpha_grid_weights(prior: &AlphaPrior, loglik: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = prior.grid;
    (0..n)
        .map(|i| {
            let beta = (i as f64 + 0.5) / n as f64;
            let alpha = beta / (1.0 - beta);
            (prior.a_beta - 1.0) * beta.ln()
                + (prior.b_beta - 1.0) * (-beta).ln_1p()
                + loglik(alpha)
        })
        .collect()
}

/// Draws α by inverse CDF over the β grid, spreading each cell's mass
/// uniformly across the cell.
pub fn sample_alpha_grid<R: Rng + ?Sized>(
    prior: &AlphaPrior,
    loglik: impl Fn(f64) -> f64,
    rng: &mut R,
) -> f64 {
    let w = alpha_grid_weights(prior, loglik);
    let total = log_sum_exp(&w);
    let mut u = rng.random::<f64>();
    let mut cell = w.len() - 1;
    for (i, x) in w.iter().enumerate() {
        u -= (x - total).exp();
        if u < 0.0 {
            cell = i;
            break;
        }
    }
    let n = prior.grid as f64;
    let beta = ((cell as f64 + rng.random::<f64>()) / n).clamp(1e-12, 1.0 - 1e-12);
    beta / (1.0 - beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::sample_beta;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::function::beta::ln_beta;

    #[test]
    fn one_by_one_case() {
        for alpha in [0.3, 1.0, 4.0] {
            let h = LatentStateMatrix::from_rows(&[vec![1u8]]).unwrap();
            let v = log_prior_hstar(
                &h,
                &StatePriorSpec {
                    alpha1: alpha,
                    alpha2: 1.0,
                    m: 1,
                },
            );
            assert!((v - (alpha / (1.0 + alpha)).ln()).abs() < 1e-13);
        }
    }

    #[test]
    fn matches_monte_carlo_integral() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (alpha1, alpha2) = (1.5, 1.0);
        let h = LatentStateMatrix::from_rows(&[vec![1u8, 0], vec![1, 1]]).unwrap();
        let spec = StatePriorSpec {
            alpha1,
            alpha2,
            m: 2,
        };
        let a = alpha1 * alpha2 / 2.0;
        let n = 1_000_000;
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for _ in 0..n {
            let p1 = sample_beta(a, alpha2, &mut rng);
            let p2 = sample_beta(a, alpha2, &mut rng);
            let v = p1 * p1 * p2 * (1.0 - p2);
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / n as f64;
        let se = ((sumsq / n as f64 - mean * mean) / n as f64).sqrt();
        let exact = log_prior_hstar(&h, &spec).exp();
        assert!((exact - mean).abs() < 4.0 * se, "{exact} vs {mean} ± {se}");
    }

    #[test]
    fn general_alpha2_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (alpha1, alpha2) = (2.0, 3.0);
        let h = LatentStateMatrix::from_rows(&[vec![0u8], vec![1], vec![1]]).unwrap();
        let spec = StatePriorSpec {
            alpha1,
            alpha2,
            m: 1,
        };
        let n = 400_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let p = sample_beta(alpha1 * alpha2, alpha2, &mut rng);
            sum += (1.0 - p) * p * p;
        }
        let exact = log_prior_hstar(&h, &spec).exp();
        assert!((exact - sum / n as f64).abs() < 3e-3 * exact.max(0.01));
    }

    #[test]
    fn rising_form_equals_beta_ratio() {
        for &(a1, a2, t) in &[(0.5, 1.0, 3usize), (2.0, 3.0, 40), (7.0, 0.5, 100)] {
            for sm in [0, 1, t / 2, t] {
                let a = a1 * a2 / 4.0;
                let want = ln_beta(a + sm as f64, a2 + (t - sm) as f64) - ln_beta(a, a2);
                let got = log_prior_hstar_counts(&[sm], t, a1, a2, 4);
                assert!((got - want).abs() < 1e-10 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn permutation_invariance() {
        let spec = StatePriorSpec {
            alpha1: 2.0,
            alpha2: 1.0,
            m: 3,
        };
        let h = LatentStateMatrix::from_rows(&[vec![1u8, 0, 0], vec![1, 1, 0]]).unwrap();
        let hc = LatentStateMatrix::from_rows(&[vec![0u8, 0, 1], vec![0, 1, 1]]).unwrap();
        let hr = LatentStateMatrix::from_rows(&[vec![1u8, 1, 0], vec![1, 0, 0]]).unwrap();
        let v = log_prior_hstar(&h, &spec);
        assert!((v - log_prior_hstar(&hc, &spec)).abs() < 1e-14);
        assert!((v - log_prior_hstar(&hr, &spec)).abs() < 1e-14);
    }

    #[test]
    fn sums_to_one_over_all_matrices() {
        let spec = StatePriorSpec {
            alpha1: 0.8,
            alpha2: 1.0,
            m: 2,
        };
        let mut total = 0.0;
        for code in 0..64u32 {
            let rows: Vec<Vec<u8>> = (0..3)
                .map(|j| (0..2).map(|m| ((code >> (2 * j + m)) & 1) as u8).collect())
                .collect();
            total += log_prior_hstar(&LatentStateMatrix::from_rows(&rows).unwrap(), &spec).exp();
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    // Piecewise-linear CDF in β implied by spreading each cell uniformly.
    fn grid_cdf(prior: &AlphaPrior, loglik: &impl Fn(f64) -> f64) -> impl Fn(f64) -> f64 {
        let w = alpha_grid_weights(prior, loglik);
        let total = log_sum_exp(&w);
        let probs: Vec<f64> = w.iter().map(|v| (v - total).exp()).collect();
        let mut cum = vec![0.0];
        for p in &probs {
            cum.push(cum.last().unwrap() + p);
        }
        let n = prior.grid;
        move |x: f64| {
            let cell = ((x * n as f64).floor() as usize).min(n - 1);
            cum[cell] + probs[cell] * (x * n as f64 - cell as f64)
        }
    }

    #[test]
    fn coarse_grid_close_to_fine_grid() {
        let s = [3usize, 0, 1, 5, 2];
        let t = 6;
        let loglik = |a: f64| log_prior_hstar_counts(&s, t, a, 1.0, s.len());
        let coarse = AlphaPrior::default();
        let fine = AlphaPrior {
            grid: 65536,
            ..coarse
        };
        let (fc, ff) = (grid_cdf(&coarse, &loglik), grid_cdf(&fine, &loglik));
        let mut ks = 0.0f64;
        for i in 1..20_000 {
            let x = i as f64 / 20_000.0;
            ks = ks.max((fc(x) - ff(x)).abs());
        }
        assert!(ks < 0.01, "KS distance {ks}");
    }

    #[test]
    fn grid_draws_are_positive_and_follow_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let prior = AlphaPrior::default();
        let loglik = |a: f64| log_prior_hstar_counts(&[2, 1], 4, a, 1.0, 2);
        let draws: Vec<f64> = (0..20_000)
            .map(|_| sample_alpha_grid(&prior, loglik, &mut rng))
            .collect();
        assert!(draws.iter().all(|&a| a > 0.0 && a.is_finite()));
        // empirical CDF in β against the grid CDF
        let mut betas: Vec<f64> = draws.iter().map(|a| a / (1.0 + a)).collect();
        betas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let cdf = grid_cdf(&prior, &loglik);
        let mut ks = 0.0f64;
        for (i, &b) in betas.iter().enumerate() {
            let emp = (i + 1) as f64 / betas.len() as f64;
            ks = ks.max((emp - cdf(b)).abs());
        }
        assert!(ks < 0.015, "KS {ks}");
    }

    #[test]
    fn infinite_prior_single_row_is_poisson() {
        let alpha: f64 = 1.7;
        for k in 0..6usize {
            let mut row = vec![1u8; k];
            row.push(0);
            let h = LatentStateMatrix::from_rows(&[row]).unwrap();
            let want = k as f64 * alpha.ln() - alpha - ln_gamma(k as f64 + 1.0);
            assert!((ibp_infinite_log_prior(&h, alpha) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn infinite_prior_two_rows_sums_to_one() {
        // classes with two rows: counts (a, b, c) of columns 10, 01, 11
        let alpha = 0.8;
        let mut total = 0.0;
        for a in 0..12usize {
            for b in 0..12usize {
                for c in 0..12usize {
                    let mut rows = vec![vec![], vec![]];
                    for (n, pat) in [(a, (1u8, 0u8)), (b, (0, 1)), (c, (1, 1))] {
                        for _ in 0..n {
                            rows[0].push(pat.0);
                            rows[1].push(pat.1);
                        }
                    }
                    rows[0].push(0);
                    rows[1].push(0);
                    let h = LatentStateMatrix::from_rows(&rows).unwrap();
                    total += ibp_infinite_log_prior(&h, alpha).exp();
                }
            }
        }
        assert!((total - 1.0).abs() < 1e-9, "{total}");
    }
}
