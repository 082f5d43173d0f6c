use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, inv_beta_reg, ln_beta};

use crate::error::{Error, Result};
use crate::numeric::sample_beta;

/// Independent Beta priors on θ_ℓ and ψ_ℓ, jointly truncated to ψ_ℓ < θ_ℓ,
/// with optional extra bounds θ_ℓ > lower and ψ_ℓ < upper.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePriorSpec {
    pub a_theta: Vec<f64>,
    pub b_theta: Vec<f64>,
    pub a_psi: Vec<f64>,
    pub b_psi: Vec<f64>,
    pub theta_lower: Option<Vec<f64>>,
    pub psi_upper: Option<Vec<f64>>,
}

impl RatePriorSpec {
    pub fn uniform(l: usize, a_theta: f64, b_theta: f64, a_psi: f64, b_psi: f64) -> Self {
        RatePriorSpec {
            a_theta: vec![a_theta; l],
            b_theta: vec![b_theta; l],
            a_psi: vec![a_psi; l],
            b_psi: vec![b_psi; l],
            theta_lower: None,
            psi_upper: None,
        }
    }

    pub fn with_bounds(mut self, theta_lower: Option<f64>, psi_upper: Option<f64>) -> Self {
        let l = self.a_theta.len();
        self.theta_lower = theta_lower.map(|v| vec![v; l]);
        self.psi_upper = psi_upper.map(|v| vec![v; l]);
        self
    }

    pub fn n_features(&self) -> usize {
        self.a_theta.len()
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.n_features();
        let lens = [self.b_theta.len(), self.a_psi.len(), self.b_psi.len()];
        if lens.iter().any(|&x| x != l) {
            return Err(Error::Dimension(
                "rate prior vectors differ in length".into(),
            ));
        }
        for v in self
            .a_theta
            .iter()
            .chain(&self.b_theta)
            .chain(&self.a_psi)
            .chain(&self.b_psi)
        {
            if !(*v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "beta hyperparameter {v} must be positive"
                )));
            }
        }
        for b in self.theta_lower.iter().chain(&self.psi_upper) {
            if b.len() != l || b.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidParameter(
                    "rate bounds must be in [0,1], one per feature".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn theta_lower(&self, l: usize) -> f64 {
        self.theta_lower.as_ref().map_or(0.0, |v| v[l])
    }

    pub fn psi_upper(&self, l: usize) -> f64 {
        self.psi_upper.as_ref().map_or(1.0, |v| v[l])
    }
}

pub fn log_beta_density(x: f64, a: f64, b: f64) -> f64 {
    (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta(a, b)
}

const MIN_MASS: f64 = 1e-14;
const REJECTION_TRIES: usize = 4;

/// Beta(a, b) restricted to (lower, upper).
///
/// A few plain draws are tried first; when they miss, the draw falls back to
/// inverse CDF on the regularized incomplete beta scale, working in the
/// reflected variable when the interval sits in the upper tail.
pub fn sample_truncated_beta<R: Rng + ?Sized>(
    a: f64,
    b: f64,
    lower: f64,
    upper: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(0.0 <= lower && lower < upper && upper <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "bad truncation interval ({lower}, {upper})"
        )));
    }
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "beta shapes must be positive, got ({a}, {b})"
        )));
    }
    for _ in 0..REJECTION_TRIES {
        let x = sample_beta(a, b, rng);
        if x > lower && x < upper {
            return Ok(x);
        }
    }
    let fl = beta_reg(a, b, lower);
    let x = if fl <= 0.5 {
        let fu = beta_reg(a, b, upper);
        let mass = fu - fl;
        if !(mass >= MIN_MASS) {
            return Err(Error::Numeric(format!(
                "Beta({a}, {b}) has mass {mass:e} on ({lower}, {upper})"
            )));
        }
        inv_beta_reg(a, b, fl + rng.random::<f64>() * mass)
    } else {
        let gl = beta_reg(b, a, 1.0 - upper);
        let gu = beta_reg(b, a, 1.0 - lower);
        let mass = gu - gl;
        if !(mass >= MIN_MASS) {
            return Err(Error::Numeric(format!(
                "Beta({a}, {b}) has mass {mass:e} on ({lower}, {upper})"
            )));
        }
        1.0 - inv_beta_reg(b, a, gl + rng.random::<f64>() * mass)
    };
    Ok(inside(x, lower, upper))
}

fn inside(x: f64, lower: f64, upper: f64) -> f64 {
    if x > lower && x < upper {
        x
    } else {
        // numerical inversion landed on or past an end point
        let w = upper - lower;
        (x.clamp(lower + 1e-12 * w, upper - 1e-12 * w)).clamp(lower.next_up(), upper.next_down())
    }
}

/// Like [`sample_truncated_beta`], but when the interval carries too little
/// mass for inversion it draws from the exponential approximation to the
/// density at the heavier end point instead of failing.
pub fn sample_truncated_beta_guarded<R: Rng + ?Sized>(
    a: f64,
    b: f64,
    lower: f64,
    upper: f64,
    rng: &mut R,
) -> f64 {
    match sample_truncated_beta(a, b, lower, upper, rng) {
        Ok(x) => x,
        Err(e) => {
            log::debug!("truncated beta fallback: {e}");
            let mode_right = {
                let mid = 0.5 * (lower + upper);
                let slope = (a - 1.0) / mid - (b - 1.0) / (1.0 - mid);
                slope > 0.0
            };
            let (edge, dir) = if mode_right {
                (upper, -1.0)
            } else {
                (lower, 1.0)
            };
            let edge_in = edge.clamp(1e-300, 1.0 - 1e-16);
            let slope = (a - 1.0) / edge_in - (b - 1.0) / (1.0 - edge_in);
            let rate = (-dir * slope).max(1e-300);
            let width = upper - lower;
            let u: f64 = rng.random();
            let off = -(1.0 - u * (1.0 - (-rate * width).exp())).ln() / rate;
            inside(edge + dir * off.min(width), lower, upper)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ks_against_cdf(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn untruncated_matches_beta_cdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (a, b) = (2.5, 4.0);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_truncated_beta(a, b, 0.0, 1.0, &mut rng).unwrap())
            .collect();
        let d = ks_against_cdf(xs, |x| beta_reg(a, b, x));
        // p > 0.01 at n = 1e5 corresponds to D < 1.63 / sqrt(n)
        assert!(d < 1.63 / (1e5f64).sqrt(), "KS {d}");
    }

    #[test]
    fn truncated_matches_truncated_cdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for &(a, b, lo, hi) in &[
            (2.0, 8.0, 0.6, 0.9),
            (30.0, 2.0, 0.01, 0.7),
            (0.5, 0.5, 0.2, 0.3),
        ] {
            let xs: Vec<f64> = (0..50_000)
                .map(|_| sample_truncated_beta(a, b, lo, hi, &mut rng).unwrap())
                .collect();
            assert!(xs.iter().all(|&x| x > lo && x < hi));
            let (fl, fu) = (beta_reg(a, b, lo), beta_reg(a, b, hi));
            let d = ks_against_cdf(xs, |x| (beta_reg(a, b, x) - fl) / (fu - fl));
            assert!(
                d < 1.63 / (5e4f64).sqrt(),
                "({a},{b}) on ({lo},{hi}): KS {d}"
            );
        }
    }

    #[test]
    fn truncated_mean_in_high_theta_regime() {
        // exact mean of Beta(9,1) on (0.5, 1) by midpoint quadrature
        let (a, b, lo) = (9.0, 1.0, 0.5);
        let n = 200_000;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            let x = lo + (i as f64 + 0.5) / n as f64 * (1.0 - lo);
            let d = log_beta_density(x, a, b).exp();
            num += x * d;
            den += d;
        }
        let exact = num / den;
        assert!(exact > 0.9);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let draws = 200_000;
        let mean: f64 = (0..draws)
            .map(|_| sample_truncated_beta(a, b, lo, 1.0, &mut rng).unwrap())
            .sum::<f64>()
            / draws as f64;
        assert!((mean - exact).abs() < 1e-3, "{mean} vs {exact}");
        assert!(mean > 0.9 - 1e-3);
    }

    #[test]
    fn degenerate_interval_errors_and_guard_recovers() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        assert!(sample_truncated_beta(2.0, 2000.0, 0.5, 0.6, &mut rng).is_err());
        assert!(sample_truncated_beta(2.0, 2.0, 0.6, 0.5, &mut rng).is_err());
        for _ in 0..1000 {
            let x = sample_truncated_beta_guarded(2.0, 2000.0, 0.5, 0.6, &mut rng);
            assert!(x > 0.5 && x < 0.6);
            assert!(x < 0.503, "mass should hug the lower end, got {x}");
            let y = sample_truncated_beta_guarded(3000.0, 2.0, 0.1, 0.2, &mut rng);
            assert!(y > 0.1 && y < 0.2 && y > 0.199);
        }
    }
}
