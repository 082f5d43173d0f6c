//! Convergence diagnostics, posterior predictive checks and the adjusted
//! Rand index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitMatrix;
use crate::error::{Error, Result};
use crate::model::{gamma_row_into, BinaryDataMatrix, Rule};
use crate::numeric::{mean, quantile_sorted, variance};
use crate::partition::Partition;
use crate::sampler::{ChainOutput, Draw};
use crate::summaries::{pooled, t_tilde_trace};

pub const RHAT_THRESHOLD: f64 = 1.1;
pub const GEWEKE_THRESHOLD: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GelmanRubin {
    pub rhat: f64,
    pub flagged: bool,
    /// Within-chain variance was zero; `rhat` is set to 1.
    pub degenerate: bool,
}

/// Potential scale reduction factor of equally long traces.
pub fn gelman_rubin(chains: &[&[f64]]) -> Result<GelmanRubin> {
    if chains.len() < 2 {
        return Err(Error::InvalidParameter(
            "Gelman-Rubin needs at least two chains".into(),
        ));
    }
    let n = chains[0].len();
    if n < 10 || chains.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidParameter(
            "Gelman-Rubin needs chains of equal length with at least 10 draws".into(),
        ));
    }
    let m = chains.len() as f64;
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let grand = mean(&means);
    let b = nf / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = chains.iter().map(|c| variance(c)).sum::<f64>() / m;
    if !(w > 0.0) {
        log::warn!("Gelman-Rubin: zero within-chain variance, R-hat set to 1");
        return Ok(GelmanRubin {
            rhat: 1.0,
            flagged: false,
            degenerate: true,
        });
    }
    let v = (nf - 1.0) / nf * w + b / nf;
    let rhat = (v / w).sqrt();
    Ok(GelmanRubin {
        rhat,
        flagged: rhat > RHAT_THRESHOLD,
        degenerate: false,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geweke {
    /// `None` when a window has zero spectral variance.
    pub z: Option<f64>,
    pub flagged: bool,
}

/// Spectral density at frequency zero with a Bartlett window of 4% of the
/// segment length.
fn spectral_zero(x: &[f64]) -> f64 {
    let n = x.len();
    let m = mean(x);
    let lags = ((0.04 * n as f64).floor() as usize).min(n - 1);
    let acov = |k: usize| (0..n - k).map(|i| (x[i] - m) * (x[i + k] - m)).sum::<f64>() / n as f64;
    let mut s = acov(0);
    for k in 1..=lags {
        s += 2.0 * (1.0 - k as f64 / (lags + 1) as f64) * acov(k);
    }
    s.max(0.0)
}

/// Compares the mean of the first 10% of a trace with the last 50%.
pub fn geweke(trace: &[f64]) -> Result<Geweke> {
    let n = trace.len();
    if n < 100 {
        return Err(Error::InvalidParameter(
            "Geweke needs at least 100 draws".into(),
        ));
    }
    let a = &trace[..n / 10];
    let b = &trace[n - n / 2..];
    let var = spectral_zero(a) / a.len() as f64 + spectral_zero(b) / b.len() as f64;
    if !(var > 0.0) {
        return Ok(Geweke {
            z: None,
            flagged: true,
        });
    }
    let z = (mean(a) - mean(b)) / var.sqrt();
    Ok(Geweke {
        z: Some(z),
        flagged: z.abs() > GEWEKE_THRESHOLD,
    })
}

/// Named scalar traces of every chain: log posterior, rates, α₁ and T̃.
pub fn monitored_traces(outputs: &[ChainOutput]) -> Vec<(String, Vec<Vec<f64>>)> {
    let l = outputs.first().map_or(0, |o| o.meta.n_features);
    let per_chain = |f: &dyn Fn(&Draw) -> f64| -> Vec<Vec<f64>> {
        outputs
            .iter()
            .map(|o| o.draws.iter().map(f).collect())
            .collect()
    };
    let mut out = vec![("log_post".to_string(), per_chain(&|d| d.log_post))];
    for j in 0..l {
        out.push((format!("theta[{j}]"), per_chain(&|d| d.theta[j])));
    }
    for j in 0..l {
        out.push((format!("psi[{j}]"), per_chain(&|d| d.psi[j])));
    }
    out.push(("alpha1".to_string(), per_chain(&|d| d.alpha1)));
    let tt: Vec<Vec<f64>> = outputs
        .iter()
        .map(|o| {
            t_tilde_trace(std::slice::from_ref(o))
                .into_iter()
                .map(|t| t as f64)
                .collect()
        })
        .collect();
    out.push(("T_tilde".to_string(), tt));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub parameter: String,
    /// Absent with fewer than two chains or too few draws.
    pub rhat: Option<GelmanRubin>,
    /// One entry per chain; absent for short traces.
    pub geweke: Vec<Option<Geweke>>,
}

impl ConvergenceRow {
    pub fn flagged(&self) -> bool {
        self.rhat.is_some_and(|r| r.flagged) || self.geweke.iter().flatten().any(|g| g.flagged)
    }
}

pub fn convergence_table(outputs: &[ChainOutput]) -> Vec<ConvergenceRow> {
    monitored_traces(outputs)
        .into_par_iter()
        .map(|(parameter, chains)| {
            let refs: Vec<&[f64]> = chains.iter().map(|c| c.as_slice()).collect();
            ConvergenceRow {
                parameter,
                rhat: gelman_rubin(&refs).ok(),
                geweke: chains.iter().map(|c| geweke(c).ok()).collect(),
            }
        })
        .collect()
}

/// Simulates a data set of the original size from one posterior draw.
pub fn ppc_replicate<R: Rng + ?Sized>(
    draw: &Draw,
    rule: Rule,
    rng: &mut R,
) -> Result<BinaryDataMatrix> {
    let n = draw.z.len();
    let l = draw.n_features();
    let ok = |v: &[f64]| v.len() == l && v.iter().all(|x| (0.0..=1.0).contains(x));
    if !ok(&draw.theta) || !ok(&draw.psi) {
        return Err(Error::InvalidParameter(
            "response rates must lie in [0,1]".into(),
        ));
    }
    let mut y = BitMatrix::zeros(n, l);
    let words = l.div_ceil(64);
    let mut gammas = vec![vec![0u64; words]; draw.n_clusters()];
    if draw.n_states() > 0 {
        let q = draw.q_matrix()?;
        for (j, g) in gammas.iter_mut().enumerate() {
            let h = draw.hstar[j].as_bytes();
            gamma_row_into(|k| h[k] == b'1', &q, rule, g);
        }
    }
    for i in 0..n {
        let g = &gammas[draw.z[i]];
        for f in 0..l {
            let on = (g[f / 64] >> (f % 64)) & 1 == 1;
            let p = if on { draw.theta[f] } else { draw.psi[f] };
            if rng.random::<f64>() < p {
                y.set(i, f, true);
            }
        }
    }
    BinaryDataMatrix::new(y)
}

/// Pairwise log odds ratios with the ½ correction, and their standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorMatrix {
    pub l: usize,
    pub lor: Vec<f64>,
    pub se: Vec<f64>,
}

impl LorMatrix {
    pub fn lor(&self, a: usize, b: usize) -> f64 {
        self.lor[a * self.l + b]
    }

    pub fn se(&self, a: usize, b: usize) -> f64 {
        self.se[a * self.l + b]
    }
}

/// LOR and standard error of one 2×2 table.
pub fn lor_from_table(n11: usize, n10: usize, n01: usize, n00: usize) -> (f64, f64) {
    let [a, b, c, d] = [n11, n00, n10, n01].map(|x| x as f64 + 0.5);
    (
        (a * b / (c * d)).ln(),
        (1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d).sqrt(),
    )
}

pub fn pairwise_lor(y: &BinaryDataMatrix) -> Result<LorMatrix> {
    let n = y.n_subjects();
    if n < 2 {
        return Err(Error::Data(
            "pairwise LORs need at least two subjects".into(),
        ));
    }
    let l = y.n_features();
    let ones: Vec<usize> = (0..l)
        .map(|f| (0..n).filter(|&i| y.get(i, f)).count())
        .collect();
    let mut lor = vec![0.0; l * l];
    let mut se = vec![0.0; l * l];
    for a in 0..l {
        for b in a..l {
            let n11 = (0..n).filter(|&i| y.get(i, a) && y.get(i, b)).count();
            let n10 = ones[a] - n11;
            let n01 = ones[b] - n11;
            let n00 = n - n11 - n10 - n01;
            let (v, s) = lor_from_table(n11, n10, n01, n00);
            for (x, y) in [(a, b), (b, a)] {
                lor[x * l + y] = v;
                se[x * l + y] = s;
            }
        }
    }
    Ok(LorMatrix { l, lor, se })
}

/// Statistics compared between observed and replicated data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpcStatistics {
    pub means: Vec<f64>,
    pub lor: LorMatrix,
}

pub fn ppc_statistics(y: &BinaryDataMatrix) -> Result<PpcStatistics> {
    Ok(PpcStatistics {
        means: y.column_means(),
        lor: pairwise_lor(y)?,
    })
}

/// Observed statistic against its posterior predictive distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpcCheck {
    pub observed: f64,
    pub lower: f64,
    pub upper: f64,
    pub covered: bool,
    /// Fraction of replicates below the observed value.
    pub ppp: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorCheck {
    pub a: usize,
    pub b: usize,
    pub check: PpcCheck,
    /// Standardized LOR difference; `None` when the predictive sd is zero.
    pub slord: Option<f64>,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpcReport {
    pub n_replicates: usize,
    pub means: Vec<PpcCheck>,
    /// Pairs a < b in row-major order.
    pub lors: Vec<LorCheck>,
}

impl PpcReport {
    pub fn mean_coverage(&self) -> f64 {
        self.means.iter().filter(|c| c.covered).count() as f64 / self.means.len() as f64
    }

    pub fn lor_coverage(&self) -> f64 {
        self.lors.iter().filter(|c| c.check.covered).count() as f64 / self.lors.len().max(1) as f64
    }

    pub fn slord_flags(&self) -> usize {
        self.lors.iter().filter(|c| c.flagged).count()
    }
}

fn check(observed: f64, reps: &mut [f64]) -> PpcCheck {
    let ppp = reps.iter().filter(|&&r| r < observed).count() as f64 / reps.len() as f64;
    reps.sort_by(f64::total_cmp);
    let lower = quantile_sorted(reps, 0.025);
    let upper = quantile_sorted(reps, 0.975);
    PpcCheck {
        observed,
        lower,
        upper,
        covered: lower <= observed && observed <= upper,
        ppp,
    }
}

pub fn ppci_and_slord(observed: &PpcStatistics, replicates: &[PpcStatistics]) -> Result<PpcReport> {
    if replicates.len() < 100 {
        return Err(Error::InvalidParameter(format!(
            "need at least 100 replicates, got {}",
            replicates.len()
        )));
    }
    let l = observed.means.len();
    let means = (0..l)
        .map(|f| {
            let mut reps: Vec<f64> = replicates.iter().map(|r| r.means[f]).collect();
            check(observed.means[f], &mut reps)
        })
        .collect();
    let pairs: Vec<(usize, usize)> = (0..l)
        .flat_map(|a| (a + 1..l).map(move |b| (a, b)))
        .collect();
    let lors = pairs
        .into_par_iter()
        .map(|(a, b)| {
            let mut reps: Vec<f64> = replicates.iter().map(|r| r.lor.lor(a, b)).collect();
            let m = mean(&reps);
            let sd = variance(&reps).sqrt();
            let obs = observed.lor.lor(a, b);
            let slord = (sd > 0.0).then(|| (obs - m) / sd);
            LorCheck {
                a,
                b,
                check: check(obs, &mut reps),
                slord,
                flagged: slord.is_none_or(|s| s.abs() > GEWEKE_THRESHOLD),
            }
        })
        .collect();
    Ok(PpcReport {
        n_replicates: replicates.len(),
        means,
        lors,
    })
}

/// Replicates data from pooled draws (cycling through them) and compares
/// with `y`. Defaults to one replicate per retained draw.
pub fn run_ppc(
    y: &BinaryDataMatrix,
    outputs: &[ChainOutput],
    rule: Rule,
    n_replicates: Option<usize>,
    seed: u64,
) -> Result<PpcReport> {
    let draws: Vec<&Draw> = pooled(outputs).map(|(_, d)| d).collect();
    if draws.is_empty() {
        return Err(Error::Data("no retained draws".into()));
    }
    if draws[0].z.len() != y.n_subjects() || draws[0].n_features() != y.n_features() {
        return Err(Error::Dimension("draws do not match the data".into()));
    }
    let r = n_replicates.unwrap_or(draws.len());
    let reps = (0..r)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            ppc_statistics(&ppc_replicate(draws[k % draws.len()], rule, &mut rng)?)
        })
        .collect::<Result<Vec<_>>>()?;
    ppci_and_slord(&ppc_statistics(y)?, &reps)
}

fn choose2(x: usize) -> f64 {
    (x * x.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index; 1 when the chance-corrected denominator vanishes,
/// which happens only for identical partitions.
pub fn adjusted_rand_index(a: &Partition, b: &Partition) -> Result<f64> {
    let n = a.n_items();
    if n == 0 {
        return Err(Error::Data(
            "adjusted Rand index of empty partitions".into(),
        ));
    }
    if b.n_items() != n {
        return Err(Error::Dimension(format!(
            "partitions over {n} and {} subjects",
            b.n_items()
        )));
    }
    let (ka, kb) = (a.n_blocks(), b.n_blocks());
    let mut table = vec![0usize; ka * kb];
    for i in 0..n {
        table[a.labels()[i] * kb + b.labels()[i]] += 1;
    }
    let index: f64 = table.iter().map(|&x| choose2(x)).sum();
    let sa: f64 = a.block_sizes().iter().map(|&x| choose2(x)).sum();
    let sb: f64 = b.block_sizes().iter().map(|&x| choose2(x)).sum();
    let total = choose2(n);
    let expected = if total > 0.0 { sa * sb / total } else { 0.0 };
    let max = 0.5 * (sa + sb);
    if max - expected == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}
