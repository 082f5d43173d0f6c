//! Simulation designs, data generators and baseline clusterers.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitMatrix;
use crate::diagnostics::adjusted_rand_index;
use crate::error::{Error, Result};
use crate::model::{gamma_row_into, BinaryDataMatrix, LatentStateMatrix, QMatrix, Rule};
use crate::numeric::{log_sum_exp, mean, sample_beta, sample_log_weights, variance};
use crate::partition::Partition;
use crate::priors::q_in_constraint_set;
use crate::sampler::{chain_rng, run_chains, ChainConfig};
use crate::summaries::{scientific_coclustering, scientific_ls_clustering};

/// Swap budget of [`gen_q`] per fresh draw.
pub const Q_SWAP_BUDGET: usize = 100_000;
const Q_REDRAWS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimDesign {
    pub l: usize,
    pub n: usize,
    pub theta0: f64,
    pub psi0: f64,
    /// Probabilities of the 2^M patterns; pattern b has η_m = bit m of b.
    pub pi0: Vec<f64>,
    /// Expected fraction of ones in each row of Q.
    pub s: f64,
    pub m: usize,
    pub replications: usize,
    pub seed: u64,
}

impl SimDesign {
    /// The single-data-set design: 50 subjects, 100 features, three states.
    pub fn simulation1(seed: u64) -> Self {
        SimDesign {
            l: 100,
            n: 50,
            theta0: 0.8,
            psi0: 0.15,
            pi0: pi_b(3),
            s: 0.2,
            m: 3,
            replications: 1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::Config(format!(
                "sparsity s = {} must lie in (0,1)",
                self.s
            )));
        }
        if self.m == 0 || self.m > 20 || self.pi0.len() != 1 << self.m {
            return Err(Error::Config(format!(
                "pi0 needs 2^M = {} entries",
                1usize << self.m.min(20)
            )));
        }
        if self.pi0.iter().any(|&p| !(p >= 0.0))
            || (self.pi0.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::Config("pi0 must be a probability vector".into()));
        }
        if !(0.0..=1.0).contains(&self.psi0)
            || !(0.0..=1.0).contains(&self.theta0)
            || self.psi0 > self.theta0
        {
            return Err(Error::Config("need 0 <= psi0 <= theta0 <= 1".into()));
        }
        if 2 * self.m > self.l || self.n == 0 {
            return Err(Error::Config("need 2M <= L and N >= 1".into()));
        }
        Ok(())
    }

    /// Name of the pattern distribution for reports.
    pub fn pi0_label(&self) -> String {
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        if close(&self.pi0, &pi_a(self.m)) {
            "pi_a".into()
        } else if close(&self.pi0, &pi_b(self.m)) {
            "pi_b".into()
        } else {
            "custom".into()
        }
    }
}

/// Uniform over all patterns.
pub fn pi_a(m: usize) -> Vec<f64> {
    vec![1.0 / (1usize << m) as f64; 1 << m]
}

/// The first half of the patterns twice as likely as the second half.
pub fn pi_b(m: usize) -> Vec<f64> {
    let k = 1usize << m;
    let half = k / 2;
    let lo = 1.0 / (k + half) as f64;
    (0..k)
        .map(|b| {
            if b < half && k > 1 {
                2.0 * lo
            } else if k > 1 {
                lo
            } else {
                1.0
            }
        })
        .collect()
}

/// The factorial grid of replication designs over L, N, θ₀, ψ₀, π₀ and s.
pub fn simulation2_grid(m: usize, replications: usize, seed: u64) -> Vec<SimDesign> {
    let mut out = Vec::new();
    for l in [50, 100, 200, 400] {
        for n in [50, 100, 200] {
            for theta0 in [0.8, 0.9] {
                for psi0 in [0.05, 0.15] {
                    for pi0 in [pi_a(m), pi_b(m)] {
                        for s in [0.1, 0.2] {
                            out.push(SimDesign {
                                l,
                                n,
                                theta0,
                                psi0,
                                pi0: pi0.clone(),
                                s,
                                m,
                                replications,
                                seed: seed.wrapping_add(out.len() as u64),
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Random Q with Bernoulli(s) entries, moved into the constraint set by
/// random swaps within rows.
///
/// Swaps keep row sums, so a draw whose rows cannot all reach three ones is
/// discarded and drawn again.
pub fn gen_q<R: Rng + ?Sized>(m: usize, l: usize, s: f64, rng: &mut R) -> Result<QMatrix> {
    if 2 * m > l {
        return Err(Error::InvalidParameter(format!(
            "need 2M <= L, got M = {m}, L = {l}"
        )));
    }
    for _ in 0..Q_REDRAWS {
        let bits = BitMatrix::from_fn(m, l, |_, _| rng.random::<f64>() < s);
        let mut q = QMatrix::new(bits)?;
        // a row needs its two singleton columns plus one shared or spare column
        if (0..m).any(|k| q.row_sum(k) < 3 || q.row_sum(k) > l - 2 * m + 2) {
            continue;
        }
        for _ in 0..Q_SWAP_BUDGET {
            if q_in_constraint_set(&q) {
                return Ok(q);
            }
            let k = rng.random_range(0..m);
            let (a, b) = (rng.random_range(0..l), rng.random_range(0..l));
            let (x, y) = (q.get(k, a), q.get(k, b));
            q.set(k, a, y);
            q.set(k, b, x);
        }
        return Err(Error::Numeric(format!(
            "Q repair exhausted {Q_SWAP_BUDGET} swaps"
        )));
    }
    Err(Error::Numeric(format!(
        "no feasible Q in {Q_REDRAWS} draws; s = {s} is too small for L = {l}"
    )))
}

/// A simulated data set with its generating truth.
#[derive(Clone, Debug, PartialEq)]
pub struct SimData {
    pub y: BinaryDataMatrix,
    /// N×M latent states.
    pub h: LatentStateMatrix,
    /// Subjects grouped by identical latent states.
    pub partition: Partition,
}

pub fn gen_data<R: Rng + ?Sized>(design: &SimDesign, q: &QMatrix, rng: &mut R) -> Result<SimData> {
    design.validate()?;
    if q.n_states() != design.m || q.n_features() != design.l {
        return Err(Error::Dimension("Q does not match the design".into()));
    }
    let (n, l, m) = (design.n, design.l, design.m);
    let cum: Vec<f64> = design
        .pi0
        .iter()
        .scan(0.0, |c, p| {
            *c += p;
            Some(*c)
        })
        .collect();
    let patterns: Vec<usize> = (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * cum[cum.len() - 1];
            cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1)
        })
        .collect();
    let h = LatentStateMatrix::new(BitMatrix::from_fn(n, m, |i, k| (patterns[i] >> k) & 1 == 1))?;
    let mut y = BitMatrix::zeros(n, l);
    let mut g = vec![0u64; l.div_ceil(64)];
    for i in 0..n {
        gamma_row_into(|k| h.get(i, k), q, Rule::Dino, &mut g);
        for f in 0..l {
            let on = (g[f / 64] >> (f % 64)) & 1 == 1;
            let p = if on { design.theta0 } else { design.psi0 };
            y.set(i, f, rng.random::<f64>() < p);
        }
    }
    Ok(SimData {
        y: BinaryDataMatrix::new(y)?,
        h,
        partition: Partition::from_labels(&patterns),
    })
}

/// Complete-linkage agglomerative clustering on Hamming distances, cut at
/// `k` clusters. Ties merge the pair whose smallest members are lowest.
pub fn hclust_hamming(y: &BinaryDataMatrix, k: usize) -> Result<Partition> {
    let n = y.n_subjects();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= k <= N, got k = {k}, N = {n}"
        )));
    }
    let ham = |a: usize, b: usize| -> u32 {
        y.row(a)
            .iter()
            .zip(y.row(b))
            .map(|(x, z)| (x ^ z).count_ones())
            .sum()
    };
    // clusters keyed by their smallest member; `d` holds complete-linkage distances
    let mut alive: Vec<usize> = (0..n).collect();
    let mut d: Vec<u32> = vec![0; n * n];
    for a in 0..n {
        for b in a + 1..n {
            let v = ham(a, b);
            d[a * n + b] = v;
            d[b * n + a] = v;
        }
    }
    let mut label: Vec<usize> = (0..n).collect();
    while alive.len() > k {
        let mut best = (u32::MAX, 0, 0);
        for (ia, &a) in alive.iter().enumerate() {
            for &b in &alive[ia + 1..] {
                if d[a * n + b] < best.0 {
                    best = (d[a * n + b], a, b);
                }
            }
        }
        let (_, a, b) = best;
        for &c in &alive {
            let v = d[a * n + c].max(d[b * n + c]);
            d[a * n + c] = v;
            d[c * n + a] = v;
        }
        for x in label.iter_mut() {
            if *x == b {
                *x = a;
            }
        }
        alive.retain(|&c| c != b);
    }
    Ok(Partition::from_labels(&label))
}

/// Output of the unrestricted latent class Gibbs sampler.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LcaOutput {
    /// Class labels per retained iteration.
    pub z: Vec<Vec<usize>>,
    /// Log posterior per retained iteration.
    pub log_post: Vec<f64>,
    /// Plug-in assignment at the highest-posterior retained iteration.
    pub estimate: Partition,
}

/// Gibbs sampler for a K-class latent class model with Dirichlet(1) weights
/// and Beta(1,1) response probabilities.
pub fn bayesian_lca<R: Rng + ?Sized>(
    y: &BinaryDataMatrix,
    k: usize,
    iterations: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<LcaOutput> {
    if k == 0 || iterations <= burn_in {
        return Err(Error::InvalidParameter(
            "need K >= 1 and iterations > burn_in".into(),
        ));
    }
    let (n, l) = (y.n_subjects(), y.n_features());
    let mut z: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    let mut w = vec![1.0 / k as f64; k];
    let mut lam = vec![0.5; k * l];
    let mut out = LcaOutput {
        z: Vec::new(),
        log_post: Vec::new(),
        estimate: Partition::single_block(n),
    };
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let class_loglik = |i: usize, c: usize, lam: &[f64]| -> f64 {
        (0..l)
            .map(|f| {
                if y.get(i, f) {
                    lam[c * l + f].ln()
                } else {
                    (1.0 - lam[c * l + f]).ln()
                }
            })
            .sum()
    };
    for it in 0..iterations {
        let mut sizes = vec![0usize; k];
        let mut ones = vec![0usize; k * l];
        for i in 0..n {
            sizes[z[i]] += 1;
            for f in 0..l {
                ones[z[i] * l + f] += y.get(i, f) as usize;
            }
        }
        let g: Vec<f64> = sizes
            .iter()
            .map(|&s| Gamma::new(1.0 + s as f64, 1.0).unwrap().sample(rng))
            .collect();
        let tot: f64 = g.iter().sum();
        for (wc, gc) in w.iter_mut().zip(&g) {
            *wc = (gc / tot).max(f64::MIN_POSITIVE);
        }
        for c in 0..k {
            for f in 0..l {
                let a = 1.0 + ones[c * l + f] as f64;
                let b = 1.0 + (sizes[c] - ones[c * l + f]) as f64;
                lam[c * l + f] = sample_beta(a, b, rng).clamp(1e-12, 1.0 - 1e-12);
            }
        }
        let mut lp = 0.0;
        for i in 0..n {
            let lw: Vec<f64> = (0..k)
                .map(|c| w[c].ln() + class_loglik(i, c, &lam))
                .collect();
            z[i] = sample_log_weights(&lw, rng);
            lp += lw[z[i]];
        }
        if it >= burn_in {
            out.z.push(z.clone());
            out.log_post.push(lp);
            if best.as_ref().is_none_or(|b| lp > b.0) {
                best = Some((lp, w.clone(), lam.clone()));
            }
        }
    }
    let (_, w, lam) = best.expect("retained draws");
    let est: Vec<usize> = (0..n)
        .map(|i| {
            let lw: Vec<f64> = (0..k)
                .map(|c| w[c].ln() + class_loglik(i, c, &lam))
                .collect();
            let norm = log_sum_exp(&lw);
            (0..k)
                .max_by(|&a, &b| (lw[a] - norm).total_cmp(&(lw[b] - norm)).then(b.cmp(&a)))
                .unwrap()
        })
        .collect();
    out.estimate = Partition::from_labels(&est);
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Rlcm,
    Hc,
    Lca,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Rlcm => "rlcm",
            Method::Hc => "hc",
            Method::Lca => "lca",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rlcm" => Ok(Method::Rlcm),
            "hc" => Ok(Method::Hc),
            "lca" => Ok(Method::Lca),
            _ => Err(Error::Config(format!("unknown method {s:?}"))),
        }
    }
}

/// Fitting settings shared by every cell of a study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    /// Template for RLCM fits; its seed is replaced per replication.
    pub chain: ChainConfig,
    pub methods: Vec<Method>,
    /// LCA classes; `None` uses 2^M.
    pub lca_classes: Option<usize>,
    /// Where the HC dendrogram is cut; `None` uses the true number of clusters.
    pub hc_k: Option<usize>,
    pub lca_iterations: usize,
    pub lca_burn_in: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            chain: ChainConfig::default(),
            methods: vec![Method::Rlcm, Method::Hc, Method::Lca],
            lca_classes: None,
            hc_k: None,
            lca_iterations: 2000,
            lca_burn_in: 1000,
        }
    }
}

/// One method on one replication data set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub cell: usize,
    pub replication: usize,
    pub method: Method,
    pub ari: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: usize,
    pub l: usize,
    pub n: usize,
    pub theta0: f64,
    pub psi0: f64,
    pub pi0: String,
    pub s: f64,
    pub method: Method,
    pub mean_ari: f64,
    pub sd_ari: f64,
    pub n_ok: usize,
    pub n_failed: usize,
}

impl CellSummary {
    pub const CSV_HEADER: &'static str =
        "cell,L,N,theta0,psi0,pi0,s,method,mean_ari,sd_ari,n_ok,n_failed";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.cell,
            self.l,
            self.n,
            self.theta0,
            self.psi0,
            self.pi0,
            self.s,
            self.method.name(),
            self.mean_ari,
            self.sd_ari,
            self.n_ok,
            self.n_failed
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyResults {
    pub records: Vec<ReplicationRecord>,
    pub summary: Vec<CellSummary>,
}

/// Runs one replication of one cell for every configured method.
pub fn run_replication(
    design: &SimDesign,
    cell: usize,
    rep: usize,
    study: &StudyConfig,
) -> Vec<ReplicationRecord> {
    let mut rng = chain_rng(design.seed, rep);
    let data =
        gen_q(design.m, design.l, design.s, &mut rng).and_then(|q| gen_data(design, &q, &mut rng));
    let fit_seed: u64 = rng.random();
    let record = |method: Method, res: Result<f64>| ReplicationRecord {
        cell,
        replication: rep,
        method,
        ari: res.as_ref().ok().copied(),
        error: res.err().map(|e| e.to_string()),
    };
    let data = match data {
        Ok(d) => d,
        Err(e) => {
            let msg = e.to_string();
            return study
                .methods
                .iter()
                .map(|&m| record(m, Err(Error::Numeric(msg.clone()))))
                .collect();
        }
    };
    let truth = &data.partition;
    study
        .methods
        .iter()
        .map(|&method| {
            let res = match method {
                Method::Rlcm => {
                    let cfg = ChainConfig {
                        seed: fit_seed,
                        ..study.chain.clone()
                    };
                    run_chains(&data.y, &cfg).and_then(|outs| {
                        let pi = scientific_coclustering(&outs)?;
                        let ls = scientific_ls_clustering(&outs, &pi)?;
                        adjusted_rand_index(&ls.partition, truth)
                    })
                }
                Method::Hc => hclust_hamming(
                    &data.y,
                    study.hc_k.unwrap_or(truth.n_blocks()).min(design.n),
                )
                .and_then(|p| adjusted_rand_index(&p, truth)),
                Method::Lca => {
                    let mut r = chain_rng(fit_seed, 1 << 20);
                    let k = study.lca_classes.unwrap_or(1 << design.m);
                    bayesian_lca(&data.y, k, study.lca_iterations, study.lca_burn_in, &mut r)
                        .and_then(|o| adjusted_rand_index(&o.estimate, truth))
                }
            };
            record(method, res)
        })
        .collect()
}

/// Mean and sd of aRI per (cell, method) over the successful replications.
pub fn aggregate(
    designs: &[SimDesign],
    methods: &[Method],
    records: &[ReplicationRecord],
) -> Vec<CellSummary> {
    let mut out = Vec::new();
    for (cell, d) in designs.iter().enumerate() {
        for &method in methods {
            let mine: Vec<&ReplicationRecord> = records
                .iter()
                .filter(|r| r.cell == cell && r.method == method)
                .collect();
            let aris: Vec<f64> = mine.iter().filter_map(|r| r.ari).collect();
            out.push(CellSummary {
                cell,
                l: d.l,
                n: d.n,
                theta0: d.theta0,
                psi0: d.psi0,
                pi0: d.pi0_label(),
                s: d.s,
                method,
                mean_ari: if aris.is_empty() {
                    f64::NAN
                } else {
                    mean(&aris)
                },
                sd_ari: if aris.len() < 2 {
                    f64::NAN
                } else {
                    variance(&aris).sqrt()
                },
                n_ok: aris.len(),
                n_failed: mine.len() - aris.len(),
            });
        }
    }
    out
}

/// Every replication of every cell, in parallel; failures are recorded.
pub fn run_replication_study(designs: &[SimDesign], study: &StudyConfig) -> Result<StudyResults> {
    for d in designs {
        d.validate()?;
    }
    let jobs: Vec<(usize, usize)> = designs
        .iter()
        .enumerate()
        .flat_map(|(c, d)| (0..d.replications).map(move |r| (c, r)))
        .collect();
    let records: Vec<ReplicationRecord> = jobs
        .into_par_iter()
        .flat_map_iter(|(c, r)| run_replication(&designs[c], c, r, study))
        .collect();
    let summary = aggregate(designs, &study.methods, &records);
    Ok(StudyResults { records, summary })
}

/// Subset clustering as a special case: Q fixed at the identity, one state
/// per feature.
pub fn subset_clustering_config(l: usize, base: ChainConfig) -> ChainConfig {
    ChainConfig {
        m_dagger: l,
        fixed_q: Some(QMatrix::identity(l)),
        ..base
    }
}
