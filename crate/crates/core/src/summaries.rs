//! Posterior summaries pooled over chains.
//!
//! Every argmin below breaks ties by the earliest draw in (chain, iteration)
//! order, which is the order of `outputs` and of the draws inside each one.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bits::BitMatrix;
use crate::error::{Error, Result};
use crate::model::{LatentStateMatrix, QMatrix};
use crate::partition::Partition;
use crate::sampler::{ChainOutput, Draw};

/// Retained draws of all chains with their chain index.
pub fn pooled(outputs: &[ChainOutput]) -> impl Iterator<Item = (usize, &Draw)> {
    outputs
        .iter()
        .flat_map(|o| o.draws.iter().map(move |d| (o.meta.chain, d)))
}

fn n_draws(outputs: &[ChainOutput]) -> Result<usize> {
    let k: usize = outputs.iter().map(|o| o.draws.len()).sum();
    if k == 0 {
        return Err(Error::Data("no retained draws".into()));
    }
    Ok(k)
}

fn n_subjects(outputs: &[ChainOutput]) -> Result<usize> {
    let n = pooled(outputs).next().map(|(_, d)| d.z.len()).unwrap_or(0);
    if pooled(outputs).any(|(_, d)| d.z.len() != n) {
        return Err(Error::Dimension(
            "draws disagree on the number of subjects".into(),
        ));
    }
    Ok(n)
}

/// Posterior probability that two subjects share a cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoClusteringMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CoClusteringMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

pub fn coclustering(outputs: &[ChainOutput]) -> Result<CoClusteringMatrix> {
    coclustering_by(outputs, |d| d.z.clone())
}

/// Co-clustering of scientific clusters, i.e. of equal latent state vectors.
pub fn scientific_coclustering(outputs: &[ChainOutput]) -> Result<CoClusteringMatrix> {
    coclustering_by(outputs, scientific_labels)
}

fn scientific_labels(d: &Draw) -> Vec<usize> {
    Partition::from_labels(&d.z.iter().map(|&c| d.hstar[c].as_str()).collect::<Vec<_>>())
        .labels()
        .to_vec()
}

fn coclustering_by(
    outputs: &[ChainOutput],
    labels: impl Fn(&Draw) -> Vec<usize>,
) -> Result<CoClusteringMatrix> {
    let k = n_draws(outputs)?;
    let n = n_subjects(outputs)?;
    let mut counts = vec![0u32; n * n];
    for (_, d) in pooled(outputs) {
        let z = labels(d);
        for i in 0..n {
            for j in i + 1..n {
                if z[i] == z[j] {
                    counts[i * n + j] += 1;
                }
            }
        }
    }
    let mut data = vec![1.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = counts[i * n + j] as f64 / k as f64;
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    Ok(CoClusteringMatrix { n, data })
}

/// Σ_{i,i'} (δ(z_i, z_i') − π̂_ii')², over ordered pairs.
pub fn ls_loss(z: &[usize], pihat: &CoClusteringMatrix) -> f64 {
    let n = pihat.n();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = if z[i] == z[j] { 1.0 } else { 0.0 };
            s += (d - pihat.get(i, j)).powi(2);
        }
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsClustering {
    pub partition: Partition,
    pub loss: f64,
    pub chain: usize,
    pub iteration: usize,
}

/// The retained partition closest to the co-clustering matrix.
pub fn ls_clustering(outputs: &[ChainOutput], pihat: &CoClusteringMatrix) -> Result<LsClustering> {
    ls_clustering_by(outputs, pihat, |d| d.z.clone())
}

/// The retained scientific partition closest to `pihat`, which should come
/// from [`scientific_coclustering`].
pub fn scientific_ls_clustering(
    outputs: &[ChainOutput],
    pihat: &CoClusteringMatrix,
) -> Result<LsClustering> {
    ls_clustering_by(outputs, pihat, scientific_labels)
}

fn ls_clustering_by(
    outputs: &[ChainOutput],
    pihat: &CoClusteringMatrix,
    labels: impl Fn(&Draw) -> Vec<usize>,
) -> Result<LsClustering> {
    n_draws(outputs)?;
    let mut best: Option<LsClustering> = None;
    for (chain, d) in pooled(outputs) {
        let z = labels(d);
        let loss = ls_loss(&z, pihat);
        if best.as_ref().is_none_or(|b| loss < b.loss) {
            best = Some(LsClustering {
                partition: Partition::from_labels(&z),
                loss,
                chain,
                iteration: d.iteration,
            });
        }
    }
    Ok(best.expect("at least one draw"))
}

/// Clusters merged when their latent state vectors coincide.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScientificPartition {
    pub partition: Partition,
    /// One row per block of `partition`, in block order.
    pub states: LatentStateMatrix,
}

impl ScientificPartition {
    pub fn t_tilde(&self) -> usize {
        self.partition.n_blocks()
    }
}

/// Merges clusters of `z` whose rows of `hstar` are identical.
pub fn merge_scientific(z: &[usize], hstar: &LatentStateMatrix) -> Result<ScientificPartition> {
    let t = hstar.n_rows();
    if let Some(&bad) = z.iter().find(|&&c| c >= t) {
        return Err(Error::Dimension(format!("label {bad} but H* has {t} rows")));
    }
    let mut pattern_of: BTreeMap<&[u64], usize> = BTreeMap::new();
    let mut first: Vec<usize> = Vec::new();
    let merged: Vec<usize> = z
        .iter()
        .map(|&c| {
            let row = hstar.row(c);
            *pattern_of.entry(row).or_insert_with(|| {
                first.push(c);
                first.len() - 1
            })
        })
        .collect();
    // block b of the canonical partition is the b-th pattern met in subject order
    let partition = Partition::from_labels(&merged);
    let m = hstar.n_states();
    let mut bits = BitMatrix::zeros(first.len(), m);
    for (b, &c) in first.iter().enumerate() {
        for k in 0..m {
            bits.set(b, k, hstar.get(c, k));
        }
    }
    Ok(ScientificPartition {
        partition,
        states: LatentStateMatrix::new(bits)?,
    })
}

/// Empirical distribution of a count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountSummary {
    /// (value, probability) in increasing value order.
    pub pmf: Vec<(usize, f64)>,
    pub median: usize,
    /// Central 95% interval.
    pub lower: usize,
    pub upper: usize,
}

impl CountSummary {
    /// Inverse empirical CDF: the smallest value whose CDF reaches `p`.
    pub fn quantile(&self, p: f64) -> usize {
        let mut cdf = 0.0;
        for &(v, w) in &self.pmf {
            cdf += w;
            if cdf >= p - 1e-12 {
                return v;
            }
        }
        self.pmf.last().expect("non-empty pmf").0
    }

    pub fn from_values(values: &[usize]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Data("no values to summarize".into()));
        }
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for &v in values {
            *counts.entry(v).or_default() += 1;
        }
        let k = values.len() as f64;
        let mut s = CountSummary {
            pmf: counts.into_iter().map(|(v, c)| (v, c as f64 / k)).collect(),
            median: 0,
            lower: 0,
            upper: 0,
        };
        s.median = s.quantile(0.5);
        s.lower = s.quantile(0.025);
        s.upper = s.quantile(0.975);
        Ok(s)
    }
}

/// Number of scientific clusters in each pooled draw.
pub fn t_tilde_trace(outputs: &[ChainOutput]) -> Vec<usize> {
    pooled(outputs)
        .map(|(_, d)| {
            merge_scientific(&d.z, &d.hstar_matrix()).map_or(d.n_clusters(), |s| s.t_tilde())
        })
        .collect()
}

pub fn posterior_t_tilde(outputs: &[ChainOutput]) -> Result<CountSummary> {
    n_draws(outputs)?;
    CountSummary::from_values(&t_tilde_trace(outputs))
}

/// Qᵀ Q as a row-major L×L matrix of co-activation counts.
pub fn coactivation(q: &BitMatrix) -> Vec<f64> {
    let l = q.n_cols();
    let mut c = vec![0.0; l * l];
    for m in 0..q.n_rows() {
        let ones: Vec<usize> = (0..l).filter(|&j| q.get(m, j)).collect();
        for &a in &ones {
            for &b in &ones {
                c[a * l + b] += 1.0;
            }
        }
    }
    c
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QSelection {
    pub q: QMatrix,
    pub chain: usize,
    pub iteration: usize,
    /// Frobenius distance to the posterior mean co-activation matrix.
    pub distance: f64,
}

/// The retained Q whose co-activation matrix is closest to the posterior mean.
pub fn select_q_ls(outputs: &[ChainOutput]) -> Result<QSelection> {
    let k = n_draws(outputs)?;
    let coacts: Vec<(usize, &Draw, Vec<f64>)> = pooled(outputs)
        .map(|(c, d)| (c, d, coactivation(&d.q_bits())))
        .collect();
    let size = coacts[0].2.len();
    let mut mean = vec![0.0; size];
    for (_, _, c) in &coacts {
        if c.len() != size {
            return Err(Error::Dimension(
                "draws disagree on the number of features".into(),
            ));
        }
        for (m, x) in mean.iter_mut().zip(c) {
            *m += x / k as f64;
        }
    }
    let mut best: Option<(f64, usize, &Draw)> = None;
    for (chain, d, c) in &coacts {
        let dist = c
            .iter()
            .zip(&mean)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if best.is_none_or(|b| dist < b.0) {
            best = Some((dist, *chain, d));
        }
    }
    let (distance, chain, d) = best.expect("at least one draw");
    let q = d.q_matrix()?;
    Ok(QSelection {
        q,
        chain,
        iteration: d.iteration,
        distance,
    })
}

/// What the draws behind a set of marginals were conditioned on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Conditioning {
    None,
    /// Every draw shares one Q.
    FixedQ,
    /// Every draw shares one Q and one partition.
    FixedQAndPartition,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateMarginals {
    /// N×M matrix of P(η_im = 1).
    pub probs: Vec<Vec<f64>>,
    pub n_draws: usize,
    pub conditioning: Conditioning,
}

/// Per-subject frequencies of each latent state being on.
///
/// States are taken in the stored (relabelled) order; draws with fewer
/// states contribute zeros to the missing columns. The claimed
/// `conditioning` is checked against the draws.
pub fn state_marginals(
    outputs: &[ChainOutput],
    conditioning: Conditioning,
) -> Result<StateMarginals> {
    let k = n_draws(outputs)?;
    let n = n_subjects(outputs)?;
    let d0 = pooled(outputs).next().expect("non-empty").1;
    if conditioning != Conditioning::None && pooled(outputs).any(|(_, d)| d.q != d0.q) {
        return Err(Error::Data("draws do not share one Q".into()));
    }
    if conditioning == Conditioning::FixedQAndPartition && pooled(outputs).any(|(_, d)| d.z != d0.z)
    {
        return Err(Error::Data("draws do not share one partition".into()));
    }
    let m = pooled(outputs)
        .map(|(_, d)| d.n_states())
        .max()
        .unwrap_or(0);
    let mut probs = vec![vec![0.0; m]; n];
    for (_, d) in pooled(outputs) {
        for (i, row) in probs.iter_mut().enumerate() {
            let h = d.hstar[d.z[i]].as_bytes();
            for (k, p) in row.iter_mut().enumerate().take(h.len()) {
                if h[k] == b'1' {
                    *p += 1.0;
                }
            }
        }
    }
    for row in &mut probs {
        for p in row {
            *p /= k as f64;
        }
    }
    Ok(StateMarginals {
        probs,
        n_draws: k,
        conditioning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{draw, output};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const Q3: [&str; 1] = ["111"];

    fn random_outputs(seed: u64, n: usize, chains: usize, per: usize) -> Vec<ChainOutput> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..chains)
            .map(|c| {
                let draws = (0..per)
                    .map(|it| {
                        let z: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
                        let p = Partition::from_labels(&z);
                        let hs: Vec<String> = (0..p.n_blocks())
                            .map(|_| {
                                (0..2)
                                    .map(|_| if rng.random::<bool>() { '1' } else { '0' })
                                    .collect()
                            })
                            .collect();
                        let hr: Vec<&str> = hs.iter().map(|s| s.as_str()).collect();
                        draw(it + 1, p.labels(), &hr, &["1001001", "0100101"])
                    })
                    .collect();
                output(c, draws)
            })
            .collect()
    }

    #[test]
    fn coclustering_trivial_cases() {
        let one = vec![output(0, vec![draw(1, &[0, 0, 0], &["1"], &Q3)])];
        let pi = coclustering(&one).unwrap();
        assert!((0..3).all(|i| pi.row(i).iter().all(|&v| v == 1.0)));
        let two = vec![output(
            0,
            vec![
                draw(1, &[0, 0], &["1"], &Q3),
                draw(2, &[0, 1], &["1", "0"], &Q3),
            ],
        )];
        let pi = coclustering(&two).unwrap();
        assert_eq!(pi.get(0, 1), 0.5);
        assert_eq!(pi.get(1, 1), 1.0);
        assert!(coclustering(&[]).is_err());
    }

    #[test]
    fn coclustering_matches_pair_counts() {
        let outs = random_outputs(1, 7, 3, 20);
        let pi = coclustering(&outs).unwrap();
        let all: Vec<&Draw> = outs.iter().flat_map(|o| &o.draws).collect();
        for i in 0..7 {
            for j in 0..7 {
                let hits = all.iter().filter(|d| d.z[i] == d.z[j]).count();
                assert_eq!(pi.get(i, j), hits as f64 / 60.0);
            }
        }
    }

    #[test]
    fn ls_clustering_hand_fixture() {
        // draws on 3 subjects: {012}, {01}{2}, {0}{1}{2}
        let outs = vec![output(
            0,
            vec![
                draw(1, &[0, 0, 0], &["1"], &Q3),
                draw(2, &[0, 0, 1], &["1", "0"], &Q3),
                draw(3, &[0, 1, 2], &["1", "0", "1"], &Q3),
            ],
        )];
        let pi = coclustering(&outs).unwrap();
        // π01 = 2/3, π02 = π12 = 1/3; losses over ordered pairs
        let a = 2.0 * ((1.0f64 / 3.0).powi(2) + 2.0 * (2.0f64 / 3.0).powi(2));
        let b = 2.0 * ((1.0f64 / 3.0).powi(2) + 2.0 * (1.0f64 / 3.0).powi(2));
        let c = 2.0 * ((2.0f64 / 3.0).powi(2) + 2.0 * (1.0f64 / 3.0).powi(2));
        let ls = ls_clustering(&outs, &pi).unwrap();
        assert_eq!(ls.iteration, 2);
        assert!((ls.loss - b).abs() < 1e-12 && b < a && b < c);
    }

    #[test]
    fn ls_is_minimal_and_ties_go_early() {
        let outs = random_outputs(2, 6, 2, 15);
        let pi = coclustering(&outs).unwrap();
        let ls = ls_clustering(&outs, &pi).unwrap();
        for (_, d) in pooled(&outs) {
            assert!(ls.loss <= ls_loss(&d.z, &pi));
        }
        let same = vec![
            output(0, vec![draw(4, &[0, 1], &["1", "0"], &Q3)]),
            output(1, vec![draw(4, &[0, 1], &["1", "0"], &Q3)]),
        ];
        let pi = coclustering(&same).unwrap();
        let ls = ls_clustering(&same, &pi).unwrap();
        assert_eq!((ls.chain, ls.loss), (0, 0.0));
    }

    #[test]
    fn scientific_merge_cases() {
        let h = LatentStateMatrix::new(BitMatrix::from_strings(&["10", "01", "11"], 2).unwrap())
            .unwrap();
        let s = merge_scientific(&[0, 1, 2, 1], &h).unwrap();
        assert_eq!(s.partition, Partition::from_labels(&[0, 1, 2, 1]));
        let h = LatentStateMatrix::new(BitMatrix::from_strings(&["10", "01", "10"], 2).unwrap())
            .unwrap();
        let s = merge_scientific(&[0, 1, 2, 1], &h).unwrap();
        assert_eq!(s.partition, Partition::from_labels(&[0, 1, 0, 1]));
        assert_eq!(s.t_tilde(), 2);
        assert_eq!(s.states.row_vec(0), vec![true, false]);
        assert!(merge_scientific(&[3], &h).is_err());
    }

    #[test]
    fn scientific_ls_merges_duplicate_states() {
        // clusters 0 and 2 share a state in the first draw only
        let outs = vec![output(
            0,
            vec![
                draw(1, &[0, 1, 2], &["1", "0", "1"], &Q3),
                draw(2, &[0, 1, 2], &["1", "0", "0"], &Q3),
            ],
        )];
        let pi = scientific_coclustering(&outs).unwrap();
        assert_eq!((pi.get(0, 2), pi.get(1, 2), pi.get(0, 1)), (0.5, 0.5, 0.0));
        assert_eq!(coclustering(&outs).unwrap().get(0, 2), 0.0);
        let ls = scientific_ls_clustering(&outs, &pi).unwrap();
        assert_eq!(ls.partition, Partition::from_labels(&[0, 1, 0]));
        assert_eq!(ls.iteration, 1);
    }

    #[test]
    fn scientific_merge_coarsens() {
        let outs = random_outputs(3, 9, 1, 50);
        for d in &outs[0].draws {
            let s = merge_scientific(&d.z, &d.hstar_matrix()).unwrap();
            let c = d.partition();
            assert!(c.refines(&s.partition));
            assert!(s.t_tilde() <= c.n_blocks() && s.t_tilde() <= 4);
            // subjects in one block share η
            for i in 0..9 {
                for j in 0..9 {
                    if s.partition.same_block(i, j) {
                        assert_eq!(d.hstar[d.z[i]], d.hstar[d.z[j]]);
                    }
                }
            }
        }
    }

    #[test]
    fn count_summary_quantiles() {
        let s = CountSummary::from_values(&[4; 10]).unwrap();
        assert_eq!(s.pmf, vec![(4, 1.0)]);
        assert_eq!((s.median, s.lower, s.upper), (4, 4, 4));
        // quantile oracle: sorted[ceil(p n) - 1]
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let n = rng.random_range(1..200);
            let mut v: Vec<usize> = (0..n).map(|_| rng.random_range(1..15)).collect();
            let s = CountSummary::from_values(&v).unwrap();
            assert!((s.pmf.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-12);
            v.sort();
            let q = |p: f64| v[((p * n as f64).ceil() as usize).max(1) - 1];
            assert_eq!((s.median, s.lower, s.upper), (q(0.5), q(0.025), q(0.975)));
        }
    }

    #[test]
    fn t_tilde_summary() {
        let outs = random_outputs(5, 6, 2, 10);
        let s = posterior_t_tilde(&outs).unwrap();
        assert!(s.lower <= s.median && s.median <= s.upper);
        assert!((s.pmf.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn select_q_hand_fixture() {
        let q_a = ["1100", "0011"];
        let q_b = ["1000", "0100"];
        let q_c = ["1100", "0010"];
        let outs = vec![output(
            0,
            vec![
                draw(1, &[0], &["10"], &q_a),
                draw(2, &[0], &["10"], &q_b),
                draw(3, &[0], &["10"], &q_c),
            ],
        )];
        // oracle: explicit sums of outer products of the rows
        let mats: Vec<Vec<f64>> = [q_a, q_b, q_c]
            .iter()
            .map(|q| {
                let mut m = vec![0.0; 16];
                for r in q {
                    let b: Vec<u8> = r.bytes().map(|c| c - b'0').collect();
                    for i in 0..4 {
                        for j in 0..4 {
                            m[i * 4 + j] += (b[i] * b[j]) as f64;
                        }
                    }
                }
                m
            })
            .collect();
        let mean: Vec<f64> = (0..16)
            .map(|e| mats.iter().map(|m| m[e]).sum::<f64>() / 3.0)
            .collect();
        let d: Vec<f64> = mats
            .iter()
            .map(|m| {
                m.iter()
                    .zip(&mean)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let best = (0..3)
            .min_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap())
            .unwrap();
        let sel = select_q_ls(&outs).unwrap();
        assert_eq!(sel.iteration, best + 1);
        assert!((sel.distance - d[best]).abs() < 1e-12);
        let single = vec![output(0, vec![draw(9, &[0], &["10"], &q_a)])];
        assert_eq!(select_q_ls(&single).unwrap().distance, 0.0);
    }

    #[test]
    fn marginals_count_frequencies() {
        let outs = random_outputs(6, 5, 2, 25);
        let m = state_marginals(&outs, Conditioning::None).unwrap();
        assert_eq!(m.conditioning, Conditioning::None);
        for i in 0..5 {
            for k in 0..2 {
                let hits = pooled(&outs)
                    .filter(|(_, d)| d.hstar[d.z[i]].as_bytes()[k] == b'1')
                    .count();
                assert_eq!(m.probs[i][k], hits as f64 / 50.0);
            }
        }
        let never = vec![output(
            0,
            vec![draw(1, &[0, 0], &["10"], &["1001001", "0100101"])],
        )];
        let m = state_marginals(&never, Conditioning::FixedQAndPartition).unwrap();
        assert_eq!(m.probs, vec![vec![1.0, 0.0]; 2]);
        assert!(state_marginals(&outs, Conditioning::FixedQAndPartition).is_err());
    }

    proptest! {
        #[test]
        fn coclustering_permutation_equivariant(seed in 0u64..1000) {
            let outs = random_outputs(seed, 6, 1, 8);
            let pi = coclustering(&outs).unwrap();
            let perm = [3usize, 0, 5, 1, 4, 2];
            let permuted: Vec<ChainOutput> = outs.iter().map(|o| {
                let mut o = o.clone();
                for d in &mut o.draws {
                    d.z = perm.iter().map(|&i| d.z[i]).collect();
                }
                o
            }).collect();
            let pp = coclustering(&permuted).unwrap();
            for a in 0..6 {
                for b in 0..6 {
                    prop_assert_eq!(pp.get(a, b), pi.get(perm[a], perm[b]));
                }
            }
        }

        #[test]
        fn ls_ignores_label_names(seed in 0u64..1000) {
            let outs = random_outputs(seed, 6, 2, 6);
            let pi = coclustering(&outs).unwrap();
            let base = ls_clustering(&outs, &pi).unwrap();
            let relabelled: Vec<ChainOutput> = outs.iter().map(|o| {
                let mut o = o.clone();
                for d in &mut o.draws {
                    d.z = d.z.iter().map(|&c| 10 - c).collect();
                }
                o
            }).collect();
            let r = ls_clustering(&relabelled, &pi).unwrap();
            prop_assert_eq!((base.partition, base.chain, base.iteration), (r.partition, r.chain, r.iteration));
        }

        #[test]
        fn q_criterion_ignores_state_order(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<String> = (0..3).map(|_| (0..6).map(|_| if rng.random::<bool>() { '1' } else { '0' }).collect()).collect();
            let q = BitMatrix::from_strings(&rows, 6).unwrap();
            let flipped = q.permute_rows(&[2, 0, 1]);
            prop_assert_eq!(coactivation(&q), coactivation(&flipped));
        }
    }
}
