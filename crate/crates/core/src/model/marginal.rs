use petgraph::unionfind::UnionFind;
use rand::Rng;

use crate::bits::{get_bit, intersects, iter_ones, set_bit, words_for};
use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, sample_log_weights};

use super::likelihood::{FeatureCounts, LogRates};
use super::types::{BinaryDataMatrix, QMatrix, Rule};

/// Default cap on the number of states enumerated jointly.
pub const DEFAULT_MAX_BLOCK_STATES: usize = 20;

/// Groups states whose Q rows overlap, directly or through a chain of
/// overlaps. Distinct groups touch disjoint features, so the latent-state sum
/// in the marginal likelihood factorizes over them.
///
/// Blocks are returned sorted by their smallest member; members ascend.
pub fn rcm_state_blocks(q: &QMatrix) -> Vec<Vec<usize>> {
    let m = q.n_states();
    let mut uf = UnionFind::<usize>::new(m);
    for a in 0..m {
        for b in a + 1..m {
            if intersects(q.row(a), q.row(b)) {
                uf.union(a, b);
            }
        }
    }
    let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); m];
    for s in 0..m {
        by_root[uf.find(s)].push(s);
    }
    let mut blocks: Vec<Vec<usize>> = by_root.into_iter().filter(|b| !b.is_empty()).collect();
    blocks.sort_by_key(|b| b[0]);
    blocks
}

/// Log state-prevalence terms log p_m and log(1 − p_m).
#[derive(Clone, Debug)]
pub struct StateLogProbs {
    pub(crate) lp: Vec<f64>,
    pub(crate) l1p: Vec<f64>,
}

impl StateLogProbs {
    pub fn new(p: &[f64]) -> Result<Self> {
        for &v in p {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "state probability {v} outside (0,1)"
                )));
            }
        }
        Ok(Self::new_unchecked(p))
    }

    /// Accepts the closed interval; p = 0 or 1 forces the state.
    pub(crate) fn new_unchecked(p: &[f64]) -> Self {
        StateLogProbs {
            lp: p.iter().map(|v| v.ln()).collect(),
            l1p: p.iter().map(|v| (-v).ln_1p()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.lp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lp.is_empty()
    }
}

#[derive(Clone, Debug)]
struct Block {
    states: Vec<usize>,
    support: Vec<usize>,
    stride: usize,
    // Q rows of `states`, restricted to `support` and re-indexed locally
    rows: Vec<u64>,
}

/// Work buffers for [`MarginalKernel`]; reuse one per thread.
#[derive(Default, Debug)]
pub struct GScratch {
    a: Vec<f64>,
    b: Vec<f64>,
    d: Vec<f64>,
    stack: Vec<u64>,
    leaves: Vec<f64>,
}

/// Precomputed block structure of Q for evaluating the cluster marginal
/// likelihood g(C) and drawing a cluster's state vector.
///
/// Each block of overlapping states is enumerated by depth-first search over
/// its 2^k patterns, carrying the union of covered features, so a pattern
/// costs only the features its last state adds.
#[derive(Clone, Debug)]
pub struct MarginalKernel {
    rule: Rule,
    n_states: usize,
    n_features: usize,
    blocks: Vec<Block>,
    free: Vec<usize>,
}

impl MarginalKernel {
    pub fn new(q: &QMatrix, rule: Rule, max_block_states: usize) -> Result<Self> {
        let groups = rcm_state_blocks(q);
        let mut covered = vec![0u64; words_for(q.n_features())];
        let mut blocks = Vec::with_capacity(groups.len());
        for states in groups {
            if states.len() > max_block_states {
                return Err(Error::Capacity {
                    size: states.len(),
                    cap: max_block_states,
                });
            }
            let mut sup = vec![0u64; covered.len()];
            for &s in &states {
                crate::bits::or_into(&mut sup, q.row(s));
            }
            crate::bits::or_into(&mut covered, &sup);
            let support: Vec<usize> = iter_ones(&sup).collect();
            let stride = words_for(support.len()).max(1);
            let mut rows = vec![0u64; states.len() * stride];
            for (k, &s) in states.iter().enumerate() {
                for (loc, &l) in support.iter().enumerate() {
                    if q.get(s, l) {
                        set_bit(&mut rows[k * stride..(k + 1) * stride], loc);
                    }
                }
            }
            blocks.push(Block {
                states,
                support,
                stride,
                rows,
            });
        }
        let free = (0..q.n_features())
            .filter(|&l| !get_bit(&covered, l))
            .collect();
        Ok(MarginalKernel {
            rule,
            n_states: q.n_states(),
            n_features: q.n_features(),
            blocks,
            free,
        })
    }

    pub fn rule(&self) -> Rule {
        self.rule
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[usize]> {
        self.blocks.iter().map(|b| b.states.as_slice())
    }

    fn prepare(&self, counts: &FeatureCounts, rates: &LogRates, sc: &mut GScratch) {
        sc.a.resize(self.n_features, 0.0);
        sc.b.resize(self.n_features, 0.0);
        for l in 0..self.n_features {
            let (n1, n0) = (counts.n1(l), counts.n0(l));
            sc.a[l] = rates.on(l, n1, n0);
            sc.b[l] = rates.off(l, n1, n0);
        }
    }

    fn free_term(&self, sc: &GScratch) -> f64 {
        let vals = match self.rule {
            Rule::Dino => &sc.b,
            Rule::Dina => &sc.a,
        };
        self.free.iter().map(|&l| vals[l]).sum()
    }

    /// Fills `sc.leaves` with the 2^k log weights of block `bi`, excluding
    /// the block's constant base term, which is returned. Bit `k` of a leaf
    /// index is the value of `states[k]`.
    fn fill_leaves(&self, bi: usize, probs: &StateLogProbs, sc: &mut GScratch) -> f64 {
        let blk = &self.blocks[bi];
        let (base_vals, sign) = match self.rule {
            Rule::Dino => (&sc.b, 1.0),
            Rule::Dina => (&sc.a, -1.0),
        };
        let base: f64 = blk.support.iter().map(|&l| base_vals[l]).sum();
        sc.d.clear();
        for &l in &blk.support {
            sc.d.push(sign * (sc.a[l] - sc.b[l]));
        }
        let k = blk.states.len();
        let w = blk.stride;
        sc.leaves.clear();
        sc.leaves.resize(1 << k, 0.0);
        sc.stack.clear();
        sc.stack.resize((k + 1) * w, 0);
        let or_on_active = self.rule == Rule::Dino;
        let mut walk = Walk {
            blk,
            probs,
            d: &sc.d,
            stack: &mut sc.stack,
            leaves: &mut sc.leaves,
            or_on_active,
        };
        walk.go(0, 0, 0.0, 0.0);
        base
    }

    /// log g for a cluster with the given counts.
    pub fn log_g(
        &self,
        counts: &FeatureCounts,
        rates: &LogRates,
        probs: &StateLogProbs,
        sc: &mut GScratch,
    ) -> f64 {
        self.prepare(counts, rates, sc);
        let mut total = self.free_term(sc);
        for bi in 0..self.blocks.len() {
            if self.blocks[bi].support.is_empty() {
                // a state that switches nothing on integrates to one
                continue;
            }
            let base = self.fill_leaves(bi, probs, sc);
            total += base + log_sum_exp(&sc.leaves);
        }
        total
    }

    /// Draws a state vector from its full conditional given the cluster's
    /// counts, block by block. Writes into `out` (length M) and returns the
    /// log-likelihood of the drawn configuration.
    pub fn sample_states<R: Rng + ?Sized>(
        &self,
        counts: &FeatureCounts,
        rates: &LogRates,
        probs: &StateLogProbs,
        sc: &mut GScratch,
        rng: &mut R,
        out: &mut [bool],
    ) -> f64 {
        debug_assert_eq!(out.len(), self.n_states);
        self.prepare(counts, rates, sc);
        let mut ll = self.free_term(sc);
        for bi in 0..self.blocks.len() {
            let blk = &self.blocks[bi];
            if blk.support.is_empty() {
                let s = blk.states[0];
                let p1 = probs.lp[s].exp();
                out[s] = rng.random::<f64>() < p1;
                continue;
            }
            let base = self.fill_leaves(bi, probs, sc);
            let idx = sample_log_weights(&sc.leaves, rng);
            let mut prior = 0.0;
            for (k, &s) in self.blocks[bi].states.iter().enumerate() {
                out[s] = (idx >> k) & 1 == 1;
                prior += if out[s] { probs.lp[s] } else { probs.l1p[s] };
            }
            ll += base + sc.leaves[idx] - prior;
        }
        ll
    }

    /// Log weights of every pattern of block `bi` (prior included), indexed
    /// as in [`MarginalKernel::sample_states`]. For tests and diagnostics.
    pub fn block_log_weights(
        &self,
        bi: usize,
        counts: &FeatureCounts,
        rates: &LogRates,
        probs: &StateLogProbs,
    ) -> Vec<f64> {
        let mut sc = GScratch::default();
        self.prepare(counts, rates, &mut sc);
        let base = self.fill_leaves(bi, probs, &mut sc);
        sc.leaves.iter().map(|v| v + base).collect()
    }
}

struct Walk<'a> {
    blk: &'a Block,
    probs: &'a StateLogProbs,
    d: &'a [f64],
    stack: &'a mut [u64],
    leaves: &'a mut [f64],
    or_on_active: bool,
}

impl Walk<'_> {
    fn go(&mut self, depth: usize, idx: usize, covered: f64, prior: f64) {
        let k = self.blk.states.len();
        if depth == k {
            self.leaves[idx] = covered + prior;
            return;
        }
        let w = self.blk.stride;
        let s = self.blk.states[depth];
        let row = &self.blk.rows[depth * w..(depth + 1) * w];
        let (lp, l1p) = (self.probs.lp[s], self.probs.l1p[s]);
        let (or_prior, plain_prior, or_bit, plain_bit) = if self.or_on_active {
            (lp, l1p, 1usize << depth, 0)
        } else {
            (l1p, lp, 0, 1usize << depth)
        };

        let (cur, next) = self.stack.split_at_mut((depth + 1) * w);
        let cur = &cur[depth * w..];
        let next = &mut next[..w];
        let mut added = 0.0;
        for i in 0..w {
            let fresh = row[i] & !cur[i];
            let mut f = fresh;
            while f != 0 {
                let tz = f.trailing_zeros() as usize;
                added += self.d[i * 64 + tz];
                f &= f - 1;
            }
            next[i] = cur[i] | row[i];
        }
        if or_prior > f64::NEG_INFINITY {
            self.go(depth + 1, idx | or_bit, covered + added, prior + or_prior);
        } else {
            self.fill_dead(depth + 1, idx | or_bit);
        }

        let (cur, next) = self.stack.split_at_mut((depth + 1) * w);
        next[..w].copy_from_slice(&cur[depth * w..]);
        if plain_prior > f64::NEG_INFINITY {
            self.go(depth + 1, idx | plain_bit, covered, prior + plain_prior);
        } else {
            self.fill_dead(depth + 1, idx | plain_bit);
        }
    }

    // Marks every leaf below a zero-probability branch.
    fn fill_dead(&mut self, depth: usize, idx: usize) {
        let k = self.blk.states.len();
        let free_bits = k - depth;
        for rest in 0..(1usize << free_bits) {
            self.leaves[idx | (rest << depth)] = f64::NEG_INFINITY;
        }
    }
}

/// log g(C): the likelihood of the subjects in `members` with their shared
/// state vector integrated out under independent Bernoulli(p_m) priors.
pub fn marginal_loglik_g(
    y: &BinaryDataMatrix,
    members: &[usize],
    q: &QMatrix,
    rule: Rule,
    rates: &LogRates,
    p: &[f64],
    max_block_states: usize,
) -> Result<f64> {
    if p.len() != q.n_states() {
        return Err(Error::Dimension(format!(
            "{} state probabilities for {} states",
            p.len(),
            q.n_states()
        )));
    }
    if q.n_features() != y.n_features() || rates.n_features() != y.n_features() {
        return Err(Error::Dimension(
            "feature counts of Y, Q and rates differ".into(),
        ));
    }
    let probs = StateLogProbs::new(p)?;
    let kernel = MarginalKernel::new(q, rule, max_block_states)?;
    let counts = FeatureCounts::from_subjects(y, members);
    Ok(kernel.log_g(&counts, rates, &probs, &mut GScratch::default()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::likelihood::cluster_loglik;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_log_g(
        y: &BinaryDataMatrix,
        members: &[usize],
        q: &QMatrix,
        rule: Rule,
        rates: &LogRates,
        p: &[f64],
    ) -> f64 {
        let m = q.n_states();
        let terms: Vec<f64> = (0..1usize << m)
            .map(|pat| {
                let eta: Vec<bool> = (0..m).map(|k| (pat >> k) & 1 == 1).collect();
                let prior: f64 = eta
                    .iter()
                    .zip(p)
                    .map(|(&e, &pm)| if e { pm.ln() } else { (1.0 - pm).ln() })
                    .sum();
                prior + cluster_loglik(y, members, &eta, q, rule, rates).unwrap()
            })
            .collect();
        log_sum_exp(&terms)
    }

    #[test]
    fn one_state_one_feature() {
        let y = BinaryDataMatrix::from_rows(&[vec![1u8]]).unwrap();
        let q = QMatrix::from_rows(&[vec![1u8]]).unwrap();
        let r = LogRates::from_probs(&[0.8], &[0.15]).unwrap();
        let g = marginal_loglik_g(&y, &[0], &q, Rule::Dino, &r, &[0.5], 20).unwrap();
        assert!((g - (0.5f64 * 0.8 + 0.5 * 0.15).ln()).abs() < 1e-14);
    }

    #[test]
    fn identity_q_factorizes_per_feature() {
        let y =
            BinaryDataMatrix::from_rows(&[vec![1u8, 0, 1], vec![1, 1, 0], vec![0, 0, 1]]).unwrap();
        let q = QMatrix::identity(3);
        let theta = [0.9, 0.7, 0.8];
        let psi = [0.1, 0.2, 0.3];
        let p = [0.3, 0.6, 0.5];
        let r = LogRates::from_probs(&theta, &psi).unwrap();
        let g = marginal_loglik_g(&y, &[0, 1, 2], &q, Rule::Dino, &r, &p, 20).unwrap();
        let mut expect = 0.0;
        for l in 0..3 {
            let (mut on, mut off) = (1.0, 1.0);
            for i in 0..3 {
                let v = y.get(i, l);
                on *= if v { theta[l] } else { 1.0 - theta[l] };
                off *= if v { psi[l] } else { 1.0 - psi[l] };
            }
            expect += (p[l] * on + (1.0 - p[l]) * off).ln();
        }
        assert!((g - expect).abs() < 1e-13);
    }

    #[test]
    fn blocks_of_simple_shapes() {
        let q = QMatrix::identity(4);
        assert_eq!(
            rcm_state_blocks(&q),
            vec![vec![0], vec![1], vec![2], vec![3]]
        );
        let shared = QMatrix::from_rows(&[vec![1u8, 1, 0], vec![1, 0, 1], vec![1, 0, 0]]).unwrap();
        assert_eq!(rcm_state_blocks(&shared), vec![vec![0, 1, 2]]);
        // a chain 0-1, 1-2 and an isolated 3
        let chain = QMatrix::from_rows(&[
            vec![1u8, 1, 0, 0, 0],
            vec![0, 1, 1, 0, 0],
            vec![0, 0, 1, 0, 0],
            vec![0, 0, 0, 1, 1],
        ])
        .unwrap();
        assert_eq!(rcm_state_blocks(&chain), vec![vec![0, 1, 2], vec![3]]);
    }

    #[test]
    fn capacity_error() {
        let q = QMatrix::from_rows(&vec![vec![1u8; 3]; 5]).unwrap();
        assert!(matches!(
            MarginalKernel::new(&q, Rule::Dino, 4),
            Err(Error::Capacity { size: 5, cap: 4 })
        ));
    }

    #[test]
    fn single_subject_marginal_is_a_distribution() {
        let q =
            QMatrix::from_rows(&[vec![1u8, 1, 0, 0], vec![0, 1, 1, 0], vec![0, 0, 0, 1]]).unwrap();
        let r = LogRates::from_probs(&[0.9, 0.8, 0.7, 0.85], &[0.1, 0.3, 0.2, 0.05]).unwrap();
        for rule in [Rule::Dino, Rule::Dina] {
            let mut total = 0.0;
            for code in 0..16u8 {
                let row: Vec<u8> = (0..4).map(|l| (code >> l) & 1).collect();
                let y = BinaryDataMatrix::from_rows(&[row]).unwrap();
                total += marginal_loglik_g(&y, &[0], &q, rule, &r, &[0.3, 0.5, 0.4], 20)
                    .unwrap()
                    .exp();
            }
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn block_draws_match_naive_multinomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, l, m) = (4, 10, 8);
        let rows = random_rows(&mut rng, m, l, 0.25);
        let q = QMatrix::from_rows(&rows).unwrap();
        let y = BinaryDataMatrix::from_rows(&random_rows(&mut rng, n, l, 0.5)).unwrap();
        let members: Vec<usize> = (0..n).collect();
        let theta: Vec<f64> = (0..l).map(|_| rng.random_range(0.6..0.9)).collect();
        let psi: Vec<f64> = (0..l).map(|_| rng.random_range(0.1..0.4)).collect();
        let p: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..0.8)).collect();
        let rates = LogRates::from_probs(&theta, &psi).unwrap();
        let kernel = MarginalKernel::new(&q, Rule::Dino, 20).unwrap();
        let probs = StateLogProbs::new(&p).unwrap();
        let counts = FeatureCounts::from_subjects(&y, &members);

        let mut exact = vec![0.0; 1 << m];
        let mut logw = vec![0.0; 1 << m];
        for pat in 0..1usize << m {
            let eta: Vec<bool> = (0..m).map(|k| (pat >> k) & 1 == 1).collect();
            let prior: f64 = (0..m)
                .map(|k| if eta[k] { p[k].ln() } else { (1.0 - p[k]).ln() })
                .sum();
            logw[pat] = prior + cluster_loglik(&y, &members, &eta, &q, Rule::Dino, &rates).unwrap();
        }
        let z = log_sum_exp(&logw);
        for pat in 0..1usize << m {
            exact[pat] = (logw[pat] - z).exp();
        }

        let draws = 200_000;
        let mut freq = vec![0usize; 1 << m];
        let mut sc = GScratch::default();
        let mut out = vec![false; m];
        for _ in 0..draws {
            kernel.sample_states(&counts, &rates, &probs, &mut sc, &mut rng, &mut out);
            let pat: usize = (0..m).map(|k| (out[k] as usize) << k).sum();
            freq[pat] += 1;
        }
        // chi-square over cells with enough expected mass, lumping the rest
        let mut chi2 = 0.0;
        let mut dof = 0usize;
        let (mut lump_e, mut lump_o) = (0.0, 0.0);
        for pat in 0..1usize << m {
            let e = exact[pat] * draws as f64;
            if e >= 5.0 {
                chi2 += (freq[pat] as f64 - e).powi(2) / e;
                dof += 1;
            } else {
                lump_e += e;
                lump_o += freq[pat] as f64;
            }
        }
        if lump_e >= 5.0 {
            chi2 += (lump_o - lump_e).powi(2) / lump_e;
            dof += 1;
        }
        let dof = (dof - 1) as f64;
        // generous bound: mean + 5 sd
        assert!(
            chi2 < dof + 5.0 * (2.0 * dof).sqrt(),
            "chi2 {chi2} on {dof} dof"
        );
    }

    fn random_rows(rng: &mut ChaCha8Rng, r: usize, c: usize, dens: f64) -> Vec<Vec<u8>> {
        (0..r)
            .map(|_| (0..c).map(|_| rng.random_bool(dens) as u8).collect())
            .collect()
    }

    fn instance() -> impl Strategy<
        Value = (
            Vec<Vec<u8>>,
            Vec<Vec<u8>>,
            Vec<f64>,
            Vec<f64>,
            Vec<f64>,
            bool,
        ),
    > {
        (1usize..=8, 1usize..=20, 1usize..=6, 0.05f64..0.5).prop_flat_map(|(m, l, n, dens)| {
            (
                proptest::collection::vec(
                    proptest::collection::vec(proptest::bool::weighted(dens), l),
                    m,
                )
                .prop_map(|r| {
                    r.into_iter()
                        .map(|v| v.into_iter().map(u8::from).collect())
                        .collect()
                }),
                proptest::collection::vec(proptest::collection::vec(0u8..2, l), n),
                proptest::collection::vec(0.5f64..0.99, l),
                proptest::collection::vec(0.01f64..0.49, l),
                proptest::collection::vec(0.01f64..0.99, m),
                any::<bool>(),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn blockwise_equals_naive((q, y, theta, psi, p, dina) in instance()) {
            let q = QMatrix::from_rows(&q).unwrap();
            let y = BinaryDataMatrix::from_rows(&y).unwrap();
            let rates = LogRates::from_probs(&theta, &psi).unwrap();
            let rule = if dina { Rule::Dina } else { Rule::Dino };
            let members: Vec<usize> = (0..y.n_subjects()).collect();
            let fast = marginal_loglik_g(&y, &members, &q, rule, &rates, &p, 20).unwrap();
            let slow = naive_log_g(&y, &members, &q, rule, &rates, &p);
            prop_assert!(((fast - slow) / slow).abs() < 1e-10, "{} vs {}", fast, slow);
        }

        #[test]
        fn invariant_under_state_permutation((q, y, theta, psi, p, _d) in instance(), seed in 0u64..1000) {
            let q = QMatrix::from_rows(&q).unwrap();
            let y = BinaryDataMatrix::from_rows(&y).unwrap();
            let rates = LogRates::from_probs(&theta, &psi).unwrap();
            let members: Vec<usize> = (0..y.n_subjects()).collect();
            let mut perm: Vec<usize> = (0..q.n_states()).collect();
            use rand::seq::SliceRandom;
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let qp = QMatrix::new(q.bits().permute_rows(&perm)).unwrap();
            let pp: Vec<f64> = perm.iter().map(|&k| p[k]).collect();
            let a = marginal_loglik_g(&y, &members, &q, Rule::Dino, &rates, &p, 20).unwrap();
            let b = marginal_loglik_g(&y, &members, &qp, Rule::Dino, &rates, &pp, 20).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * a.abs());
        }

        #[test]
        fn blocks_are_overlap_components(q in proptest::collection::vec(proptest::collection::vec(proptest::bool::weighted(0.15), 12), 1..10)) {
            let rows: Vec<Vec<u8>> = q.into_iter().map(|r| r.into_iter().map(u8::from).collect()).collect();
            let qm = QMatrix::from_rows(&rows).unwrap();
            let m = qm.n_states();
            // component labels by repeated relaxation over the overlap graph
            let mut label: Vec<usize> = (0..m).collect();
            loop {
                let mut changed = false;
                for a in 0..m {
                    for b in 0..m {
                        let overlap = (0..12).any(|l| rows[a][l] == 1 && rows[b][l] == 1);
                        if overlap && label[b] < label[a] {
                            label[a] = label[b];
                            changed = true;
                        }
                    }
                }
                if !changed { break; }
            }
            let blocks = rcm_state_blocks(&qm);
            let mut seen = vec![false; m];
            for blk in &blocks {
                for &s in blk {
                    prop_assert!(!seen[s]);
                    seen[s] = true;
                    prop_assert_eq!(label[s], label[blk[0]]);
                }
            }
            prop_assert!(seen.iter().all(|&x| x));
            let n_labels = { let mut l = label.clone(); l.sort(); l.dedup(); l.len() };
            prop_assert_eq!(n_labels, blocks.len());
        }
    }
}
