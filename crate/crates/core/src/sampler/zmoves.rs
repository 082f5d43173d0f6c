//! Cluster-assignment moves with the state vectors integrated out.

use rand::Rng;

use crate::model::{FeatureCounts, GScratch, LogRates, MarginalKernel, StateLogProbs};
use crate::numeric::{log_sum_exp, sample_log_weights};
use crate::priors::PartitionPrior;

use super::state::ClusterState;

/// What the assignment moves condition on.
pub struct ZContext<'a> {
    pub kernel: Option<&'a MarginalKernel>,
    pub rates: &'a LogRates,
    pub probs: &'a StateLogProbs,
    pub prior: &'a PartitionPrior,
}

impl ZContext<'_> {
    /// log g; identically zero when the likelihood is switched off.
    pub fn log_g(&self, counts: &FeatureCounts, sc: &mut GScratch) -> f64 {
        match self.kernel {
            Some(k) => k.log_g(counts, self.rates, self.probs, sc),
            None => 0.0,
        }
    }

    fn log_v_ratio(&self, t_new: usize, t_old: usize, n: usize) -> f64 {
        self.prior.log_vn(t_new, n).expect("1 <= t <= N")
            - self.prior.log_vn(t_old, n).expect("1 <= t <= N")
    }

    /// log of γ^(n+s) / γ^(n), the urn weight for adding s subjects to a
    /// cluster of size n.
    fn log_grow(&self, n: usize, s: usize) -> f64 {
        self.prior.ln_rising_gamma(n + s) - self.prior.ln_rising_gamma(n)
    }
}

fn cached_g(st: &mut ClusterState, j: usize, ctx: &ZContext<'_>, sc: &mut GScratch) -> f64 {
    let c = st.cluster(j);
    if c.log_g.is_nan() {
        let g = ctx.log_g(&c.counts, sc);
        st.cluster_mut(j).log_g = g;
        g
    } else {
        c.log_g
    }
}

/// One systematic-scan Gibbs sweep over the units. New clusters get an
/// all-zero placeholder state vector; the state update that follows
/// redraws every cluster's vector.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    st: &mut ClusterState,
    ctx: &ZContext<'_>,
    sc: &mut GScratch,
    rng: &mut R,
) {
    let n = st.n_subjects();
    let m = st.n_states();
    let mut w = Vec::new();
    let mut cand = Vec::new();
    let mut tmp = FeatureCounts::zeros(st.unit(0).counts.ones.len());
    for u in 0..st.n_units() {
        st.remove_unit(u);
        let s = st.unit(u).size();
        let t = st.n_clusters();
        let g_alone = ctx.log_g(&st.unit(u).counts, sc);
        if t == 0 {
            let j = st.new_cluster(u, vec![false; m]);
            st.cluster_mut(j).log_g = g_alone;
            continue;
        }
        w.clear();
        cand.clear();
        for j in 0..t {
            let g_old = cached_g(st, j, ctx, sc);
            tmp.clone_from(&st.cluster(j).counts);
            tmp.add(&st.unit(u).counts);
            let g_new = ctx.log_g(&tmp, sc);
            cand.push(g_new);
            w.push(ctx.log_grow(st.cluster(j).size(), s) + g_new - g_old);
        }
        w.push(ctx.log_v_ratio(t + 1, t, n) + ctx.prior.ln_rising_gamma(s) + g_alone);
        let k = sample_log_weights(&w, rng);
        if k < t {
            st.add_unit(u, k);
            st.cluster_mut(k).log_g = cand[k];
        } else {
            let j = st.new_cluster(u, vec![false; m]);
            st.cluster_mut(j).log_g = g_alone;
        }
    }
}

/// One side of a restricted split.
#[derive(Clone)]
struct Side {
    units: Vec<usize>,
    counts: FeatureCounts,
    g: f64,
}

impl Side {
    fn size(&self) -> usize {
        self.counts.size as usize
    }
}

struct Restricted<'a, 'c> {
    st: &'a ClusterState,
    ctx: &'a ZContext<'c>,
    tmp: FeatureCounts,
}

impl Restricted<'_, '_> {
    /// Moves unit u (currently in `sides[from]`) by one restricted Gibbs
    /// step. If `force` is given the unit goes there. Returns the log
    /// probability of the chosen side.
    fn step<R: Rng + ?Sized>(
        &mut self,
        sides: &mut [Side; 2],
        u: usize,
        from: usize,
        force: Option<usize>,
        sc: &mut GScratch,
        rng: &mut R,
    ) -> (usize, f64) {
        let uc = &self.st.unit(u).counts;
        let s = uc.size as usize;
        // remove u from its side
        let pos = sides[from].units.iter().position(|&v| v == u).unwrap();
        sides[from].units.swap_remove(pos);
        let g_with_from = sides[from].g;
        sides[from].counts.sub(uc);
        sides[from].g = self.ctx.log_g(&sides[from].counts, sc);
        let other = 1 - from;
        self.tmp.clone_from(&sides[other].counts);
        self.tmp.add(uc);
        let g_with_other = self.ctx.log_g(&self.tmp, sc);
        let mut lw = [0.0; 2];
        lw[from] = self.ctx.log_grow(sides[from].size(), s) + g_with_from - sides[from].g;
        lw[other] = self.ctx.log_grow(sides[other].size(), s) + g_with_other - sides[other].g;
        let k = match force {
            Some(k) => k,
            None => sample_log_weights(&lw, rng),
        };
        let lp = lw[k] - log_sum_exp(&lw);
        sides[k].units.push(u);
        sides[k].counts.add(uc);
        sides[k].g = if k == from { g_with_from } else { g_with_other };
        (k, lp)
    }
}

/// Outcome of a split-merge proposal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitMerge {
    Skipped,
    SplitAccepted,
    SplitRejected,
    MergeAccepted,
    MergeRejected,
}

/// A restricted-Gibbs split-merge proposal with `scans` intermediate scans.
/// Anchors are a uniformly chosen pair of subjects; a pair inside one
/// must-link unit is skipped.
pub fn split_merge<R: Rng + ?Sized>(
    st: &mut ClusterState,
    ctx: &ZContext<'_>,
    scans: usize,
    sc: &mut GScratch,
    rng: &mut R,
) -> SplitMerge {
    let n = st.n_subjects();
    if n < 2 {
        return SplitMerge::Skipped;
    }
    let a = rng.random_range(0..n);
    let mut b = rng.random_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    let (ua, ub) = (st.unit_of_subject(a), st.unit_of_subject(b));
    if ua == ub {
        return SplitMerge::Skipped;
    }
    let (ca, cb) = (st.cluster_of_unit(ua), st.cluster_of_unit(ub));
    let mut rest: Vec<usize> = st
        .cluster(ca)
        .units
        .iter()
        .copied()
        .filter(|&u| u != ua && u != ub)
        .collect();
    if ca != cb {
        rest.extend(st.cluster(cb).units.iter().copied().filter(|&u| u != ub));
    }
    rest.sort_unstable();

    let l = st.unit(0).counts.ones.len();
    let side_of = |u: usize| Side {
        units: vec![u],
        counts: st.unit(u).counts.clone(),
        g: f64::NAN,
    };
    let mut sides = [side_of(ua), side_of(ub)];
    let mut where_: Vec<usize> = Vec::with_capacity(rest.len());
    for &u in &rest {
        let k = rng.random_range(0..2);
        sides[k].units.push(u);
        sides[k].counts.add(&st.unit(u).counts);
        where_.push(k);
    }
    for s in sides.iter_mut() {
        s.g = ctx.log_g(&s.counts, sc);
    }
    let mut rs = Restricted {
        st,
        ctx,
        tmp: FeatureCounts::zeros(l),
    };
    for _ in 0..scans {
        for (idx, &u) in rest.iter().enumerate() {
            let (k, _) = rs.step(&mut sides, u, where_[idx], None, sc, rng);
            where_[idx] = k;
        }
    }

    let t = st.n_clusters();
    if ca == cb {
        let mut log_q = 0.0;
        for (idx, &u) in rest.iter().enumerate() {
            let (k, lp) = rs.step(&mut sides, u, where_[idx], None, sc, rng);
            where_[idx] = k;
            log_q += lp;
        }
        let whole = cached_g(st, ca, ctx, sc);
        let (na, nb) = (sides[0].size(), sides[1].size());
        let log_acc = ctx.log_v_ratio(t + 1, t, n)
            + ctx.prior.ln_rising_gamma(na)
            + ctx.prior.ln_rising_gamma(nb)
            - ctx.prior.ln_rising_gamma(na + nb)
            + sides[0].g
            + sides[1].g
            - whole
            - log_q;
        if log_acc >= 0.0 || rng.random::<f64>() < log_acc.exp() {
            let m = st.n_states();
            for &u in &sides[1].units {
                st.remove_unit(u);
            }
            let mut it = sides[1].units.iter();
            let first = *it.next().unwrap();
            let j = st.new_cluster(first, vec![false; m]);
            for &u in it {
                st.add_unit(u, j);
            }
            st.cluster_mut(j).log_g = sides[1].g;
            let ja = st.cluster_of_unit(ua);
            st.cluster_mut(ja).log_g = sides[0].g;
            SplitMerge::SplitAccepted
        } else {
            SplitMerge::SplitRejected
        }
    } else {
        // probability that a restricted scan from the launch state
        // reproduces the current split
        let mut log_q = 0.0;
        for (idx, &u) in rest.iter().enumerate() {
            let target = if st.cluster_of_unit(u) == ca { 0 } else { 1 };
            let (_, lp) = rs.step(&mut sides, u, where_[idx], Some(target), sc, rng);
            log_q += lp;
        }
        let (na, nb) = (st.cluster(ca).size(), st.cluster(cb).size());
        let ga = cached_g(st, ca, ctx, sc);
        let gb = cached_g(st, cb, ctx, sc);
        let merged = FeatureCounts::sum(&st.cluster(ca).counts, &st.cluster(cb).counts);
        let gm = ctx.log_g(&merged, sc);
        let log_acc = ctx.log_v_ratio(t - 1, t, n) + ctx.prior.ln_rising_gamma(na + nb)
            - ctx.prior.ln_rising_gamma(na)
            - ctx.prior.ln_rising_gamma(nb)
            + gm
            - ga
            - gb
            + log_q;
        if log_acc >= 0.0 || rng.random::<f64>() < log_acc.exp() {
            let j = st.merge_clusters(ca, cb);
            st.cluster_mut(j).log_g = gm;
            SplitMerge::MergeAccepted
        } else {
            SplitMerge::MergeRejected
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BinaryDataMatrix, QMatrix, RateParams, Rule};
    use crate::partition::{enumerate_partitions, Partition};
    use crate::priors::{log_eppf, PartitionPriorSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    struct Toy {
        y: BinaryDataMatrix,
        kernel: MarginalKernel,
        rates: LogRates,
        probs: StateLogProbs,
        prior: PartitionPrior,
    }

    impl Toy {
        fn new(rows: &[Vec<u8>], q: &[Vec<u8>], p: &[f64]) -> Self {
            let y = BinaryDataMatrix::from_rows(rows).unwrap();
            let l = y.n_features();
            let q = QMatrix::from_rows(q).unwrap();
            Toy {
                kernel: MarginalKernel::new(&q, Rule::Dino, 20).unwrap(),
                rates: LogRates::new(&RateParams::constant(l, 0.85, 0.2).unwrap()),
                probs: StateLogProbs::new(p).unwrap(),
                prior: PartitionPrior::new(PartitionPriorSpec::default()).unwrap(),
                y,
            }
        }

        fn ctx(&self) -> ZContext<'_> {
            ZContext {
                kernel: Some(&self.kernel),
                rates: &self.rates,
                probs: &self.probs,
                prior: &self.prior,
            }
        }

        /// Exact posterior over partitions by enumeration.
        fn exact(&self) -> HashMap<Vec<usize>, f64> {
            let ctx = self.ctx();
            let mut sc = GScratch::default();
            let parts = enumerate_partitions(self.y.n_subjects());
            let lw: Vec<f64> = parts
                .iter()
                .map(|p| {
                    log_eppf(p, &self.prior).unwrap()
                        + p.blocks()
                            .iter()
                            .map(|b| ctx.log_g(&FeatureCounts::from_subjects(&self.y, b), &mut sc))
                            .sum::<f64>()
                })
                .collect();
            let z = log_sum_exp(&lw);
            parts
                .iter()
                .zip(lw)
                .map(|(p, w)| (p.labels().to_vec(), (w - z).exp()))
                .collect()
        }
    }

    fn tv(exact: &HashMap<Vec<usize>, f64>, counts: &HashMap<Vec<usize>, usize>, n: usize) -> f64 {
        let mut keys: Vec<&Vec<usize>> = exact.keys().chain(counts.keys()).collect();
        keys.sort();
        keys.dedup();
        0.5 * keys
            .iter()
            .map(|k| {
                (exact.get(*k).copied().unwrap_or(0.0)
                    - *counts.get(*k).unwrap_or(&0) as f64 / n as f64)
                    .abs()
            })
            .sum::<f64>()
    }

    fn run(toy: &Toy, sweeps: usize, with_sm: bool, gibbs: bool, seed: u64) -> f64 {
        let ctx = toy.ctx();
        let mut sc = GScratch::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut st = ClusterState::new(&toy.y, None, false, 1);
        let mut counts = HashMap::new();
        for _ in 0..sweeps {
            if with_sm {
                split_merge(&mut st, &ctx, 5, &mut sc, &mut rng);
            }
            if gibbs {
                gibbs_sweep(&mut st, &ctx, &mut sc, &mut rng);
            }
            *counts.entry(st.snapshot().0.labels().to_vec()).or_insert(0) += 1;
        }
        assert!(st.is_consistent(&toy.y));
        tv(&toy.exact(), &counts, sweeps)
    }

    #[test]
    fn two_subject_gibbs_matches_enumeration() {
        let toy = Toy::new(&[vec![1], vec![0]], &[vec![1]], &[0.4]);
        let d = run(&toy, 100_000, false, true, 1);
        assert!(d < 0.02, "TV {d}");
    }

    #[test]
    fn split_merge_alone_is_reversible_on_three_subjects() {
        let toy = Toy::new(&[vec![1], vec![0], vec![1]], &[vec![1]], &[0.4]);
        let d = run(&toy, 100_000, true, false, 2);
        assert!(d < 0.02, "TV {d}");
    }

    #[test]
    fn split_merge_with_gibbs_on_four_subjects() {
        let toy = Toy::new(
            &[vec![1, 1], vec![0, 1], vec![1, 0], vec![0, 0]],
            &[vec![1, 0], vec![0, 1]],
            &[0.3, 0.6],
        );
        let d = run(&toy, 100_000, true, true, 3);
        assert!(d < 0.02, "TV {d}");
    }

    #[test]
    fn equal_rates_reduce_to_the_urn() {
        let y =
            BinaryDataMatrix::from_rows(&[vec![1u8], vec![0], vec![1], vec![1], vec![0]]).unwrap();
        let q = QMatrix::from_rows(&[vec![1u8]]).unwrap();
        let kernel = MarginalKernel::new(&q, Rule::Dino, 20).unwrap();
        let rates = LogRates::from_probs(&[0.3], &[0.3]).unwrap();
        let probs = StateLogProbs::new(&[0.5]).unwrap();
        let prior = PartitionPrior::new(PartitionPriorSpec::default()).unwrap();
        let ctx = ZContext {
            kernel: Some(&kernel),
            rates: &rates,
            probs: &probs,
            prior: &prior,
        };
        let mut sc = GScratch::default();
        // g of any set is the plain binomial product, so every g ratio is
        // the added unit's own likelihood and cancels from the weights
        let sizes = [vec![0usize, 1], vec![2, 3, 4]];
        let a = ctx.log_g(&FeatureCounts::from_subjects(&y, &sizes[0]), &mut sc);
        let b = ctx.log_g(&FeatureCounts::from_subjects(&y, &sizes[1]), &mut sc);
        let all = ctx.log_g(&FeatureCounts::from_subjects(&y, &[0, 1, 2, 3, 4]), &mut sc);
        assert!((a + b - all).abs() < 1e-12);
    }

    #[test]
    fn must_link_blocks_never_split() {
        let toy = Toy::new(
            &[vec![1, 1], vec![0, 1], vec![1, 0], vec![0, 0], vec![1, 1]],
            &[vec![1, 0], vec![0, 1]],
            &[0.3, 0.6],
        );
        let ml = Partition::from_labels(&[0, 0, 1, 2, 2]);
        let ctx = toy.ctx();
        let mut sc = GScratch::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut st = ClusterState::new(&toy.y, Some(&ml), false, 2);
        for _ in 0..2000 {
            split_merge(&mut st, &ctx, 5, &mut sc, &mut rng);
            gibbs_sweep(&mut st, &ctx, &mut sc, &mut rng);
            let p = st.snapshot().0;
            assert!(ml.refines(&p));
        }
        assert!(st.is_consistent(&toy.y));
    }

    #[test]
    fn must_link_chain_matches_restricted_enumeration() {
        let toy = Toy::new(&[vec![1], vec![1], vec![0], vec![0]], &[vec![1]], &[0.5]);
        let ml = Partition::from_labels(&[0, 0, 1, 2]);
        let exact: HashMap<Vec<usize>, f64> = {
            let full = toy.exact();
            let keep: Vec<(Vec<usize>, f64)> = full
                .into_iter()
                .filter(|(k, _)| ml.refines(&Partition::from_labels(k)))
                .collect();
            let z: f64 = keep.iter().map(|(_, v)| v).sum();
            keep.into_iter().map(|(k, v)| (k, v / z)).collect()
        };
        let ctx = toy.ctx();
        let mut sc = GScratch::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut st = ClusterState::new(&toy.y, Some(&ml), false, 1);
        let mut counts = HashMap::new();
        let n = 100_000;
        for _ in 0..n {
            split_merge(&mut st, &ctx, 5, &mut sc, &mut rng);
            gibbs_sweep(&mut st, &ctx, &mut sc, &mut rng);
            *counts.entry(st.snapshot().0.labels().to_vec()).or_insert(0) += 1;
        }
        let d = tv(&exact, &counts, n);
        assert!(d < 0.02, "TV {d}");
    }
}
