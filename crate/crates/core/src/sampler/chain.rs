use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitMatrix;
use crate::error::{Error, Result};
use crate::model::{
    joint_logpost, BinaryDataMatrix, GScratch, LatentStateMatrix, LogRates, MarginalKernel,
    ModelHyper, QMatrix, RateParams, Rule, StateLogProbs,
};
use crate::numeric::sample_beta;
use crate::partition::Partition;
use crate::priors::{
    ibp_infinite_log_prior, ibp_infinite_loglik, sample_alpha_grid, PartitionPrior, RatePriorSpec,
};

use super::config::{ChainConfig, Mode};
use super::params::{
    draw_alpha1_from_prior, draw_rates_from_prior, rate_tallies, update_alpha1, update_hstar,
    update_p, update_rates, RateTallies,
};
use super::qmoves::{
    eligible_columns, init_q, partner_merge_step, relabel_permutation, reset_rows, unused_states,
    update_q,
};
use super::slice::{self, RowSource};
use super::state::ClusterState;
use super::zmoves::{gibbs_sweep, split_merge, SplitMerge, ZContext};

/// One retained iteration, with states relabelled by the ordering of Q rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub iteration: usize,
    /// Canonical cluster label per subject.
    pub z: Vec<usize>,
    /// One 0/1 string per cluster, in label order.
    pub hstar: Vec<String>,
    /// One 0/1 string per state.
    pub q: Vec<String>,
    pub theta: Vec<f64>,
    pub psi: Vec<f64>,
    pub alpha1: f64,
    pub p: Vec<f64>,
    pub log_post: f64,
}

impl Draw {
    pub fn partition(&self) -> Partition {
        Partition::from_labels(&self.z)
    }

    pub fn n_clusters(&self) -> usize {
        self.hstar.len()
    }

    pub fn n_states(&self) -> usize {
        self.q.len()
    }

    pub fn n_features(&self) -> usize {
        self.theta.len()
    }

    /// Q as a bit matrix; zero rows are allowed (an empty infinite-mode draw).
    pub fn q_bits(&self) -> BitMatrix {
        BitMatrix::from_strings(&self.q, self.n_features()).expect("stored Q is well formed")
    }

    pub fn q_matrix(&self) -> Result<QMatrix> {
        QMatrix::new(self.q_bits())
    }

    pub fn hstar_matrix(&self) -> LatentStateMatrix {
        LatentStateMatrix::new(
            BitMatrix::from_strings(&self.hstar, self.n_states())
                .expect("stored H* is well formed"),
        )
        .expect("at least one cluster")
    }

    /// Per-subject state matrix H.
    pub fn h_matrix(&self) -> LatentStateMatrix {
        self.hstar_matrix().expand(&self.z)
    }

    pub fn rates(&self) -> Result<RateParams> {
        RateParams::new(self.theta.clone(), self.psi.clone())
    }

    /// States used by at least one cluster.
    pub fn active_states(&self) -> Vec<usize> {
        (0..self.n_states())
            .filter(|&m| self.hstar.iter().any(|r| r.as_bytes()[m] == b'1'))
            .collect()
    }
}

/// Run description written at the head of a chain file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub chain: usize,
    pub seed: u64,
    pub config_hash: String,
    pub n_subjects: usize,
    pub n_features: usize,
    pub rule: Rule,
    pub mode: Mode,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
}

/// Move counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainStats {
    pub split_proposed: usize,
    pub split_accepted: usize,
    pub merge_proposed: usize,
    pub merge_accepted: usize,
    pub q_flips: usize,
    pub partner_merges: usize,
    pub rows_reset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    pub meta: ChainMeta,
    pub draws: Vec<Draw>,
    pub stats: ChainStats,
}

/// The random stream of chain `chain` under master seed `seed`.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

/// Runs `config.n_chains` independent chains in parallel.
pub fn run_chains(y: &BinaryDataMatrix, config: &ChainConfig) -> Result<Vec<ChainOutput>> {
    config.validate(y.n_subjects(), y.n_features())?;
    (0..config.n_chains)
        .into_par_iter()
        .map(|c| run_chain(y, config, c))
        .collect()
}

/// Runs chain number `chain` (its random stream) to completion.
pub fn run_chain(y: &BinaryDataMatrix, config: &ChainConfig, chain: usize) -> Result<ChainOutput> {
    run_chain_with(y, config, chain, |_, _| {})
}

/// Like [`run_chain`], calling `observe(iteration, state)` after every
/// iteration, burn-in included.
pub fn run_chain_with(
    y: &BinaryDataMatrix,
    config: &ChainConfig,
    chain: usize,
    mut observe: impl FnMut(usize, &ChainState),
) -> Result<ChainOutput> {
    config.validate(y.n_subjects(), y.n_features())?;
    let mut cs = ChainState::init(y, config, chain_rng(config.seed, chain))?;
    let mut draws = Vec::with_capacity(config.retained());
    let tick = (config.iterations / 10).max(1);
    for it in 1..=config.iterations {
        cs.iterate()?;
        observe(it, &cs);
        if it % tick == 0 {
            log::debug!(
                "chain {chain}: iteration {it}, {} clusters",
                cs.st.n_clusters()
            );
        }
        if it > config.burn_in && (it - config.burn_in) % config.thin == 0 {
            draws.push(cs.draw(it)?);
        }
    }
    log::info!(
        "chain {chain}: {} iterations, {} draws kept",
        config.iterations,
        draws.len()
    );
    Ok(ChainOutput {
        meta: ChainMeta {
            chain,
            seed: config.seed,
            config_hash: config.hash(),
            n_subjects: y.n_subjects(),
            n_features: y.n_features(),
            rule: config.rule,
            mode: config.mode,
            iterations: config.iterations,
            burn_in: config.burn_in,
            thin: config.thin,
        },
        draws,
        stats: cs.stats,
    })
}

/// Complete sampler state of one chain.
pub struct ChainState<'a> {
    y: &'a BinaryDataMatrix,
    cfg: &'a ChainConfig,
    prior: PartitionPrior,
    rate_prior: RatePriorSpec,
    eligible: Vec<bool>,
    pub st: ClusterState,
    pub q: QMatrix,
    pub rates: RateParams,
    pub alpha1: f64,
    pub p: Vec<f64>,
    /// Slice variable (infinite mode).
    pub s: f64,
    rng: ChaCha8Rng,
    sc: GScratch,
    pub stats: ChainStats,
}

impl<'a> ChainState<'a> {
    pub fn init(
        y: &'a BinaryDataMatrix,
        cfg: &'a ChainConfig,
        mut rng: ChaCha8Rng,
    ) -> Result<Self> {
        let l = y.n_features();
        let prior = PartitionPrior::new(cfg.priors.partition.clone())?;
        let rate_prior = cfg.priors.rate_prior(l);
        let eligible = eligible_columns(&y.column_means(), cfg.tau1);
        let infinite = cfg.mode == Mode::Infinite;
        if infinite && cfg.rule != Rule::Dino {
            return Err(Error::Config(
                "infinite mode supports only the DINO rule".into(),
            ));
        }
        let m = cfg.n_states();
        let q = match (&cfg.fixed_q, cfg.prior_only) {
            (Some(q), _) => q.clone(),
            (None, true) if infinite => slice::empty_q(l),
            (None, true) => QMatrix::new(BitMatrix::zeros(m, l))?,
            (None, false) => init_q(m, &eligible, cfg.p_init, &mut rng)?,
        };
        let rates = match &cfg.fixed_rates {
            Some(r) => r.clone(),
            None => draw_rates_from_prior(&rate_prior, &mut rng)?,
        };
        let alpha1 = cfg
            .fixed_alpha1
            .unwrap_or_else(|| draw_alpha1_from_prior(&cfg.priors.alpha, &mut rng));
        let mq = q.n_states();
        let a2 = cfg.priors.alpha2;
        let p: Vec<f64> = (0..mq)
            .map(|_| sample_beta(alpha1 * a2 / mq as f64, a2, &mut rng))
            .collect();
        let mut st = match &cfg.partial_clusters {
            Some(c0) => ClusterState::new(y, Some(c0), true, mq),
            None => ClusterState::new(y, None, false, mq),
        };
        let mut cs = ChainState {
            y,
            cfg,
            prior,
            rate_prior,
            eligible,
            st: st.clone(),
            q,
            rates,
            alpha1,
            p,
            s: 0.0,
            rng,
            sc: GScratch::default(),
            stats: ChainStats::default(),
        };
        if infinite {
            // start with every initial state switched on in every cluster
            st.resize_states(mq, true);
            for j in 0..st.n_clusters() {
                st.cluster_mut(j).eta = vec![true; mq];
            }
            cs.st = st;
        } else {
            let kernel = cs.kernel()?;
            let lr = cs.log_rates();
            update_hstar(
                &mut cs.st,
                kernel.as_ref(),
                &lr,
                &cs.p,
                &mut cs.sc,
                &mut cs.rng,
            );
        }
        Ok(cs)
    }

    fn likelihood(&self) -> bool {
        !self.cfg.prior_only
    }

    fn log_rates(&self) -> LogRates {
        if self.likelihood() {
            LogRates::new(&self.rates)
        } else {
            LogRates::flat(self.y.n_features())
        }
    }

    fn kernel(&self) -> Result<Option<MarginalKernel>> {
        if self.likelihood() {
            Ok(Some(MarginalKernel::new(
                &self.q,
                self.cfg.rule,
                self.cfg.max_block_states,
            )?))
        } else {
            Ok(None)
        }
    }

    pub fn iterate(&mut self) -> Result<()> {
        match self.cfg.mode {
            Mode::Finite => self.iterate_finite(),
            Mode::Infinite => self.iterate_infinite(),
        }
    }

    fn tallies(&self) -> RateTallies {
        if self.likelihood() {
            rate_tallies(&self.st, &self.q, self.cfg.rule)
        } else {
            let l = self.y.n_features();
            RateTallies {
                on1: vec![0; l],
                on0: vec![0; l],
                off1: vec![0; l],
                off0: vec![0; l],
            }
        }
    }

    fn update_rates(&mut self) -> Result<()> {
        if self.cfg.fixed_rates.is_none() {
            let t = self.tallies();
            self.rates = update_rates(&self.rates, &t, &self.rate_prior, &mut self.rng)?;
        }
        Ok(())
    }

    fn iterate_finite(&mut self) -> Result<()> {
        let kernel = self.kernel()?;
        let lr = self.log_rates();
        let probs = StateLogProbs::new_unchecked(&self.p);
        self.st.invalidate();
        let ctx = ZContext {
            kernel: kernel.as_ref(),
            rates: &lr,
            probs: &probs,
            prior: &self.prior,
        };
        let sm = if self.cfg.fix_partition {
            SplitMerge::Skipped
        } else {
            split_merge(
                &mut self.st,
                &ctx,
                self.cfg.split_merge_scans,
                &mut self.sc,
                &mut self.rng,
            )
        };
        match sm {
            SplitMerge::SplitAccepted => {
                self.stats.split_proposed += 1;
                self.stats.split_accepted += 1;
            }
            SplitMerge::SplitRejected => self.stats.split_proposed += 1,
            SplitMerge::MergeAccepted => {
                self.stats.merge_proposed += 1;
                self.stats.merge_accepted += 1;
            }
            SplitMerge::MergeRejected => self.stats.merge_proposed += 1,
            SplitMerge::Skipped => {}
        }
        if !self.cfg.fix_partition {
            gibbs_sweep(&mut self.st, &ctx, &mut self.sc, &mut self.rng);
        }
        update_hstar(
            &mut self.st,
            kernel.as_ref(),
            &lr,
            &self.p,
            &mut self.sc,
            &mut self.rng,
        );

        let move_q = self.cfg.fixed_q.is_none() && self.likelihood();
        if move_q {
            self.stats.partner_merges += partner_merge_step(
                &mut self.st,
                &mut self.q,
                self.cfg.rule,
                &self.eligible,
                self.cfg.p_init,
                &mut self.rng,
            );
        }
        self.update_rates()?;
        let s = self.st.state_counts();
        let t = self.st.n_clusters();
        if self.cfg.fixed_alpha1.is_none() {
            self.alpha1 = update_alpha1(
                &s,
                t,
                self.cfg.priors.alpha2,
                &self.cfg.priors.alpha,
                &mut self.rng,
            );
        }
        self.p = update_p(&s, t, self.alpha1, self.cfg.priors.alpha2, &mut self.rng);
        if move_q {
            let lr = self.log_rates();
            let qs = update_q(
                &mut self.q,
                &self.st,
                &lr,
                self.cfg.rule,
                true,
                &mut self.rng,
            );
            self.stats.q_flips += qs.flipped;
            let unused = unused_states(&self.st, self.q.n_states(), self.cfg.rule);
            if reset_rows(
                &mut self.q,
                &unused,
                &self.eligible,
                self.cfg.p_init,
                &mut self.rng,
            )
            .is_ok()
            {
                self.stats.rows_reset += unused.len();
            }
        }
        Ok(())
    }

    fn state_cap(&self) -> usize {
        let l = self.y.n_features();
        self.cfg
            .max_states
            .unwrap_or(if self.likelihood() { (l - 1) / 2 } else { 64 })
    }

    fn iterate_infinite(&mut self) -> Result<()> {
        let lr = self.likelihood().then(|| LogRates::new(&self.rates));
        slice::drop_unused(&mut self.st, &mut self.q, &mut self.p);
        if !self.cfg.fix_partition {
            let mut q = std::mem::replace(&mut self.q, slice::empty_q(0));
            let mut p = std::mem::take(&mut self.p);
            let rows = RowSource {
                eligible: self.likelihood().then_some(&self.eligible[..]),
                p_init: self.cfg.p_init,
                cap: self.state_cap(),
            };
            slice::z_sweep(
                &mut self.st,
                &mut q,
                &mut p,
                lr.as_ref(),
                self.alpha1,
                &self.prior,
                &rows,
                &mut self.rng,
            );
            self.q = q;
            self.p = p;
        }
        slice::drop_unused(&mut self.st, &mut self.q, &mut self.p);

        let t = self.st.n_clusters();
        let used = self.st.state_counts();
        for (k, &m) in used.iter().enumerate() {
            self.p[k] = sample_beta(m as f64, (1 + t - m) as f64, &mut self.rng);
        }
        let pmin = self.p.iter().copied().fold(1.0f64, f64::min);
        self.s = self.rng.random::<f64>() * pmin;
        let room = self.state_cap().saturating_sub(self.q.n_states());
        let sticks = slice::sample_inactive_sticks(self.alpha1, t, self.s, room, &mut self.rng);
        {
            let mut q = std::mem::replace(&mut self.q, slice::empty_q(0));
            let mut p = std::mem::take(&mut self.p);
            let rows = RowSource {
                eligible: self.likelihood().then_some(&self.eligible[..]),
                p_init: self.cfg.p_init,
                cap: self.state_cap(),
            };
            slice::pad_states(&mut self.st, &mut q, &mut p, &sticks, &rows, &mut self.rng);
            self.q = q;
            self.p = p;
        }
        slice::hstar_sweep(
            &mut self.st,
            &self.q,
            &self.p,
            self.s,
            lr.as_ref(),
            &mut self.rng,
        );
        if self.likelihood() && self.q.n_states() > 0 {
            let lr = self.log_rates();
            let qs = update_q(&mut self.q, &self.st, &lr, Rule::Dino, true, &mut self.rng);
            self.stats.q_flips += qs.flipped;
        }
        self.update_rates()?;
        if self.cfg.fixed_alpha1.is_none() {
            let kplus = self.st.state_counts().iter().filter(|&&c| c > 0).count();
            let t = self.st.n_clusters();
            self.alpha1 = sample_alpha_grid(
                &self.cfg.priors.alpha,
                |a| ibp_infinite_loglik(kplus, t, a),
                &mut self.rng,
            );
        }
        Ok(())
    }

    /// Joint log posterior of the current state.
    pub fn log_post(&self) -> Result<f64> {
        let (part, h) = self.st.snapshot();
        let hyper = ModelHyper {
            rule: self.cfg.rule,
            partition: &self.prior,
            rates: &self.rate_prior,
            alpha2: self.cfg.priors.alpha2,
            alpha: self.cfg.priors.alpha,
            strict: false,
        };
        if self.q.n_states() == 0 {
            // no states: every feature is at its false positive rate
            let q1 = QMatrix::new(BitMatrix::zeros(1, self.y.n_features()))?;
            let h1 = LatentStateMatrix::new(BitMatrix::zeros(h.n_rows(), 1))?;
            let mut terms =
                joint_logpost(self.y, &part, &h1, &q1, &self.rates, self.alpha1, &hyper)?;
            terms.state_prior = ibp_infinite_log_prior(&h, self.alpha1);
            if !self.likelihood() {
                terms.loglik = 0.0;
            }
            return Ok(terms.total());
        }
        let mut terms =
            joint_logpost(self.y, &part, &h, &self.q, &self.rates, self.alpha1, &hyper)?;
        if self.cfg.mode == Mode::Infinite {
            terms.state_prior = ibp_infinite_log_prior(&h, self.alpha1);
        }
        if !self.likelihood() {
            terms.loglik = 0.0;
        }
        Ok(terms.total())
    }

    /// The current state as a stored draw, states sorted by their Q rows.
    pub fn draw(&self, iteration: usize) -> Result<Draw> {
        let log_post = self.log_post()?;
        let (part, h) = self.st.snapshot();
        let perm = relabel_permutation(&self.q);
        let qb = self.q.bits().permute_rows(&perm);
        let hb = h.bits().permute_cols(&perm);
        Ok(Draw {
            iteration,
            z: part.labels().to_vec(),
            hstar: (0..hb.n_rows()).map(|j| hb.row_string(j)).collect(),
            q: (0..qb.n_rows()).map(|k| qb.row_string(k)).collect(),
            theta: self.rates.theta.clone(),
            psi: self.rates.psi.clone(),
            alpha1: self.alpha1,
            p: perm.iter().map(|&k| self.p[k]).collect(),
            log_post,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::enumerate_partitions;
    use crate::priors::{log_eppf, q_in_constraint_set};
    use rand::Rng;

    fn toy_data(n: usize, seed: u64) -> BinaryDataMatrix {
        // two groups with distinct response profiles over 7 features
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<u8>> = (0..n)
            .map(|i| {
                (0..7)
                    .map(|l| {
                        let on = if i % 2 == 0 { l < 4 } else { l >= 3 };
                        let p = if on { 0.85 } else { 0.1 };
                        u8::from(rng.random::<f64>() < p)
                    })
                    .collect()
            })
            .collect();
        BinaryDataMatrix::from_rows(&rows).unwrap()
    }

    fn short(m: usize) -> ChainConfig {
        ChainConfig {
            iterations: 60,
            burn_in: 20,
            thin: 2,
            n_chains: 2,
            m_dagger: m,
            ..ChainConfig::default()
        }
    }

    #[test]
    fn same_seed_same_chain() {
        let y = toy_data(12, 1);
        let cfg = short(2);
        let a = run_chain(&y, &cfg, 0).unwrap();
        let b = run_chain(&y, &cfg, 0).unwrap();
        let c = run_chain(&y, &cfg, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.draws, c.draws);
        assert_eq!(a.draws.len(), cfg.retained());
        assert_eq!(a.draws[0].iteration, 22);
    }

    #[test]
    fn parallel_matches_serial() {
        let y = toy_data(10, 2);
        let cfg = short(2);
        let par = run_chains(&y, &cfg).unwrap();
        for (c, out) in par.iter().enumerate() {
            assert_eq!(out, &run_chain(&y, &cfg, c).unwrap());
        }
    }

    #[test]
    fn draws_respect_constraints() {
        let y = toy_data(16, 3);
        for rule in [Rule::Dino, Rule::Dina] {
            let cfg = ChainConfig {
                rule,
                iterations: 150,
                burn_in: 50,
                ..short(3)
            };
            let out = run_chain(&y, &cfg, 0).unwrap();
            for d in &out.draws {
                assert!(
                    q_in_constraint_set(&d.q_matrix().unwrap()),
                    "{rule:?} {:?}",
                    d.q
                );
                assert!(d.rates().is_ok());
                assert!(d.log_post.is_finite());
                assert_eq!(d.partition().n_blocks(), d.n_clusters());
                assert!(d.z.iter().all(|&z| z < d.n_clusters()));
                // rows sorted in descending order
                assert!(d.q.windows(2).all(|w| w[0] >= w[1]));
            }
        }
    }

    #[test]
    fn must_link_kept_together() {
        let y = toy_data(10, 4);
        let c0 = Partition::from_labels(&[0, 0, 1, 2, 3, 3, 3, 4, 5, 6]);
        let cfg = ChainConfig {
            partial_clusters: Some(c0.clone()),
            ..short(2)
        };
        let out = run_chain(&y, &cfg, 0).unwrap();
        for d in &out.draws {
            assert!(c0.refines(&d.partition()));
        }
    }

    #[test]
    fn fixed_parameters_stay_fixed() {
        let y = toy_data(10, 5);
        let q = QMatrix::new(BitMatrix::from_strings(&["1001001", "0100101"], 7).unwrap()).unwrap();
        let r = RateParams::constant(7, 0.8, 0.2).unwrap();
        let cfg = ChainConfig {
            fixed_q: Some(q),
            fixed_rates: Some(r),
            fixed_alpha1: Some(1.5),
            ..short(2)
        };
        let out = run_chain(&y, &cfg, 0).unwrap();
        for d in &out.draws {
            assert_eq!(d.q, vec!["1001001".to_string(), "0100101".to_string()]);
            assert!(d.theta.iter().all(|&t| t == 0.8));
            assert_eq!(d.alpha1, 1.5);
        }
    }

    #[test]
    fn prior_only_finite_matches_prior() {
        // partition and state activity under the prior alone
        let n = 4;
        let y = toy_data(n, 6);
        let alpha = 1.0;
        let m = 2;
        let cfg = ChainConfig {
            iterations: 40_000,
            burn_in: 1000,
            thin: 1,
            m_dagger: m,
            prior_only: true,
            fixed_alpha1: Some(alpha),
            ..ChainConfig::default()
        };
        let out = run_chain(&y, &cfg, 0).unwrap();
        let prior = PartitionPrior::new(cfg.priors.partition.clone()).unwrap();
        let mut exact_t = vec![0.0; n + 1];
        for c in enumerate_partitions(n) {
            exact_t[c.n_blocks()] += log_eppf(&c, &prior).unwrap().exp();
        }
        let mut hit_t = vec![0.0; n + 1];
        let mut active = 0.0;
        for d in &out.draws {
            hit_t[d.n_clusters()] += 1.0;
            active += d.active_states().len() as f64;
        }
        let k = out.draws.len() as f64;
        let tv: f64 = (1..=n)
            .map(|t| (hit_t[t] / k - exact_t[t]).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.02, "tv {tv}");
        // P(state active | T) = 1 - B(a, 1+T)/B(a, 1) with a = alpha/M
        let a = alpha / m as f64;
        let exact_active: f64 = (1..=n)
            .map(|t| {
                exact_t[t]
                    * m as f64
                    * (1.0
                        - (0..t)
                            .map(|i| (1.0 + i as f64) / (a + 1.0 + i as f64))
                            .product::<f64>())
            })
            .sum();
        assert!(
            (active / k - exact_active).abs() < 0.04,
            "{} vs {exact_active}",
            active / k
        );
    }

    #[test]
    fn prior_only_infinite_active_count() {
        // K+ given T is Poisson(alpha * H_T)
        let n = 4;
        let y = toy_data(n, 7);
        let alpha = 1.0;
        let cfg = ChainConfig {
            iterations: 30_000,
            burn_in: 1000,
            thin: 1,
            mode: Mode::Infinite,
            prior_only: true,
            fixed_alpha1: Some(alpha),
            ..ChainConfig::default()
        };
        let out = run_chain(&y, &cfg, 0).unwrap();
        let prior = PartitionPrior::new(cfg.priors.partition.clone()).unwrap();
        let mut exact_t = vec![0.0; n + 1];
        for c in enumerate_partitions(n) {
            exact_t[c.n_blocks()] += log_eppf(&c, &prior).unwrap().exp();
        }
        let kmax = 12;
        let mut exact_k = vec![0.0; kmax];
        for t in 1..=n {
            let lam = alpha * (1..=t).map(|i| 1.0 / i as f64).sum::<f64>();
            let mut pk = (-lam).exp();
            for (k, e) in exact_k.iter_mut().enumerate() {
                if k > 0 {
                    pk *= lam / k as f64;
                }
                *e += exact_t[t] * pk;
            }
        }
        let mut hit_k = vec![0.0; kmax];
        for d in &out.draws {
            let k = d.active_states().len();
            if k < kmax {
                hit_k[k] += 1.0;
            }
        }
        let tot = out.draws.len() as f64;
        let tv: f64 = hit_k
            .iter()
            .zip(&exact_k)
            .map(|(h, e)| (h / tot - e).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.03, "tv {tv}\n{hit_k:?}\n{exact_k:?}");
    }

    #[test]
    fn infinite_mode_runs_with_data() {
        let y = toy_data(14, 8);
        let cfg = ChainConfig {
            mode: Mode::Infinite,
            iterations: 100,
            burn_in: 40,
            ..short(2)
        };
        let out = run_chain(&y, &cfg, 0).unwrap();
        for d in &out.draws {
            assert!(d.log_post.is_finite());
            assert!(d.n_states() <= 3);
            if d.n_states() > 0 {
                assert!(d.rates().is_ok());
            }
        }
    }
}
