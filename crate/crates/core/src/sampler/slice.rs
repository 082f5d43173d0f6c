//! Pieces of the slice sampler for an unbounded number of latent states
//! (semi-ordered stick-breaking representation of the IBP). Only the
//! disjunctive rule is supported: under it an unused state is all zeros.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::bits::{words_for, BitMatrix};
use crate::model::{gamma_row_into, loglik_from_counts, LogRates, QMatrix, Rule};
use crate::numeric::sample_log_weights;
use crate::priors::PartitionPrior;

use super::ars::{ars, griddy};
use super::qmoves::{draw_init_row, repair_rows};
use super::state::ClusterState;

/// Log density of an inactive stick in x = log μ, up to a constant:
/// α Σ_{i≤t} (1−μ)^i / i + α x + t log(1−μ).
pub fn stick_log_density(x: f64, alpha: f64, t: usize) -> f64 {
    let mu = x.exp();
    let r = 1.0 - mu;
    let mut pow = 1.0;
    let mut sum = 0.0;
    for i in 1..=t {
        pow *= r;
        sum += pow / i as f64;
    }
    alpha * sum + alpha * x + t as f64 * (-mu).ln_1p()
}

fn stick_log_density_deriv(x: f64, alpha: f64, t: usize) -> f64 {
    let mu = x.exp();
    alpha * (1.0 - mu).powi(t as i32) - t as f64 * mu / (1.0 - mu)
}

/// Draws the next inactive stick below `prev`.
pub fn sample_stick<R: Rng + ?Sized>(prev: f64, alpha: f64, t: usize, rng: &mut R) -> f64 {
    let hi = prev.ln();
    let turn = (alpha / (t as f64 * (alpha + 1.0))).min(prev);
    let x0 = (0.1 * turn).ln();
    let mut start = vec![x0];
    for c in [0.5f64, 0.9, 0.99] {
        let x = (prev * c).ln();
        if x > x0 {
            start.push(x);
        }
    }
    let h = |x: f64| stick_log_density(x, alpha, t);
    let dh = |x: f64| stick_log_density_deriv(x, alpha, t);
    let x = ars(h, dh, f64::NEG_INFINITY, hi, &start, rng).unwrap_or_else(|| {
        log::debug!("stick ARS fell back to the grid (alpha={alpha}, t={t}, prev={prev})");
        let lo = x0 - 40.0 / alpha.max(1e-3);
        griddy(h, lo, hi, 1024, rng)
    });
    x.exp().min(prev)
}

/// Decreasing inactive sticks from 1 down to the first one below `s`
/// (which is discarded), at most `cap` of them.
pub fn sample_inactive_sticks<R: Rng + ?Sized>(
    alpha: f64,
    t: usize,
    s: f64,
    cap: usize,
    rng: &mut R,
) -> Vec<f64> {
    let mut out = Vec::new();
    let mut prev = 1.0;
    while out.len() < cap {
        let mu = sample_stick(prev, alpha, t, rng);
        if mu < s {
            return out;
        }
        out.push(mu);
        prev = mu;
    }
    log::warn!("inactive state padding hit the cap of {cap} states");
    out
}

/// Keeps the states some cluster uses; returns the kept indices.
pub fn drop_unused(st: &mut ClusterState, q: &mut QMatrix, p: &mut Vec<f64>) -> Vec<usize> {
    let used = st.state_counts();
    let keep: Vec<usize> = (0..used.len()).filter(|&k| used[k] > 0).collect();
    if keep.len() != used.len() {
        st.select_states(&keep);
        *q = QMatrix::from_bits_unchecked(q.bits().select_rows(&keep));
        *p = keep.iter().map(|&k| p[k]).collect();
    }
    keep
}

/// How new rows of Q are produced when states are created.
pub struct RowSource<'a> {
    /// None: Q is not maintained (likelihood off) and new rows are zero.
    pub eligible: Option<&'a [bool]>,
    pub p_init: f64,
    pub cap: usize,
}

impl RowSource<'_> {
    /// Appends up to `k` new rows and repairs them into the constraint set;
    /// returns how many were kept.
    pub fn append<R: Rng + ?Sized>(&self, q: &mut QMatrix, k: usize, rng: &mut R) -> usize {
        let m0 = q.n_states();
        let mut k = k.min(self.cap.saturating_sub(m0));
        let l = q.n_features();
        let Some(elig) = self.eligible else {
            let mut bits = q.bits().clone();
            for _ in 0..k {
                bits.push_row(&vec![false; l]);
            }
            *q = QMatrix::from_bits_unchecked(bits);
            return k;
        };
        while k > 0 {
            let mut bits = q.bits().clone();
            for _ in 0..k {
                bits.push_row(&vec![false; l]);
            }
            let mut cand = QMatrix::from_bits_unchecked(bits);
            let rows: Vec<usize> = (m0..m0 + k).collect();
            for &r in &rows {
                draw_init_row(&mut cand, r, elig, self.p_init, rng);
            }
            if repair_rows(&mut cand, &rows).is_ok() {
                *q = cand;
                return k;
            }
            k -= 1;
        }
        0
    }
}

fn truncate_rows(q: &mut QMatrix, m: usize) {
    if q.n_states() > m {
        let keep: Vec<usize> = (0..m).collect();
        *q = QMatrix::from_bits_unchecked(q.bits().select_rows(&keep));
    }
}

/// Gibbs sweep over unit assignments with the state probabilities
/// integrated out. A new cluster's state vector is an auxiliary draw from
/// the IBP predictive given the other clusters (the unit's own vector when
/// it was alone), so existing clusters keep their explicit vectors.
#[allow(clippy::too_many_arguments)]
pub fn z_sweep<R: Rng + ?Sized>(
    st: &mut ClusterState,
    q: &mut QMatrix,
    p: &mut Vec<f64>,
    rates: Option<&LogRates>,
    alpha: f64,
    prior: &PartitionPrior,
    rows: &RowSource<'_>,
    rng: &mut R,
) {
    let n = st.n_subjects();
    let l = q.n_features();
    let mut gamma = vec![0u64; words_for(l)];
    let mut w = Vec::new();
    for u in 0..st.n_units() {
        let removed = st.remove_unit(u);
        let s = st.unit(u).size();
        let t = st.n_clusters();
        let mstar = q.n_states();
        let (mut aux, fresh) = match removed {
            Some(c) => (c.eta, false),
            None => {
                let used = st.state_counts();
                let eta = used
                    .iter()
                    .map(|&a| a > 0 && rng.random::<f64>() * ((t + 1) as f64) < (a as f64))
                    .collect();
                (eta, true)
            }
        };
        let lam = alpha / (t + 1) as f64;
        let n_new = if fresh && lam > 0.0 {
            Poisson::new(lam)
                .map(|d| d.sample(rng) as usize)
                .unwrap_or(0)
        } else {
            0
        };
        let added = if n_new > 0 {
            rows.append(q, n_new, rng)
        } else {
            0
        };
        aux.resize(mstar + added, true);

        let loglik = |eta: &[bool], gamma: &mut [u64], st: &ClusterState| -> f64 {
            match rates {
                Some(r) => {
                    gamma_row_into(|m| m < eta.len() && eta[m], q, Rule::Dino, gamma);
                    loglik_from_counts(&st.unit(u).counts, gamma, r)
                }
                None => 0.0,
            }
        };
        w.clear();
        for j in 0..t {
            let eta = &st.cluster(j).eta;
            w.push(
                prior.ln_rising_gamma(st.cluster(j).size() + s)
                    - prior.ln_rising_gamma(st.cluster(j).size())
                    + loglik(eta, &mut gamma, st),
            );
        }
        let v_ratio = if t == 0 {
            0.0
        } else {
            prior.log_vn(t + 1, n).expect("t < N") - prior.log_vn(t, n).expect("t <= N")
        };
        w.push(v_ratio + prior.ln_rising_gamma(s) + loglik(&aux, &mut gamma, st));
        let k = sample_log_weights(&w, rng);
        if k < t {
            truncate_rows(q, mstar);
            st.add_unit(u, k);
        } else {
            st.resize_states(mstar + added, false);
            p.resize(mstar + added, 0.5);
            st.new_cluster(u, aux);
        }
    }
}

/// Elementwise update of every cluster's state vector under the slice:
/// the weight of each configuration carries 1/μ⁺_min, the density of the
/// slice variable given the active states, and states with μ < s stay off.
/// States are visited in random order; active states sit first in storage,
/// and scanning in storage order would make the kernel depend on η.
pub fn hstar_sweep<R: Rng + ?Sized>(
    st: &mut ClusterState,
    q: &QMatrix,
    p: &[f64],
    s: f64,
    rates: Option<&LogRates>,
    rng: &mut R,
) {
    let m = q.n_states();
    let l = q.n_features();
    let mut used = st.state_counts();
    let mut cover = vec![0u32; l];
    let mut order: Vec<usize> = (0..m).collect();
    for j in 0..st.n_clusters() {
        let mut eta = std::mem::take(&mut st.cluster_mut(j).eta);
        let counts = &st.cluster(j).counts;
        cover.iter_mut().for_each(|c| *c = 0);
        for k in (0..m).filter(|&k| eta[k]) {
            for c in q.bits().row_ones(k) {
                cover[c] += 1;
            }
        }
        order.shuffle(rng);
        for &k in &order {
            let cur = eta[k];
            let others_min = (0..m)
                .filter(|&o| o != k && used[o] > 0)
                .map(|o| p[o])
                .fold(1.0f64, f64::min);
            let rest = used[k] - cur as usize;
            let min1 = others_min.min(p[k]);
            let min0 = if rest > 0 { min1 } else { others_min };
            let mut delta = 0.0;
            if let Some(r) = rates {
                for c in q.bits().row_ones(k) {
                    if cover[c] - cur as u32 == 0 {
                        let (n1, n0) = (counts.n1(c), counts.n0(c));
                        delta += r.on(c, n1, n0) - r.off(c, n1, n0);
                    }
                }
            }
            let allowed1 = p[k] >= s && min1 > s;
            let allowed0 = min0 > s;
            let lw1 = if allowed1 {
                p[k].ln() + delta - min1.ln()
            } else {
                f64::NEG_INFINITY
            };
            let lw0 = if allowed0 {
                (-p[k]).ln_1p() - min0.ln()
            } else {
                f64::NEG_INFINITY
            };
            let v = sample_log_weights(&[lw0, lw1], rng) == 1;
            if v != cur {
                eta[k] = v;
                if v {
                    used[k] += 1;
                } else {
                    used[k] -= 1;
                }
                for c in q.bits().row_ones(k) {
                    if v {
                        cover[c] += 1;
                    } else {
                        cover[c] -= 1;
                    }
                }
            }
        }
        st.cluster_mut(j).eta = eta;
    }
}

/// Appends `sticks` as new inactive states.
pub fn pad_states<R: Rng + ?Sized>(
    st: &mut ClusterState,
    q: &mut QMatrix,
    p: &mut Vec<f64>,
    sticks: &[f64],
    rows: &RowSource<'_>,
    rng: &mut R,
) -> usize {
    let m = q.n_states();
    let added = rows.append(q, sticks.len(), rng);
    p.extend_from_slice(&sticks[..added]);
    st.resize_states(m + added, false);
    added
}

/// An empty Q with L columns.
pub fn empty_q(l: usize) -> QMatrix {
    QMatrix::from_bits_unchecked(BitMatrix::zeros(0, l))
}
