//! Updates of the state-to-feature matrix Q that keep it in the
//! identifiability constraint set (C1 ∧ C3).

use rand::Rng;

use crate::bits::BitMatrix;
use crate::error::{Error, Result};
use crate::model::{LogRates, QMatrix, Rule};

use super::state::ClusterState;

/// Redraws row `m` from the data-driven initializer: eligible columns get a
/// one with probability `p_init`, all others zero.
pub fn draw_init_row<R: Rng + ?Sized>(
    q: &mut QMatrix,
    m: usize,
    eligible: &[bool],
    p_init: f64,
    rng: &mut R,
) {
    for (l, &ok) in eligible.iter().enumerate() {
        let v = ok && rng.random::<f64>() < p_init;
        q.set(m, l, v);
    }
}

/// Columns whose marginal positive rate exceeds `tau1`.
pub fn eligible_columns(col_means: &[f64], tau1: f64) -> Vec<bool> {
    col_means.iter().map(|&r| r > tau1).collect()
}

struct Tally {
    col: Vec<usize>,
    owner: Vec<usize>,
}

impl Tally {
    fn new(q: &QMatrix) -> Self {
        let (m, l) = (q.n_states(), q.n_features());
        let mut col = vec![0; l];
        let mut owner = vec![usize::MAX; l];
        for k in 0..m {
            for c in q.bits().row_ones(k) {
                col[c] += 1;
                owner[c] = k;
            }
        }
        Tally { col, owner }
    }

    fn singles(&self, m: usize) -> usize {
        (0..self.col.len())
            .filter(|&c| self.col[c] == 1 && self.owner[c] == m)
            .count()
    }

    fn set(&mut self, q: &mut QMatrix, m: usize, c: usize, v: bool) {
        if q.get(m, c) == v {
            return;
        }
        q.set(m, c, v);
        if v {
            self.col[c] += 1;
            if self.col[c] == 1 {
                self.owner[c] = m;
            }
        } else {
            self.col[c] -= 1;
            if self.col[c] == 1 {
                self.owner[c] = (0..q.n_states()).find(|&k| q.get(k, c)).unwrap();
            }
        }
    }
}

/// Edits only the rows in `free` so that every state has at least two
/// singleton columns and at least three ones. Rows outside `free` keep
/// their entries; their singleton columns are protected.
pub fn repair_rows(q: &mut QMatrix, free: &[usize]) -> Result<()> {
    let (m, l) = (q.n_states(), q.n_features());
    if free.is_empty() {
        return Ok(());
    }
    if 2 * m >= l {
        return Err(Error::Identifiability(format!(
            "no Q with M = {m} states and L = {l} features satisfies the constraints (needs L > 2M)"
        )));
    }
    let is_free: Vec<bool> = (0..m).map(|k| free.contains(&k)).collect();
    // reserved[c] = state whose singleton column c must stay
    let mut reserved = vec![usize::MAX; l];

    for k in (0..m).filter(|&k| !is_free[k]) {
        let mut found = 0;
        for c in 0..l {
            if q.get(k, c) && (0..m).all(|o| o == k || is_free[o] || !q.get(o, c)) {
                reserved[c] = k;
                for &f in free {
                    q.set(f, c, false);
                }
                found += 1;
                if found == 2 {
                    break;
                }
            }
        }
        if found < 2 {
            return Err(Error::Identifiability(format!(
                "fixed state {k} has fewer than two singleton columns"
            )));
        }
    }

    for &r in free {
        let fixed_zero = |q: &QMatrix, c: usize| (0..m).all(|o| is_free[o] || !q.get(o, c));
        let mut chosen = Vec::with_capacity(2);
        // already a singleton of r
        for c in 0..l {
            if chosen.len() == 2 {
                break;
            }
            if reserved[c] == usize::MAX && q.get(r, c) && (0..m).all(|o| o == r || !q.get(o, c)) {
                chosen.push(c);
            }
        }
        // a one of r shared only with other free rows
        for c in 0..l {
            if chosen.len() == 2 {
                break;
            }
            if reserved[c] == usize::MAX && q.get(r, c) && !chosen.contains(&c) && fixed_zero(q, c)
            {
                chosen.push(c);
            }
        }
        // empty columns, the canonical pair (r, M + r) first
        let mut empty: Vec<usize> = (0..l)
            .filter(|&c| {
                reserved[c] == usize::MAX && !chosen.contains(&c) && (0..m).all(|o| !q.get(o, c))
            })
            .collect();
        empty.sort_by_key(|&c| (c != r && c != m + r, c));
        for c in empty {
            if chosen.len() == 2 {
                break;
            }
            chosen.push(c);
        }
        // columns held only by unreserved free rows
        for c in 0..l {
            if chosen.len() == 2 {
                break;
            }
            if reserved[c] == usize::MAX && !chosen.contains(&c) && fixed_zero(q, c) {
                chosen.push(c);
            }
        }
        if chosen.len() < 2 {
            return Err(Error::Identifiability(format!(
                "no room for two singleton columns of state {r}"
            )));
        }
        for c in chosen {
            for &f in free {
                q.set(f, c, f == r);
            }
            reserved[c] = r;
        }
    }

    // row sums of at least three without touching reserved singletons
    let mut tally = Tally::new(q);
    for &r in free {
        while q.row_sum(r) < 3 {
            let pick = (0..l)
                .filter(|&c| !q.get(r, c) && reserved[c] == usize::MAX)
                .min_by_key(|&c| (tally.col[c] == 0, c))
                .or_else(|| {
                    (0..l)
                        .filter(|&c| !q.get(r, c) && reserved[c] != usize::MAX && tally.col[c] == 1)
                        .filter(|&c| tally.singles(tally.owner[c]) > 2)
                        .min()
                });
            match pick {
                Some(c) => {
                    if reserved[c] != usize::MAX {
                        reserved[c] = usize::MAX;
                    }
                    tally.set(q, r, c, true);
                }
                None => {
                    return Err(Error::Identifiability(format!(
                        "cannot give state {r} three ones"
                    )));
                }
            }
        }
    }
    debug_assert!(
        crate::priors::q_in_constraint_set(q),
        "repair left Q outside the set:\n{:?}",
        q
    );
    Ok(())
}

/// A Q drawn from the initializer and repaired into the constraint set.
pub fn init_q<R: Rng + ?Sized>(
    m: usize,
    eligible: &[bool],
    p_init: f64,
    rng: &mut R,
) -> Result<QMatrix> {
    let mut q = QMatrix::from_bits_unchecked(BitMatrix::zeros(m, eligible.len()));
    for k in 0..m {
        draw_init_row(&mut q, k, eligible, p_init, rng);
    }
    let all: Vec<usize> = (0..m).collect();
    repair_rows(&mut q, &all)?;
    Ok(q)
}

/// Whether state m is switched off everywhere in the sense that matters for
/// the rule: never on under DINO, always on (so never required) under DINA.
pub fn state_is_inert(st: &ClusterState, m: usize, rule: Rule) -> bool {
    let inert = rule == Rule::Dina;
    st.clusters().iter().all(|c| c.eta[m] == inert)
}

/// Collapses states whose columns of H* are identical and non-inert: for a
/// group m < m′ < …, row m of Q absorbs the others' ones and the others
/// become inert. Γ is unchanged. Returns the freed states.
pub fn merge_partner_states(st: &mut ClusterState, q: &mut QMatrix, rule: Rule) -> Vec<usize> {
    let m = q.n_states();
    let inert_value = rule == Rule::Dina;
    let cols: Vec<Vec<bool>> = (0..m)
        .map(|k| st.clusters().iter().map(|c| c.eta[k]).collect())
        .collect();
    let mut freed = Vec::new();
    for a in 0..m {
        if freed.contains(&a) || cols[a].iter().all(|&v| v == inert_value) {
            continue;
        }
        for b in a + 1..m {
            if !freed.contains(&b) && cols[b] == cols[a] {
                for c in 0..q.n_features() {
                    if q.get(b, c) {
                        q.set(a, c, true);
                    }
                }
                for j in 0..st.n_clusters() {
                    st.cluster_mut(j).eta[b] = inert_value;
                }
                freed.push(b);
            }
        }
    }
    freed
}

/// Partner merge followed by an immediate reset of the freed rows. When the
/// freed rows cannot be repaired into the constraint set the whole move is
/// undone. Returns the number of states merged away.
pub fn partner_merge_step<R: Rng + ?Sized>(
    st: &mut ClusterState,
    q: &mut QMatrix,
    rule: Rule,
    eligible: &[bool],
    p_init: f64,
    rng: &mut R,
) -> usize {
    let saved_q = q.clone();
    let saved_eta: Vec<Vec<bool>> = st.clusters().iter().map(|c| c.eta.clone()).collect();
    let freed = merge_partner_states(st, q, rule);
    if freed.is_empty() {
        return 0;
    }
    if reset_rows(q, &freed, eligible, p_init, rng).is_ok() {
        return freed.len();
    }
    *q = saved_q;
    for (j, eta) in saved_eta.into_iter().enumerate() {
        st.cluster_mut(j).eta = eta;
    }
    0
}

/// Redraws the listed rows from the initializer and repairs them. On failure
/// Q is left untouched and the error returned.
pub fn reset_rows<R: Rng + ?Sized>(
    q: &mut QMatrix,
    rows: &[usize],
    eligible: &[bool],
    p_init: f64,
    rng: &mut R,
) -> Result<()> {
    if rows.is_empty() {
        return Ok(());
    }
    let saved = q.clone();
    for &r in rows {
        draw_init_row(q, r, eligible, p_init, rng);
    }
    repair_rows(q, rows).inspect_err(|_| *q = saved)
}

/// Rows of inert states.
pub fn unused_states(st: &ClusterState, m: usize, rule: Rule) -> Vec<usize> {
    (0..m).filter(|&k| state_is_inert(st, k, rule)).collect()
}

/// Counters for the Q sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QSweepStats {
    pub proposed: usize,
    pub flipped: usize,
    pub protected: usize,
}

/// One Metropolized Gibbs sweep over the entries of Q given the clusters'
/// state vectors and counts. Entries whose flip could leave the constraint
/// set are skipped; every other entry flips with probability
/// min(1, likelihood ratio).
pub fn update_q<R: Rng + ?Sized>(
    q: &mut QMatrix,
    st: &ClusterState,
    rates: &LogRates,
    rule: Rule,
    protect: bool,
    rng: &mut R,
) -> QSweepStats {
    let (m, l) = (q.n_states(), q.n_features());
    let t = st.n_clusters();
    let mut tally = Tally::new(q);
    let mut singles: Vec<usize> = (0..m).map(|k| tally.singles(k)).collect();
    let mut row_sum: Vec<usize> = (0..m).map(|k| q.row_sum(k)).collect();
    // state m "acts" on cluster j if it can switch a feature on (DINO) or
    // off (DINA) there
    let acts: Vec<Vec<bool>> = st
        .clusters()
        .iter()
        .map(|c| c.eta.iter().map(|&e| e != (rule == Rule::Dina)).collect())
        .collect();
    let mut stats = QSweepStats::default();
    let mut cover = vec![0usize; t];
    for c in 0..l {
        for (j, a) in acts.iter().enumerate() {
            cover[j] = (0..m).filter(|&k| a[k] && q.get(k, c)).count();
        }
        let d: Vec<f64> = st
            .clusters()
            .iter()
            .map(|cl| {
                let (n1, n0) = (cl.counts.n1(c), cl.counts.n0(c));
                rates.on(c, n1, n0) - rates.off(c, n1, n0)
            })
            .collect();
        for k in 0..m {
            let cur = q.get(k, c);
            if protect {
                let col = tally.col[c];
                let blocked = (cur && col == 1)
                    || (cur && row_sum[k] <= 3)
                    || (!cur && col == 1 && tally.owner[c] != k && singles[tally.owner[c]] <= 2);
                if blocked {
                    stats.protected += 1;
                    continue;
                }
            }
            stats.proposed += 1;
            // log p(Q_kc = 1) − log p(Q_kc = 0)
            let mut delta = 0.0;
            for j in 0..t {
                if !acts[j][k] {
                    continue;
                }
                let others = cover[j] - cur as usize;
                if others == 0 {
                    delta += match rule {
                        Rule::Dino => d[j],
                        Rule::Dina => -d[j],
                    };
                }
            }
            let log_ratio = if cur { -delta } else { delta };
            if log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp() {
                let v = !cur;
                let col_before = tally.col[c];
                let owner_before = tally.owner[c];
                tally.set(q, k, c, v);
                row_sum[k] = if v { row_sum[k] + 1 } else { row_sum[k] - 1 };
                // singleton bookkeeping
                match (col_before, tally.col[c]) {
                    (0, 1) => singles[k] += 1,
                    (1, 0) => singles[k] -= 1,
                    (1, 2) => singles[owner_before] -= 1,
                    (2, 1) => singles[tally.owner[c]] += 1,
                    _ => {}
                }
                for j in 0..t {
                    if acts[j][k] {
                        if v {
                            cover[j] += 1;
                        } else {
                            cover[j] -= 1;
                        }
                    }
                }
                stats.flipped += 1;
            }
        }
    }
    stats
}

/// Permutation that sorts the rows of Q in decreasing binary order with
/// column 0 as the most significant digit; ties keep their order.
pub fn relabel_permutation(q: &QMatrix) -> Vec<usize> {
    let keys: Vec<Vec<u64>> = (0..q.n_states())
        .map(|k| q.row(k).iter().map(|w| w.reverse_bits()).collect())
        .collect();
    let mut perm: Vec<usize> = (0..q.n_states()).collect();
    perm.sort_by(|&a, &b| keys[b].cmp(&keys[a]));
    perm
}
