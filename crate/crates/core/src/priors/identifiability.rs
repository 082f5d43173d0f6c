use crate::bits::words_for;
use crate::error::{Error, Result};
use crate::model::{gamma_row_into, QMatrix, Rule};

/// C2 is only checked up to this many states; the lattice has 2^M patterns.
pub const C2_MAX_STATES: usize = 12;

/// For each state m, the number of columns equal to the unit vector e_m.
pub fn singleton_counts(q: &QMatrix) -> Vec<usize> {
    let mut out = vec![0; q.n_states()];
    for l in 0..q.n_features() {
        let mut owner = None;
        let mut count = 0;
        for m in 0..q.n_states() {
            if q.get(m, l) {
                count += 1;
                owner = Some(m);
            }
        }
        if count == 1 {
            out[owner.unwrap()] += 1;
        }
    }
    out
}

/// Two copies of the identity can be carved out of the columns of Q.
pub fn check_c1(q: &QMatrix) -> bool {
    2 * q.n_states() <= q.n_features() && singleton_counts(q).iter().all(|&c| c >= 2)
}

/// Every state switches on at least three features.
pub fn check_c3(q: &QMatrix) -> bool {
    (0..q.n_states()).all(|m| q.row_sum(m) >= 3)
}

/// Membership in the sampler's constraint set: after permuting rows and
/// columns Q = [I, I, Q̃] with every row of Q̃ nonzero. That is C1 and C3
/// together.
pub fn q_in_constraint_set(q: &QMatrix) -> bool {
    check_c1(q) && check_c3(q)
}

/// Column indices of the two identity blocks (the two lowest singleton
/// columns of each state, in state order) and of the remaining columns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
    pub rest: Vec<usize>,
}

pub fn canonical_witness(q: &QMatrix) -> Option<Witness> {
    if !check_c1(q) {
        return None;
    }
    let m = q.n_states();
    let mut first = vec![usize::MAX; m];
    let mut second = vec![usize::MAX; m];
    let mut used = vec![false; q.n_features()];
    for l in 0..q.n_features() {
        let ones: Vec<usize> = (0..m).filter(|&k| q.get(k, l)).collect();
        if let [k] = ones[..] {
            if first[k] == usize::MAX {
                first[k] = l;
                used[l] = true;
            } else if second[k] == usize::MAX {
                second[k] = l;
                used[l] = true;
            }
        }
    }
    let rest = (0..q.n_features()).filter(|&l| !used[l]).collect();
    Some(Witness {
        first,
        second,
        rest,
    })
}

/// C2 for two-parameter models: for every pair η ⪰ η′, η ≠ η′, the ideal
/// responses over the non-identity columns differ. With θ > ψ that is the
/// same as the response probabilities differing.
///
/// Because Γ is monotone in η, it suffices to compare patterns one bit
/// apart. Requires C1 for the canonical column split.
pub fn check_c2(q: &QMatrix, rule: Rule) -> Result<bool> {
    let w = canonical_witness(q)
        .ok_or_else(|| Error::Identifiability("C2 needs a C1 witness, but C1 fails".into()))?;
    let m = q.n_states();
    if m > 24 {
        return Err(Error::Capacity { size: m, cap: 24 });
    }
    let rest = QMatrix::from_bits_unchecked(q.bits().select_cols(&w.rest));
    let words = words_for(w.rest.len()).max(1);
    let mut gammas = vec![0u64; (1usize << m) * words];
    for pat in 0..1usize << m {
        gamma_row_into(
            |k| (pat >> k) & 1 == 1,
            &rest,
            rule,
            &mut gammas[pat * words..(pat + 1) * words],
        );
    }
    for pat in 0..1usize << m {
        for k in 0..m {
            if (pat >> k) & 1 == 1 {
                let lower = pat & !(1 << k);
                if gammas[pat * words..(pat + 1) * words]
                    == gammas[lower * words..(lower + 1) * words]
                {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// C2 when M is small enough to enumerate; `None` (with a warning) above
/// [`C2_MAX_STATES`] or when C1 fails.
pub fn check_c2_if_feasible(q: &QMatrix, rule: Rule) -> Option<bool> {
    if q.n_states() > C2_MAX_STATES {
        log::warn!("skipping C2 for M = {} > {C2_MAX_STATES}", q.n_states());
        return None;
    }
    check_c2(q, rule).ok()
}
