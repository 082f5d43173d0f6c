use crate::bits::{or_into, BitMatrix, WORD};
use crate::error::{Error, Result};

use super::types::{DesignMatrix, LatentStateMatrix, QMatrix, Rule};

/// Writes the ideal response row for a state vector into `out`.
///
/// Under DINO the row is the OR of the Q rows selected by `eta`; under DINA
/// it is the complement of the OR of the rows *not* selected.
pub fn gamma_row_into(eta: impl Fn(usize) -> bool, q: &QMatrix, rule: Rule, out: &mut [u64]) {
    out.fill(0);
    let want = matches!(rule, Rule::Dino);
    for m in 0..q.n_states() {
        if eta(m) == want {
            or_into(out, q.row(m));
        }
    }
    if rule == Rule::Dina {
        for w in out.iter_mut() {
            *w = !*w;
        }
        mask_tail(out, q.n_features());
    }
}

pub(crate) fn mask_tail(words: &mut [u64], bits: usize) {
    let rem = bits % WORD;
    if rem != 0 {
        if let Some(last) = words.last_mut() {
            *last &= (1u64 << rem) - 1;
        }
    }
}

fn build(h: &LatentStateMatrix, q: &QMatrix, rule: Rule) -> Result<DesignMatrix> {
    if h.n_states() != q.n_states() {
        return Err(Error::Dimension(format!(
            "H has {} state columns but Q has {} rows",
            h.n_states(),
            q.n_states()
        )));
    }
    let mut bits = BitMatrix::zeros(h.n_rows(), q.n_features());
    for j in 0..h.n_rows() {
        gamma_row_into(|m| h.get(j, m), q, rule, bits.row_mut(j));
    }
    Ok(DesignMatrix { bits, rule })
}

/// Γ_jl = 1 − Π_m (1 − η_jm)^{Q_ml}.
pub fn build_gamma_dino(h: &LatentStateMatrix, q: &QMatrix) -> Result<DesignMatrix> {
    build(h, q, Rule::Dino)
}

/// Γ_jl = Π_m η_jm^{Q_ml}.
pub fn build_gamma_dina(h: &LatentStateMatrix, q: &QMatrix) -> Result<DesignMatrix> {
    build(h, q, Rule::Dina)
}

pub fn build_gamma(h: &LatentStateMatrix, q: &QMatrix, rule: Rule) -> Result<DesignMatrix> {
    build(h, q, rule)
}
