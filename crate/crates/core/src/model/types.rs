use serde::{Deserialize, Serialize};

use crate::bits::BitMatrix;
use crate::error::{Error, Result};

/// N×L observed binary responses, one subject per row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryDataMatrix {
    bits: BitMatrix,
}

impl BinaryDataMatrix {
    pub fn new(bits: BitMatrix) -> Result<Self> {
        if bits.n_rows() == 0 || bits.n_cols() == 0 {
            return Err(Error::Data(format!(
                "data must have at least one subject and one feature, got {}x{}",
                bits.n_rows(),
                bits.n_cols()
            )));
        }
        Ok(BinaryDataMatrix { bits })
    }

    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        Self::new(BitMatrix::from_rows(rows)?)
    }

    #[inline]
    pub fn n_subjects(&self) -> usize {
        self.bits.n_rows()
    }

    #[inline]
    pub fn n_features(&self) -> usize {
        self.bits.n_cols()
    }

    #[inline]
    pub fn get(&self, i: usize, l: usize) -> bool {
        self.bits.get(i, l)
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u64] {
        self.bits.row(i)
    }

    pub fn bits(&self) -> &BitMatrix {
        &self.bits
    }

    /// Fraction of ones in each column.
    pub fn column_means(&self) -> Vec<f64> {
        let n = self.n_subjects() as f64;
        (0..self.n_features())
            .map(|l| self.bits.col_sum(l) as f64 / n)
            .collect()
    }
}

/// M×L design basis: row m lists the features switched on by latent state m.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "BitMatrix", into = "BitMatrix")]
pub struct QMatrix {
    bits: BitMatrix,
}

impl QMatrix {
    pub fn new(bits: BitMatrix) -> Result<Self> {
        if bits.n_rows() == 0 {
            return Err(Error::Dimension("Q needs at least one row".into()));
        }
        Ok(QMatrix { bits })
    }

    /// Allows zero rows; used by the slice sampler, whose truncation can
    /// momentarily be empty.
    pub(crate) fn from_bits_unchecked(bits: BitMatrix) -> Self {
        QMatrix { bits }
    }

    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        Self::new(BitMatrix::from_rows(rows)?)
    }

    pub fn identity(m: usize) -> Self {
        QMatrix {
            bits: BitMatrix::from_fn(m, m, |r, c| r == c),
        }
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.bits.n_rows()
    }

    #[inline]
    pub fn n_features(&self) -> usize {
        self.bits.n_cols()
    }

    #[inline]
    pub fn get(&self, m: usize, l: usize) -> bool {
        self.bits.get(m, l)
    }

    #[inline]
    pub fn set(&mut self, m: usize, l: usize, v: bool) {
        self.bits.set(m, l, v)
    }

    #[inline]
    pub fn row(&self, m: usize) -> &[u64] {
        self.bits.row(m)
    }

    pub fn row_sum(&self, m: usize) -> usize {
        self.bits.row_sum(m)
    }

    pub fn bits(&self) -> &BitMatrix {
        &self.bits
    }

    pub fn into_bits(self) -> BitMatrix {
        self.bits
    }
}

impl TryFrom<BitMatrix> for QMatrix {
    type Error = Error;
    fn try_from(b: BitMatrix) -> Result<Self> {
        QMatrix::new(b)
    }
}

impl From<QMatrix> for BitMatrix {
    fn from(q: QMatrix) -> Self {
        q.bits
    }
}

/// T×M latent state matrix H*: one binary state vector per cluster.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "BitMatrix", into = "BitMatrix")]
pub struct LatentStateMatrix {
    bits: BitMatrix,
}

impl LatentStateMatrix {
    pub fn new(bits: BitMatrix) -> Result<Self> {
        if bits.n_rows() == 0 {
            return Err(Error::Dimension("H* needs at least one row".into()));
        }
        Ok(LatentStateMatrix { bits })
    }

    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        Self::new(BitMatrix::from_rows(rows)?)
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.bits.n_rows()
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.bits.n_cols()
    }

    #[inline]
    pub fn get(&self, j: usize, m: usize) -> bool {
        self.bits.get(j, m)
    }

    pub fn set(&mut self, j: usize, m: usize, v: bool) {
        self.bits.set(j, m, v)
    }

    pub fn row(&self, j: usize) -> &[u64] {
        self.bits.row(j)
    }

    pub fn row_vec(&self, j: usize) -> Vec<bool> {
        (0..self.n_states()).map(|m| self.get(j, m)).collect()
    }

    /// Number of rows with state m switched on.
    pub fn column_sum(&self, m: usize) -> usize {
        self.bits.col_sum(m)
    }

    pub fn bits(&self) -> &BitMatrix {
        &self.bits
    }

    /// Per-subject form H: row i is the state vector of subject i's cluster.
    pub fn expand(&self, z: &[usize]) -> LatentStateMatrix {
        LatentStateMatrix {
            bits: BitMatrix::from_fn(z.len(), self.n_states(), |i, m| self.get(z[i], m)),
        }
    }
}

impl TryFrom<BitMatrix> for LatentStateMatrix {
    type Error = Error;
    fn try_from(b: BitMatrix) -> Result<Self> {
        LatentStateMatrix::new(b)
    }
}

impl From<LatentStateMatrix> for BitMatrix {
    fn from(h: LatentStateMatrix) -> Self {
        h.bits
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    /// A feature is ideally on when any active state covers it.
    #[default]
    Dino,
    /// A feature is ideally on only when every state covering it is active.
    Dina,
}

impl std::str::FromStr for Rule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dino" => Ok(Rule::Dino),
            "dina" => Ok(Rule::Dina),
            _ => Err(Error::Config(format!("unknown rule {s:?} (dino|dina)"))),
        }
    }
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Rule::Dino => "dino",
            Rule::Dina => "dina",
        })
    }
}

/// Ideal responses Γ for a set of state vectors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DesignMatrix {
    pub bits: BitMatrix,
    pub rule: Rule,
}

impl DesignMatrix {
    #[inline]
    pub fn get(&self, j: usize, l: usize) -> bool {
        self.bits.get(j, l)
    }
}

/// Per-feature true and false positive rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub theta: Vec<f64>,
    pub psi: Vec<f64>,
}

impl RateParams {
    /// Validates 0 < ψ < θ < 1 featurewise.
    pub fn new(theta: Vec<f64>, psi: Vec<f64>) -> Result<Self> {
        if theta.len() != psi.len() {
            return Err(Error::Dimension(format!(
                "{} true positive rates but {} false positive rates",
                theta.len(),
                psi.len()
            )));
        }
        for (l, (&t, &p)) in theta.iter().zip(&psi).enumerate() {
            if !(0.0 < p && p < t && t < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "feature {l}: need 0 < psi < theta < 1, got psi={p}, theta={t}"
                )));
            }
        }
        Ok(RateParams { theta, psi })
    }

    pub fn constant(l: usize, theta: f64, psi: f64) -> Result<Self> {
        Self::new(vec![theta; l], vec![psi; l])
    }

    pub fn n_features(&self) -> usize {
        self.theta.len()
    }
}
