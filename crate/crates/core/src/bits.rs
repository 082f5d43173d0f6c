//! Packed row-major bit matrices and a few word-slice helpers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) const WORD: usize = 64;

#[inline]
pub(crate) fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD)
}

/// A dense 0/1 matrix stored row by row in 64-bit words.
///
/// Padding bits past the last column are always zero, which lets whole-word
/// operations (popcount, OR, equality) ignore the column count.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "BitRows", into = "BitRows")]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<u64>,
}

/// Serialized form: the column count and one 0/1 string per row.
#[derive(Serialize, Deserialize)]
struct BitRows {
    cols: usize,
    rows: Vec<String>,
}

impl From<BitMatrix> for BitRows {
    fn from(m: BitMatrix) -> Self {
        BitRows {
            cols: m.cols,
            rows: (0..m.rows).map(|r| m.row_string(r)).collect(),
        }
    }
}

impl TryFrom<BitRows> for BitMatrix {
    type Error = Error;
    fn try_from(b: BitRows) -> Result<Self> {
        BitMatrix::from_strings(&b.rows, b.cols)
    }
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = words_for(cols);
        BitMatrix {
            rows,
            cols,
            stride,
            data: vec![0; rows * stride],
        }
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.set(r, c, true);
            }
        }
        m
    }

    /// Builds a matrix from nested rows of 0/1 values.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::zeros(rows.len(), cols);
        for (r, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {r} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            for (c, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => m.set(r, c, true),
                    _ => {
                        return Err(Error::Data(format!(
                            "entry ({r}, {c}) is {v}, expected 0 or 1"
                        )))
                    }
                }
            }
        }
        Ok(m)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                if f(r, c) {
                    m.set(r, c, true);
                }
            }
        }
        m
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        debug_assert!(r < self.rows && c < self.cols);
        (self.data[r * self.stride + c / WORD] >> (c % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        debug_assert!(r < self.rows && c < self.cols);
        let w = &mut self.data[r * self.stride + c / WORD];
        let mask = 1u64 << (c % WORD);
        if v {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.stride..(r + 1) * self.stride]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [u64] {
        &mut self.data[r * self.stride..(r + 1) * self.stride]
    }

    pub fn row_sum(&self, r: usize) -> usize {
        popcount(self.row(r))
    }

    pub fn col_sum(&self, c: usize) -> usize {
        (0..self.rows).filter(|&r| self.get(r, c)).count()
    }

    pub fn count_ones(&self) -> usize {
        popcount(&self.data)
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c) as u8).collect())
            .collect()
    }

    /// Row `r` as a string of `0`/`1` characters.
    pub fn row_string(&self, r: usize) -> String {
        (0..self.cols)
            .map(|c| if self.get(r, c) { '1' } else { '0' })
            .collect()
    }

    pub fn from_strings<S: AsRef<str>>(rows: &[S], cols: usize) -> Result<Self> {
        let mut m = Self::zeros(rows.len(), cols);
        for (r, s) in rows.iter().enumerate() {
            let s = s.as_ref();
            if s.len() != cols {
                return Err(Error::Dimension(format!(
                    "bit string {r} has length {}, expected {cols}",
                    s.len()
                )));
            }
            for (c, ch) in s.bytes().enumerate() {
                match ch {
                    b'0' => {}
                    b'1' => m.set(r, c, true),
                    _ => return Err(Error::Data(format!("bad bit character {:?}", ch as char))),
                }
            }
        }
        Ok(m)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    /// Copy with the rows reordered so that new row `i` is old row `perm[i]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.rows);
        let mut out = Self::zeros(self.rows, self.cols);
        for (i, &p) in perm.iter().enumerate() {
            out.row_mut(i).copy_from_slice(self.row(p));
        }
        out
    }

    pub fn permute_cols(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.cols);
        Self::from_fn(self.rows, self.cols, |r, c| self.get(r, perm[c]))
    }

    pub fn select_rows(&self, keep: &[usize]) -> Self {
        let mut out = Self::zeros(keep.len(), self.cols);
        for (i, &k) in keep.iter().enumerate() {
            out.row_mut(i).copy_from_slice(self.row(k));
        }
        out
    }

    pub fn select_cols(&self, keep: &[usize]) -> Self {
        Self::from_fn(self.rows, keep.len(), |r, c| self.get(r, keep[c]))
    }

    pub fn push_row(&mut self, bits: &[bool]) {
        assert_eq!(bits.len(), self.cols);
        self.data.extend(std::iter::repeat_n(0, self.stride));
        self.rows += 1;
        for (c, &b) in bits.iter().enumerate() {
            if b {
                self.set(self.rows - 1, c, true);
            }
        }
    }

    /// Appends `extra` all-zero columns.
    pub fn pad_cols(&self, extra: usize) -> Self {
        Self::from_fn(self.rows, self.cols + extra, |r, c| {
            c < self.cols && self.get(r, c)
        })
    }

    pub fn row_ones(&self, r: usize) -> impl Iterator<Item = usize> + '_ {
        iter_ones(self.row(r))
    }
}

#[inline]
pub(crate) fn popcount(words: &[u64]) -> usize {
    words.iter().map(|w| w.count_ones() as usize).sum()
}

#[inline]
pub(crate) fn or_into(dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d |= *s;
    }
}

#[inline]
pub(crate) fn intersects(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).any(|(x, y)| x & y != 0)
}

#[inline]
pub(crate) fn get_bit(words: &[u64], i: usize) -> bool {
    (words[i / WORD] >> (i % WORD)) & 1 == 1
}

#[inline]
pub(crate) fn set_bit(words: &mut [u64], i: usize) {
    words[i / WORD] |= 1u64 << (i % WORD);
}

/// Indices of the set bits, in increasing order.
pub(crate) fn iter_ones(words: &[u64]) -> impl Iterator<Item = usize> + '_ {
    words.iter().enumerate().flat_map(|(wi, &w)| {
        let mut w = w;
        std::iter::from_fn(move || {
            if w == 0 {
                None
            } else {
                let tz = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * WORD + tz)
            }
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_get_roundtrip_across_word_boundary() {
        let mut m = BitMatrix::zeros(3, 130);
        m.set(1, 0, true);
        m.set(1, 63, true);
        m.set(1, 64, true);
        m.set(2, 129, true);
        assert!(m.get(1, 63) && m.get(1, 64) && m.get(2, 129));
        assert!(!m.get(0, 64));
        assert_eq!(m.row_sum(1), 3);
        assert_eq!(iter_ones(m.row(1)).collect::<Vec<_>>(), vec![0, 63, 64]);
        m.set(1, 63, false);
        assert_eq!(m.row_sum(1), 2);
    }

    #[test]
    fn strings_roundtrip() {
        let m = BitMatrix::from_rows(&[vec![1u8, 0, 1], vec![0, 0, 1]]).unwrap();
        let s: Vec<String> = (0..2).map(|r| m.row_string(r)).collect();
        assert_eq!(s, vec!["101", "001"]);
        assert_eq!(BitMatrix::from_strings(&s, 3).unwrap(), m);
    }

    #[test]
    fn rejects_non_binary() {
        assert!(BitMatrix::from_rows(&[vec![0u8, 2]]).is_err());
        assert!(BitMatrix::from_rows(&[vec![0u8, 1], vec![1]]).is_err());
    }

    #[test]
    fn permutations() {
        let m = BitMatrix::from_rows(&[vec![1u8, 0], vec![0, 1], vec![1, 1]]).unwrap();
        let p = m.permute_rows(&[2, 0, 1]);
        assert_eq!(p.to_rows(), vec![vec![1, 1], vec![1, 0], vec![0, 1]]);
        let t = m.transpose();
        assert_eq!(t.to_rows(), vec![vec![1, 0, 1], vec![0, 1, 1]]);
        assert_eq!(m.permute_cols(&[1, 0]).to_rows()[0], vec![0, 1]);
    }
}
