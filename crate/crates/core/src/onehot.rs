//! One-hot encodings of strings and edit distance over their binary rows.
//!
//! A string over alphabet `D` becomes a `rows x width` 0/1 matrix with one
//! row per symbol; column `t` has a single 1 in the row of `s[t]`, and
//! columns past the end of the string are all zero. Row-wise edit distances
//! of these matrices bracket the edit distance of the original strings,
//! which is what makes pooling over one-hot inputs analyzable.

use crate::error::{Error, Result};
use crate::strings::{edit_distance, Alphabet};
use crate::tensor::{Real, Tensor2};

/// Placeholder symbol used when a string is restricted to one character:
/// it is outside the `u8` range, so it can never collide with a real byte.
pub const PAD_SYMBOL: u16 = 256;

/// A 0/1 matrix with one row per alphabet symbol and one column per
/// position, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OneHotMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl OneHotMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.data[r * self.cols + c]
    }

    /// Row `r` as a binary string over `{0, 1}`.
    pub fn row(&self, r: usize) -> &[u8] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// The same matrix as a real-valued tensor, ready for the network.
    pub fn to_tensor(&self) -> Tensor2 {
        let data: Vec<Real> = self.data.iter().map(|&b| b as Real).collect();
        Tensor2::from_data(self.rows, self.cols, data).expect("shape is consistent")
    }
}

/// One-hot encode `s` into an `alphabet.rows() x width` matrix, zero-padding
/// columns past the end of the string.
pub fn one_hot(s: &[u8], alphabet: &Alphabet, width: usize) -> Result<OneHotMatrix> {
    if s.len() > width {
        return Err(Error::StringTooLong {
            len: s.len(),
            max: width,
        });
    }
    let rows = alphabet.rows();
    let mut data = vec![0u8; rows * width];
    for (t, &b) in s.iter().enumerate() {
        let r = alphabet.encode(b)?;
        data[r * width + t] = 1;
    }
    Ok(OneHotMatrix {
        rows,
        cols: width,
        data,
    })
}

/// Edit distance between two binary strings; rows of one-hot matrices are
/// the intended inputs, but any 0/1 slices work.
pub fn binary_edit_distance(x: &[u8], y: &[u8]) -> usize {
    edit_distance(x, y)
}

/// Sum of row-wise edit distances between two one-hot matrices with the
/// same alphabet.
pub fn row_edit_sum(x: &OneHotMatrix, y: &OneHotMatrix) -> Result<usize> {
    if x.rows != y.rows {
        return Err(Error::ShapeMismatch(format!(
            "row counts differ: {} vs {}",
            x.rows, y.rows
        )));
    }
    Ok((0..x.rows)
        .map(|r| binary_edit_distance(x.row(r), y.row(r)))
        .sum())
}

/// Replace every character of `s` other than `c` with [`PAD_SYMBOL`],
/// keeping the length, and report how many positions hold `c`. The result
/// lives in `u16` so the placeholder stays distinct from all byte values.
pub fn restrict_to_char(s: &[u8], c: u8) -> (Vec<u16>, usize) {
    let restricted: Vec<u16> = s
        .iter()
        .map(|&b| if b == c { b as u16 } else { PAD_SYMBOL })
        .collect();
    let count = s.iter().filter(|&&b| b == c).count();
    (restricted, count)
}

/// Widen a byte string to `u16` symbols so it can be compared against
/// restricted strings.
pub fn widen(s: &[u8]) -> Vec<u16> {
    s.iter().map(|&b| b as u16).collect()
}
