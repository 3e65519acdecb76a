//! The CGK embedding: a randomized map from edit distance into Hamming
//! distance.
//!
//! A shared random bit matrix drives a walk over the input string: at output
//! step `j` the current character is emitted and the pointer advances only
//! when the bit for `(j, character)` is set. Strings of length up to `L`
//! become strings of exactly `3L` symbols over the alphabet plus a padding
//! symbol. For strings embedded with the *same* matrix, the Hamming distance
//! is (with high probability) at least the edit distance and at most
//! quadratically larger.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::strings::{edit_distance, Alphabet, StringDataset};

/// A CGK output string: symbol ordinals, with `alphabet.rows()` standing in
/// for the padding symbol emitted after the walk consumes its input.
pub type CgkEmbedding = Vec<u8>;

/// The random bit matrix shared by all strings of one embedding run:
/// `3 * input_len` rows (one per output step), one column per alphabet row.
#[derive(Debug, Clone)]
pub struct CgkMatrix {
    input_len: usize,
    cols: usize,
    bits: Vec<u8>,
}

impl CgkMatrix {
    /// Sample a matrix for strings of length up to `input_len` over
    /// `alphabet`, deterministically from `seed`.
    pub fn random(input_len: usize, alphabet: &Alphabet, seed: u64) -> Result<Self> {
        let cols = alphabet.rows();
        if cols >= 256 {
            return Err(Error::InvalidArgument(format!(
                "alphabet has {cols} rows; CGK symbols must fit in a byte"
            )));
        }
        if input_len == 0 {
            return Err(Error::InvalidArgument("input length must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bits = (0..3 * input_len * cols)
            .map(|_| rng.random::<u8>() & 1)
            .collect();
        Ok(CgkMatrix {
            input_len,
            cols,
            bits,
        })
    }

    /// Matrix with every bit set; the walk advances on every step.
    #[cfg(test)]
    fn all_ones(input_len: usize, cols: usize) -> Self {
        CgkMatrix {
            input_len,
            cols,
            bits: vec![1; 3 * input_len * cols],
        }
    }

    /// Matrix with every bit clear; the walk never advances.
    #[cfg(test)]
    fn all_zeros(input_len: usize, cols: usize) -> Self {
        CgkMatrix {
            input_len,
            cols,
            bits: vec![0; 3 * input_len * cols],
        }
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn output_len(&self) -> usize {
        3 * self.input_len
    }

    /// Number of symbol columns (= alphabet rows the matrix was built for).
    pub fn cols(&self) -> usize {
        self.cols
    }

    fn bit(&self, step: usize, sym: usize) -> u8 {
        self.bits[step * self.cols + sym]
    }
}

/// Embed `s` with the walk driven by `matrix`. The output has exactly
/// `3 * matrix.input_len()` symbols; once the pointer passes the end of `s`,
/// the padding symbol `alphabet.rows()` is emitted.
pub fn cgk_embed(s: &[u8], matrix: &CgkMatrix, alphabet: &Alphabet) -> Result<CgkEmbedding> {
    if alphabet.rows() != matrix.cols {
        return Err(Error::ShapeMismatch(format!(
            "matrix built for {} symbols, alphabet has {}",
            matrix.cols,
            alphabet.rows()
        )));
    }
    if s.len() > matrix.input_len {
        return Err(Error::StringTooLong {
            len: s.len(),
            max: matrix.input_len,
        });
    }
    let pad = alphabet.rows() as u8;
    let mut out = Vec::with_capacity(matrix.output_len());
    let mut i = 0usize;
    for j in 0..matrix.output_len() {
        if i < s.len() {
            let sym = alphabet.encode(s[i])?;
            out.push(sym as u8);
            i += matrix.bit(j, sym) as usize;
        } else {
            out.push(pad);
        }
    }
    Ok(out)
}

/// Hamming distance between two equal-length symbol strings.
pub fn hamming(x: &[u8], y: &[u8]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "hamming distance needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(x.iter().zip(y).filter(|(a, b)| a != b).count())
}

/// How well Hamming distances after one CGK embedding track edit distance
/// over a set of string pairs.
#[derive(Debug, Clone)]
pub struct CgkDistortionReport {
    /// Pairs with a positive edit distance (the ones the ratios cover).
    pub n_pairs: usize,
    /// Pairs where the Hamming distance fell below the edit distance.
    pub lower_violations: usize,
    /// Pairs with edit distance zero, excluded from the ratio statistics.
    pub zero_pairs: usize,
    pub min_ratio: f64,
    pub mean_ratio: f64,
    pub max_ratio: f64,
}

impl CgkDistortionReport {
    pub fn lower_violation_rate(&self) -> f64 {
        if self.n_pairs == 0 {
            0.0
        } else {
            self.lower_violations as f64 / self.n_pairs as f64
        }
    }
}

/// Sample `n_pairs` random string pairs from the dataset, embed them with a
/// fresh seed-derived matrix, and compare Hamming distances to exact edit
/// distances.
pub fn cgk_distortion_report(
    ds: &StringDataset,
    n_pairs: usize,
    seed: u64,
) -> Result<CgkDistortionReport> {
    if n_pairs == 0 {
        return Err(Error::InvalidArgument("need at least one pair".into()));
    }
    let matrix = CgkMatrix::random(ds.max_len.max(1), &ds.alphabet, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let pairs: Vec<(&[u8], &[u8])> = (0..n_pairs)
        .map(|_| {
            (
                ds.get(rng.random_range(0..ds.len())),
                ds.get(rng.random_range(0..ds.len())),
            )
        })
        .collect();
    cgk_distortion_over_pairs(&pairs, &matrix, &ds.alphabet)
}

/// Embed every pair with the shared `matrix` and compare Hamming distance to
/// exact edit distance.
pub fn cgk_distortion_over_pairs(
    pairs: &[(&[u8], &[u8])],
    matrix: &CgkMatrix,
    alphabet: &Alphabet,
) -> Result<CgkDistortionReport> {
    let mut report = CgkDistortionReport {
        n_pairs: 0,
        lower_violations: 0,
        zero_pairs: 0,
        min_ratio: f64::INFINITY,
        mean_ratio: 0.0,
        max_ratio: 0.0,
    };
    let mut ratio_sum = 0.0;
    for &(x, y) in pairs {
        let de = edit_distance(x, y);
        if de == 0 {
            report.zero_pairs += 1;
            continue;
        }
        let ex = cgk_embed(x, matrix, alphabet)?;
        let ey = cgk_embed(y, matrix, alphabet)?;
        let dh = hamming(&ex, &ey)?;
        report.n_pairs += 1;
        if dh < de {
            report.lower_violations += 1;
        }
        let ratio = dh as f64 / de as f64;
        ratio_sum += ratio;
        report.min_ratio = report.min_ratio.min(ratio);
        report.max_ratio = report.max_ratio.max(ratio);
    }
    if report.n_pairs > 0 {
        report.mean_ratio = ratio_sum / report.n_pairs as f64;
    } else {
        report.min_ratio = 0.0;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ab() -> Alphabet {
        Alphabet::new(b"ab".to_vec()).unwrap()
    }

    #[test]
    fn all_ones_matrix_copies_then_pads() {
        let m = CgkMatrix::all_ones(2, 2);
        let e = cgk_embed(b"ab", &m, &ab()).unwrap();
        assert_eq!(e, vec![0, 1, 2, 2, 2, 2]);
    }

    #[test]
    fn all_zeros_matrix_repeats_the_first_symbol() {
        let m = CgkMatrix::all_zeros(2, 2);
        let e = cgk_embed(b"ab", &m, &ab()).unwrap();
        assert_eq!(e, vec![0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn empty_string_is_all_padding() {
        let m = CgkMatrix::random(4, &ab(), 7).unwrap();
        let e = cgk_embed(b"", &m, &ab()).unwrap();
        assert_eq!(e, vec![2; 12]);
    }

    #[test]
    fn rejects_strings_longer_than_the_matrix() {
        let m = CgkMatrix::random(2, &ab(), 7).unwrap();
        assert!(matches!(
            cgk_embed(b"aba", &m, &ab()),
            Err(Error::StringTooLong { len: 3, max: 2 })
        ));
    }

    #[test]
    fn hamming_counts_mismatches() {
        assert_eq!(hamming(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap(), 2);
        assert_eq!(hamming(&[], &[]).unwrap(), 0);
        assert!(hamming(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn same_seed_gives_the_same_matrix() {
        let a = CgkMatrix::random(8, &ab(), 99).unwrap();
        let b = CgkMatrix::random(8, &ab(), 99).unwrap();
        let c = CgkMatrix::random(8, &ab(), 100).unwrap();
        assert_eq!(a.bits, b.bits);
        assert_ne!(a.bits, c.bits);
    }

    proptest! {
        #[test]
        fn output_is_always_3l(
            s in prop::collection::vec(prop::sample::select(b"ab".to_vec()), 0..16),
            seed in any::<u64>(),
        ) {
            let m = CgkMatrix::random(16, &ab(), seed).unwrap();
            let e = cgk_embed(&s, &m, &ab()).unwrap();
            prop_assert_eq!(e.len(), 48);
        }

        #[test]
        fn equal_strings_embed_identically(
            s in prop::collection::vec(prop::sample::select(b"ab".to_vec()), 0..16),
            seed in any::<u64>(),
        ) {
            let m = CgkMatrix::random(16, &ab(), seed).unwrap();
            let ex = cgk_embed(&s, &m, &ab()).unwrap();
            let ey = cgk_embed(&s, &m, &ab()).unwrap();
            prop_assert_eq!(hamming(&ex, &ey).unwrap(), 0);
        }
    }

    #[test]
    fn distortion_report_tracks_violations() {
        let alphabet = Alphabet::new(b"ACGT".to_vec()).unwrap();
        let m = CgkMatrix::random(8, &alphabet, 5).unwrap();
        let pairs: Vec<(&[u8], &[u8])> = vec![
            (b"ACGT", b"ACGT"),
            (b"ACGT", b"ACGA"),
            (b"AAAA", b"TTTT"),
            (b"ACGTACGT", b"ACG"),
        ];
        let r = cgk_distortion_over_pairs(&pairs, &m, &alphabet).unwrap();
        assert_eq!(r.zero_pairs, 1);
        assert_eq!(r.n_pairs, 3);
        assert!(r.max_ratio >= r.mean_ratio && r.mean_ratio >= r.min_ratio);
        assert!(r.lower_violations <= r.n_pairs);
    }

    #[test]
    fn dataset_report_is_seed_deterministic() {
        let strings = crate::synth::uniform_strings(40, 4, 16, b"ACGT", 3);
        let ds = StringDataset::from_strings(strings).unwrap();
        let a = cgk_distortion_report(&ds, 200, 11).unwrap();
        let b = cgk_distortion_report(&ds, 200, 11).unwrap();
        assert_eq!(a.n_pairs, b.n_pairs);
        assert_eq!(a.lower_violations, b.lower_violations);
        assert_eq!(a.mean_ratio, b.mean_ratio);
        assert_eq!(a.n_pairs + a.zero_pairs, 200);
        assert!(cgk_distortion_report(&ds, 0, 1).is_err());
    }
}
