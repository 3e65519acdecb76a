//! String datasets, alphabets, and exact edit distance.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// The distinct symbols of a dataset, in sorted order, plus an optional
/// reserved slot that out-of-alphabet bytes map to.
///
/// `size()` counts only the observed symbols; `rows()` additionally counts
/// the reserved slot and is the number of rows a one-hot matrix gets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    chars: Vec<u8>,
    ord: [u16; 256],
    has_unknown: bool,
}

const NO_ORD: u16 = u16::MAX;

impl Alphabet {
    /// Alphabet of exactly the given symbols (deduplicated, sorted), with no
    /// reserved slot: bytes outside it are errors.
    pub fn new(mut chars: Vec<u8>) -> Result<Self> {
        chars.sort_unstable();
        chars.dedup();
        if chars.is_empty() {
            return Err(Error::InvalidArgument("alphabet must be non-empty".into()));
        }
        let mut ord = [NO_ORD; 256];
        for (j, &c) in chars.iter().enumerate() {
            ord[c as usize] = j as u16;
        }
        Ok(Alphabet {
            chars,
            ord,
            has_unknown: false,
        })
    }

    /// Like [`Alphabet::new`], but with a reserved slot that unseen bytes
    /// map to instead of erroring.
    pub fn new_with_unknown(chars: Vec<u8>) -> Result<Self> {
        let mut a = Alphabet::new(chars)?;
        a.has_unknown = true;
        Ok(a)
    }

    /// Alphabet of the bytes observed in `strings`, with a reserved slot for
    /// anything unseen (so strings outside the dataset can still be encoded).
    pub fn from_observed<'a, I>(strings: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [u8]>,
    {
        let mut seen = [false; 256];
        for s in strings {
            for &b in s {
                seen[b as usize] = true;
            }
        }
        let chars: Vec<u8> = (0..=255u8).filter(|&b| seen[b as usize]).collect();
        Alphabet::new_with_unknown(chars)
    }

    /// Number of distinct observed symbols, excluding the reserved slot.
    pub fn size(&self) -> usize {
        self.chars.len()
    }

    /// Number of encoding rows: `size()` plus one if there is a reserved slot.
    pub fn rows(&self) -> usize {
        self.chars.len() + self.has_unknown as usize
    }

    pub fn has_unknown(&self) -> bool {
        self.has_unknown
    }

    /// The observed symbols in sorted order.
    pub fn chars(&self) -> &[u8] {
        &self.chars
    }

    /// Ordinal of `b` among the observed symbols, if present.
    pub fn ordinal(&self, b: u8) -> Option<usize> {
        match self.ord[b as usize] {
            NO_ORD => None,
            j => Some(j as usize),
        }
    }

    /// Encoding row for `b`: its ordinal, or the reserved slot for unseen
    /// bytes when one exists.
    pub fn encode(&self, b: u8) -> Result<usize> {
        match self.ordinal(b) {
            Some(j) => Ok(j),
            None if self.has_unknown => Ok(self.chars.len()),
            None => Err(Error::UnknownSymbol { byte: b }),
        }
    }
}

/// A corpus of byte strings with its alphabet and maximum length.
#[derive(Debug, Clone)]
pub struct StringDataset {
    pub strings: Vec<Vec<u8>>,
    pub alphabet: Alphabet,
    pub max_len: usize,
}

impl StringDataset {
    /// Build a dataset from in-memory strings; empty strings are kept as-is.
    pub fn from_strings(strings: Vec<Vec<u8>>) -> Result<Self> {
        if strings.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let alphabet = Alphabet::from_observed(strings.iter().map(|s| s.as_slice()))?;
        let max_len = strings.iter().map(|s| s.len()).max().unwrap_or(0);
        Ok(StringDataset {
            strings,
            alphabet,
            max_len,
        })
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    pub fn get(&self, i: usize) -> &[u8] {
        &self.strings[i]
    }
}

/// Disjoint index sets for training, querying, and the searched base.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletSplit {
    pub train: Vec<usize>,
    pub query: Vec<usize>,
    pub base: Vec<usize>,
}

/// Unit-cost Levenshtein distance (insert, delete, substitute) between two
/// sequences, with memory linear in the shorter one.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return long.len();
    }
    let mut prev: Vec<usize> = (0..=short.len()).collect();
    let mut cur: Vec<usize> = vec![0; short.len() + 1];
    for (i, x) in long.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in short.iter().enumerate() {
            let sub = prev[j] + (x != y) as usize;
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

/// [`edit_distance`] for byte strings, computed with the bit-parallel block
/// recurrence: `max(m, n)` columns of `ceil(min(m, n) / 64)` words each
/// instead of a full cell-by-cell table. This is the form used on pipeline
/// hot paths (ground-truth sweeps, candidate verification, training
/// neighbor pools); the plain DP above stays the reference it is tested
/// against.
pub fn edit_distance_fast(a: &[u8], b: &[u8]) -> usize {
    let (pat, text) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let m = pat.len();
    if m == 0 {
        return text.len();
    }
    let blocks = m.div_ceil(64);
    // match_bits[c * blocks + w]: bit i of word w set iff pat[64w + i] == c.
    let mut match_bits = vec![0u64; 256 * blocks];
    for (i, &c) in pat.iter().enumerate() {
        match_bits[c as usize * blocks + i / 64] |= 1 << (i % 64);
    }
    let mut vp = vec![u64::MAX; blocks];
    let mut vn = vec![0u64; blocks];
    let mut score = m;
    // The last block is only partially occupied; the score lives at the
    // pattern's final row, not at the word's top bit.
    let last_row = 1u64 << ((m - 1) % 64);
    for &c in text {
        let eq_row = &match_bits[c as usize * blocks..(c as usize + 1) * blocks];
        let mut h = 1i32;
        for (w, (vp_w, vn_w)) in vp.iter_mut().zip(vn.iter_mut()).enumerate() {
            let out_bit = if w + 1 == blocks { last_row } else { 1 << 63 };
            h = advance_block(vp_w, vn_w, eq_row[w], h, out_bit);
        }
        score = score.wrapping_add_signed(h as isize);
    }
    score
}

/// One 64-row block of one DP column: fold the incoming horizontal delta
/// `h_in` (+1, 0, or -1) through the block, update the vertical delta words
/// in place, and return the horizontal delta leaving through `out_bit`.
#[inline]
fn advance_block(vp: &mut u64, vn: &mut u64, eq: u64, h_in: i32, out_bit: u64) -> i32 {
    let xv = eq | *vn;
    let eq = eq | (h_in < 0) as u64;
    let xh = (((eq & *vp).wrapping_add(*vp)) ^ *vp) | eq;
    let hp = *vn | !(xh | *vp);
    let hn = *vp & xh;
    let mut h_out = 0;
    if hp & out_bit != 0 {
        h_out += 1;
    }
    if hn & out_bit != 0 {
        h_out -= 1;
    }
    let hp = (hp << 1) | (h_in > 0) as u64;
    let hn = (hn << 1) | (h_in < 0) as u64;
    *vp = hn | !(xv | hp);
    *vn = hp & xv;
    h_out
}

/// Load one string per line from a text file. Lines are split on `\n`, a
/// trailing `\r` is stripped, and blank lines are skipped. Each kept string
/// is truncated to `truncate_at` bytes when given; raw lines longer than
/// `max_line_bytes` are rejected outright.
pub fn load_dataset(
    path: &Path,
    truncate_at: Option<usize>,
    max_line_bytes: usize,
) -> Result<StringDataset> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut strings = Vec::new();
    for (i, line) in raw.split(|&b| b == b'\n').enumerate() {
        let line = line.strip_suffix(b"\r").unwrap_or(line);
        if line.is_empty() {
            continue;
        }
        if line.len() > max_line_bytes {
            return Err(Error::LineTooLong {
                line: i + 1,
                len: line.len(),
                cap: max_line_bytes,
            });
        }
        let kept = match truncate_at {
            Some(t) => &line[..line.len().min(t)],
            None => line,
        };
        if kept.is_empty() {
            continue;
        }
        strings.push(kept.to_vec());
    }
    StringDataset::from_strings(strings)
}

/// Deterministically partition `0..dataset.len()` into train, query, and
/// base sets: a seeded shuffle, then the first `n_train` indices train, the
/// next `n_query` query, and the remainder is the base. Each set is returned
/// sorted. At least one base string must remain.
pub fn split_dataset(
    dataset: &StringDataset,
    n_train: usize,
    n_query: usize,
    seed: u64,
) -> Result<TripletSplit> {
    let n = dataset.len();
    if n_train + n_query >= n {
        return Err(Error::InvalidSplit { n_train, n_query, n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let mut train: Vec<usize> = idx[..n_train].to_vec();
    let mut query: Vec<usize> = idx[n_train..n_train + n_query].to_vec();
    let mut base: Vec<usize> = idx[n_train + n_query..].to_vec();
    train.sort_unstable();
    query.sort_unstable();
    base.sort_unstable();
    Ok(TripletSplit { train, query, base })
}

/// The `k` candidates nearest to `anchor` in edit distance, as
/// `(index, distance)` pairs ordered by distance then index. The anchor's own
/// index is excluded; if fewer than `k` candidates remain, all are returned.
pub fn topk_neighbors(
    dataset: &StringDataset,
    anchor: usize,
    k: usize,
    candidates: &[usize],
) -> Result<Vec<(usize, usize)>> {
    let n = dataset.len();
    if anchor >= n {
        return Err(Error::InvalidArgument(format!(
            "anchor index {anchor} out of range for {n} strings"
        )));
    }
    if let Some(&bad) = candidates.iter().find(|&&c| c >= n) {
        return Err(Error::InvalidArgument(format!(
            "candidate index {bad} out of range for {n} strings"
        )));
    }
    let a = dataset.get(anchor);
    let mut dists: Vec<(usize, usize)> = candidates
        .par_iter()
        .filter(|&&c| c != anchor)
        .map(|&c| (c, edit_distance_fast(a, dataset.get(c))))
        .collect();
    dists.sort_unstable_by_key(|&(i, d)| (d, i));
    dists.truncate(k);
    Ok(dists)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Full-matrix DP, kept deliberately naive as the oracle for the
    /// production two-row version.
    fn edit_distance_naive(a: &[u8], b: &[u8]) -> usize {
        let (m, n) = (a.len(), b.len());
        let mut dp = vec![vec![0usize; n + 1]; m + 1];
        for i in 0..=m {
            dp[i][0] = i;
        }
        for j in 0..=n {
            dp[0][j] = j;
        }
        for i in 1..=m {
            for j in 1..=n {
                let sub = dp[i - 1][j - 1] + (a[i - 1] != b[j - 1]) as usize;
                dp[i][j] = sub.min(dp[i - 1][j] + 1).min(dp[i][j - 1] + 1);
            }
        }
        dp[m][n]
    }

    #[test]
    fn edit_distance_known_values() {
        assert_eq!(edit_distance(b"kitten", b"sitting"), 3);
        assert_eq!(edit_distance(b"flaw", b"lawn"), 2);
        assert_eq!(edit_distance(b"", b""), 0);
        assert_eq!(edit_distance(b"", b"abc"), 3);
        assert_eq!(edit_distance(b"abc", b""), 3);
        assert_eq!(edit_distance(b"same", b"same"), 0);
        assert_eq!(edit_distance(b"GATTACA", b"GCATGCU"), 4);
        assert_eq!(edit_distance(b"sunday", b"saturday"), 3);
    }

    #[test]
    fn edit_distance_works_on_non_byte_symbols() {
        let a = [1u16, 256, 256, 3];
        let b = [1u16, 3];
        assert_eq!(edit_distance(&a, &b), 2);
    }

    #[test]
    fn fast_distance_known_values() {
        assert_eq!(edit_distance_fast(b"kitten", b"sitting"), 3);
        assert_eq!(edit_distance_fast(b"flaw", b"lawn"), 2);
        assert_eq!(edit_distance_fast(b"", b""), 0);
        assert_eq!(edit_distance_fast(b"", b"abc"), 3);
        assert_eq!(edit_distance_fast(b"abc", b""), 3);
        assert_eq!(edit_distance_fast(b"same", b"same"), 0);
        assert_eq!(edit_distance_fast(b"GATTACA", b"GCATGCU"), 4);
        assert_eq!(edit_distance_fast(b"sunday", b"saturday"), 3);
    }

    #[test]
    fn fast_distance_matches_dp_across_word_boundaries() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(20260814);
        let lens = [0usize, 1, 2, 63, 64, 65, 127, 128, 129, 200, 300];
        for &la in &lens {
            for &lb in &lens {
                for _ in 0..3 {
                    let a: Vec<u8> = (0..la).map(|_| rng.random_range(0..4u8)).collect();
                    let b: Vec<u8> = (0..lb).map(|_| rng.random_range(0..4u8)).collect();
                    assert_eq!(
                        edit_distance_fast(&a, &b),
                        edit_distance(&a, &b),
                        "lengths {la} x {lb}"
                    );
                }
            }
        }
    }

    #[test]
    fn fast_distance_matches_dp_on_long_mutated_pairs() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for edits in [0usize, 1, 5, 40, 200] {
            let a: Vec<u8> = (0..1000).map(|_| b"ACGT"[rng.random_range(0..4)]).collect();
            let b = crate::synth::mutate(&a, edits, b"ACGT", &mut rng);
            assert_eq!(edit_distance_fast(&a, &b), edit_distance(&a, &b));
            assert_eq!(edit_distance_fast(&b, &a), edit_distance(&a, &b));
        }
    }

    proptest! {
        #[test]
        fn matches_naive_dp(a in prop::collection::vec(any::<u8>(), 0..40),
                            b in prop::collection::vec(any::<u8>(), 0..40)) {
            prop_assert_eq!(edit_distance(&a, &b), edit_distance_naive(&a, &b));
        }

        #[test]
        fn fast_distance_matches_dp(a in prop::collection::vec(any::<u8>(), 0..150),
                                    b in prop::collection::vec(any::<u8>(), 0..150)) {
            prop_assert_eq!(edit_distance_fast(&a, &b), edit_distance(&a, &b));
        }

        #[test]
        fn is_symmetric(a in prop::collection::vec(0u8..4, 0..30),
                        b in prop::collection::vec(0u8..4, 0..30)) {
            prop_assert_eq!(edit_distance(&a, &b), edit_distance(&b, &a));
        }

        #[test]
        fn zero_iff_equal(a in prop::collection::vec(0u8..4, 0..30),
                          b in prop::collection::vec(0u8..4, 0..30)) {
            prop_assert_eq!(edit_distance(&a, &b) == 0, a == b);
        }

        #[test]
        fn triangle_inequality(a in prop::collection::vec(0u8..3, 0..20),
                               b in prop::collection::vec(0u8..3, 0..20),
                               c in prop::collection::vec(0u8..3, 0..20)) {
            prop_assert!(edit_distance(&a, &c) <= edit_distance(&a, &b) + edit_distance(&b, &c));
        }

        #[test]
        fn length_difference_is_a_lower_bound(
            a in prop::collection::vec(any::<u8>(), 0..30),
            b in prop::collection::vec(any::<u8>(), 0..30),
        ) {
            let d = edit_distance(&a, &b);
            prop_assert!(d >= a.len().abs_diff(b.len()));
            prop_assert!(d <= a.len().max(b.len()));
        }

        #[test]
        fn dropping_a_suffix_costs_its_length(
            s in prop::collection::vec(any::<u8>(), 1..30),
            cut in 0usize..30,
        ) {
            let cut = cut.min(s.len());
            prop_assert_eq!(edit_distance(&s, &s[..cut]), s.len() - cut);
        }
    }

    #[test]
    fn alphabet_sorts_and_dedups() {
        let a = Alphabet::new(b"TTAGC".to_vec()).unwrap();
        assert_eq!(a.chars(), b"ACGT");
        assert_eq!(a.size(), 4);
        assert_eq!(a.rows(), 4);
        assert_eq!(a.ordinal(b'C'), Some(1));
        assert_eq!(a.ordinal(b'X'), None);
        assert!(a.encode(b'X').is_err());
    }

    #[test]
    fn observed_alphabet_reserves_a_slot() {
        let strings: Vec<Vec<u8>> = vec![b"ACGT".to_vec(), b"AAA".to_vec()];
        let a = Alphabet::from_observed(strings.iter().map(|s| s.as_slice())).unwrap();
        assert_eq!(a.size(), 4);
        assert_eq!(a.rows(), 5);
        assert_eq!(a.encode(b'A').unwrap(), 0);
        assert_eq!(a.encode(b'Z').unwrap(), 4);
    }

    #[test]
    fn load_skips_blank_lines_and_strips_cr() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.txt");
        std::fs::write(&path, b"ACGT\r\n\nTTT\n\r\nAC\n").unwrap();
        let ds = load_dataset(&path, None, 1024).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.get(0), b"ACGT");
        assert_eq!(ds.get(1), b"TTT");
        assert_eq!(ds.get(2), b"AC");
        assert_eq!(ds.max_len, 4);
        assert_eq!(ds.alphabet.size(), 4);
    }

    #[test]
    fn load_truncates_but_caps_raw_length() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.txt");
        std::fs::write(&path, b"ABCDEFGH\nXY\n").unwrap();
        let ds = load_dataset(&path, Some(3), 1024).unwrap();
        assert_eq!(ds.get(0), b"ABC");
        assert_eq!(ds.max_len, 3);

        let err = load_dataset(&path, Some(3), 4).unwrap_err();
        assert!(matches!(err, Error::LineTooLong { line: 1, len: 8, cap: 4 }));
    }

    #[test]
    fn load_rejects_empty_input() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.txt");
        std::fs::write(&path, b"\n\r\n\n").unwrap();
        assert!(matches!(load_dataset(&path, None, 1024), Err(Error::EmptyDataset)));
    }

    #[test]
    fn split_partitions_deterministically() {
        let ds = StringDataset::from_strings((0..20).map(|i| vec![b'a' + (i % 4)]).collect()).unwrap();
        let s1 = split_dataset(&ds, 8, 5, 42).unwrap();
        let s2 = split_dataset(&ds, 8, 5, 42).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(s1.train.len(), 8);
        assert_eq!(s1.query.len(), 5);
        assert_eq!(s1.base.len(), 7);

        let mut all: Vec<usize> = s1.train.iter().chain(&s1.query).chain(&s1.base).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..20).collect::<Vec<_>>());

        let s3 = split_dataset(&ds, 8, 5, 43).unwrap();
        assert_ne!(s1, s3);
    }

    #[test]
    fn split_requires_a_base_remainder() {
        let ds = StringDataset::from_strings((0..10).map(|i| vec![b'a' + (i % 2)]).collect()).unwrap();
        assert!(split_dataset(&ds, 5, 5, 1).is_err());
        assert!(split_dataset(&ds, 5, 4, 1).is_ok());
    }

    #[test]
    fn topk_matches_brute_force_and_breaks_ties_by_index() {
        let strings: Vec<Vec<u8>> = vec![
            b"AAAA".to_vec(),  // 0: anchor
            b"AAAT".to_vec(),  // 1: d=1
            b"AATT".to_vec(),  // 2: d=2
            b"AAAC".to_vec(),  // 3: d=1, ties with 1 -> after it
            b"TTTT".to_vec(),  // 4: d=4
            b"AAAA".to_vec(),  // 5: d=0 duplicate of anchor, kept
        ];
        let ds = StringDataset::from_strings(strings).unwrap();
        let cands: Vec<usize> = (0..6).collect();
        let top = topk_neighbors(&ds, 0, 4, &cands).unwrap();
        assert_eq!(top, vec![(5, 0), (1, 1), (3, 1), (2, 2)]);

        let all = topk_neighbors(&ds, 0, 100, &cands).unwrap();
        assert_eq!(all.len(), 5);
        assert_eq!(all[4], (4, 4));
    }
}
