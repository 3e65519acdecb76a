//! Seeded synthetic corpora: uniform random strings and clustered corpora
//! built by mutating center strings, which give embeddings real neighborhood
//! structure to find.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `n` independent strings over `alphabet`, lengths uniform in
/// `min_len..=max_len`.
pub fn uniform_strings(
    n: usize,
    min_len: usize,
    max_len: usize,
    alphabet: &[u8],
    seed: u64,
) -> Vec<Vec<u8>> {
    assert!(!alphabet.is_empty() && min_len <= max_len);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.random_range(min_len..=max_len);
            (0..len)
                .map(|_| alphabet[rng.random_range(0..alphabet.len())])
                .collect()
        })
        .collect()
}

/// Apply `n_edits` random single-character edits (substitute, insert,
/// delete) to `s`; deletions are skipped when only one character remains.
pub fn mutate(s: &[u8], n_edits: usize, alphabet: &[u8], rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut out = s.to_vec();
    for _ in 0..n_edits {
        match rng.random_range(0..3u8) {
            0 => {
                let pos = rng.random_range(0..out.len());
                out[pos] = alphabet[rng.random_range(0..alphabet.len())];
            }
            1 => {
                let pos = rng.random_range(0..=out.len());
                out.insert(pos, alphabet[rng.random_range(0..alphabet.len())]);
            }
            _ => {
                if out.len() > 1 {
                    let pos = rng.random_range(0..out.len());
                    out.remove(pos);
                }
            }
        }
    }
    out
}

/// A corpus of `n_clusters * cluster_size` strings: each cluster is one
/// uniform center followed by `cluster_size - 1` mutants of it, each mutant
/// carrying `0..=max_edits` random edits. Cluster structure gives top-k
/// neighbor queries non-trivial answers.
pub fn clustered_corpus(
    n_clusters: usize,
    cluster_size: usize,
    min_len: usize,
    max_len: usize,
    max_edits: usize,
    alphabet: &[u8],
    seed: u64,
) -> Vec<Vec<u8>> {
    assert!(!alphabet.is_empty() && min_len >= 1 && min_len <= max_len && cluster_size >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_clusters * cluster_size);
    for _ in 0..n_clusters {
        let len = rng.random_range(min_len..=max_len);
        let center: Vec<u8> = (0..len)
            .map(|_| alphabet[rng.random_range(0..alphabet.len())])
            .collect();
        out.push(center.clone());
        for _ in 1..cluster_size {
            let edits = rng.random_range(0..=max_edits);
            out.push(mutate(&center, edits, alphabet, &mut rng));
        }
    }
    out
}

/// `n` reads sampled from one random reference sequence of length
/// `genome_len`: each read is a substring with length uniform in
/// `min_len..=max_len` plus `ceil(noise_rate * len)` random edits.
/// Overlapping reads give the corpus a continuum of edit distances, the
/// texture of genomic read sets.
pub fn genome_reads(
    n: usize,
    genome_len: usize,
    min_len: usize,
    max_len: usize,
    noise_rate: f64,
    alphabet: &[u8],
    seed: u64,
) -> Vec<Vec<u8>> {
    assert!(!alphabet.is_empty() && min_len >= 1 && min_len <= max_len && max_len <= genome_len);
    assert!((0.0..1.0).contains(&noise_rate));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let genome: Vec<u8> = (0..genome_len)
        .map(|_| alphabet[rng.random_range(0..alphabet.len())])
        .collect();
    (0..n)
        .map(|_| {
            let len = rng.random_range(min_len..=max_len);
            let start = rng.random_range(0..=genome_len - len);
            let read = &genome[start..start + len];
            let edits = (noise_rate * len as f64).ceil() as usize;
            mutate(read, edits, alphabet, &mut rng)
        })
        .collect()
}

/// `n` structural variants of `n_loci` random reference sequences of length
/// `ref_len`: each variant picks a reference uniformly, applies
/// `1..=max_blocks` block edits (delete a span, or duplicate a span of the
/// reference into a random position, with span length uniform in
/// `min_block..=max_block`), then `ceil(point_noise * len)` single-character
/// edits. Block indels displace content without changing most of it, the
/// texture of structural variation in genomic data; deletions are skipped
/// once a variant has shrunk to half its reference.
#[allow(clippy::too_many_arguments)]
pub fn structural_variants(
    n: usize,
    n_loci: usize,
    ref_len: usize,
    max_blocks: usize,
    min_block: usize,
    max_block: usize,
    point_noise: f64,
    alphabet: &[u8],
    seed: u64,
) -> Vec<Vec<u8>> {
    assert!(!alphabet.is_empty() && n_loci >= 1 && max_blocks >= 1);
    assert!(1 <= min_block && min_block <= max_block && max_block <= ref_len / 2);
    assert!((0.0..1.0).contains(&point_noise));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let refs: Vec<Vec<u8>> = (0..n_loci)
        .map(|_| {
            (0..ref_len)
                .map(|_| alphabet[rng.random_range(0..alphabet.len())])
                .collect()
        })
        .collect();
    (0..n)
        .map(|_| {
            let refseq = &refs[rng.random_range(0..n_loci)];
            let mut s = refseq.clone();
            for _ in 0..rng.random_range(1..=max_blocks) {
                let span = rng.random_range(min_block..=max_block);
                if rng.random_bool(0.5) && s.len() >= span + ref_len / 2 {
                    let pos = rng.random_range(0..=s.len() - span);
                    s.drain(pos..pos + span);
                } else {
                    let src = rng.random_range(0..=refseq.len() - span);
                    let block = refseq[src..src + span].to_vec();
                    let pos = rng.random_range(0..=s.len());
                    s.splice(pos..pos, block);
                }
            }
            let edits = (point_noise * s.len() as f64).ceil() as usize;
            mutate(&s, edits, alphabet, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strings::edit_distance;

    #[test]
    fn generators_are_seed_deterministic() {
        let a = uniform_strings(20, 3, 10, b"ACGT", 5);
        let b = uniform_strings(20, 3, 10, b"ACGT", 5);
        let c = uniform_strings(20, 3, 10, b"ACGT", 6);
        assert_eq!(a, b);
        assert_ne!(a, c);

        let x = clustered_corpus(4, 5, 10, 20, 3, b"01", 9);
        let y = clustered_corpus(4, 5, 10, 20, 3, b"01", 9);
        assert_eq!(x, y);
        assert_eq!(x.len(), 20);
    }

    #[test]
    fn outputs_stay_in_the_alphabet_and_length_range() {
        for s in uniform_strings(50, 2, 8, b"AB", 1) {
            assert!((2..=8).contains(&s.len()));
            assert!(s.iter().all(|b| b"AB".contains(b)));
        }
    }

    #[test]
    fn mutation_moves_at_most_n_edits_away() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base = uniform_strings(1, 30, 30, b"ACGT", 7).pop().unwrap();
        for edits in 0..6 {
            let m = mutate(&base, edits, b"ACGT", &mut rng);
            assert!(edit_distance(&base, &m) <= edits);
        }
    }

    #[test]
    fn clusters_sit_closer_than_strangers() {
        let corpus = clustered_corpus(10, 10, 40, 50, 4, b"ACGT", 11);
        let mut intra = Vec::new();
        let mut inter = Vec::new();
        for c in 0..10 {
            intra.push(edit_distance(&corpus[c * 10], &corpus[c * 10 + 5]) as f64);
            let other = (c + 1) % 10;
            inter.push(edit_distance(&corpus[c * 10], &corpus[other * 10 + 5]) as f64);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&intra) < mean(&inter));
    }

    #[test]
    fn reads_are_deterministic_and_span_a_distance_continuum() {
        let a = genome_reads(100, 2_000, 80, 120, 0.02, b"ACGT", 13);
        let b = genome_reads(100, 2_000, 80, 120, 0.02, b"ACGT", 13);
        assert_eq!(a, b);
        // Up to ceil(0.02 * 120) = 3 edits, each able to insert or delete.
        for s in &a {
            assert!((77..=123).contains(&s.len()));
            assert!(s.iter().all(|c| b"ACGT".contains(c)));
        }
        // Heavy coverage leaves every read an imperfect-but-close neighbor:
        // closer than a fresh random string, farther than a copy.
        let stranger = uniform_strings(1, 100, 100, b"ACGT", 14).pop().unwrap();
        let nearest = a[1..]
            .iter()
            .map(|s| edit_distance(&a[0], s))
            .min()
            .unwrap();
        assert!(nearest > 0);
        assert!(nearest < edit_distance(&a[0], &stranger));
    }

    #[test]
    fn variants_stay_near_their_reference_and_are_deterministic() {
        let vs = structural_variants(30, 1, 400, 2, 10, 30, 0.01, b"ACGT", 5);
        let again = structural_variants(30, 1, 400, 2, 10, 30, 0.01, b"ACGT", 5);
        assert_eq!(vs, again);
        // Two blocks of at most 30, plus about 1% point noise, around a
        // length-400 reference; deletions stop at span + 200.
        for v in &vs {
            assert!((200..=470).contains(&v.len()), "len {}", v.len());
            assert!(v.iter().all(|b| b"ACGT".contains(b)));
        }
        // Variants of one reference sit far closer to each other than to an
        // unrelated uniform string.
        let stranger = uniform_strings(1, 400, 400, b"ACGT", 99).pop().unwrap();
        let d_within = edit_distance(&vs[0], &vs[1]);
        assert!(d_within > 0);
        assert!(d_within < edit_distance(&vs[0], &stranger));
    }
}
