//! Training: sample triplets from precomputed neighbor lists, score them
//! with a hinged triplet term plus a distance-approximation term, and run
//! mini-batch SGD.
//!
//! The triplet margin is per-triplet: with edit distances `d_ap <= d_an`,
//! the hinge is `max(0, |ya-yp| - |ya-yn| - (d_ap - d_an))`, so the
//! embedding gap must beat the edit-distance gap. The approximation term
//! sums `| |y1-y2| - edit |` over the three pairs of the triplet and is
//! weighted by `alpha`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{
    backward_trace, forward_trace, init_model, ModelConfig, ModelGrads, ModelParams,
};
use crate::strings::{edit_distance_fast, topk_neighbors, StringDataset, TripletSplit};
use crate::tensor::{l2_distance, Real};
use crate::wire;

/// One training example: indices plus the two anchor-side edit distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
    pub d_ap: usize,
    pub d_an: usize,
}

/// Hyper-parameters of the training loop.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub alpha: Real,
    pub batch_triplets: usize,
    pub epochs: usize,
    pub topk_pool: usize,
    pub learning_rate: Real,
    pub seed: u64,
}

impl TrainConfig {
    /// Defaults: alpha 0.1, 64 triplets per batch, 50 epochs, top-100
    /// neighbor pool, learning rate 1e-3.
    pub fn with_defaults(seed: u64) -> Self {
        TrainConfig {
            alpha: 0.1,
            batch_triplets: 64,
            epochs: 50,
            topk_pool: 100,
            learning_rate: 1e-3,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || !self.alpha.is_finite() {
            return Err(Error::InvalidArgument("alpha must be finite and >= 0".into()));
        }
        if self.batch_triplets == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument(
                "learning rate must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// The two loss terms of one triplet (or their means over a batch or
/// epoch), with `total = triplet_term + alpha * approx_term`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub triplet_term: Real,
    pub approx_term: Real,
    pub total: Real,
}

impl LossBreakdown {
    fn new(triplet_term: Real, approx_term: Real, alpha: Real) -> Self {
        LossBreakdown {
            triplet_term,
            approx_term,
            total: triplet_term + alpha * approx_term,
        }
    }
}

/// Mean losses of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub mean_total: Real,
    pub mean_triplet: Real,
    pub mean_approx: Real,
}

/// Top-k edit-distance neighbor lists for every training string, computed
/// once (the quadratic DP sweep dominates training setup) and reusable from
/// a disk cache.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborLists {
    k: usize,
    anchors: Vec<usize>,
    lists: HashMap<usize, Vec<(usize, usize)>>,
    /// False when freshly computed, true when read back from disk.
    pub from_cache: bool,
}

impl NeighborLists {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn anchors(&self) -> &[usize] {
        &self.anchors
    }

    /// The anchor's neighbors as `(index, distance)`, nearest first.
    pub fn list(&self, anchor: usize) -> &[(usize, usize)] {
        &self.lists[&anchor]
    }
}

/// Compute top-k lists for each member of `train_set` against the rest of
/// the training set. Requires `train_set.len() > k` and `k >= 2` so every
/// list can supply two distinct sampled neighbors.
pub fn build_neighbor_lists(
    ds: &StringDataset,
    train_set: &[usize],
    k: usize,
) -> Result<NeighborLists> {
    if k < 2 || train_set.len() <= k {
        return Err(Error::Degenerate(format!(
            "neighbor sampling needs 2 <= k < train size, got k={k} over {} strings",
            train_set.len()
        )));
    }
    let lists: HashMap<usize, Vec<(usize, usize)>> = train_set
        .par_iter()
        .map(|&a| Ok((a, topk_neighbors(ds, a, k, train_set)?)))
        .collect::<Result<_>>()?;
    Ok(NeighborLists {
        k,
        anchors: train_set.to_vec(),
        lists,
        from_cache: false,
    })
}

fn neighbor_cache_path(ds: &StringDataset, train_set: &[usize], k: usize, dir: &Path) -> PathBuf {
    let mut h = Sha256::new();
    h.update((k as u64).to_le_bytes());
    h.update((train_set.len() as u64).to_le_bytes());
    for &i in train_set {
        h.update((i as u64).to_le_bytes());
        let s = ds.get(i);
        h.update((s.len() as u64).to_le_bytes());
        h.update(s);
    }
    let hex: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
    dir.join(format!("nbrc-{hex}.bin"))
}

const NBRC_MAGIC: &[u8; 4] = b"NBRC";
const NBRC_VERSION: u32 = 1;

fn write_neighbor_cache(lists: &NeighborLists, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(NBRC_MAGIC);
    wire::push_u32(&mut buf, NBRC_VERSION);
    wire::push_u64(&mut buf, lists.k as u64);
    wire::push_u64(&mut buf, lists.anchors.len() as u64);
    for &a in &lists.anchors {
        let list = lists.list(a);
        wire::push_u64(&mut buf, a as u64);
        wire::push_u64(&mut buf, list.len() as u64);
        for &(i, d) in list {
            wire::push_u64(&mut buf, i as u64);
            wire::push_u64(&mut buf, d as u64);
        }
    }
    wire::append_crc(&mut buf);
    std::fs::write(path, &buf).map_err(|e| Error::io(path, e))
}

fn read_neighbor_cache(path: &Path, k: usize) -> Result<NeighborLists> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let payload = wire::check_crc(path, &raw)?;
    let mut r = wire::Reader::new(path, payload);
    if r.bytes(4)? != NBRC_MAGIC {
        return Err(r.err("not a neighbor cache (bad magic)"));
    }
    let version = r.u32()?;
    if version != NBRC_VERSION {
        return Err(r.err(format!("unsupported neighbor cache version {version}")));
    }
    if r.u64()? as usize != k {
        return Err(r.err("cache built for a different k"));
    }
    let n = r.u64()? as usize;
    let mut anchors = Vec::with_capacity(n);
    let mut lists = HashMap::with_capacity(n);
    for _ in 0..n {
        let a = r.u64()? as usize;
        let len = r.u64()? as usize;
        let mut list = Vec::with_capacity(len);
        for _ in 0..len {
            let i = r.u64()? as usize;
            let d = r.u64()? as usize;
            list.push((i, d));
        }
        anchors.push(a);
        lists.insert(a, list);
    }
    Ok(NeighborLists {
        k,
        anchors,
        lists,
        from_cache: true,
    })
}

/// Like [`build_neighbor_lists`], but consult a disk cache first. The cache
/// key hashes the training strings, their indices, and `k`, so any change
/// to the split or corpus misses cleanly; unreadable cache files are
/// silently rebuilt.
pub fn load_or_build_neighbor_lists(
    ds: &StringDataset,
    train_set: &[usize],
    k: usize,
    cache_dir: Option<&Path>,
) -> Result<NeighborLists> {
    let Some(dir) = cache_dir else {
        return build_neighbor_lists(ds, train_set, k);
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = neighbor_cache_path(ds, train_set, k, dir);
    if path.exists() {
        if let Ok(lists) = read_neighbor_cache(&path, k) {
            return Ok(lists);
        }
    }
    let lists = build_neighbor_lists(ds, train_set, k)?;
    write_neighbor_cache(&lists, &path)?;
    Ok(lists)
}

/// Draw one triplet: a uniform anchor, then two distinct entries of its
/// neighbor list. The closer entry is the positive; on equal distances the
/// lower index is the positive.
pub fn sample_triplet(
    neighbors: &NeighborLists,
    rng: &mut ChaCha8Rng,
) -> Result<Triplet> {
    let anchor = neighbors.anchors[rng.random_range(0..neighbors.anchors.len())];
    let list = neighbors.list(anchor);
    if list.len() < 2 {
        return Err(Error::Degenerate(format!(
            "anchor {anchor} has only {} neighbors",
            list.len()
        )));
    }
    let i = rng.random_range(0..list.len());
    let mut j = rng.random_range(0..list.len() - 1);
    if j >= i {
        j += 1;
    }
    let (a, b) = (list[i], list[j]);
    let ((positive, d_ap), (negative, d_an)) =
        if (a.1, a.0) <= (b.1, b.0) { (a, b) } else { (b, a) };
    Ok(Triplet {
        anchor,
        positive,
        negative,
        d_ap,
        d_an,
    })
}

fn sign(z: Real) -> Real {
    if z > 0.0 {
        1.0
    } else if z < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Hinged triplet term with the per-triplet margin `d_ap - d_an`.
pub fn triplet_loss(ya: &[Real], yp: &[Real], yn: &[Real], d_ap: Real, d_an: Real) -> Real {
    let eta = d_ap - d_an;
    (l2_distance(ya, yp) - l2_distance(ya, yn) - eta).max(0.0)
}

/// Distance-approximation term: `| |y1-y2| - edit |` summed over the three
/// pairs of the triplet.
pub fn approx_loss(
    ya: &[Real],
    yp: &[Real],
    yn: &[Real],
    d_ap: Real,
    d_an: Real,
    d_pn: Real,
) -> Real {
    (l2_distance(ya, yp) - d_ap).abs()
        + (l2_distance(ya, yn) - d_an).abs()
        + (l2_distance(yp, yn) - d_pn).abs()
}

/// Both loss terms and their weighted total.
pub fn combined_loss(
    ya: &[Real],
    yp: &[Real],
    yn: &[Real],
    d_ap: Real,
    d_an: Real,
    d_pn: Real,
    alpha: Real,
) -> LossBreakdown {
    LossBreakdown::new(
        triplet_loss(ya, yp, yn, d_ap, d_an),
        approx_loss(ya, yp, yn, d_ap, d_an, d_pn),
        alpha,
    )
}

/// Direction of `a - b` with unit length, and the distance; zero direction
/// at distance zero (the subgradient choice for `|.|` at the origin).
fn unit_diff(a: &[Real], b: &[Real]) -> (Vec<Real>, Real) {
    let d = l2_distance(a, b);
    if d == 0.0 {
        (vec![0.0; a.len()], 0.0)
    } else {
        (a.iter().zip(b).map(|(x, y)| (x - y) / d).collect(), d)
    }
}

fn axpy(dst: &mut [Real], s: Real, v: &[Real]) {
    for (d, x) in dst.iter_mut().zip(v) {
        *d += s * x;
    }
}

/// The combined loss and its gradients with respect to the three
/// embeddings.
pub(crate) fn combined_loss_grads(
    ya: &[Real],
    yp: &[Real],
    yn: &[Real],
    d_ap: Real,
    d_an: Real,
    d_pn: Real,
    alpha: Real,
) -> (LossBreakdown, Vec<Real>, Vec<Real>, Vec<Real>) {
    let (u_ap, dist_ap) = unit_diff(ya, yp);
    let (u_an, dist_an) = unit_diff(ya, yn);
    let (u_pn, dist_pn) = unit_diff(yp, yn);

    let eta = d_ap - d_an;
    let hinge = dist_ap - dist_an - eta;
    let triplet_term = hinge.max(0.0);
    let approx_term = (dist_ap - d_ap).abs() + (dist_an - d_an).abs() + (dist_pn - d_pn).abs();

    let dim = ya.len();
    let (mut ga, mut gp, mut gn) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    if hinge > 0.0 {
        axpy(&mut ga, 1.0, &u_ap);
        axpy(&mut ga, -1.0, &u_an);
        axpy(&mut gp, -1.0, &u_ap);
        axpy(&mut gn, 1.0, &u_an);
    }
    let s_ap = alpha * sign(dist_ap - d_ap);
    let s_an = alpha * sign(dist_an - d_an);
    let s_pn = alpha * sign(dist_pn - d_pn);
    axpy(&mut ga, s_ap, &u_ap);
    axpy(&mut gp, -s_ap, &u_ap);
    axpy(&mut ga, s_an, &u_an);
    axpy(&mut gn, -s_an, &u_an);
    axpy(&mut gp, s_pn, &u_pn);
    axpy(&mut gn, -s_pn, &u_pn);

    (LossBreakdown::new(triplet_term, approx_term, alpha), ga, gp, gn)
}

/// Train from scratch: initialize from `cfg.seed`, run
/// `ceil(n_train / batch)` batches per epoch for `cfg.epochs` epochs, and
/// return the final parameters (snapped to the f32 checkpoint grid) plus
/// the per-epoch mean losses. Deterministic given the seed; aborts with
/// [`Error::Diverged`] if a batch loss stops being finite.
pub fn train_epochs(
    ds: &StringDataset,
    split: &TripletSplit,
    cfg: &TrainConfig,
    mcfg: &ModelConfig,
    cache_dir: Option<&Path>,
) -> Result<(ModelParams, Vec<EpochLoss>)> {
    cfg.validate()?;
    mcfg.validate()?;
    if ds.max_len > mcfg.input_width {
        return Err(Error::StringTooLong {
            len: ds.max_len,
            max: mcfg.input_width,
        });
    }
    let neighbors = load_or_build_neighbor_lists(ds, &split.train, cfg.topk_pool, cache_dir)?;

    let mut params = init_model(mcfg, cfg.seed)?;
    // Triplet sampling runs on its own ChaCha stream so it cannot collide
    // with the weight-initialization draws from the same seed.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let n_train = split.train.len();
    let batches = n_train.div_ceil(cfg.batch_triplets);
    let mut pn_memo: HashMap<(usize, usize), usize> = HashMap::new();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let mut sum_total = 0.0;
        let mut sum_triplet = 0.0;
        let mut sum_approx = 0.0;
        for batch in 1..=batches {
            let mut drawn = Vec::with_capacity(cfg.batch_triplets);
            for _ in 0..cfg.batch_triplets {
                let t = sample_triplet(&neighbors, &mut rng)?;
                let key = (t.positive.min(t.negative), t.positive.max(t.negative));
                let d_pn = *pn_memo
                    .entry(key)
                    .or_insert_with(|| edit_distance_fast(ds.get(key.0), ds.get(key.1)));
                drawn.push((t, d_pn));
            }

            let per_triplet: Vec<(LossBreakdown, ModelGrads)> = drawn
                .par_iter()
                .map(|&(t, d_pn)| {
                    let ta = forward_trace(ds.get(t.anchor), &params, mcfg, &ds.alphabet)?;
                    let tp = forward_trace(ds.get(t.positive), &params, mcfg, &ds.alphabet)?;
                    let tn = forward_trace(ds.get(t.negative), &params, mcfg, &ds.alphabet)?;
                    let (loss, ga, gp, gn) = combined_loss_grads(
                        &ta.output,
                        &tp.output,
                        &tn.output,
                        t.d_ap as Real,
                        t.d_an as Real,
                        d_pn as Real,
                        cfg.alpha,
                    );
                    let mut g = backward_trace(&ta, &params, mcfg, &ga)?;
                    g.add(&backward_trace(&tp, &params, mcfg, &gp)?);
                    g.add(&backward_trace(&tn, &params, mcfg, &gn)?);
                    Ok((loss, g))
                })
                .collect::<Result<_>>()?;

            let mut batch_grads = ModelGrads::zeros_like(&params);
            let mut batch_total = 0.0;
            for (loss, g) in &per_triplet {
                batch_grads.add(g);
                batch_total += loss.total;
                sum_total += loss.total;
                sum_triplet += loss.triplet_term;
                sum_approx += loss.approx_term;
            }
            if !batch_total.is_finite() {
                return Err(Error::Diverged { epoch, batch });
            }
            batch_grads.scale(1.0 / cfg.batch_triplets as Real);
            params.sgd_step(&batch_grads, cfg.learning_rate);
        }
        let n = (batches * cfg.batch_triplets) as Real;
        trace.push(EpochLoss {
            epoch,
            mean_total: sum_total / n,
            mean_triplet: sum_triplet / n,
            mean_approx: sum_approx / n,
        });
    }
    params.quantize_to_f32();
    Ok((params, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::embed;
    use crate::strings::{edit_distance, split_dataset};
    use crate::synth::clustered_corpus;

    #[test]
    fn triplet_loss_known_values() {
        let ya = [0.0, 0.0];
        // |ya-yp| = 2, |ya-yn| = 5, margin = 1 - 3 = -2 -> hinge at 0.
        assert_eq!(triplet_loss(&ya, &[2.0, 0.0], &[5.0, 0.0], 1.0, 3.0), 0.0);
        // |ya-yp| = 4, |ya-yn| = 3 -> 4 - 3 + 2 = 3.
        assert_eq!(triplet_loss(&ya, &[4.0, 0.0], &[3.0, 0.0], 1.0, 3.0), 3.0);
        // Identical positive and negative with equal distances.
        assert_eq!(triplet_loss(&ya, &[1.0, 1.0], &[1.0, 1.0], 2.0, 2.0), 0.0);
    }

    #[test]
    fn approx_loss_known_values() {
        let y = [1.0, 2.0];
        assert_eq!(approx_loss(&y, &y, &y, 1.0, 3.0, 2.0), 6.0);
        // Distances exactly match the edit distances -> zero.
        assert_eq!(
            approx_loss(&[0.0], &[1.0], &[3.0], 1.0, 3.0, 2.0),
            0.0
        );
        // No scale invariance: doubling the embeddings changes the value.
        let a = approx_loss(&[0.0], &[1.0], &[3.0], 2.0, 2.0, 2.0);
        let b = approx_loss(&[0.0], &[2.0], &[6.0], 2.0, 2.0, 2.0);
        assert_ne!(a, b);
    }

    #[test]
    fn margin_satisfaction_zeroes_the_hinge() {
        // Whenever |ya-yn| - |ya-yp| >= d_an - d_ap the hinge is exactly 0.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..500 {
            let v = |rng: &mut ChaCha8Rng| -> Vec<Real> {
                (0..3).map(|_| rng.random_range(-2.0..2.0)).collect()
            };
            let (ya, yp, yn) = (v(&mut rng), v(&mut rng), v(&mut rng));
            let d_ap = rng.random_range(0..5) as Real;
            let d_an = d_ap + rng.random_range(0..5) as Real;
            let gap = l2_distance(&ya, &yn) - l2_distance(&ya, &yp);
            let loss = triplet_loss(&ya, &yp, &yn, d_ap, d_an);
            if gap >= d_an - d_ap {
                assert_eq!(loss, 0.0);
            } else {
                assert!(loss > 0.0);
            }
        }
    }

    #[test]
    fn loss_terms_are_nonnegative_and_total_is_affine() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let v = |rng: &mut ChaCha8Rng| -> Vec<Real> {
                (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()
            };
            let (ya, yp, yn) = (v(&mut rng), v(&mut rng), v(&mut rng));
            let (d_ap, d_an, d_pn) = (1.0, 4.0, 3.0);
            for alpha in [0.0, 0.1, 10.0] {
                let l = combined_loss(&ya, &yp, &yn, d_ap, d_an, d_pn, alpha);
                assert!(l.triplet_term >= 0.0 && l.approx_term >= 0.0);
                assert_eq!(l.total, l.triplet_term + alpha * l.approx_term);
            }
        }
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let h = 1e-6;
        let mut checked = 0;
        while checked < 20 {
            let v = |rng: &mut ChaCha8Rng| -> Vec<Real> {
                (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()
            };
            let (ya, yp, yn) = (v(&mut rng), v(&mut rng), v(&mut rng));
            let (d_ap, d_an, d_pn) = (0.83, 2.41, 1.57);
            let alpha = 0.1;

            // Stay away from the hinge and sign kinks, where the two-sided
            // difference quotient straddles a subgradient switch.
            let dist_ap = l2_distance(&ya, &yp);
            let dist_an = l2_distance(&ya, &yn);
            let dist_pn = l2_distance(&yp, &yn);
            let kink = [
                dist_ap - dist_an - (d_ap - d_an),
                dist_ap - d_ap,
                dist_an - d_an,
                dist_pn - d_pn,
            ];
            if kink.iter().any(|z| z.abs() < 1e-3) || [dist_ap, dist_an, dist_pn].contains(&0.0) {
                continue;
            }
            checked += 1;

            let (_, ga, gp, gn) = combined_loss_grads(&ya, &yp, &yn, d_ap, d_an, d_pn, alpha);
            let vecs = [(&ya, &ga), (&yp, &gp), (&yn, &gn)];
            for (which, (y, g)) in vecs.iter().enumerate() {
                for i in 0..y.len() {
                    let eval = |delta: Real| {
                        let mut ys = [ya.clone(), yp.clone(), yn.clone()];
                        ys[which][i] += delta;
                        combined_loss(&ys[0], &ys[1], &ys[2], d_ap, d_an, d_pn, alpha).total
                    };
                    let numeric = (eval(h) - eval(-h)) / (2.0 * h);
                    let rel = (numeric - g[i]).abs() / numeric.abs().max(g[i].abs()).max(1e-3);
                    assert!(
                        rel < 1e-4,
                        "vector {which} coord {i}: analytic {} vs numeric {numeric}",
                        g[i]
                    );
                }
            }
        }
    }

    fn small_dataset() -> StringDataset {
        StringDataset::from_strings(clustered_corpus(20, 10, 20, 30, 5, b"ACGT", 41)).unwrap()
    }

    #[test]
    fn sampled_triplets_satisfy_their_invariants() {
        let ds = small_dataset();
        let train: Vec<usize> = (0..ds.len()).collect();
        let neighbors = build_neighbor_lists(&ds, &train, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let t = sample_triplet(&neighbors, &mut rng).unwrap();
            assert!(t.d_ap <= t.d_an);
            assert_ne!(t.positive, t.negative);
            assert_ne!(t.anchor, t.positive);
            assert_ne!(t.anchor, t.negative);
            assert_eq!(t.d_ap, edit_distance(ds.get(t.anchor), ds.get(t.positive)));
            assert_eq!(t.d_an, edit_distance(ds.get(t.anchor), ds.get(t.negative)));
        }
    }

    #[test]
    fn tied_distances_make_the_lower_index_positive() {
        // Anchor "AA" has both neighbors at distance 1; index 1 must win
        // the positive role every time it is drawn with index 2.
        let ds = StringDataset::from_strings(vec![
            b"AA".to_vec(),
            b"AT".to_vec(),
            b"AG".to_vec(),
        ])
        .unwrap();
        let neighbors = build_neighbor_lists(&ds, &[0, 1, 2], 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut saw_anchor_zero = false;
        for _ in 0..60 {
            let t = sample_triplet(&neighbors, &mut rng).unwrap();
            if t.anchor == 0 {
                saw_anchor_zero = true;
                assert_eq!((t.positive, t.negative), (1, 2));
                assert_eq!((t.d_ap, t.d_an), (1, 1));
            }
        }
        assert!(saw_anchor_zero);
    }

    #[test]
    fn neighbor_lists_need_enough_strings() {
        let ds = small_dataset();
        assert!(build_neighbor_lists(&ds, &[0, 1, 2], 5).is_err());
        assert!(build_neighbor_lists(&ds, &[0, 1, 2], 1).is_err());
    }

    #[test]
    fn neighbor_cache_round_trips_and_survives_corruption() {
        let ds = small_dataset();
        let train: Vec<usize> = (0..50).collect();
        let dir = tempfile::tempdir().unwrap();
        let first = load_or_build_neighbor_lists(&ds, &train, 5, Some(dir.path())).unwrap();
        assert!(!first.from_cache);

        let second = load_or_build_neighbor_lists(&ds, &train, 5, Some(dir.path())).unwrap();
        assert!(second.from_cache);
        assert_eq!(first.lists, second.lists);

        // A different k is a different cache entry.
        let other_k = load_or_build_neighbor_lists(&ds, &train, 6, Some(dir.path())).unwrap();
        assert!(!other_k.from_cache);

        // Corrupt every cached file; the next call rebuilds instead of
        // trusting it.
        for entry in std::fs::read_dir(dir.path()).unwrap() {
            let p = entry.unwrap().path();
            let mut bytes = std::fs::read(&p).unwrap();
            let mid = bytes.len() / 2;
            bytes[mid] ^= 0xff;
            std::fs::write(&p, &bytes).unwrap();
        }
        let rebuilt = load_or_build_neighbor_lists(&ds, &train, 5, Some(dir.path())).unwrap();
        assert!(!rebuilt.from_cache);
        assert_eq!(first.lists, rebuilt.lists);
    }

    fn tiny_model_cfg(ds: &StringDataset) -> ModelConfig {
        ModelConfig {
            n_conv_layers: 2,
            kernels_per_layer: 2,
            kernel_size: 3,
            pool: crate::model::Pooling::Max,
            pool_factor: 2,
            activation: crate::model::Activation::Relu,
            output_dim: 4,
            input_channels: ds.alphabet.rows(),
            input_width: ds.max_len,
        }
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_at_init() {
        let ds = small_dataset();
        let split = split_dataset(&ds, 60, 10, 1).unwrap();
        let mut cfg = TrainConfig::with_defaults(7);
        cfg.epochs = 2;
        cfg.topk_pool = 5;
        cfg.batch_triplets = 8;
        cfg.learning_rate = 0.0;
        let mcfg = tiny_model_cfg(&ds);
        let (params, trace) = train_epochs(&ds, &split, &cfg, &mcfg, None).unwrap();
        assert_eq!(params, init_model(&mcfg, 7).unwrap());
        assert_eq!(trace.len(), 2);
        // Same parameters every batch -> identical epoch statistics modulo
        // the sampled triplets; the totals must be finite and consistent.
        for e in &trace {
            assert!(e.mean_total.is_finite());
            assert!((e.mean_total - (e.mean_triplet + cfg.alpha * e.mean_approx)).abs() < 1e-9);
        }
    }

    #[test]
    fn training_is_deterministic_and_reduces_the_loss() {
        let ds = small_dataset();
        let split = split_dataset(&ds, 120, 20, 3).unwrap();
        let mut cfg = TrainConfig::with_defaults(13);
        cfg.epochs = 12;
        cfg.topk_pool = 15;
        cfg.batch_triplets = 16;
        cfg.learning_rate = 5e-3;
        let mcfg = tiny_model_cfg(&ds);

        let (p1, t1) = train_epochs(&ds, &split, &cfg, &mcfg, None).unwrap();
        let (p2, t2) = train_epochs(&ds, &split, &cfg, &mcfg, None).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(t1, t2);

        assert!(
            t1.last().unwrap().mean_total < t1[0].mean_total,
            "loss failed to decrease: {} -> {}",
            t1[0].mean_total,
            t1.last().unwrap().mean_total
        );

        // Trained parameters embed without surprises.
        let e = embed(ds.get(0), &p1, &mcfg, &ds.alphabet).unwrap();
        assert!(e.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn absurd_learning_rate_trips_the_divergence_guard() {
        let ds = small_dataset();
        let split = split_dataset(&ds, 60, 10, 1).unwrap();
        let mut cfg = TrainConfig::with_defaults(7);
        cfg.epochs = 3;
        cfg.topk_pool = 5;
        cfg.batch_triplets = 8;
        cfg.learning_rate = 1e200;
        let mcfg = tiny_model_cfg(&ds);
        assert!(matches!(
            train_epochs(&ds, &split, &cfg, &mcfg, None),
            Err(Error::Diverged { .. })
        ));
    }
}
