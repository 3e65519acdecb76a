//! Embedding stores, distance calibration, and the searches built on them.
//!
//! Every search here is filter-then-verify: embeddings only propose
//! candidates, and a candidate enters the result set only after an exact
//! edit-distance computation confirms it. Results are therefore always
//! subsets of the exact answer; the embedding quality decides recall and
//! how many DP calls were spent, both of which are reported.

use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;

use crate::cgk::CgkEmbedding;
use crate::error::{Error, Result};
use crate::strings::{edit_distance, edit_distance_fast, StringDataset};
use crate::tensor::{l2_distance, Real};
use crate::wire;

/// How distances between store rows are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Euclidean,
    Hamming,
}

/// A matrix of embeddings with the dataset index of each row. CGK outputs
/// are held as exact small integers in the same representation, with the
/// Hamming metric counting mismatching positions.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    metric: Metric,
    ids: Vec<usize>,
    data: Vec<Real>,
}

impl EmbeddingStore {
    pub fn from_rows(ids: Vec<usize>, rows: &[Vec<Real>], metric: Metric) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} ids for {} rows",
                ids.len(),
                rows.len()
            )));
        }
        if rows.is_empty() {
            return Err(Error::InvalidArgument("store needs at least one row".into()));
        }
        let dim = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::ShapeMismatch(format!(
                    "row of dim {} in a store of dim {dim}",
                    r.len()
                )));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("non-finite embedding value".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(EmbeddingStore {
            dim,
            metric,
            ids,
            data,
        })
    }

    pub fn from_cgk(ids: Vec<usize>, embeddings: &[CgkEmbedding]) -> Result<Self> {
        let rows: Vec<Vec<Real>> = embeddings.iter().map(symbols_to_row).collect();
        EmbeddingStore::from_rows(ids, &rows, Metric::Hamming)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn row(&self, r: usize) -> &[Real] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    /// Distance from row `r` to an external vector, under the store metric.
    pub fn distance_to(&self, r: usize, q: &[Real]) -> Real {
        match self.metric {
            Metric::Euclidean => l2_distance(self.row(r), q),
            Metric::Hamming => {
                assert_eq!(q.len(), self.dim, "hamming row length mismatch");
                self.row(r).iter().zip(q).filter(|(a, b)| a != b).count() as Real
            }
        }
    }

    /// The rows for the given dataset ids, in the given order.
    pub fn subset(&self, ids: &[usize]) -> Result<EmbeddingStore> {
        let by_id: std::collections::HashMap<usize, usize> =
            self.ids.iter().enumerate().map(|(r, &id)| (id, r)).collect();
        let rows: Vec<Vec<Real>> = ids
            .iter()
            .map(|id| {
                by_id
                    .get(id)
                    .map(|&r| self.row(r).to_vec())
                    .ok_or_else(|| Error::InvalidArgument(format!("id {id} not in store")))
            })
            .collect::<Result<_>>()?;
        EmbeddingStore::from_rows(ids.to_vec(), &rows, self.metric)
    }

    /// Write the store: magic `CEMB`, version, dim, row count, f32 rows,
    /// CRC32. Only whole-corpus stores (ids 0..n in order) are persisted;
    /// subsets are reconstructed from the split on load.
    pub fn save(&self, path: &Path) -> Result<()> {
        if self.ids.iter().enumerate().any(|(r, &id)| r != id) {
            return Err(Error::InvalidArgument(
                "only stores covering the whole corpus in order can be saved".into(),
            ));
        }
        let mut buf = Vec::new();
        buf.extend_from_slice(STORE_MAGIC);
        wire::push_u32(&mut buf, STORE_VERSION);
        wire::push_u32(&mut buf, self.dim as u32);
        wire::push_u64(&mut buf, self.ids.len() as u64);
        for &v in &self.data {
            wire::push_f32(&mut buf, v as f32);
        }
        wire::append_crc(&mut buf);
        std::fs::write(path, &buf).map_err(|e| Error::io(path, e))
    }

    /// Read a store written by [`EmbeddingStore::save`]. The metric is the
    /// caller's to supply: the file format does not record how its rows
    /// were produced.
    pub fn load(path: &Path, metric: Metric) -> Result<EmbeddingStore> {
        let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let payload = wire::check_crc(path, &raw)?;
        let mut r = wire::Reader::new(path, payload);
        if r.bytes(4)? != STORE_MAGIC {
            return Err(r.err("not an embedding store (bad magic)"));
        }
        let version = r.u32()?;
        if version != STORE_VERSION {
            return Err(r.err(format!("unsupported store version {version}")));
        }
        let dim = r.u32()? as usize;
        let count = r.u64()? as usize;
        if dim == 0 || count == 0 {
            return Err(r.err("store is empty"));
        }
        let mut data = Vec::with_capacity(dim * count);
        for _ in 0..dim * count {
            data.push(r.f32()? as Real);
        }
        if r.remaining() != 0 {
            return Err(r.err("trailing bytes after embedding rows"));
        }
        Ok(EmbeddingStore {
            dim,
            metric,
            ids: (0..count).collect(),
            data,
        })
    }
}

const STORE_MAGIC: &[u8; 4] = b"CEMB";
const STORE_VERSION: u32 = 1;

/// A CGK output as a store row: each symbol ordinal as an exact small
/// integer.
pub fn symbols_to_row(e: &CgkEmbedding) -> Vec<Real> {
    e.iter().map(|&s| s as Real).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitKind {
    Linear,
    Quadratic,
}

/// A least-squares map from embedding distance to estimated edit distance:
/// `a*x + b` or `a*x^2 + b*x + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationFit {
    pub kind: FitKind,
    pub coeffs: Vec<Real>,
}

impl CalibrationFit {
    pub fn predict(&self, x: Real) -> Real {
        match self.kind {
            FitKind::Linear => self.coeffs[0] * x + self.coeffs[1],
            FitKind::Quadratic => (self.coeffs[0] * x + self.coeffs[1]) * x + self.coeffs[2],
        }
    }
}

/// Solve a small symmetric linear system by Gaussian elimination with
/// partial pivoting; `None` when (numerically) singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flat_map(|row| row.iter().map(|v| v.abs()))
        .fold(0.0f64, f64::max)
        .max(1.0);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut v = b[col];
        for k in col + 1..n {
            v -= a[col][k] * x[k];
        }
        x[col] = v / a[col][col];
    }
    Some(x)
}

/// Ordinary least squares on `(embedding distance, edit distance)` pairs.
/// Needs at least three pairs and enough distinct x values for the chosen
/// polynomial degree.
pub fn fit_calibration(pairs: &[(Real, Real)], kind: FitKind) -> Result<CalibrationFit> {
    if pairs.len() < 3 {
        return Err(Error::Degenerate(format!(
            "calibration needs at least 3 pairs, got {}",
            pairs.len()
        )));
    }
    if pairs.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::InvalidArgument("non-finite calibration pair".into()));
    }
    let n = pairs.len() as f64;
    match kind {
        FitKind::Linear => {
            let mean_x = pairs.iter().map(|p| f64::from(p.0)).sum::<f64>() / n;
            let mean_y = pairs.iter().map(|p| f64::from(p.1)).sum::<f64>() / n;
            let mut sxx = 0.0;
            let mut sxy = 0.0;
            for &(x, y) in pairs {
                let dx = f64::from(x) - mean_x;
                sxx += dx * dx;
                sxy += dx * (f64::from(y) - mean_y);
            }
            if sxx <= 0.0 {
                return Err(Error::Degenerate(
                    "all embedding distances are equal; linear fit is underdetermined".into(),
                ));
            }
            let a = sxy / sxx;
            let b = mean_y - a * mean_x;
            Ok(CalibrationFit {
                kind,
                coeffs: vec![a as Real, b as Real],
            })
        }
        FitKind::Quadratic => {
            // Normal equations over the basis [x^2, x, 1].
            let mut m = vec![vec![0.0f64; 3]; 3];
            let mut rhs = vec![0.0f64; 3];
            for &(x, y) in pairs {
                let (x, y) = (f64::from(x), f64::from(y));
                let basis = [x * x, x, 1.0];
                for i in 0..3 {
                    for j in 0..3 {
                        m[i][j] += basis[i] * basis[j];
                    }
                    rhs[i] += basis[i] * y;
                }
            }
            let coeffs = solve_dense(m, rhs).ok_or_else(|| {
                Error::Degenerate(
                    "embedding distances do not span a quadratic fit".into(),
                )
            })?;
            Ok(CalibrationFit {
                kind,
                coeffs: coeffs.into_iter().map(|c| c as Real).collect(),
            })
        }
    }
}

/// Exact edit distances from every query to every base string, in parallel.
/// Sharing one table lets several embeddings be scored against the same
/// sweep instead of re-running it per method.
pub fn edit_distance_table(
    ds: &StringDataset,
    query_ids: &[usize],
    base_ids: &[usize],
) -> Vec<Vec<usize>> {
    query_ids
        .par_iter()
        .map(|&qid| {
            let qs = ds.get(qid);
            base_ids
                .iter()
                .map(|&bid| edit_distance_fast(qs, ds.get(bid)))
                .collect()
        })
        .collect()
}

/// Mean relative estimation error `|g(dist) - edit| / edit` over all
/// query x base pairs with a positive edit distance.
pub fn estimation_error(
    ds: &StringDataset,
    queries: &EmbeddingStore,
    base: &EmbeddingStore,
    fit: &CalibrationFit,
) -> Result<Real> {
    let table = edit_distance_table(ds, queries.ids(), base.ids());
    estimation_error_from_distances(&table, queries, base, fit)
}

/// [`estimation_error`] with the edit-distance table supplied by the caller
/// (for example from [`edit_distance_table`] shared across methods).
pub fn estimation_error_from_distances(
    table: &[Vec<usize>],
    queries: &EmbeddingStore,
    base: &EmbeddingStore,
    fit: &CalibrationFit,
) -> Result<Real> {
    if queries.metric() != base.metric() || queries.dim() != base.dim() {
        return Err(Error::ShapeMismatch(
            "query and base stores disagree on metric or dimension".into(),
        ));
    }
    if table.len() != queries.len() || table.iter().any(|row| row.len() != base.len()) {
        return Err(Error::ShapeMismatch(format!(
            "distance table is not {} x {}",
            queries.len(),
            base.len()
        )));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (qi, row) in table.iter().enumerate() {
        for (bi, &de) in row.iter().enumerate() {
            if de == 0 {
                continue;
            }
            let est = fit.predict(base.distance_to(bi, queries.row(qi)));
            sum += (est - de as Real).abs() / de as Real;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Degenerate(
            "no query-base pair has a positive edit distance".into(),
        ));
    }
    Ok(sum / count as Real)
}

/// Base ids ranked by embedding distance to the given query row, ties by
/// dataset id.
fn embedding_ranking(base: &EmbeddingStore, q_row: &[Real]) -> Vec<usize> {
    let mut order: Vec<(Real, usize)> = (0..base.len())
        .map(|bi| (base.distance_to(bi, q_row), base.ids()[bi]))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.into_iter().map(|(_, id)| id).collect()
}

/// True top-k base ids for a query string, by exact edit distance, ties by
/// dataset id.
pub fn exact_topk(ds: &StringDataset, q: &[u8], base_ids: &[usize], k: usize) -> Vec<usize> {
    let mut order: Vec<(usize, usize)> = base_ids
        .iter()
        .map(|&id| (edit_distance_fast(q, ds.get(id)), id))
        .collect();
    order.sort_unstable();
    order.into_iter().take(k).map(|(_, id)| id).collect()
}

/// [`exact_topk`] for every query id, in parallel. This is the expensive
/// exact sweep behind recall evaluation, and the part worth caching.
pub fn exact_topk_table(
    ds: &StringDataset,
    query_ids: &[usize],
    base_ids: &[usize],
    k: usize,
) -> Vec<Vec<usize>> {
    query_ids
        .par_iter()
        .map(|&qid| exact_topk(ds, ds.get(qid), base_ids, k))
        .collect()
}

/// Mean recall of the true top-k within the top-T embedding-ranked items,
/// for each T in `t_grid`, averaged over all queries.
pub fn recall_item_curve(
    ds: &StringDataset,
    queries: &EmbeddingStore,
    base: &EmbeddingStore,
    k: usize,
    t_grid: &[usize],
) -> Result<Vec<(usize, Real)>> {
    check_recall_args(base, k, t_grid)?;
    let truth = exact_topk_table(ds, queries.ids(), base.ids(), k);
    recall_item_curve_from_truth(queries, base, &truth, k, t_grid)
}

/// [`recall_item_curve`] with the exact top-k table supplied by the caller
/// (for example from a ground-truth cache).
pub fn recall_item_curve_from_truth(
    queries: &EmbeddingStore,
    base: &EmbeddingStore,
    truth: &[Vec<usize>],
    k: usize,
    t_grid: &[usize],
) -> Result<Vec<(usize, Real)>> {
    check_recall_args(base, k, t_grid)?;
    if truth.len() != queries.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} truth lists for {} queries",
            truth.len(),
            queries.len()
        )));
    }
    let per_query: Vec<Vec<Real>> = (0..queries.len())
        .into_par_iter()
        .map(|qi| {
            let truth: HashSet<usize> = truth[qi].iter().copied().collect();
            let ranked = embedding_ranking(base, queries.row(qi));
            t_grid
                .iter()
                .map(|&t| {
                    let hits = ranked[..t].iter().filter(|id| truth.contains(id)).count();
                    hits as Real / k as Real
                })
                .collect()
        })
        .collect();
    Ok(t_grid
        .iter()
        .enumerate()
        .map(|(ti, &t)| {
            let mean = per_query.iter().map(|r| r[ti]).sum::<Real>() / queries.len().max(1) as Real;
            (t, mean)
        })
        .collect())
}

fn check_recall_args(base: &EmbeddingStore, k: usize, t_grid: &[usize]) -> Result<()> {
    if k == 0 || k > base.len() {
        return Err(Error::InvalidArgument(format!(
            "k={k} must be in 1..={}",
            base.len()
        )));
    }
    if let Some(&bad) = t_grid.iter().find(|&&t| t > base.len()) {
        return Err(Error::InvalidArgument(format!(
            "T={bad} exceeds the base size {}",
            base.len()
        )));
    }
    Ok(())
}

/// Knobs of the approximate threshold searches.
#[derive(Debug, Clone)]
pub struct SearchParams {
    /// Edit-distance threshold.
    pub tau: usize,
    /// Blow-up factor applied to `tau` in embedding space; must exceed 1.
    pub mu: Real,
    /// Number of ranked candidates to verify in ranked mode.
    pub budget: usize,
    /// When set, the filter compares the calibrated estimate `g(dist)`
    /// against `mu * tau` instead of the raw distance.
    pub calibration: Option<CalibrationFit>,
}

impl SearchParams {
    fn validate(&self) -> Result<()> {
        if !(self.mu > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "blow-up factor must be > 1, got {}",
                self.mu
            )));
        }
        Ok(())
    }
}

/// What a search did: the verified results (sorted dataset ids), how many
/// candidates the filter passed, and how many exact DP calls were spent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchOutcome {
    pub results: Vec<usize>,
    pub candidates: usize,
    pub dp_calls: usize,
}

/// Filter-and-verify threshold search: candidates are the rows within
/// `mu * tau` of the query embedding, results the candidates whose exact
/// edit distance is within `tau`.
pub fn threshold_search_filter(
    q: &[u8],
    q_emb: &[Real],
    ds: &StringDataset,
    store: &EmbeddingStore,
    params: &SearchParams,
) -> Result<SearchOutcome> {
    params.validate()?;
    let cutoff = if params.mu.is_infinite() {
        Real::INFINITY
    } else {
        params.mu * params.tau as Real
    };
    let candidates: Vec<usize> = (0..store.len())
        .into_par_iter()
        .filter_map(|r| {
            let d = store.distance_to(r, q_emb);
            let score = match &params.calibration {
                Some(fit) => fit.predict(d),
                None => d,
            };
            (score <= cutoff).then_some(store.ids()[r])
        })
        .collect();
    verify_candidates(q, ds, candidates, params.tau)
}

/// Verify the `budget` embedding-nearest rows in ranked order and keep
/// those within `tau`.
pub fn threshold_search_ranked(
    q: &[u8],
    q_emb: &[Real],
    ds: &StringDataset,
    store: &EmbeddingStore,
    tau: usize,
    budget: usize,
) -> Result<SearchOutcome> {
    let mut ranked = embedding_ranking(store, q_emb);
    ranked.truncate(budget);
    verify_candidates(q, ds, ranked, tau)
}

fn verify_candidates(
    q: &[u8],
    ds: &StringDataset,
    candidates: Vec<usize>,
    tau: usize,
) -> Result<SearchOutcome> {
    let n_candidates = candidates.len();
    let mut results: Vec<usize> = candidates
        .into_par_iter()
        .filter(|&id| edit_distance_fast(q, ds.get(id)) <= tau)
        .collect();
    results.sort_unstable();
    Ok(SearchOutcome {
        results,
        candidates: n_candidates,
        dp_calls: n_candidates,
    })
}

/// What a join did: verified pairs (each `(i, j)` with `i < j`, sorted),
/// plus candidate and DP-call counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinOutcome {
    pub pairs: Vec<(usize, usize)>,
    pub candidates: usize,
    pub dp_calls: usize,
}

/// All-pairs filter-and-verify join over the store's rows: candidate pairs
/// by embedding distance within `mu * tau`, results by exact verification.
pub fn similarity_join(
    ds: &StringDataset,
    store: &EmbeddingStore,
    tau: usize,
    mu: Real,
) -> Result<JoinOutcome> {
    if !(mu > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "blow-up factor must be > 1, got {mu}"
        )));
    }
    let cutoff = if mu.is_infinite() {
        Real::INFINITY
    } else {
        mu * tau as Real
    };
    let candidate_pairs: Vec<(usize, usize)> = (0..store.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let row = store.row(i);
            (i + 1..store.len()).filter_map(move |j| {
                if store.distance_to(j, row) <= cutoff {
                    let (a, b) = (store.ids()[i], store.ids()[j]);
                    Some((a.min(b), a.max(b)))
                } else {
                    None
                }
            })
        })
        .collect();
    let n_candidates = candidate_pairs.len();
    let mut pairs: Vec<(usize, usize)> = candidate_pairs
        .into_par_iter()
        .filter(|&(a, b)| edit_distance_fast(ds.get(a), ds.get(b)) <= tau)
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    Ok(JoinOutcome {
        pairs,
        candidates: n_candidates,
        dp_calls: n_candidates,
    })
}

/// Brute-force threshold answer: every id whose string is within `tau` of
/// the query, sorted.
pub fn exact_threshold_answer(
    ds: &StringDataset,
    q: &[u8],
    ids: &[usize],
    tau: usize,
) -> Vec<usize> {
    let mut out: Vec<usize> = ids
        .par_iter()
        .copied()
        .filter(|&id| edit_distance(q, ds.get(id)) <= tau)
        .collect();
    out.sort_unstable();
    out
}

/// Brute-force join answer over the given ids: all pairs within `tau`,
/// `i < j`, sorted.
pub fn exact_join_answer(ds: &StringDataset, ids: &[usize], tau: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = ids
        .par_iter()
        .enumerate()
        .flat_map_iter(|(pos, &a)| {
            ids[pos + 1..].iter().filter_map(move |&b| {
                let (a, b) = (a.min(b), a.max(b));
                (edit_distance(ds.get(a), ds.get(b)) <= tau).then_some((a, b))
            })
        })
        .collect();
    out.sort_unstable();
    out
}
