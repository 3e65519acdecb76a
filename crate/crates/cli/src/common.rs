//! Plumbing shared by the subcommands: config echoing, corpus loading,
//! CSV output, the cache directory, and the ground-truth list caches.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use edit_embed_core::search::Metric;
use edit_embed_core::strings::{load_dataset, StringDataset};

use crate::{ActOpt, DataArgs, MethodOpt, ModeOpt, PoolOpt};

impl PoolOpt {
    pub fn to_core(self) -> edit_embed_core::model::Pooling {
        match self {
            PoolOpt::Max => edit_embed_core::model::Pooling::Max,
            PoolOpt::Avg => edit_embed_core::model::Pooling::Avg,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PoolOpt::Max => "max",
            PoolOpt::Avg => "avg",
        }
    }
}

impl ActOpt {
    pub fn to_core(self) -> edit_embed_core::model::Activation {
        match self {
            ActOpt::Relu => edit_embed_core::model::Activation::Relu,
            ActOpt::None => edit_embed_core::model::Activation::None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActOpt::Relu => "relu",
            ActOpt::None => "none",
        }
    }
}

impl MethodOpt {
    pub fn metric(self) -> Metric {
        match self {
            MethodOpt::Cgk => Metric::Hamming,
            MethodOpt::Cnn | MethodOpt::RandomCnn => Metric::Euclidean,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MethodOpt::Cnn => "cnn",
            MethodOpt::RandomCnn => "random-cnn",
            MethodOpt::Cgk => "cgk",
        }
    }
}

impl ModeOpt {
    pub fn name(self) -> &'static str {
        match self {
            ModeOpt::Filter => "filter",
            ModeOpt::Ranked => "ranked",
        }
    }
}

/// The effective configuration of one command invocation, echoed into the
/// output directory. Fields a command does not use stay unset.
#[derive(Serialize, Default)]
pub struct RunConfig {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncate_at: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_line_bytes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub query_size: Option<usize>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topk: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activation: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<usize>,
    /// Rendered as text so "inf" survives the JSON round trip.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub out: String,
}

impl RunConfig {
    pub fn with_data(mut self, args: &DataArgs) -> Self {
        self.data = Some(args.data.display().to_string());
        self.truncate_at = args.truncate_at;
        self.max_line_bytes = Some(args.max_line_bytes);
        self
    }
}

/// Create the output directory and drop the command's config record into it.
pub fn write_run_config(out: &Path, cfg: &RunConfig) -> anyhow::Result<()> {
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    let path = out.join(format!("run_config.{}.json", cfg.command));
    let json = serde_json::to_string_pretty(cfg)?;
    std::fs::write(&path, json + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn load_corpus(args: &DataArgs) -> anyhow::Result<StringDataset> {
    let ds = load_dataset(&args.data, args.truncate_at, args.max_line_bytes)
        .with_context(|| format!("loading corpus {}", args.data.display()))?;
    Ok(ds)
}

/// Cache directory for neighbor lists and ground-truth answers:
/// `$EDIT_EMBED_CACHE` when set, `./.edit-embed-cache` otherwise.
pub fn cache_dir() -> PathBuf {
    std::env::var_os("EDIT_EMBED_CACHE")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(".edit-embed-cache"))
}

/// Write one RFC-4180 table: a header record, then the rows, CRLF-separated.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Hash identifying the exact ground-truth problem: the corpus contents and
/// the id sets the answers range over.
pub fn ground_truth_hash(ds: &StringDataset, query_ids: &[usize], base_ids: &[usize]) -> String {
    let mut h = Sha256::new();
    h.update((ds.len() as u64).to_le_bytes());
    for s in &ds.strings {
        h.update((s.len() as u64).to_le_bytes());
        h.update(s);
    }
    for ids in [query_ids, base_ids] {
        h.update(u64::MAX.to_le_bytes());
        for &id in ids {
            h.update((id as u64).to_le_bytes());
        }
    }
    let digest = h.finalize();
    digest[..16].iter().map(|b| format!("{b:02x}")).collect()
}

const GT_MAGIC: &[u8; 4] = b"GTLS";
const GT_VERSION: u32 = 1;

fn encode_gt(tag: u64, lists: &[Vec<usize>]) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(GT_MAGIC);
    buf.extend_from_slice(&GT_VERSION.to_le_bytes());
    buf.extend_from_slice(&tag.to_le_bytes());
    buf.extend_from_slice(&(lists.len() as u64).to_le_bytes());
    for list in lists {
        buf.extend_from_slice(&(list.len() as u64).to_le_bytes());
        for &id in list {
            buf.extend_from_slice(&(id as u64).to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

fn decode_gt(bytes: &[u8], tag: u64, n: usize) -> Option<Vec<Vec<usize>>> {
    if bytes.len() < 4 {
        return None;
    }
    let (payload, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let crc = u32::from_le_bytes(crc_bytes.try_into().ok()?);
    if crc32fast::hash(payload) != crc {
        return None;
    }
    let mut pos = 0usize;
    let mut take = |n: usize| -> Option<&[u8]> {
        let slice = payload.get(pos..pos + n)?;
        pos += n;
        Some(slice)
    };
    if take(4)? != GT_MAGIC {
        return None;
    }
    if u32::from_le_bytes(take(4)?.try_into().ok()?) != GT_VERSION {
        return None;
    }
    if u64::from_le_bytes(take(8)?.try_into().ok()?) != tag {
        return None;
    }
    if u64::from_le_bytes(take(8)?.try_into().ok()?) != n as u64 {
        return None;
    }
    let mut lists = Vec::with_capacity(n);
    for _ in 0..n {
        let count = u64::from_le_bytes(take(8)?.try_into().ok()?) as usize;
        let mut list = Vec::with_capacity(count);
        for _ in 0..count {
            list.push(u64::from_le_bytes(take(8)?.try_into().ok()?) as usize);
        }
        lists.push(list);
    }
    (pos == payload.len()).then_some(lists)
}

/// Load the ground-truth lists from the cache, or compute and cache them.
/// An unreadable or stale cache file is silently recomputed.
pub fn ground_truth_lists<F>(
    file_name: &str,
    tag: u64,
    n: usize,
    compute: F,
) -> anyhow::Result<Vec<Vec<usize>>>
where
    F: FnOnce() -> Vec<Vec<usize>>,
{
    let dir = cache_dir();
    let path = dir.join(file_name);
    if let Ok(bytes) = std::fs::read(&path) {
        if let Some(lists) = decode_gt(&bytes, tag, n) {
            return Ok(lists);
        }
    }
    let lists = compute();
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating cache directory {}", dir.display()))?;
    std::fs::write(&path, encode_gt(tag, &lists))
        .with_context(|| format!("writing ground-truth cache {}", path.display()))?;
    Ok(lists)
}

/// Recall of an approximate result against the exact answer; complete
/// answers (including empty ones) count as full recall.
pub fn recall_of(results: &[usize], exact: &[usize]) -> f64 {
    if exact.is_empty() {
        1.0
    } else {
        results.len() as f64 / exact.len() as f64
    }
}
