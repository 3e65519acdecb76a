//! `edit-embed join`: all-pairs similarity join over the whole corpus,
//! filtered in embedding space and verified exactly.

use std::time::Instant;

use anyhow::{bail, Context};

use edit_embed_core::search::{similarity_join, EmbeddingStore};

use crate::common::{load_corpus, write_csv, write_run_config, RunConfig};
use crate::JoinArgs;

pub fn run(args: JoinArgs) -> anyhow::Result<()> {
    let ds = load_corpus(&args.data)?;

    let cfg = RunConfig {
        command: "join".into(),
        method: Some(args.method.name().into()),
        tau: Some(args.tau),
        mu: Some(args.mu.to_string()),
        threads: args.threads,
        out: args.out.display().to_string(),
        ..RunConfig::default()
    }
    .with_data(&args.data);
    write_run_config(&args.out, &cfg)?;

    let store_path = args.out.join("embeddings.cemb");
    let store = EmbeddingStore::load(&store_path, args.method.metric())
        .with_context(|| format!("reading store {}", store_path.display()))?;
    if store.len() != ds.len() {
        bail!(
            "store has {} rows but the corpus has {} strings",
            store.len(),
            ds.len()
        );
    }

    let started = Instant::now();
    let outcome = similarity_join(&ds, &store, args.tau, args.mu)?;
    let elapsed = started.elapsed();

    let pair_rows: Vec<Vec<String>> = outcome
        .pairs
        .iter()
        .map(|(a, b)| vec![a.to_string(), b.to_string()])
        .collect();
    write_csv(&args.out.join("join_pairs.csv"), &["id_a", "id_b"], &pair_rows)?;
    write_csv(
        &args.out.join("join_stats.csv"),
        &["candidates", "dp_calls", "pairs"],
        &[vec![
            outcome.candidates.to_string(),
            outcome.dp_calls.to_string(),
            outcome.pairs.len().to_string(),
        ]],
    )?;

    println!(
        "join over {} strings, tau {}, mu {}: {} pairs",
        ds.len(),
        args.tau,
        args.mu,
        outcome.pairs.len()
    );
    println!(
        "candidates {}, dp calls {}, wall time {:.0} ms",
        outcome.candidates,
        outcome.dp_calls,
        elapsed.as_secs_f64() * 1e3
    );
    Ok(())
}
