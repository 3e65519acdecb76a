//! `edit-embed search`: run the chosen threshold search for every query in
//! the held-out split against the base split, verify all results exactly,
//! and report per-query counters plus recall against the exact answer.

use std::time::Instant;

use anyhow::{bail, Context};

use edit_embed_core::search::{
    exact_threshold_answer, threshold_search_filter, threshold_search_ranked, EmbeddingStore,
    SearchOutcome, SearchParams,
};
use edit_embed_core::strings::split_dataset;

use crate::common::{
    ground_truth_hash, ground_truth_lists, load_corpus, recall_of, write_csv, write_run_config,
    RunConfig,
};
use crate::{ModeOpt, SearchArgs};

pub fn run(args: SearchArgs) -> anyhow::Result<()> {
    let ds = load_corpus(&args.data)?;
    let split = split_dataset(&ds, args.split.train_size, args.split.query_size, args.seed)?;

    let cfg = RunConfig {
        command: "search".into(),
        train_size: Some(args.split.train_size),
        query_size: Some(args.split.query_size),
        seed: args.seed,
        method: Some(args.method.name().into()),
        tau: Some(args.tau),
        mu: Some(args.mu.to_string()),
        mode: Some(args.mode.name().into()),
        budget: Some(args.t),
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
    let base = store.subset(&split.base)?;

    let hash = ground_truth_hash(&ds, &split.query, &split.base);
    let exact = ground_truth_lists(
        &format!("gt-tau{}-{hash}.bin", args.tau),
        args.tau as u64,
        split.query.len(),
        || {
            split
                .query
                .iter()
                .map(|&qid| exact_threshold_answer(&ds, ds.get(qid), &split.base, args.tau))
                .collect()
        },
    )?;

    let params = SearchParams {
        tau: args.tau,
        mu: args.mu,
        budget: args.t,
        calibration: None,
    };
    let started = Instant::now();
    let outcomes: Vec<SearchOutcome> = split
        .query
        .iter()
        .map(|&qid| {
            let q = ds.get(qid);
            let q_emb = store.row(qid);
            match args.mode {
                ModeOpt::Filter => threshold_search_filter(q, q_emb, &ds, &base, &params),
                ModeOpt::Ranked => threshold_search_ranked(q, q_emb, &ds, &base, args.tau, args.t),
            }
        })
        .collect::<edit_embed_core::Result<_>>()?;
    let elapsed = started.elapsed();

    let mut result_rows = Vec::new();
    let mut stat_rows = Vec::with_capacity(outcomes.len());
    let mut total_candidates = 0usize;
    let mut total_dp = 0usize;
    let mut recall_sum = 0.0;
    for ((&qid, outcome), exact_ids) in split.query.iter().zip(&outcomes).zip(&exact) {
        for &rid in &outcome.results {
            result_rows.push(vec![qid.to_string(), rid.to_string()]);
        }
        let recall = recall_of(&outcome.results, exact_ids);
        recall_sum += recall;
        total_candidates += outcome.candidates;
        total_dp += outcome.dp_calls;
        stat_rows.push(vec![
            qid.to_string(),
            outcome.candidates.to_string(),
            outcome.dp_calls.to_string(),
            outcome.results.len().to_string(),
            exact_ids.len().to_string(),
            recall.to_string(),
        ]);
    }
    write_csv(
        &args.out.join("search_results.csv"),
        &["query_id", "result_id"],
        &result_rows,
    )?;
    write_csv(
        &args.out.join("search_stats.csv"),
        &[
            "query_id",
            "candidates",
            "dp_calls",
            "results",
            "exact_results",
            "recall",
        ],
        &stat_rows,
    )?;

    let n_queries = split.query.len().max(1);
    println!(
        "{} queries, tau {}, mu {}, mode {}: {} results, mean recall {:.4}",
        split.query.len(),
        args.tau,
        args.mu,
        args.mode.name(),
        result_rows.len(),
        recall_sum / n_queries as f64,
    );
    println!(
        "candidates {} ({:.1}/query), dp calls {} ({:.1}/query), wall time {:.0} ms",
        total_candidates,
        total_candidates as f64 / n_queries as f64,
        total_dp,
        total_dp as f64 / n_queries as f64,
        elapsed.as_secs_f64() * 1e3
    );
    Ok(())
}
