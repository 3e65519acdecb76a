//! `edit-embed eval`: distance calibration and estimation error over
//! query x base pairs, plus recall-item curves for the standard k values.
//! Exact top-k answers are cached on disk because the DP sweep over
//! query x base is the dominant cost.

use anyhow::{bail, Context};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use edit_embed_core::search::{
    estimation_error, exact_topk_table, fit_calibration, recall_item_curve_from_truth,
    EmbeddingStore, FitKind,
};
use edit_embed_core::strings::{edit_distance_fast, split_dataset};
use edit_embed_core::Real;

use crate::common::{
    ground_truth_hash, ground_truth_lists, load_corpus, write_csv, write_run_config, RunConfig,
};
use crate::{EvalArgs, MethodOpt};

const RECALL_KS: [usize; 5] = [1, 5, 10, 50, 100];
const T_GRID: [usize; 12] = [1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000];
const CALIBRATION_SAMPLES: usize = 20_000;

pub fn run(args: EvalArgs) -> anyhow::Result<()> {
    let ds = load_corpus(&args.data)?;
    let split = split_dataset(&ds, args.split.train_size, args.split.query_size, args.seed)?;

    let cfg = RunConfig {
        command: "eval".into(),
        train_size: Some(args.split.train_size),
        query_size: Some(args.split.query_size),
        seed: args.seed,
        method: Some(args.method.name().into()),
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

    let queries = store.subset(&split.query)?;
    let base = store.subset(&split.base)?;

    let fit_kind = match args.method {
        MethodOpt::Cgk => FitKind::Quadratic,
        MethodOpt::Cnn | MethodOpt::RandomCnn => FitKind::Linear,
    };
    let fit = fit_on_train_pairs(&ds, &store, &split.train, fit_kind, args.seed)?;
    let est = estimation_error(&ds, &queries, &base, &fit)?;

    let coeffs = match fit.kind {
        FitKind::Linear => [0.0, fit.coeffs[0], fit.coeffs[1]],
        FitKind::Quadratic => [fit.coeffs[0], fit.coeffs[1], fit.coeffs[2]],
    };
    write_csv(
        &args.out.join("estimation.csv"),
        &[
            "method",
            "fit",
            "coeff_x2",
            "coeff_x1",
            "coeff_x0",
            "mean_relative_error",
        ],
        &[vec![
            args.method.name().to_string(),
            match fit.kind {
                FitKind::Linear => "linear".to_string(),
                FitKind::Quadratic => "quadratic".to_string(),
            },
            coeffs[0].to_string(),
            coeffs[1].to_string(),
            coeffs[2].to_string(),
            est.to_string(),
        ]],
    )?;
    println!(
        "estimation error ({}, {} fit): {:.6}",
        args.method.name(),
        match fit.kind {
            FitKind::Linear => "linear",
            FitKind::Quadratic => "quadratic",
        },
        est
    );

    let ks: Vec<usize> = RECALL_KS.iter().copied().filter(|&k| k <= base.len()).collect();
    if ks.is_empty() {
        bail!("base split of {} strings is too small for recall", base.len());
    }
    let k_max = *ks.last().expect("nonempty");
    let hash = ground_truth_hash(&ds, &split.query, &split.base);
    let truth = ground_truth_lists(
        &format!("gt-topk-k{k_max}-{hash}.bin"),
        k_max as u64,
        split.query.len(),
        || exact_topk_table(&ds, &split.query, &split.base, k_max),
    )?;

    let mut t_grid: Vec<usize> = T_GRID.iter().copied().filter(|&t| t <= base.len()).collect();
    if t_grid.last() != Some(&base.len()) {
        t_grid.push(base.len());
    }

    for &k in &ks {
        let sliced: Vec<Vec<usize>> = truth
            .iter()
            .map(|list| list[..k.min(list.len())].to_vec())
            .collect();
        let curve = recall_item_curve_from_truth(&queries, &base, &sliced, k, &t_grid)?;
        let rows: Vec<Vec<String>> = curve
            .iter()
            .map(|(t, r)| vec![t.to_string(), r.to_string()])
            .collect();
        write_csv(&args.out.join(format!("recall_k{k}.csv")), &["T", "recall"], &rows)?;
        let shown: Vec<String> = curve
            .iter()
            .filter(|(t, _)| [k, 100, base.len()].contains(t))
            .map(|(t, r)| format!("T={t}: {r:.4}"))
            .collect();
        println!("recall top-{k}: {}", shown.join(", "));
    }
    Ok(())
}

/// Fit the distance-to-edit-distance map on seeded random training pairs.
fn fit_on_train_pairs(
    ds: &edit_embed_core::strings::StringDataset,
    store: &EmbeddingStore,
    train_ids: &[usize],
    kind: FitKind,
    seed: u64,
) -> anyhow::Result<edit_embed_core::search::CalibrationFit> {
    if train_ids.len() < 2 {
        bail!("calibration needs at least two training strings");
    }
    let train_store = store.subset(train_ids)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(7);
    let mut pairs: Vec<(Real, Real)> = Vec::with_capacity(CALIBRATION_SAMPLES);
    for _ in 0..CALIBRATION_SAMPLES {
        let i = rng.random_range(0..train_ids.len());
        let j = loop {
            let j = rng.random_range(0..train_ids.len());
            if j != i {
                break j;
            }
        };
        let dist = train_store.distance_to(j, train_store.row(i));
        let de = edit_distance_fast(ds.get(train_ids[i]), ds.get(train_ids[j]));
        pairs.push((dist, de as Real));
    }
    Ok(fit_calibration(&pairs, kind)?)
}
