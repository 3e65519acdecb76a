//! `edit-embed train`: split the corpus, train the model, and write the
//! checkpoint, the per-epoch loss trace, and the split manifest.

use std::time::Instant;

use edit_embed_core::model::{save_model, ModelConfig};
use edit_embed_core::strings::split_dataset;
use edit_embed_core::train::{train_epochs, TrainConfig};

use crate::common::{cache_dir, load_corpus, write_csv, write_run_config, RunConfig};
use crate::TrainArgs;

pub fn run(args: TrainArgs) -> anyhow::Result<()> {
    let ds = load_corpus(&args.data)?;
    let split = split_dataset(&ds, args.split.train_size, args.split.query_size, args.seed)?;

    let mut mcfg = ModelConfig::with_defaults(ds.alphabet.rows(), ds.max_len.max(1));
    mcfg.n_conv_layers = args.shape.layers;
    mcfg.kernels_per_layer = args.shape.kernels;
    mcfg.output_dim = args.shape.dim;
    mcfg.pool = args.shape.pool.to_core();
    mcfg.activation = args.shape.activation.to_core();

    let mut tcfg = TrainConfig::with_defaults(args.seed);
    tcfg.alpha = args.alpha;
    tcfg.batch_triplets = args.batch;
    tcfg.epochs = args.epochs;
    tcfg.topk_pool = args.topk;
    tcfg.learning_rate = args.lr;

    let cfg = RunConfig {
        command: "train".into(),
        train_size: Some(args.split.train_size),
        query_size: Some(args.split.query_size),
        seed: args.seed,
        epochs: Some(args.epochs),
        alpha: Some(args.alpha),
        lr: Some(args.lr),
        batch: Some(args.batch),
        topk: Some(args.topk),
        layers: Some(args.shape.layers),
        kernels: Some(args.shape.kernels),
        dim: Some(args.shape.dim),
        pool: Some(args.shape.pool.name().into()),
        activation: Some(args.shape.activation.name().into()),
        threads: args.threads,
        out: args.out.display().to_string(),
        ..RunConfig::default()
    }
    .with_data(&args.data);
    write_run_config(&args.out, &cfg)?;

    println!(
        "corpus: {} strings, alphabet size {}, max length {}",
        ds.len(),
        ds.alphabet.size(),
        ds.max_len
    );
    println!(
        "split: {} train / {} query / {} base",
        split.train.len(),
        split.query.len(),
        split.base.len()
    );

    let started = Instant::now();
    let (params, losses) = train_epochs(&ds, &split, &tcfg, &mcfg, Some(&cache_dir()))?;
    let elapsed = started.elapsed();

    let model_path = args.out.join("model.cned");
    save_model(&params, &mcfg, &ds.alphabet, &model_path)?;

    let loss_rows: Vec<Vec<String>> = losses
        .iter()
        .map(|e| {
            vec![
                e.epoch.to_string(),
                e.mean_total.to_string(),
                e.mean_triplet.to_string(),
                e.mean_approx.to_string(),
            ]
        })
        .collect();
    write_csv(
        &args.out.join("loss.csv"),
        &["epoch", "mean_total", "mean_triplet", "mean_approx"],
        &loss_rows,
    )?;

    let mut split_rows: Vec<Vec<String>> = Vec::with_capacity(ds.len());
    let mut roles = vec!["base"; ds.len()];
    for &i in &split.train {
        roles[i] = "train";
    }
    for &i in &split.query {
        roles[i] = "query";
    }
    for (i, role) in roles.iter().enumerate() {
        split_rows.push(vec![i.to_string(), role.to_string()]);
    }
    write_csv(&args.out.join("split.csv"), &["index", "role"], &split_rows)?;

    if let (Some(first), Some(last)) = (losses.first(), losses.last()) {
        println!(
            "loss: {:.6} (epoch {}) -> {:.6} (epoch {})",
            first.mean_total, first.epoch, last.mean_total, last.epoch
        );
    }
    println!(
        "trained {} epochs in {:.1}s; checkpoint at {}",
        losses.len(),
        elapsed.as_secs_f64(),
        model_path.display()
    );
    Ok(())
}
