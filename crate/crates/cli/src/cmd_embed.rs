//! `edit-embed embed`: map every corpus string to a vector and write the
//! embedding store. The trained model comes from the run directory's
//! checkpoint; the untrained and CGK variants need only a seed.

use anyhow::{bail, Context};

use edit_embed_core::cgk::{cgk_embed, CgkEmbedding, CgkMatrix};
use edit_embed_core::model::{embed_batch, init_model, load_model, ModelConfig};
use edit_embed_core::search::{EmbeddingStore, Metric};
use edit_embed_core::strings::StringDataset;

use crate::common::{load_corpus, write_run_config, RunConfig};
use crate::{EmbedArgs, MethodOpt};

pub fn run(args: EmbedArgs) -> anyhow::Result<()> {
    let ds = load_corpus(&args.data)?;

    let cfg = RunConfig {
        command: "embed".into(),
        seed: args.seed,
        method: Some(args.method.name().into()),
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

    let store = match args.method {
        MethodOpt::Cnn => embed_with_checkpoint(&args, &ds)?,
        MethodOpt::RandomCnn => embed_with_fresh_model(&args, &ds)?,
        MethodOpt::Cgk => embed_with_cgk(&args, &ds)?,
    };

    let path = args.out.join("embeddings.cemb");
    store.save(&path)?;
    println!(
        "embedded {} strings into dimension {} ({}) at {}",
        store.len(),
        store.dim(),
        args.method.name(),
        path.display()
    );
    Ok(())
}

fn embed_with_checkpoint(args: &EmbedArgs, ds: &StringDataset) -> anyhow::Result<EmbeddingStore> {
    let model_path = args.out.join("model.cned");
    let (params, mcfg, alphabet) = load_model(&model_path)
        .with_context(|| format!("reading checkpoint {}", model_path.display()))?;
    if alphabet.chars() != ds.alphabet.chars()
        || alphabet.has_unknown() != ds.alphabet.has_unknown()
    {
        bail!(
            "checkpoint alphabet ({} symbols) does not match the corpus alphabet ({} symbols)",
            alphabet.size(),
            ds.alphabet.size()
        );
    }
    if ds.max_len > mcfg.input_width {
        bail!(
            "corpus has strings of length {} but the checkpoint accepts at most {}",
            ds.max_len,
            mcfg.input_width
        );
    }
    build_rows(ds, &params, &mcfg)
}

fn embed_with_fresh_model(args: &EmbedArgs, ds: &StringDataset) -> anyhow::Result<EmbeddingStore> {
    let mut mcfg = ModelConfig::with_defaults(ds.alphabet.rows(), ds.max_len.max(1));
    mcfg.n_conv_layers = args.shape.layers;
    mcfg.kernels_per_layer = args.shape.kernels;
    mcfg.output_dim = args.shape.dim;
    mcfg.pool = args.shape.pool.to_core();
    mcfg.activation = args.shape.activation.to_core();
    let params = init_model(&mcfg, args.seed)?;
    build_rows(ds, &params, &mcfg)
}

fn build_rows(
    ds: &StringDataset,
    params: &edit_embed_core::model::ModelParams,
    mcfg: &ModelConfig,
) -> anyhow::Result<EmbeddingStore> {
    let strings: Vec<&[u8]> = ds.strings.iter().map(Vec::as_slice).collect();
    let rows = embed_batch(&strings, params, mcfg, &ds.alphabet)?;
    Ok(EmbeddingStore::from_rows(
        (0..ds.len()).collect(),
        &rows,
        Metric::Euclidean,
    )?)
}

fn embed_with_cgk(args: &EmbedArgs, ds: &StringDataset) -> anyhow::Result<EmbeddingStore> {
    use rayon::prelude::*;
    let matrix = CgkMatrix::random(ds.max_len.max(1), &ds.alphabet, args.seed)?;
    let embeddings: Vec<CgkEmbedding> = ds
        .strings
        .par_iter()
        .map(|s| cgk_embed(s, &matrix, &ds.alphabet))
        .collect::<edit_embed_core::Result<_>>()?;
    Ok(EmbeddingStore::from_cgk(
        (0..ds.len()).collect(),
        &embeddings,
    )?)
}
