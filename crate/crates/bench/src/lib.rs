//! Shared fixtures for the pipeline benchmarks: seeded corpora and model
//! configurations sized so a full criterion run stays in the seconds range.

use edit_embed_core::model::ModelConfig;
use edit_embed_core::strings::StringDataset;
use edit_embed_core::synth::clustered_corpus;

/// A clustered DNA corpus of `n` strings with lengths up to 64.
pub fn bench_corpus(n: usize, seed: u64) -> StringDataset {
    assert!(n % 10 == 0, "cluster size 10 must divide n");
    StringDataset::from_strings(clustered_corpus(n / 10, 10, 20, 58, 6, b"ACGT", seed))
        .expect("synthetic corpus")
}

/// The paper-default architecture for the given corpus.
pub fn default_model(ds: &StringDataset) -> ModelConfig {
    ModelConfig::with_defaults(ds.alphabet.rows(), ds.max_len)
}

/// A reduced architecture for training-loop benchmarks.
pub fn small_model(ds: &StringDataset) -> ModelConfig {
    ModelConfig {
        n_conv_layers: 3,
        kernels_per_layer: 4,
        output_dim: 16,
        ..ModelConfig::with_defaults(ds.alphabet.rows(), ds.max_len)
    }
}
