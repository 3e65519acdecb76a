//! Approximating edit distance with learned string embeddings.
//!
//! Strings are mapped into Euclidean space by a small 1-D convolutional
//! network trained so that distances between embeddings track edit distance;
//! a randomized CGK embedding into Hamming space serves as the untrained
//! baseline. On top of the embeddings sit distance calibration, threshold
//! search, and similarity join, each with an exact verification step so
//! reported results are true edit-distance results.
//!
//! Modules, bottom-up:
//!
//! * [`strings`] — datasets, alphabets, exact edit distance, splits.
//! * [`onehot`] — one-hot matrices and binary edit distance over their rows.
//! * [`cgk`] — the CGK random-walk embedding into Hamming space.
//! * [`tensor`] — dense 2-D tensors and the forward/backward ops of the net.
//! * [`model`] — the embedding network: config, init, inference, checkpoints.
//! * [`train`] — triplet sampling, the combined loss, and the SGD loop.
//! * [`search`] — embedding stores, calibration, threshold search, joins.
//! * [`props`] — the property suites behind `edit-embed props`.
//! * [`synth`] — seeded synthetic corpora for tests and benchmarks.

pub mod cgk;
pub mod error;
pub mod model;
pub mod onehot;
pub mod props;
pub mod search;
pub mod strings;
pub mod synth;
pub mod tensor;
pub mod train;
mod wire;

pub use error::{Error, Result};
pub use tensor::Real;
