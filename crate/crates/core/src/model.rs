//! The embedding network: a stack of 1-D conv/activation/pool blocks over a
//! one-hot input, flattened into a fully connected head.
//!
//! Layer widths shrink by `pool_factor` (rounded up) after every conv layer
//! while the width still exceeds `pool_factor`; deeper layers then run
//! without pooling, so short strings and deep stacks coexist. Parameters are
//! kept on the f32 grid (initialization draws f32 values, checkpoints store
//! f32), which makes save → load → embed reproduce embeddings exactly.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::onehot::one_hot;
use crate::strings::Alphabet;
use crate::tensor::{
    avgpool1d, avgpool1d_backward, conv1d, conv1d_backward, linear, linear_backward, maxpool1d,
    maxpool1d_backward, relu, relu_backward, Conv1d, Linear, Real, Tensor2,
};
use crate::wire;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pooling {
    Max,
    Avg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    None,
}

/// Architecture of the embedding network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub n_conv_layers: usize,
    pub kernels_per_layer: usize,
    pub kernel_size: usize,
    pub pool: Pooling,
    pub pool_factor: usize,
    pub activation: Activation,
    pub output_dim: usize,
    pub input_channels: usize,
    pub input_width: usize,
}

impl ModelConfig {
    /// The default architecture: 10 conv layers of 8 kernels (size 3), max
    /// pooling by 2, ReLU, and a 128-dimensional output.
    pub fn with_defaults(input_channels: usize, input_width: usize) -> Self {
        ModelConfig {
            n_conv_layers: 10,
            kernels_per_layer: 8,
            kernel_size: 3,
            pool: Pooling::Max,
            pool_factor: 2,
            activation: Activation::Relu,
            output_dim: 128,
            input_channels,
            input_width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size != 3 {
            return Err(Error::InvalidArgument(format!(
                "kernel size is fixed at 3, got {}",
                self.kernel_size
            )));
        }
        if self.n_conv_layers == 0
            || self.kernels_per_layer == 0
            || self.output_dim == 0
            || self.input_channels == 0
            || self.input_width == 0
            || self.pool_factor == 0
        {
            return Err(Error::InvalidArgument(
                "all model dimensions must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Tensor width after each conv block, pooling included.
    pub fn output_widths(&self) -> Vec<usize> {
        let mut widths = Vec::with_capacity(self.n_conv_layers);
        let mut w = self.input_width;
        for _ in 0..self.n_conv_layers {
            if w > self.pool_factor {
                w = w.div_ceil(self.pool_factor);
            }
            widths.push(w);
        }
        widths
    }

    /// Length of the flattened tensor feeding the fully connected head.
    pub fn flatten_dim(&self) -> usize {
        let final_width = self.output_widths().pop().unwrap_or(self.input_width);
        self.kernels_per_layer * final_width
    }

    fn conv_in_channels(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_channels
        } else {
            self.kernels_per_layer
        }
    }
}

/// All learnable parameters, plus the seed they were initialized from.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub convs: Vec<Conv1d>,
    pub linear: Linear,
    pub init_seed: u64,
}

impl ModelParams {
    pub fn param_count(&self) -> usize {
        let conv: usize = self
            .convs
            .iter()
            .map(|c| c.weight.len() + c.bias.len())
            .sum();
        conv + self.linear.weight.len() + self.linear.bias.len()
    }

    /// Snap every parameter to the nearest f32, the precision checkpoints
    /// store. Applied after training so a saved model embeds identically to
    /// the in-memory one.
    pub fn quantize_to_f32(&mut self) {
        let q = |v: &mut Real| *v = *v as f32 as Real;
        for c in &mut self.convs {
            c.weight.iter_mut().for_each(q);
            c.bias.iter_mut().for_each(q);
        }
        self.linear.weight.iter_mut().for_each(q);
        self.linear.bias.iter_mut().for_each(q);
    }

    /// All parameters as one vector: per layer weights then biases, then the
    /// linear head's. Gradient order in [`ModelGrads::to_flat`] matches.
    pub fn to_flat(&self) -> Vec<Real> {
        let mut flat = Vec::with_capacity(self.param_count());
        for c in &self.convs {
            flat.extend_from_slice(&c.weight);
            flat.extend_from_slice(&c.bias);
        }
        flat.extend_from_slice(&self.linear.weight);
        flat.extend_from_slice(&self.linear.bias);
        flat
    }

    /// Overwrite all parameters from a flat vector laid out as in
    /// [`ModelParams::to_flat`].
    pub fn set_from_flat(&mut self, flat: &[Real]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::ShapeMismatch(format!(
                "flat parameter vector has {} values, model needs {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut pos = 0;
        let mut take = |dst: &mut [Real]| {
            dst.copy_from_slice(&flat[pos..pos + dst.len()]);
            pos += dst.len();
        };
        for c in &mut self.convs {
            take(&mut c.weight);
            take(&mut c.bias);
        }
        take(&mut self.linear.weight);
        take(&mut self.linear.bias);
        Ok(())
    }

    /// Apply one SGD step: `p -= lr * g` for every parameter.
    pub fn sgd_step(&mut self, grads: &ModelGrads, lr: Real) {
        for (c, (gw, gb)) in self
            .convs
            .iter_mut()
            .zip(grads.conv_w.iter().zip(&grads.conv_b))
        {
            for (p, g) in c.weight.iter_mut().zip(gw) {
                *p -= lr * g;
            }
            for (p, g) in c.bias.iter_mut().zip(gb) {
                *p -= lr * g;
            }
        }
        for (p, g) in self.linear.weight.iter_mut().zip(&grads.linear_w) {
            *p -= lr * g;
        }
        for (p, g) in self.linear.bias.iter_mut().zip(&grads.linear_b) {
            *p -= lr * g;
        }
    }

    fn validate_for(&self, cfg: &ModelConfig) -> Result<()> {
        if self.convs.len() != cfg.n_conv_layers {
            return Err(Error::ShapeMismatch(format!(
                "model has {} conv layers, config wants {}",
                self.convs.len(),
                cfg.n_conv_layers
            )));
        }
        for (i, c) in self.convs.iter().enumerate() {
            if c.in_channels != cfg.conv_in_channels(i)
                || c.out_channels != cfg.kernels_per_layer
                || c.ksize != cfg.kernel_size
            {
                return Err(Error::ShapeMismatch(format!("conv layer {i} shape is off")));
            }
        }
        if self.linear.in_dim != cfg.flatten_dim() || self.linear.out_dim != cfg.output_dim {
            return Err(Error::ShapeMismatch(format!(
                "linear head is {}x{}, config wants {}x{}",
                self.linear.out_dim,
                self.linear.in_dim,
                cfg.output_dim,
                cfg.flatten_dim()
            )));
        }
        Ok(())
    }
}

/// Gradients matching a [`ModelParams`], layer by layer.
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub conv_w: Vec<Vec<Real>>,
    pub conv_b: Vec<Vec<Real>>,
    pub linear_w: Vec<Real>,
    pub linear_b: Vec<Real>,
}

impl ModelGrads {
    pub fn zeros_like(params: &ModelParams) -> Self {
        ModelGrads {
            conv_w: params.convs.iter().map(|c| vec![0.0; c.weight.len()]).collect(),
            conv_b: params.convs.iter().map(|c| vec![0.0; c.bias.len()]).collect(),
            linear_w: vec![0.0; params.linear.weight.len()],
            linear_b: vec![0.0; params.linear.bias.len()],
        }
    }

    pub fn add(&mut self, other: &ModelGrads) {
        let acc = |dst: &mut [Real], src: &[Real]| {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        };
        for (d, s) in self.conv_w.iter_mut().zip(&other.conv_w) {
            acc(d, s);
        }
        for (d, s) in self.conv_b.iter_mut().zip(&other.conv_b) {
            acc(d, s);
        }
        acc(&mut self.linear_w, &other.linear_w);
        acc(&mut self.linear_b, &other.linear_b);
    }

    pub fn scale(&mut self, f: Real) {
        for v in self
            .conv_w
            .iter_mut()
            .chain(self.conv_b.iter_mut())
            .flat_map(|v| v.iter_mut())
            .chain(self.linear_w.iter_mut())
            .chain(self.linear_b.iter_mut())
        {
            *v *= f;
        }
    }

    /// Flat layout matching [`ModelParams::to_flat`].
    pub fn to_flat(&self) -> Vec<Real> {
        let mut flat = Vec::new();
        for (w, b) in self.conv_w.iter().zip(&self.conv_b) {
            flat.extend_from_slice(w);
            flat.extend_from_slice(b);
        }
        flat.extend_from_slice(&self.linear_w);
        flat.extend_from_slice(&self.linear_b);
        flat
    }
}

/// A finished embedding: `output_dim` reals.
pub type EmbeddingVector = Vec<Real>;

/// Initialize parameters deterministically from `seed`: weights uniform in
/// `±sqrt(6/fan_in)` (variance `2/fan_in`, which keeps signal energy stable
/// through deep ramp-activated stacks), biases zero. Values are drawn in
/// f32 so they sit on the checkpoint grid from the start.
pub fn init_model(cfg: &ModelConfig, seed: u64) -> Result<ModelParams> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |fan_in: usize, n: usize| -> Vec<Real> {
        let bound = (6.0f32 / fan_in as f32).sqrt();
        (0..n)
            .map(|_| ((rng.random::<f32>() * 2.0 - 1.0) * bound) as Real)
            .collect()
    };
    let mut convs = Vec::with_capacity(cfg.n_conv_layers);
    for layer in 0..cfg.n_conv_layers {
        let in_ch = cfg.conv_in_channels(layer);
        let mut c = Conv1d::zeros(cfg.kernels_per_layer, in_ch, cfg.kernel_size)?;
        c.weight = draw(in_ch * cfg.kernel_size, c.weight.len());
        convs.push(c);
    }
    let mut lin = Linear::zeros(cfg.output_dim, cfg.flatten_dim())?;
    lin.weight = draw(lin.in_dim, lin.weight.len());
    Ok(ModelParams {
        convs,
        linear: lin,
        init_seed: seed,
    })
}

/// Everything the backward pass needs from one forward run.
pub(crate) struct ForwardTrace {
    pub(crate) conv_inputs: Vec<Tensor2>,
    pub(crate) pre_act: Vec<Tensor2>,
    pub(crate) acts: Vec<Tensor2>,
    pub(crate) pooled: Vec<bool>,
    pub(crate) flat: Vec<Real>,
    pub(crate) output: Vec<Real>,
}

pub(crate) fn forward_trace(
    s: &[u8],
    params: &ModelParams,
    cfg: &ModelConfig,
    alphabet: &Alphabet,
) -> Result<ForwardTrace> {
    if alphabet.rows() != cfg.input_channels {
        return Err(Error::ShapeMismatch(format!(
            "alphabet has {} rows, model expects {}",
            alphabet.rows(),
            cfg.input_channels
        )));
    }
    params.validate_for(cfg)?;
    let mut x = one_hot(s, alphabet, cfg.input_width)?.to_tensor();
    let n = cfg.n_conv_layers;
    let mut conv_inputs = Vec::with_capacity(n);
    let mut pre_act = Vec::with_capacity(n);
    let mut acts = Vec::with_capacity(n);
    let mut pooled = Vec::with_capacity(n);
    for conv in &params.convs {
        conv_inputs.push(x.clone());
        let z = conv1d(&x, conv)?;
        let a = match cfg.activation {
            Activation::Relu => relu(&z),
            Activation::None => z.clone(),
        };
        pre_act.push(z);
        let do_pool = a.width() > cfg.pool_factor;
        pooled.push(do_pool);
        x = if do_pool {
            match cfg.pool {
                Pooling::Max => maxpool1d(&a, cfg.pool_factor)?,
                Pooling::Avg => avgpool1d(&a, cfg.pool_factor)?,
            }
        } else {
            a.clone()
        };
        acts.push(a);
    }
    let flat = x.data().to_vec();
    let output = linear(&flat, &params.linear)?;
    Ok(ForwardTrace {
        conv_inputs,
        pre_act,
        acts,
        pooled,
        flat,
        output,
    })
}

/// Backpropagate a gradient on the embedding through one recorded forward
/// run, producing gradients for every parameter.
pub(crate) fn backward_trace(
    trace: &ForwardTrace,
    params: &ModelParams,
    cfg: &ModelConfig,
    grad_out: &[Real],
) -> Result<ModelGrads> {
    let mut grads = ModelGrads::zeros_like(params);
    let (g_flat, gw, gb) = linear_backward(&trace.flat, &params.linear, grad_out)?;
    grads.linear_w = gw;
    grads.linear_b = gb;

    let last_width = trace.flat.len() / cfg.kernels_per_layer;
    let mut g = Tensor2::from_data(cfg.kernels_per_layer, last_width, g_flat)?;

    for i in (0..cfg.n_conv_layers).rev() {
        if trace.pooled[i] {
            g = match cfg.pool {
                Pooling::Max => maxpool1d_backward(&trace.acts[i], cfg.pool_factor, &g)?,
                Pooling::Avg => avgpool1d_backward(&trace.acts[i], cfg.pool_factor, &g)?,
            };
        }
        g = match cfg.activation {
            Activation::Relu => relu_backward(&trace.pre_act[i], &g)?,
            Activation::None => g,
        };
        let (g_in, gw, gb) = conv1d_backward(&trace.conv_inputs[i], &params.convs[i], &g)?;
        grads.conv_w[i] = gw;
        grads.conv_b[i] = gb;
        g = g_in;
    }
    Ok(grads)
}

/// Embed one string; pure and deterministic.
pub fn embed(
    s: &[u8],
    params: &ModelParams,
    cfg: &ModelConfig,
    alphabet: &Alphabet,
) -> Result<EmbeddingVector> {
    Ok(forward_trace(s, params, cfg, alphabet)?.output)
}

/// Embed many strings in parallel, preserving order.
pub fn embed_batch(
    strings: &[&[u8]],
    params: &ModelParams,
    cfg: &ModelConfig,
    alphabet: &Alphabet,
) -> Result<Vec<EmbeddingVector>> {
    strings
        .par_iter()
        .map(|s| embed(s, params, cfg, alphabet))
        .collect()
}

const MODEL_MAGIC: &[u8; 4] = b"CNED";
const MODEL_VERSION: u32 = 1;

const CONFIG_FIELDS: [&str; 10] = [
    "n_conv_layers",
    "kernels_per_layer",
    "kernel_size",
    "pool",
    "pool_factor",
    "activation",
    "output_dim",
    "input_channels",
    "input_width",
    "alphabet_unknown",
];

fn config_field_values(cfg: &ModelConfig, alphabet: &Alphabet) -> [u64; 10] {
    [
        cfg.n_conv_layers as u64,
        cfg.kernels_per_layer as u64,
        cfg.kernel_size as u64,
        match cfg.pool {
            Pooling::Max => 0,
            Pooling::Avg => 1,
        },
        cfg.pool_factor as u64,
        match cfg.activation {
            Activation::None => 0,
            Activation::Relu => 1,
        },
        cfg.output_dim as u64,
        cfg.input_channels as u64,
        cfg.input_width as u64,
        alphabet.has_unknown() as u64,
    ]
}

fn push_tensor(buf: &mut Vec<u8>, name: &str, dims: &[u32], values: &[Real]) {
    wire::push_name(buf, name);
    buf.push(dims.len() as u8);
    for &d in dims {
        wire::push_u32(buf, d);
    }
    debug_assert_eq!(dims.iter().product::<u32>() as usize, values.len());
    for &v in values {
        wire::push_f32(buf, v as f32);
    }
}

/// Serialize parameters, architecture, and the alphabet into a checkpoint:
/// magic `CNED`, version, named integer config fields, the init seed, named
/// f32 tensors, and a trailing CRC32.
pub fn save_model(
    params: &ModelParams,
    cfg: &ModelConfig,
    alphabet: &Alphabet,
    path: &Path,
) -> Result<()> {
    params.validate_for(cfg)?;
    let mut buf = Vec::new();
    buf.extend_from_slice(MODEL_MAGIC);
    wire::push_u32(&mut buf, MODEL_VERSION);
    wire::push_u32(&mut buf, CONFIG_FIELDS.len() as u32);
    for (name, value) in CONFIG_FIELDS.iter().zip(config_field_values(cfg, alphabet)) {
        wire::push_name(&mut buf, name);
        wire::push_u64(&mut buf, value);
    }
    wire::push_u64(&mut buf, params.init_seed);

    let alpha_vals: Vec<Real> = alphabet.chars().iter().map(|&b| b as Real).collect();
    push_tensor(&mut buf, "alphabet", &[alpha_vals.len() as u32], &alpha_vals);
    for (i, c) in params.convs.iter().enumerate() {
        push_tensor(
            &mut buf,
            &format!("conv{i}.weight"),
            &[c.out_channels as u32, c.in_channels as u32, c.ksize as u32],
            &c.weight,
        );
        push_tensor(&mut buf, &format!("conv{i}.bias"), &[c.out_channels as u32], &c.bias);
    }
    push_tensor(
        &mut buf,
        "linear.weight",
        &[params.linear.out_dim as u32, params.linear.in_dim as u32],
        &params.linear.weight,
    );
    push_tensor(&mut buf, "linear.bias", &[params.linear.out_dim as u32], &params.linear.bias);

    wire::append_crc(&mut buf);
    std::fs::write(path, &buf).map_err(|e| Error::io(path, e))
}

struct RawTensor {
    dims: Vec<u32>,
    values: Vec<Real>,
}

/// Load a checkpoint written by [`save_model`]. The checksum is verified
/// before any field is trusted, so truncation or bit rot surfaces as a
/// checksum error rather than a parse error.
pub fn load_model(path: &Path) -> Result<(ModelParams, ModelConfig, Alphabet)> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let payload = wire::check_crc(path, &raw)?;
    let mut r = wire::Reader::new(path, payload);
    if r.bytes(4)? != MODEL_MAGIC {
        return Err(r.err("not a model checkpoint (bad magic)"));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(r.err(format!("unsupported checkpoint version {version}")));
    }

    let n_fields = r.u32()? as usize;
    let mut fields = HashMap::new();
    for _ in 0..n_fields {
        let name = r.name()?;
        let value = r.u64()?;
        fields.insert(name, value);
    }
    let field = |name: &str| -> Result<u64> {
        fields
            .get(name)
            .copied()
            .ok_or_else(|| Error::format(path, format!("missing config field {name}")))
    };
    let cfg = ModelConfig {
        n_conv_layers: field("n_conv_layers")? as usize,
        kernels_per_layer: field("kernels_per_layer")? as usize,
        kernel_size: field("kernel_size")? as usize,
        pool: match field("pool")? {
            0 => Pooling::Max,
            1 => Pooling::Avg,
            v => return Err(Error::format(path, format!("unknown pool code {v}"))),
        },
        pool_factor: field("pool_factor")? as usize,
        activation: match field("activation")? {
            0 => Activation::None,
            1 => Activation::Relu,
            v => return Err(Error::format(path, format!("unknown activation code {v}"))),
        },
        output_dim: field("output_dim")? as usize,
        input_channels: field("input_channels")? as usize,
        input_width: field("input_width")? as usize,
    };
    cfg.validate()?;
    let alphabet_unknown = field("alphabet_unknown")? != 0;
    let init_seed = r.u64()?;

    let mut tensors: HashMap<String, RawTensor> = HashMap::new();
    while r.remaining() > 0 {
        let name = r.name()?;
        let rank = r.bytes(1)?[0] as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32()?);
        }
        let count: usize = dims.iter().map(|&d| d as usize).product();
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            values.push(r.f32()? as Real);
        }
        tensors.insert(name, RawTensor { dims, values });
    }
    let alpha_t = tensors
        .remove("alphabet")
        .ok_or_else(|| Error::format(path, "missing tensor alphabet"))?;
    let chars: Vec<u8> = alpha_t
        .values
        .iter()
        .map(|&v| {
            if (0.0..256.0).contains(&v) && v.fract() == 0.0 {
                Ok(v as u8)
            } else {
                Err(Error::format(path, format!("alphabet value {v} is not a byte")))
            }
        })
        .collect::<Result<_>>()?;
    let alphabet = if alphabet_unknown {
        Alphabet::new_with_unknown(chars)?
    } else {
        Alphabet::new(chars)?
    };
    if alphabet.rows() != cfg.input_channels {
        return Err(Error::format(
            path,
            format!(
                "alphabet has {} rows but the model expects {} input channels",
                alphabet.rows(),
                cfg.input_channels
            ),
        ));
    }

    let mut tensor = |name: &str, dims: &[u32]| -> Result<Vec<Real>> {
        let t = tensors
            .remove(name)
            .ok_or_else(|| Error::format(path, format!("missing tensor {name}")))?;
        if t.dims != dims {
            return Err(Error::format(
                path,
                format!("tensor {name} has dims {:?}, expected {:?}", t.dims, dims),
            ));
        }
        Ok(t.values)
    };

    let mut convs = Vec::with_capacity(cfg.n_conv_layers);
    for i in 0..cfg.n_conv_layers {
        let in_ch = cfg.conv_in_channels(i);
        let mut c = Conv1d::zeros(cfg.kernels_per_layer, in_ch, cfg.kernel_size)?;
        c.weight = tensor(
            &format!("conv{i}.weight"),
            &[cfg.kernels_per_layer as u32, in_ch as u32, cfg.kernel_size as u32],
        )?;
        c.bias = tensor(&format!("conv{i}.bias"), &[cfg.kernels_per_layer as u32])?;
        convs.push(c);
    }
    let mut lin = Linear::zeros(cfg.output_dim, cfg.flatten_dim())?;
    lin.weight = tensor(
        "linear.weight",
        &[cfg.output_dim as u32, cfg.flatten_dim() as u32],
    )?;
    lin.bias = tensor("linear.bias", &[cfg.output_dim as u32])?;

    let params = ModelParams {
        convs,
        linear: lin,
        init_seed,
    };
    params.validate_for(&cfg)?;
    Ok((params, cfg, alphabet))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::l2_distance;

    fn tiny_cfg() -> ModelConfig {
        ModelConfig {
            n_conv_layers: 2,
            kernels_per_layer: 2,
            kernel_size: 3,
            pool: Pooling::Max,
            pool_factor: 2,
            activation: Activation::Relu,
            output_dim: 4,
            input_channels: 5,
            input_width: 12,
        }
    }

    fn tiny_alphabet() -> Alphabet {
        Alphabet::from_observed([b"ACGT".as_slice()]).unwrap()
    }

    #[test]
    fn init_is_seed_deterministic() {
        let cfg = tiny_cfg();
        let a = init_model(&cfg, 7).unwrap();
        let b = init_model(&cfg, 7).unwrap();
        let c = init_model(&cfg, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.to_flat().iter().all(|v| v.is_finite()));
        assert!(a.convs.iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn default_config_parameter_count_is_small() {
        // 37 observed symbols plus the reserved row, width 1627.
        let cfg = ModelConfig::with_defaults(38, 1627);
        let params = init_model(&cfg, 1).unwrap();
        assert_eq!(
            cfg.output_widths(),
            vec![814, 407, 204, 102, 51, 26, 13, 7, 4, 2]
        );
        assert_eq!(cfg.flatten_dim(), 16);
        assert_eq!(params.param_count(), 920 + 9 * 200 + 128 * 16 + 128);
        assert!(params.param_count() < 100_000);
    }

    #[test]
    fn pooling_stops_on_short_widths() {
        let mut cfg = ModelConfig::with_defaults(5, 4);
        cfg.n_conv_layers = 10;
        assert_eq!(cfg.output_widths(), vec![2; 10]);
        let params = init_model(&cfg, 3).unwrap();
        let e = embed(b"ACG", &params, &cfg, &tiny_alphabet()).unwrap();
        assert_eq!(e.len(), cfg.output_dim);
        assert!(e.iter().all(|v| v.is_finite()));

        let w1 = ModelConfig::with_defaults(5, 1);
        assert_eq!(w1.output_widths(), vec![1; 10]);
    }

    #[test]
    fn embed_is_pure_and_identity_on_equal_strings() {
        let cfg = tiny_cfg();
        let params = init_model(&cfg, 42).unwrap();
        let a = tiny_alphabet();
        let e1 = embed(b"ACGTAC", &params, &cfg, &a).unwrap();
        let e2 = embed(b"ACGTAC", &params, &cfg, &a).unwrap();
        assert_eq!(e1, e2);
        assert_eq!(l2_distance(&e1, &e2), 0.0);
        let e3 = embed(b"ACGTAG", &params, &cfg, &a).unwrap();
        assert_ne!(e1, e3);
    }

    #[test]
    fn embed_rejects_overlong_and_mismatched_inputs() {
        let cfg = tiny_cfg();
        let params = init_model(&cfg, 42).unwrap();
        let a = tiny_alphabet();
        assert!(embed(&[b'A'; 13], &params, &cfg, &a).is_err());
        let small = Alphabet::new(b"AC".to_vec()).unwrap();
        assert!(embed(b"AC", &params, &cfg, &small).is_err());
    }

    #[test]
    fn batch_matches_single_calls_and_preserves_order() {
        let cfg = tiny_cfg();
        let params = init_model(&cfg, 9).unwrap();
        let a = tiny_alphabet();
        let strings: Vec<&[u8]> = vec![b"ACGT", b"A", b"GGGGGGGG", b"TACG"];
        let batch = embed_batch(&strings, &params, &cfg, &a).unwrap();
        for (s, row) in strings.iter().zip(&batch) {
            assert_eq!(row, &embed(s, &params, &cfg, &a).unwrap());
        }
        let perm: Vec<&[u8]> = vec![strings[2], strings[0], strings[3], strings[1]];
        let batch_p = embed_batch(&perm, &params, &cfg, &a).unwrap();
        assert_eq!(batch_p[0], batch[2]);
        assert_eq!(batch_p[1], batch[0]);
    }

    #[test]
    fn checkpoint_roundtrip_is_exact() {
        let cfg = tiny_cfg();
        let params = init_model(&cfg, 11).unwrap();
        let a = tiny_alphabet();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.cned");
        save_model(&params, &cfg, &a, &path).unwrap();

        let (p2, cfg2, a2) = load_model(&path).unwrap();
        assert_eq!(p2, params);
        assert_eq!(cfg2, cfg);
        assert_eq!(a2, a);

        let path2 = dir.path().join("model2.cned");
        save_model(&p2, &cfg2, &a2, &path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());

        let pre = embed(b"ACGTACGT", &params, &cfg, &a).unwrap();
        let post = embed(b"ACGTACGT", &p2, &cfg2, &a2).unwrap();
        assert_eq!(pre, post);
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        let cfg = tiny_cfg();
        let params = init_model(&cfg, 11).unwrap();
        let a = tiny_alphabet();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.cned");
        save_model(&params, &cfg, &a, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        let truncated = dir.path().join("trunc.cned");
        std::fs::write(&truncated, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(load_model(&truncated), Err(Error::Checksum { .. })));

        let mut flipped = bytes.clone();
        flipped[40] ^= 0xff;
        let corrupt = dir.path().join("corrupt.cned");
        std::fs::write(&corrupt, &flipped).unwrap();
        assert!(matches!(load_model(&corrupt), Err(Error::Checksum { .. })));

        let mut wrong_magic = bytes.clone();
        wrong_magic[..4].copy_from_slice(b"NOPE");
        let len = wrong_magic.len();
        wrong_magic.truncate(len - 4);
        wire::append_crc(&mut wrong_magic);
        let bad = dir.path().join("bad.cned");
        std::fs::write(&bad, &wrong_magic).unwrap();
        assert!(matches!(load_model(&bad), Err(Error::Format { .. })));
    }

    #[test]
    fn flatten_dim_matches_linear_input_across_configs() {
        for (layers, width, pf) in [(1, 5, 2), (3, 17, 2), (4, 9, 3), (10, 1627, 2), (2, 2, 2)] {
            let cfg = ModelConfig {
                n_conv_layers: layers,
                kernels_per_layer: 3,
                kernel_size: 3,
                pool: Pooling::Avg,
                pool_factor: pf,
                activation: Activation::None,
                output_dim: 6,
                input_channels: 4,
                input_width: width,
            };
            let params = init_model(&cfg, 5).unwrap();
            assert_eq!(params.linear.in_dim, cfg.flatten_dim());
            let a = Alphabet::new(b"ACGT".to_vec()).unwrap();
            let e = embed(b"AC", &params, &cfg, &a).unwrap();
            assert_eq!(e.len(), 6);
        }
    }
}
