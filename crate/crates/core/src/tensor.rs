//! Dense 2-D tensors and the differentiable ops of the embedding network.
//!
//! A [`Tensor2`] is a `channels x width` matrix stored row-major. The ops
//! here are exactly what the network needs: 1-D convolution with same-size
//! zero padding, max/average pooling with window == stride (a shorter tail
//! window is pooled over the elements it actually has), a fully connected
//! layer over the flattened tensor, and ReLU. Every op has a hand-written
//! backward that recomputes what it needs from the saved input rather than
//! carrying a context object.

use crate::error::{Error, Result};

/// Scalar type of all activations, parameters, and embeddings.
#[cfg(feature = "f32")]
pub type Real = f32;
/// Scalar type of all activations, parameters, and embeddings.
#[cfg(not(feature = "f32"))]
pub type Real = f64;

/// A `channels x width` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2 {
    channels: usize,
    width: usize,
    data: Vec<Real>,
}

impl Tensor2 {
    pub fn zeros(channels: usize, width: usize) -> Self {
        Tensor2 {
            channels,
            width,
            data: vec![0.0; channels * width],
        }
    }

    pub fn from_data(channels: usize, width: usize, data: Vec<Real>) -> Result<Self> {
        if data.len() != channels * width {
            return Err(Error::ShapeMismatch(format!(
                "{channels}x{width} tensor needs {} values, got {}",
                channels * width,
                data.len()
            )));
        }
        Ok(Tensor2 {
            channels,
            width,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// All values, channel-major: channel 0 first, then channel 1, ...
    pub fn data(&self) -> &[Real] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Real] {
        &mut self.data
    }

    pub fn row(&self, c: usize) -> &[Real] {
        &self.data[c * self.width..(c + 1) * self.width]
    }

    #[inline]
    pub fn get(&self, c: usize, t: usize) -> Real {
        self.data[c * self.width + t]
    }

    #[inline]
    pub fn set(&mut self, c: usize, t: usize, v: Real) {
        self.data[c * self.width + t] = v;
    }
}

/// Parameters of a 1-D convolution: `out_channels` kernels of shape
/// `in_channels x ksize`, weights stored `[out][in][k]`, plus one bias per
/// output channel. `ksize` must be odd so same-size zero padding is
/// symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub out_channels: usize,
    pub in_channels: usize,
    pub ksize: usize,
    pub weight: Vec<Real>,
    pub bias: Vec<Real>,
}

impl Conv1d {
    pub fn zeros(out_channels: usize, in_channels: usize, ksize: usize) -> Result<Self> {
        if ksize.is_multiple_of(2) || ksize == 0 {
            return Err(Error::InvalidArgument(format!(
                "kernel size must be odd and positive, got {ksize}"
            )));
        }
        if out_channels == 0 || in_channels == 0 {
            return Err(Error::InvalidArgument(
                "convolution needs at least one input and one output channel".into(),
            ));
        }
        Ok(Conv1d {
            out_channels,
            in_channels,
            ksize,
            weight: vec![0.0; out_channels * in_channels * ksize],
            bias: vec![0.0; out_channels],
        })
    }

    #[inline]
    fn w(&self, o: usize, c: usize, k: usize) -> Real {
        self.weight[(o * self.in_channels + c) * self.ksize + k]
    }
}

/// Parameters of a fully connected layer: weights stored `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub out_dim: usize,
    pub in_dim: usize,
    pub weight: Vec<Real>,
    pub bias: Vec<Real>,
}

impl Linear {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Result<Self> {
        if out_dim == 0 || in_dim == 0 {
            return Err(Error::InvalidArgument(
                "linear layer needs positive dimensions".into(),
            ));
        }
        Ok(Linear {
            out_dim,
            in_dim,
            weight: vec![0.0; out_dim * in_dim],
            bias: vec![0.0; out_dim],
        })
    }
}

fn check_conv_input(x: &Tensor2, conv: &Conv1d) -> Result<()> {
    if x.channels != conv.in_channels {
        return Err(Error::ShapeMismatch(format!(
            "convolution expects {} input channels, tensor has {}",
            conv.in_channels, x.channels
        )));
    }
    if x.width == 0 {
        return Err(Error::ShapeMismatch("convolution input has zero width".into()));
    }
    Ok(())
}

/// Convolve with stride 1 and zero padding of `(ksize - 1) / 2` on each
/// side, so the output width equals the input width.
pub fn conv1d(x: &Tensor2, conv: &Conv1d) -> Result<Tensor2> {
    check_conv_input(x, conv)?;
    let w = x.width;
    let pad = (conv.ksize - 1) / 2;
    let mut out = Tensor2::zeros(conv.out_channels, w);
    for o in 0..conv.out_channels {
        for t in 0..w {
            let mut acc = conv.bias[o];
            for c in 0..conv.in_channels {
                let row = x.row(c);
                for k in 0..conv.ksize {
                    let src = t + k;
                    if src >= pad && src - pad < w {
                        acc += conv.w(o, c, k) * row[src - pad];
                    }
                }
            }
            out.set(o, t, acc);
        }
    }
    Ok(out)
}

/// Gradients of a convolution: with respect to the input, the weights
/// (same layout as [`Conv1d::weight`]), and the biases.
pub fn conv1d_backward(
    x: &Tensor2,
    conv: &Conv1d,
    grad_out: &Tensor2,
) -> Result<(Tensor2, Vec<Real>, Vec<Real>)> {
    check_conv_input(x, conv)?;
    if grad_out.channels != conv.out_channels || grad_out.width != x.width {
        return Err(Error::ShapeMismatch(format!(
            "convolution output gradient should be {}x{}, got {}x{}",
            conv.out_channels, x.width, grad_out.channels, grad_out.width
        )));
    }
    let w = x.width;
    let pad = (conv.ksize - 1) / 2;
    let mut grad_x = Tensor2::zeros(x.channels, w);
    let mut grad_w = vec![0.0; conv.weight.len()];
    let mut grad_b = vec![0.0; conv.out_channels];
    for o in 0..conv.out_channels {
        let gout = grad_out.row(o);
        grad_b[o] += gout.iter().sum::<Real>();
        for (t, &g) in gout.iter().enumerate() {
            for c in 0..conv.in_channels {
                for k in 0..conv.ksize {
                    let src = t + k;
                    if src >= pad && src - pad < w {
                        let xi = src - pad;
                        grad_w[(o * conv.in_channels + c) * conv.ksize + k] += g * x.get(c, xi);
                        grad_x.data[c * w + xi] += g * conv.w(o, c, k);
                    }
                }
            }
        }
    }
    Ok((grad_x, grad_w, grad_b))
}

fn check_pool(x: &Tensor2, k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::InvalidArgument("pool window must be positive".into()));
    }
    if x.width == 0 {
        return Err(Error::ShapeMismatch("pooling input has zero width".into()));
    }
    Ok(x.width.div_ceil(k))
}

/// Max pooling with window and stride both `k`; a shorter tail window takes
/// the max of the elements it has.
pub fn maxpool1d(x: &Tensor2, k: usize) -> Result<Tensor2> {
    let out_w = check_pool(x, k)?;
    let mut out = Tensor2::zeros(x.channels, out_w);
    for c in 0..x.channels {
        let row = x.row(c);
        for t in 0..out_w {
            let window = &row[t * k..((t + 1) * k).min(x.width)];
            let m = window.iter().copied().fold(Real::NEG_INFINITY, Real::max);
            out.set(c, t, m);
        }
    }
    Ok(out)
}

/// Gradient of max pooling. Within each window the gradient flows to the
/// first element attaining the max, which keeps backward deterministic under
/// ties.
pub fn maxpool1d_backward(x: &Tensor2, k: usize, grad_out: &Tensor2) -> Result<Tensor2> {
    let out_w = check_pool(x, k)?;
    if grad_out.channels != x.channels || grad_out.width != out_w {
        return Err(Error::ShapeMismatch(format!(
            "pool output gradient should be {}x{}, got {}x{}",
            x.channels, out_w, grad_out.channels, grad_out.width
        )));
    }
    let mut grad_x = Tensor2::zeros(x.channels, x.width);
    for c in 0..x.channels {
        let row = x.row(c);
        for t in 0..out_w {
            let start = t * k;
            let window = &row[start..(start + k).min(x.width)];
            let mut best = 0usize;
            for (i, &v) in window.iter().enumerate() {
                if v > window[best] {
                    best = i;
                }
            }
            grad_x.data[c * x.width + start + best] += grad_out.get(c, t);
        }
    }
    Ok(grad_x)
}

/// Average pooling with window and stride both `k`; a shorter tail window
/// averages over the elements it actually has.
pub fn avgpool1d(x: &Tensor2, k: usize) -> Result<Tensor2> {
    let out_w = check_pool(x, k)?;
    let mut out = Tensor2::zeros(x.channels, out_w);
    for c in 0..x.channels {
        let row = x.row(c);
        for t in 0..out_w {
            let window = &row[t * k..((t + 1) * k).min(x.width)];
            let sum: Real = window.iter().sum();
            out.set(c, t, sum / window.len() as Real);
        }
    }
    Ok(out)
}

/// Gradient of average pooling: each window's gradient is spread uniformly
/// over the elements that were averaged.
pub fn avgpool1d_backward(x: &Tensor2, k: usize, grad_out: &Tensor2) -> Result<Tensor2> {
    let out_w = check_pool(x, k)?;
    if grad_out.channels != x.channels || grad_out.width != out_w {
        return Err(Error::ShapeMismatch(format!(
            "pool output gradient should be {}x{}, got {}x{}",
            x.channels, out_w, grad_out.channels, grad_out.width
        )));
    }
    let mut grad_x = Tensor2::zeros(x.channels, x.width);
    for c in 0..x.channels {
        for t in 0..out_w {
            let start = t * k;
            let end = (start + k).min(x.width);
            let share = grad_out.get(c, t) / (end - start) as Real;
            for i in start..end {
                grad_x.data[c * x.width + i] += share;
            }
        }
    }
    Ok(grad_x)
}

/// Fully connected layer over a flattened input.
pub fn linear(x: &[Real], lin: &Linear) -> Result<Vec<Real>> {
    if x.len() != lin.in_dim {
        return Err(Error::ShapeMismatch(format!(
            "linear layer expects {} inputs, got {}",
            lin.in_dim,
            x.len()
        )));
    }
    let mut out = lin.bias.clone();
    for (o, out_v) in out.iter_mut().enumerate() {
        let row = &lin.weight[o * lin.in_dim..(o + 1) * lin.in_dim];
        *out_v += row.iter().zip(x).map(|(w, v)| w * v).sum::<Real>();
    }
    Ok(out)
}

/// Gradients of a fully connected layer: input, weights (layout of
/// [`Linear::weight`]), biases.
pub fn linear_backward(
    x: &[Real],
    lin: &Linear,
    grad_out: &[Real],
) -> Result<(Vec<Real>, Vec<Real>, Vec<Real>)> {
    if x.len() != lin.in_dim || grad_out.len() != lin.out_dim {
        return Err(Error::ShapeMismatch(format!(
            "linear backward got input {} (want {}) and gradient {} (want {})",
            x.len(),
            lin.in_dim,
            grad_out.len(),
            lin.out_dim
        )));
    }
    let mut grad_x = vec![0.0; lin.in_dim];
    let mut grad_w = vec![0.0; lin.weight.len()];
    let grad_b = grad_out.to_vec();
    for o in 0..lin.out_dim {
        let g = grad_out[o];
        let row = &lin.weight[o * lin.in_dim..(o + 1) * lin.in_dim];
        for i in 0..lin.in_dim {
            grad_x[i] += g * row[i];
            grad_w[o * lin.in_dim + i] += g * x[i];
        }
    }
    Ok((grad_x, grad_w, grad_b))
}

/// Elementwise `max(0, x)`.
pub fn relu(x: &Tensor2) -> Tensor2 {
    let data = x.data.iter().map(|&v| v.max(0.0)).collect();
    Tensor2 {
        channels: x.channels,
        width: x.width,
        data,
    }
}

/// Gradient of ReLU; the subgradient at exactly zero is taken as zero.
pub fn relu_backward(x: &Tensor2, grad_out: &Tensor2) -> Result<Tensor2> {
    if x.channels != grad_out.channels || x.width != grad_out.width {
        return Err(Error::ShapeMismatch(format!(
            "relu gradient should be {}x{}, got {}x{}",
            x.channels, x.width, grad_out.channels, grad_out.width
        )));
    }
    let data = x
        .data
        .iter()
        .zip(&grad_out.data)
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect();
    Ok(Tensor2 {
        channels: x.channels,
        width: x.width,
        data,
    })
}

/// Euclidean distance between two vectors of equal length.
pub fn l2_distance(a: &[Real], b: &[Real]) -> Real {
    assert_eq!(a.len(), b.len(), "l2_distance needs equal lengths");
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<Real>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Real, b: Real) -> bool {
        (a - b).abs() < 1e-12
    }

    fn t(channels: usize, width: usize, data: &[Real]) -> Tensor2 {
        Tensor2::from_data(channels, width, data.to_vec()).unwrap()
    }

    #[test]
    fn conv_same_padding_single_channel() {
        let x = t(1, 4, &[1.0, 2.0, 3.0, 4.0]);
        let mut conv = Conv1d::zeros(1, 1, 3).unwrap();
        conv.weight = vec![1.0, 0.0, -1.0];
        let y = conv1d(&x, &conv).unwrap();
        assert_eq!(y.data(), &[-2.0, -2.0, -2.0, 3.0]);

        conv.bias = vec![0.5];
        let y = conv1d(&x, &conv).unwrap();
        assert_eq!(y.data(), &[-1.5, -1.5, -1.5, 3.5]);
    }

    #[test]
    fn conv_sums_over_input_channels() {
        let x = t(2, 2, &[1.0, 2.0, 10.0, 20.0]);
        let mut conv = Conv1d::zeros(1, 2, 1).unwrap();
        conv.weight = vec![1.0, 0.5];
        let y = conv1d(&x, &conv).unwrap();
        assert_eq!(y.data(), &[6.0, 12.0]);
    }

    #[test]
    fn conv_backward_matches_hand_derivation() {
        // y[t] = w0*x[t-1] + w1*x[t] + w2*x[t+1], all-ones upstream gradient.
        let x = t(1, 3, &[1.0, 2.0, 3.0]);
        let mut conv = Conv1d::zeros(1, 1, 3).unwrap();
        conv.weight = vec![2.0, 5.0, -1.0];
        let g = t(1, 3, &[1.0, 1.0, 1.0]);
        let (gx, gw, gb) = conv1d_backward(&x, &conv, &g).unwrap();
        // d/dx[t] = w2 (via y[t-1]) + w1 (via y[t]) + w0 (via y[t+1]),
        // clipped at the borders.
        assert_eq!(gx.data(), &[5.0 + 2.0, -1.0 + 5.0 + 2.0, -1.0 + 5.0]);
        // d/dw0 = sum x[t-1] = 0+1+2, d/dw1 = 1+2+3, d/dw2 = 2+3+0.
        assert_eq!(gw, vec![3.0, 6.0, 5.0]);
        assert_eq!(gb, vec![3.0]);
    }

    #[test]
    fn pools_cover_the_tail_window() {
        let x = t(1, 4, &[1.0, 3.0, 2.0, 5.0]);
        assert_eq!(maxpool1d(&x, 2).unwrap().data(), &[3.0, 5.0]);
        assert_eq!(avgpool1d(&x, 2).unwrap().data(), &[2.0, 3.5]);

        let x = t(1, 3, &[1.0, 2.0, 3.0]);
        assert_eq!(maxpool1d(&x, 2).unwrap().data(), &[2.0, 3.0]);
        assert_eq!(avgpool1d(&x, 2).unwrap().data(), &[1.5, 3.0]);

        let x = t(1, 3, &[1.0, 2.0, 3.0]);
        assert_eq!(maxpool1d(&x, 5).unwrap().data(), &[3.0]);
        assert_eq!(avgpool1d(&x, 5).unwrap().data(), &[2.0]);
    }

    #[test]
    fn maxpool_backward_routes_to_first_max() {
        let x = t(1, 4, &[1.0, 3.0, 3.0, 0.0]);
        let g = t(1, 2, &[10.0, 20.0]);
        let gx = maxpool1d_backward(&x, 2, &g).unwrap();
        assert_eq!(gx.data(), &[0.0, 10.0, 20.0, 0.0]);

        let tie = t(1, 2, &[7.0, 7.0]);
        let g = t(1, 1, &[1.0]);
        let gx = maxpool1d_backward(&tie, 2, &g).unwrap();
        assert_eq!(gx.data(), &[1.0, 0.0]);
    }

    #[test]
    fn avgpool_backward_splits_by_true_window_size() {
        let x = t(1, 3, &[4.0, 6.0, 8.0]);
        let g = t(1, 2, &[1.0, 1.0]);
        let gx = avgpool1d_backward(&x, 2, &g).unwrap();
        assert_eq!(gx.data(), &[0.5, 0.5, 1.0]);
    }

    #[test]
    fn linear_and_its_backward() {
        let mut lin = Linear::zeros(3, 2).unwrap();
        lin.weight = vec![1.0, 2.0, 3.0, 4.0, 0.0, -1.0];
        lin.bias = vec![0.5, 0.0, 1.0];
        let y = linear(&[1.0, 2.0], &lin).unwrap();
        assert_eq!(y, vec![5.5, 11.0, -1.0]);

        let (gx, gw, gb) = linear_backward(&[1.0, 2.0], &lin, &[1.0, 0.0, -1.0]).unwrap();
        assert_eq!(gx, vec![1.0 - 0.0, 2.0 + 1.0]);
        assert_eq!(gw, vec![1.0, 2.0, 0.0, 0.0, -1.0, -2.0]);
        assert_eq!(gb, vec![1.0, 0.0, -1.0]);
    }

    #[test]
    fn relu_clamps_and_masks() {
        let x = t(1, 3, &[-1.0, 0.0, 2.0]);
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        let g = t(1, 3, &[5.0, 5.0, 5.0]);
        assert_eq!(relu_backward(&x, &g).unwrap().data(), &[0.0, 0.0, 5.0]);
    }

    #[test]
    fn l2_distance_basics() {
        assert!(close(l2_distance(&[0.0, 0.0], &[3.0, 4.0]), 5.0));
        assert!(close(l2_distance(&[1.0], &[1.0]), 0.0));
    }

    #[test]
    fn shape_errors_are_reported() {
        let x = t(1, 3, &[1.0, 2.0, 3.0]);
        let conv = Conv1d::zeros(1, 2, 3).unwrap();
        assert!(conv1d(&x, &conv).is_err());
        assert!(Conv1d::zeros(1, 1, 2).is_err());
        let lin = Linear::zeros(2, 4).unwrap();
        assert!(linear(&[1.0], &lin).is_err());
        assert!(Tensor2::from_data(2, 2, vec![0.0; 3]).is_err());
    }
}
