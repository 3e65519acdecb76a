//! Randomized verification suites over the library's own primitives: exact
//! combinatorial bounds relating edit distance to one-hot rows and to
//! pooled binary strings, finite-difference gradient checks for every
//! differentiable block, and the CGK distortion statistic.
//!
//! Each suite generates its inputs deterministically from a seed, counts
//! cases and violations, and keeps human-readable notes for reporting. The
//! bound suites are exact (a single violation is a bug); the distortion
//! suite is statistical.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cgk::cgk_distortion_report;
use crate::model::{backward_trace, forward_trace, init_model, ForwardTrace, ModelConfig};
use crate::onehot::{one_hot, restrict_to_char, row_edit_sum, widen};
use crate::strings::{edit_distance, Alphabet, StringDataset};
use crate::synth::{clustered_corpus, uniform_strings};
use crate::tensor::{
    avgpool1d, avgpool1d_backward, conv1d, conv1d_backward, linear, linear_backward, maxpool1d,
    maxpool1d_backward, relu, relu_backward, Conv1d, Linear, Real, Tensor2,
};
use crate::train::{approx_loss, combined_loss_grads, triplet_loss};

/// Outcome of one suite: how many cases ran, how many violated the checked
/// property, and a few notes (first violations, or summary statistics).
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    pub violations: usize,
    pub details: Vec<String>,
}

impl SuiteReport {
    fn new(name: &str) -> Self {
        SuiteReport {
            name: name.to_string(),
            cases: 0,
            violations: 0,
            details: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    fn violation(&mut self, detail: String) {
        self.violations += 1;
        if self.details.len() < 12 {
            self.details.push(detail);
        }
    }
}

fn random_string(rng: &mut ChaCha8Rng, chars: &[u8], max_len: usize) -> Vec<u8> {
    let len = rng.random_range(0..=max_len);
    (0..len)
        .map(|_| chars[rng.random_range(0..chars.len())])
        .collect()
}

/// Exact sandwich between edit distance and the sum of row-wise binary edit
/// distances of one-hot matrices:
/// `|D| de - (|D|-1)(M+N) <= sum <= |D| de`, for the full alphabet and for
/// the alphabet restricted to symbols actually present, plus the
/// restriction identity `de(s, s|c) = |s| - count(c, s)`.
pub fn onehot_row_bounds_suite(pairs: usize, seed: u64) -> SuiteReport {
    let mut rep = SuiteReport::new("onehot-row-bounds");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full: &[u8] = b"ABCDEFGH";
    let sizes = [2usize, 3, 4, 8];
    let alphabets: Vec<Alphabet> = sizes
        .iter()
        .map(|&d| Alphabet::new(full[..d].to_vec()).expect("fixed nonempty alphabet"))
        .collect();

    for case in 0..pairs {
        rep.cases += 1;
        let which = rng.random_range(0..sizes.len());
        let d = sizes[which];
        let chars = &full[..d];
        let alphabet = &alphabets[which];
        let x = random_string(&mut rng, chars, 64);
        let y = random_string(&mut rng, chars, 64);
        let (m, n) = (x.len() as i64, y.len() as i64);
        let de = edit_distance(&x, &y) as i64;
        let hx = one_hot(&x, alphabet, x.len()).expect("string drawn from alphabet");
        let hy = one_hot(&y, alphabet, y.len()).expect("string drawn from alphabet");
        let sum = row_edit_sum(&hx, &hy).expect("same alphabet") as i64;

        let di = d as i64;
        if sum > di * de || sum < di * de - (di - 1) * (m + n) {
            rep.violation(format!(
                "case {case}: full bound broken: |D|={d} de={de} sum={sum} M={m} N={n}"
            ));
            continue;
        }

        // Restricted to the symbols present in either string, both the sum
        // and the bounds shrink together.
        let support: Vec<usize> = chars
            .iter()
            .filter(|&&c| x.contains(&c) || y.contains(&c))
            .map(|&c| alphabet.encode(c).expect("alphabet symbol"))
            .collect();
        let ds = support.len() as i64;
        if ds > 0 {
            let sub: i64 = support
                .iter()
                .map(|&r| edit_distance(hx.row(r), hy.row(r)) as i64)
                .sum();
            if sub > ds * de || sub < ds * de - (ds - 1) * (m + n) {
                rep.violation(format!(
                    "case {case}: support bound broken: |D'|={ds} de={de} sum={sub} M={m} N={n}"
                ));
                continue;
            }
        }

        let c = chars[rng.random_range(0..d)];
        let (restricted, count) = restrict_to_char(&x, c);
        if edit_distance(&widen(&x), &restricted) != x.len() - count {
            rep.violation(format!(
                "case {case}: restriction identity broken for c={:?}",
                c as char
            ));
        }
    }
    rep
}

fn pool_bits(bits: &[u8], k: usize) -> Vec<u8> {
    if bits.is_empty() {
        return Vec::new();
    }
    let data: Vec<Real> = bits.iter().map(|&b| b as Real).collect();
    let t = Tensor2::from_data(1, bits.len(), data).expect("consistent shape");
    let p = maxpool1d(&t, k).expect("positive window");
    p.data().iter().map(|&v| u8::from(v > 0.5)).collect()
}

fn replicate(bits: &[u8], k: usize) -> Vec<u8> {
    bits.iter()
        .flat_map(|&b| std::iter::repeat_n(b, k))
        .collect()
}

/// Exact bounds tying the edit distance of binary strings to the edit
/// distance of their max-pooled (factor `K`, non-overlapping) forms `P`,
/// with `A` the `K`-fold replication of `P`:
///   de(P(x),P(y)) <= de(x,y) + (K-1)/K (M+N)
///   de(P(x),P(y)) >= de(x,y) - (K-1)/K (M+N)
///   de(P(x),P(y)) >= de(x,y)/K - (K-1)/K (|1|_{P(x)} + |1|_{P(y)})
///   de(A(x),A(y)) <= K de(P(x),P(y))
///   de(x, A(x))   <= (K-1) |1|_{P(x)}
/// All checked in integers after scaling by `K`.
pub fn pooling_bounds_suite(pairs: usize, seed: u64) -> SuiteReport {
    let mut rep = SuiteReport::new("pooling-bounds");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for case in 0..pairs {
        rep.cases += 1;
        let k = [2usize, 3, 4][rng.random_range(0..3)];
        let draw = |rng: &mut ChaCha8Rng| -> Vec<u8> {
            let blocks = rng.random_range(0..=64 / k);
            (0..k * blocks).map(|_| rng.random_range(0..=1u8)).collect()
        };
        let x = draw(&mut rng);
        let y = draw(&mut rng);
        let px = pool_bits(&x, k);
        let py = pool_bits(&y, k);
        let ax = replicate(&px, k);
        let ay = replicate(&py, k);

        let (m, n) = (x.len() as i64, y.len() as i64);
        let de = edit_distance(&x, &y) as i64;
        let dp = edit_distance(&px, &py) as i64;
        let da = edit_distance(&ax, &ay) as i64;
        let ones_px = px.iter().filter(|&&b| b == 1).count() as i64;
        let ones_py = py.iter().filter(|&&b| b == 1).count() as i64;
        let ki = k as i64;
        let ctx = format!("case {case}: K={k} de={de} dp={dp} M={m} N={n}");

        if ki * dp > ki * de + (ki - 1) * (m + n) {
            rep.violation(format!("{ctx}: upper bound broken"));
        } else if ki * dp < ki * de - (ki - 1) * (m + n) {
            rep.violation(format!("{ctx}: length lower bound broken"));
        } else if ki * dp < de - (ki - 1) * (ones_px + ones_py) {
            rep.violation(format!("{ctx}: ones lower bound broken"));
        } else if da > ki * dp {
            rep.violation(format!("{ctx}: replication bound broken (da={da})"));
        } else if edit_distance(&x, &ax) as i64 > (ki - 1) * ones_px {
            rep.violation(format!("{ctx}: self-replication bound broken"));
        }
    }
    rep
}

const STEP: Real = 1e-5;
const GRAD_TOL: Real = 1e-4;
/// Inputs this close to a non-differentiable point (max ties, ReLU and
/// hinge boundaries) are resampled: a finite-difference step must not cross
/// a kink.
const KINK_MARGIN: Real = 1e-3;

fn rel_err(a: Real, n: Real) -> Real {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
}

fn dot(a: &[Real], b: &[Real]) -> Real {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn fill(slice: &mut [Real], rng: &mut ChaCha8Rng) {
    for v in slice {
        *v = rng.random_range(-1.0..1.0);
    }
}

struct OpCheck {
    name: &'static str,
    instances: usize,
    max_rel: Real,
    violations: usize,
}

impl OpCheck {
    fn new(name: &'static str) -> Self {
        OpCheck {
            name,
            instances: 0,
            max_rel: 0.0,
            violations: 0,
        }
    }

    fn record(&mut self, worst: Real) {
        self.instances += 1;
        self.max_rel = self.max_rel.max(worst);
        if !(worst < GRAD_TOL) {
            self.violations += 1;
        }
    }

    fn fold_into(self, rep: &mut SuiteReport) {
        rep.cases += self.instances;
        rep.violations += self.violations;
        rep.details.push(format!(
            "{}: {} instances, max relative error {:.3e}",
            self.name, self.instances, self.max_rel
        ));
    }
}

/// Central difference of `f` along coordinate `i` of `theta`.
fn central<F: FnMut(&[Real]) -> Real>(theta: &[Real], i: usize, mut f: F) -> Real {
    let mut t = theta.to_vec();
    t[i] = theta[i] + STEP;
    let hi = f(&t);
    t[i] = theta[i] - STEP;
    let lo = f(&t);
    (hi - lo) / (2.0 * STEP)
}

fn gradcheck_conv(instances: usize, rng: &mut ChaCha8Rng) -> OpCheck {
    let mut op = OpCheck::new("conv1d");
    for _ in 0..instances {
        let in_ch = rng.random_range(1..=3);
        let out_ch = rng.random_range(1..=3);
        let width = rng.random_range(3..=8);
        let mut conv = Conv1d::zeros(out_ch, in_ch, 3).expect("odd positive kernel");
        fill(&mut conv.weight, rng);
        fill(&mut conv.bias, rng);
        let mut x = Tensor2::zeros(in_ch, width);
        fill(x.data_mut(), rng);
        let mut r = Tensor2::zeros(out_ch, width);
        fill(r.data_mut(), rng);

        let (gx, gw, gb) = conv1d_backward(&x, &conv, &r).expect("matching shapes");
        let mut worst: Real = 0.0;
        for i in 0..x.data().len() {
            let num = central(x.data(), i, |t| {
                let xt = Tensor2::from_data(in_ch, width, t.to_vec()).expect("same shape");
                dot(conv1d(&xt, &conv).expect("matching shapes").data(), r.data())
            });
            worst = worst.max(rel_err(gx.data()[i], num));
        }
        for i in 0..conv.weight.len() {
            let num = central(&conv.weight, i, |t| {
                let mut c = conv.clone();
                c.weight = t.to_vec();
                dot(conv1d(&x, &c).expect("matching shapes").data(), r.data())
            });
            worst = worst.max(rel_err(gw[i], num));
        }
        for i in 0..conv.bias.len() {
            let num = central(&conv.bias, i, |t| {
                let mut c = conv.clone();
                c.bias = t.to_vec();
                dot(conv1d(&x, &c).expect("matching shapes").data(), r.data())
            });
            worst = worst.max(rel_err(gb[i], num));
        }
        op.record(worst);
    }
    op
}

/// True when every pooling window's two largest values are separated enough
/// for finite differences to stay on one side of the max.
fn pool_windows_separated(x: &Tensor2, k: usize) -> bool {
    for c in 0..x.channels() {
        let row = x.row(c);
        for t in 0..x.width().div_ceil(k) {
            let w = &row[t * k..((t + 1) * k).min(x.width())];
            if w.len() < 2 {
                continue;
            }
            let mut top = Real::NEG_INFINITY;
            let mut second = Real::NEG_INFINITY;
            for &v in w {
                if v > top {
                    second = top;
                    top = v;
                } else if v > second {
                    second = v;
                }
            }
            if top - second < KINK_MARGIN {
                return false;
            }
        }
    }
    true
}

fn gradcheck_pool(instances: usize, rng: &mut ChaCha8Rng, max: bool) -> OpCheck {
    let mut op = OpCheck::new(if max { "maxpool1d" } else { "avgpool1d" });
    for _ in 0..instances {
        let ch = rng.random_range(1..=2);
        let width = rng.random_range(4..=9);
        let k = rng.random_range(2..=3);
        let x = loop {
            let mut x = Tensor2::zeros(ch, width);
            fill(x.data_mut(), rng);
            if !max || pool_windows_separated(&x, k) {
                break x;
            }
        };
        let mut r = Tensor2::zeros(ch, width.div_ceil(k));
        fill(r.data_mut(), rng);

        let gx = if max {
            maxpool1d_backward(&x, k, &r)
        } else {
            avgpool1d_backward(&x, k, &r)
        }
        .expect("matching shapes");
        let mut worst: Real = 0.0;
        for i in 0..x.data().len() {
            let num = central(x.data(), i, |t| {
                let xt = Tensor2::from_data(ch, width, t.to_vec()).expect("same shape");
                let out = if max {
                    maxpool1d(&xt, k)
                } else {
                    avgpool1d(&xt, k)
                }
                .expect("positive window");
                dot(out.data(), r.data())
            });
            worst = worst.max(rel_err(gx.data()[i], num));
        }
        op.record(worst);
    }
    op
}

fn gradcheck_linear(instances: usize, rng: &mut ChaCha8Rng) -> OpCheck {
    let mut op = OpCheck::new("linear");
    for _ in 0..instances {
        let in_dim = rng.random_range(2..=6);
        let out_dim = rng.random_range(1..=4);
        let mut lin = Linear::zeros(out_dim, in_dim).expect("positive dims");
        fill(&mut lin.weight, rng);
        fill(&mut lin.bias, rng);
        let mut x = vec![0.0; in_dim];
        fill(&mut x, rng);
        let mut r = vec![0.0; out_dim];
        fill(&mut r, rng);

        let (gx, gw, gb) = linear_backward(&x, &lin, &r).expect("matching shapes");
        let mut worst: Real = 0.0;
        for i in 0..x.len() {
            let num = central(&x, i, |t| dot(&linear(t, &lin).expect("matching shapes"), &r));
            worst = worst.max(rel_err(gx[i], num));
        }
        for i in 0..lin.weight.len() {
            let num = central(&lin.weight, i, |t| {
                let mut l = lin.clone();
                l.weight = t.to_vec();
                dot(&linear(&x, &l).expect("matching shapes"), &r)
            });
            worst = worst.max(rel_err(gw[i], num));
        }
        for i in 0..lin.bias.len() {
            let num = central(&lin.bias, i, |t| {
                let mut l = lin.clone();
                l.bias = t.to_vec();
                dot(&linear(&x, &l).expect("matching shapes"), &r)
            });
            worst = worst.max(rel_err(gb[i], num));
        }
        op.record(worst);
    }
    op
}

fn gradcheck_relu(instances: usize, rng: &mut ChaCha8Rng) -> OpCheck {
    let mut op = OpCheck::new("relu");
    for _ in 0..instances {
        let ch = rng.random_range(1..=2);
        let width = rng.random_range(2..=8);
        let x = loop {
            let mut x = Tensor2::zeros(ch, width);
            fill(x.data_mut(), rng);
            if x.data().iter().all(|v| v.abs() > KINK_MARGIN) {
                break x;
            }
        };
        let mut r = Tensor2::zeros(ch, width);
        fill(r.data_mut(), rng);

        let gx = relu_backward(&x, &r).expect("matching shapes");
        let mut worst: Real = 0.0;
        for i in 0..x.data().len() {
            let num = central(x.data(), i, |t| {
                let xt = Tensor2::from_data(ch, width, t.to_vec()).expect("same shape");
                dot(relu(&xt).data(), r.data())
            });
            worst = worst.max(rel_err(gx.data()[i], num));
        }
        op.record(worst);
    }
    op
}

struct LossInstance {
    ya: Vec<Real>,
    yp: Vec<Real>,
    yn: Vec<Real>,
    d_ap: Real,
    d_an: Real,
    d_pn: Real,
}

/// Draw triplet embeddings far from every kink of both loss terms: the
/// pairwise distances stay away from zero, from the hinge boundary, and
/// from the approximation targets.
fn draw_loss_instance(rng: &mut ChaCha8Rng) -> LossInstance {
    loop {
        let dim = rng.random_range(3..=6);
        let mut ya = vec![0.0; dim];
        let mut yp = vec![0.0; dim];
        let mut yn = vec![0.0; dim];
        fill(&mut ya, rng);
        fill(&mut yp, rng);
        fill(&mut yn, rng);
        let d_ap = rng.random_range(0..=10) as Real;
        let d_an = d_ap + rng.random_range(0..=10) as Real;
        let d_pn = rng.random_range(0..=10) as Real;

        let dist_ap = crate::tensor::l2_distance(&ya, &yp);
        let dist_an = crate::tensor::l2_distance(&ya, &yn);
        let dist_pn = crate::tensor::l2_distance(&yp, &yn);
        let eta = d_ap - d_an;
        let clear = [dist_ap, dist_an, dist_pn].iter().all(|&d| d > KINK_MARGIN)
            && (dist_ap - dist_an - eta).abs() > KINK_MARGIN
            && (dist_ap - d_ap).abs() > KINK_MARGIN
            && (dist_an - d_an).abs() > KINK_MARGIN
            && (dist_pn - d_pn).abs() > KINK_MARGIN;
        if clear {
            return LossInstance {
                ya,
                yp,
                yn,
                d_ap,
                d_an,
                d_pn,
            };
        }
    }
}

fn gradcheck_losses(instances: usize, rng: &mut ChaCha8Rng) -> (OpCheck, OpCheck) {
    let mut trip = OpCheck::new("triplet-loss");
    let mut approx = OpCheck::new("approx-loss");
    for _ in 0..instances {
        let inst = draw_loss_instance(rng);
        let dim = inst.ya.len();

        // alpha = 0 isolates the triplet term; subtracting it from the
        // alpha = 1 gradients isolates the approximation term.
        let (_, ta, tp, tn) = combined_loss_grads(
            &inst.ya, &inst.yp, &inst.yn, inst.d_ap, inst.d_an, inst.d_pn, 0.0,
        );
        let (_, ca, cp, cn) = combined_loss_grads(
            &inst.ya, &inst.yp, &inst.yn, inst.d_ap, inst.d_an, inst.d_pn, 1.0,
        );

        let mut theta = Vec::with_capacity(3 * dim);
        theta.extend_from_slice(&inst.ya);
        theta.extend_from_slice(&inst.yp);
        theta.extend_from_slice(&inst.yn);
        let analytic_trip: Vec<Real> = ta.iter().chain(&tp).chain(&tn).copied().collect();
        let analytic_approx: Vec<Real> = ca
            .iter()
            .chain(&cp)
            .chain(&cn)
            .zip(&analytic_trip)
            .map(|(c, t)| c - t)
            .collect();

        let mut worst_trip: Real = 0.0;
        let mut worst_approx: Real = 0.0;
        for i in 0..theta.len() {
            let num_trip = central(&theta, i, |t| {
                triplet_loss(&t[..dim], &t[dim..2 * dim], &t[2 * dim..], inst.d_ap, inst.d_an)
            });
            worst_trip = worst_trip.max(rel_err(analytic_trip[i], num_trip));
            let num_approx = central(&theta, i, |t| {
                approx_loss(
                    &t[..dim],
                    &t[dim..2 * dim],
                    &t[2 * dim..],
                    inst.d_ap,
                    inst.d_an,
                    inst.d_pn,
                )
            });
            worst_approx = worst_approx.max(rel_err(analytic_approx[i], num_approx));
        }
        trip.record(worst_trip);
        approx.record(worst_approx);
    }
    (trip, approx)
}

/// True when every ReLU input and every applied pooling window in the trace
/// is clear of its kink.
fn trace_is_smooth(trace: &ForwardTrace, cfg: &ModelConfig) -> bool {
    for pre in &trace.pre_act {
        if pre.data().iter().any(|v| v.abs() <= KINK_MARGIN) {
            return false;
        }
    }
    for (l, &pooled) in trace.pooled.iter().enumerate() {
        if pooled && !pool_windows_separated(&trace.acts[l], cfg.pool_factor) {
            return false;
        }
    }
    true
}

fn gradcheck_model(instances: usize, rng: &mut ChaCha8Rng) -> OpCheck {
    let mut op = OpCheck::new("composed-model");
    let alphabet = Alphabet::new(b"AC".to_vec()).expect("nonempty alphabet");
    let mut cfg = ModelConfig::with_defaults(alphabet.rows(), 8);
    cfg.n_conv_layers = 2;
    cfg.kernels_per_layer = 2;
    cfg.output_dim = 3;
    cfg.validate().expect("small test model");

    for _ in 0..instances {
        let (params, s, trace) = loop {
            let params = init_model(&cfg, rng.random()).expect("valid config");
            let len = rng.random_range(1..=8);
            let s: Vec<u8> = (0..len).map(|_| b"AC"[rng.random_range(0..2)]).collect();
            let trace = forward_trace(&s, &params, &cfg, &alphabet).expect("string fits width");
            if trace_is_smooth(&trace, &cfg) {
                break (params, s, trace);
            }
        };
        let mut r = vec![0.0; cfg.output_dim];
        fill(&mut r, rng);

        let analytic = backward_trace(&trace, &params, &cfg, &r)
            .expect("trace from these params")
            .to_flat();
        let theta = params.to_flat();
        let mut worst: Real = 0.0;
        for i in 0..theta.len() {
            let num = central(&theta, i, |t| {
                let mut p = params.clone();
                p.set_from_flat(t).expect("same layout");
                let out = crate::model::embed(&s, &p, &cfg, &alphabet).expect("same shapes");
                dot(&out, &r)
            });
            worst = worst.max(rel_err(analytic[i], num));
        }
        op.record(worst);
    }
    op
}

/// Finite-difference gradient checks (64-bit, central differences,
/// step 1e-5) for each differentiable block and for a composed two-layer
/// model differentiated through its parameters. Inputs near kinks are
/// resampled; a case fails when any coordinate's relative error reaches
/// 1e-4.
pub fn gradcheck_suite(instances_per_op: usize, seed: u64) -> SuiteReport {
    let mut rep = SuiteReport::new("gradient-checks");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gradcheck_conv(instances_per_op, &mut rng).fold_into(&mut rep);
    gradcheck_pool(instances_per_op, &mut rng, true).fold_into(&mut rep);
    gradcheck_pool(instances_per_op, &mut rng, false).fold_into(&mut rep);
    gradcheck_linear(instances_per_op, &mut rng).fold_into(&mut rep);
    gradcheck_relu(instances_per_op, &mut rng).fold_into(&mut rep);
    let (trip, approx) = gradcheck_losses(instances_per_op, &mut rng);
    trip.fold_into(&mut rep);
    approx.fold_into(&mut rep);
    gradcheck_model(instances_per_op, &mut rng).fold_into(&mut rep);
    rep
}

/// Statistical check that Hamming distance after the CGK embedding rarely
/// falls below edit distance: the suite fails when more than 5% of sampled
/// pairs violate the lower bound.
pub fn cgk_distortion_suite(pairs: usize, seed: u64) -> SuiteReport {
    let mut rep = SuiteReport::new("cgk-distortion");
    let mut strings = uniform_strings(400, 1, 64, b"ACGT", seed ^ 0x9e37_79b9_7f4a_7c15);
    strings.extend(clustered_corpus(
        40,
        10,
        8,
        58,
        6,
        b"ACGT",
        seed ^ 0x517c_c1b7_2722_0a95,
    ));
    let ds = StringDataset::from_strings(strings).expect("nonempty corpus");
    let report = match cgk_distortion_report(&ds, pairs, seed) {
        Ok(r) => r,
        Err(e) => {
            rep.cases = pairs;
            rep.violation(format!("distortion report failed: {e}"));
            return rep;
        }
    };
    rep.cases = report.n_pairs + report.zero_pairs;
    let rate = report.lower_violation_rate();
    if rate > 0.05 {
        rep.violation(format!(
            "lower-bound violation rate {rate:.4} exceeds 0.05"
        ));
    }
    rep.details.push(format!(
        "violations {}/{} informative pairs (rate {:.4}, limit 0.05); {} zero-distance pairs",
        report.lower_violations, report.n_pairs, rate, report.zero_pairs
    ));
    rep.details.push(format!(
        "hamming/edit ratio min {:.3} mean {:.3} max {:.3}",
        report.min_ratio, report.mean_ratio, report.max_ratio
    ));
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn onehot_bounds_hold_on_random_pairs() {
        let rep = onehot_row_bounds_suite(300, 5);
        assert_eq!(rep.cases, 300);
        assert!(rep.passed(), "violations: {:?}", rep.details);
    }

    #[test]
    fn pooling_bounds_hold_on_random_pairs() {
        let rep = pooling_bounds_suite(300, 7);
        assert_eq!(rep.cases, 300);
        assert!(rep.passed(), "violations: {:?}", rep.details);
    }

    #[test]
    fn suites_are_seed_deterministic() {
        let a = onehot_row_bounds_suite(50, 9);
        let b = onehot_row_bounds_suite(50, 9);
        assert_eq!(a.cases, b.cases);
        assert_eq!(a.violations, b.violations);
        assert_eq!(a.details, b.details);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let rep = gradcheck_suite(4, 11);
        // Eight blocks, four instances each.
        assert_eq!(rep.cases, 32);
        assert!(rep.passed(), "violations: {:?}", rep.details);
        assert_eq!(rep.details.len(), 8);
    }

    #[test]
    fn cgk_lower_bound_violations_are_rare() {
        let rep = cgk_distortion_suite(400, 13);
        assert_eq!(rep.cases, 400);
        assert!(rep.passed(), "details: {:?}", rep.details);
    }
}
