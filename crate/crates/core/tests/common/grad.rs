//! Central finite-difference checks of every backward kernel, in f64.
//!
//! Each case draws a random shape and random values in [-1, 1], reduces the
//! layer output to a scalar through fixed random weights, and compares the
//! analytic gradient of every input and parameter element against
//! `(L(θ + h) - L(θ - h)) / 2h`.

use consgrunet::layers::*;
use consgrunet::model::{build_model, ConvBlockConfig, Params};
use consgrunet::tensor::Tensor;
use consgrunet::{Model64, ModelConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-3;
pub const CASES: u64 = 24;

type T64 = Tensor<f64>;

#[derive(Clone, Copy, Debug)]
pub struct Outcome {
    pub cases: u64,
    pub checked: usize,
    pub max_rel: f64,
}

impl Outcome {
    fn new() -> Self {
        Outcome { cases: 0, checked: 0, max_rel: 0.0 }
    }

    fn merge(&mut self, analytic: &[f64], numeric: &[f64]) {
        assert_eq!(analytic.len(), numeric.len());
        for (&a, &n) in analytic.iter().zip(numeric) {
            self.max_rel = self.max_rel.max(rel_err(a, n));
            self.checked += 1;
        }
    }
}

/// |a - n| / max(|a|, |n|, 1e-4); the floor keeps vanishing gradients from
/// dividing noise by noise.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-4)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(r: &mut ChaCha8Rng, shape: &[usize]) -> T64 {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn weighted_sum(y: &T64, w: &T64) -> f64 {
    y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
}

/// Central differences of `loss` over every element exposed by `slot`.
fn numeric<S: Clone>(state: &S, slot: fn(&mut S) -> &mut [f64], loss: &dyn Fn(&S) -> f64) -> Vec<f64> {
    let mut probe = state.clone();
    let n = slot(&mut probe).len();
    (0..n)
        .map(|i| {
            let orig = slot(&mut probe)[i];
            slot(&mut probe)[i] = orig + H;
            let up = loss(&probe);
            slot(&mut probe)[i] = orig - H;
            let down = loss(&probe);
            slot(&mut probe)[i] = orig;
            (up - down) / (2.0 * H)
        })
        .collect()
}

#[derive(Clone)]
struct ConvCase {
    p: Conv1dParams<f64>,
    x: T64,
    w: T64,
}

pub fn conv1d_suite(seed: u64) -> Outcome {
    let mut out = Outcome::new();
    for case in 0..CASES {
        let mut r = rng(seed ^ (case * 7919));
        let (c_in, c_out) = (r.gen_range(1..=4), r.gen_range(1..=4));
        let (k, stride, padding) = (r.gen_range(1..=4), r.gen_range(1..=3), r.gen_range(0..=2));
        let t_in = r.gen_range(k.max(1)..k + 7);
        let p = Conv1dParams::new(uniform(&mut r, &[c_out, c_in, k]), uniform(&mut r, &[c_out]), stride, padding)
            .unwrap();
        let x = uniform(&mut r, &[c_in, t_in]);
        let (y, cache) = conv1d_forward(&p, &x).unwrap();
        let w = uniform(&mut r, y.shape());
        let g = conv1d_backward(&p, &cache, &w).unwrap();
        let loss = |s: &ConvCase| weighted_sum(&conv1d_forward(&s.p, &s.x).unwrap().0, &s.w);
        let s = ConvCase { p, x, w };
        out.merge(g.x.data(), &numeric(&s, |s| s.x.data_mut(), &loss));
        out.merge(g.weights.data(), &numeric(&s, |s| s.p.weights.data_mut(), &loss));
        out.merge(g.bias.data(), &numeric(&s, |s| s.p.bias.data_mut(), &loss));
        out.cases += 1;
    }
    out
}

#[derive(Clone)]
struct SkipCase {
    p: GatedSkipParams<f64>,
    main: T64,
    skip: T64,
    w: T64,
}

pub fn gated_skip_suite(seed: u64) -> Outcome {
    let mut out = Outcome::new();
    for case in 0..CASES {
        let mut r = rng(seed ^ (case * 104_729));
        let c_out = r.gen_range(1..=4);
        // every other case exercises the identity skip
        let c_in = if case % 2 == 0 { c_out } else { r.gen_range(1..=4) };
        let t = r.gen_range(1..=6);
        let projection = (c_in != c_out).then(|| {
            Conv1dParams::new(uniform(&mut r, &[c_out, c_in, 1]), uniform(&mut r, &[c_out]), 1, 0).unwrap()
        });
        let gate = uniform(&mut r, &[c_out]).map(|v| 2.0 * v);
        let p = GatedSkipParams::new(gate, projection).unwrap();
        let main = uniform(&mut r, &[c_out, t]);
        let skip = uniform(&mut r, &[c_in, t]);
        let w = uniform(&mut r, &[c_out, t]);
        let (_, cache) = gated_skip_apply(&p, &main, &skip).unwrap();
        let g = gated_skip_backward(&p, &cache, &w).unwrap();
        let loss = |s: &SkipCase| weighted_sum(&gated_skip_apply(&s.p, &s.main, &s.skip).unwrap().0, &s.w);
        let s = SkipCase { p, main, skip, w };
        out.merge(g.main.data(), &numeric(&s, |s| s.main.data_mut(), &loss));
        out.merge(g.skip_in.data(), &numeric(&s, |s| s.skip.data_mut(), &loss));
        out.merge(g.gate_logits.data(), &numeric(&s, |s| s.p.gate_logits.data_mut(), &loss));
        match (&g.projection, &s.p.projection) {
            (Some((gw, gb)), Some(_)) => {
                out.merge(gw.data(), &numeric(&s, |s| s.p.projection.as_mut().unwrap().weights.data_mut(), &loss));
                out.merge(gb.data(), &numeric(&s, |s| s.p.projection.as_mut().unwrap().bias.data_mut(), &loss));
            }
            (None, None) => {}
            _ => panic!("projection gradient presence must match the parameters"),
        }
        out.cases += 1;
    }
    out
}

#[derive(Clone)]
struct GruCase {
    p: GruParams<f64>,
    x: T64,
    h0: T64,
    w: T64,
}

fn gru_case(r: &mut ChaCha8Rng, steps: usize, input: usize, hidden: usize) -> GruCase {
    let mut p = GruParams::zeros(input, hidden).unwrap();
    for t in p.tensors_mut() {
        let shape = t.shape().to_vec();
        *t = uniform(r, &shape);
    }
    GruCase {
        p,
        x: uniform(r, &[steps, input]),
        h0: uniform(r, &[hidden]),
        w: uniform(r, &[steps, hidden]),
    }
}

fn check_gru(out: &mut Outcome, s: &GruCase) {
    let (_, cache) = gru_forward(&s.p, &s.x, &s.h0).unwrap();
    let (gx, gp, gh0) = gru_backward(&s.p, &cache, &s.w).unwrap();
    // loss touches every hidden state, so gradients flow through time
    let loss = |s: &GruCase| weighted_sum(&gru_forward(&s.p, &s.x, &s.h0).unwrap().0, &s.w);
    out.merge(gx.data(), &numeric(s, |s| s.x.data_mut(), &loss));
    out.merge(gh0.data(), &numeric(s, |s| s.h0.data_mut(), &loss));
    let slots: [fn(&mut GruCase) -> &mut [f64]; 9] = [
        |s| s.p.w_z.data_mut(),
        |s| s.p.w_r.data_mut(),
        |s| s.p.w_h.data_mut(),
        |s| s.p.u_z.data_mut(),
        |s| s.p.u_r.data_mut(),
        |s| s.p.u_h.data_mut(),
        |s| s.p.b_z.data_mut(),
        |s| s.p.b_r.data_mut(),
        |s| s.p.b_h.data_mut(),
    ];
    for (analytic, slot) in gp.tensors().iter().zip(slots) {
        out.merge(analytic.data(), &numeric(s, slot, &loss));
    }
    out.cases += 1;
}

pub fn gru_suite(seed: u64) -> Outcome {
    let mut out = Outcome::new();
    for case in 0..CASES {
        let mut r = rng(seed ^ (case * 15_485_863));
        let (steps, input, hidden) = if case == 0 {
            (3, 2, 3)
        } else {
            (r.gen_range(1..=5), r.gen_range(1..=4), r.gen_range(1..=4))
        };
        check_gru(&mut out, &gru_case(&mut r, steps, input, hidden));
    }
    out
}

#[derive(Clone)]
struct DenseCase {
    p: DenseParams<f64>,
    x: T64,
    w: T64,
}

pub fn dense_suite(seed: u64) -> Outcome {
    let mut out = Outcome::new();
    for case in 0..CASES {
        let mut r = rng(seed ^ (case * 31_337));
        let (i, o) = if case == 0 { (4, 3) } else { (r.gen_range(1..=6), r.gen_range(1..=6)) };
        let p = DenseParams::new(uniform(&mut r, &[o, i]), uniform(&mut r, &[o])).unwrap();
        let x = uniform(&mut r, &[i]);
        let w = uniform(&mut r, &[o]);
        let (_, cache) = dense_forward(&p, &x).unwrap();
        let g = dense_backward(&p, &cache, &w).unwrap();
        let loss = |s: &DenseCase| weighted_sum(&dense_forward(&s.p, &s.x).unwrap().0, &s.w);
        let s = DenseCase { p, x, w };
        out.merge(g.x.data(), &numeric(&s, |s| s.x.data_mut(), &loss));
        out.merge(g.weights.data(), &numeric(&s, |s| s.p.weights.data_mut(), &loss));
        out.merge(g.bias.data(), &numeric(&s, |s| s.p.bias.data_mut(), &loss));
        out.cases += 1;
    }
    out
}

#[derive(Clone)]
struct CeCase {
    logits: T64,
    targets: Vec<usize>,
}

pub fn softmax_ce_suite(seed: u64) -> Outcome {
    let mut out = Outcome::new();
    for case in 0..CASES {
        let mut r = rng(seed ^ (case * 6_700_417));
        let (b, k) = (r.gen_range(1..=4), r.gen_range(2..=6));
        let logits = uniform(&mut r, &[b, k]).map(|v| 3.0 * v);
        let targets = (0..b).map(|_| r.gen_range(0..k)).collect();
        let s = CeCase { logits, targets };
        let (_, g) = softmax_cross_entropy(&s.logits, &s.targets).unwrap();
        let loss = |s: &CeCase| softmax_cross_entropy(&s.logits, &s.targets).unwrap().0;
        out.merge(g.data(), &numeric(&s, |s| s.logits.data_mut(), &loss));
        out.cases += 1;
    }
    out
}

/// The tiny end-to-end configuration: 2 channels, 6 samples, one block,
/// 3 hidden GRU units.
pub fn tiny_config(seed: u64, out_channels: usize) -> ModelConfig {
    ModelConfig {
        input_channels: 2,
        window_len: 6,
        conv_blocks: vec![ConvBlockConfig::new(out_channels, 3, 1, 1)],
        gru_hidden: 3,
        dense_hidden: 4,
        num_classes: 3,
        seed,
    }
}

/// Smallest |pre-activation| over every ReLU of the network, recomputed
/// with the public kernels. Also checks the recomputed logits.
fn relu_margin(m: &Model64, x: &T64) -> f64 {
    let relu = |v: f64| v.max(0.0);
    let mut margin = f64::INFINITY;
    let mut h = x.clone();
    for b in &m.params.blocks {
        let (pre, _) = conv1d_forward(&b.conv, &h).unwrap();
        margin = pre.data().iter().fold(margin, |a, v| a.min(v.abs()));
        h = gated_skip_apply(&b.skip, &pre.map(relu), &h).unwrap().0;
    }
    let h0 = Tensor::zeros(&[m.config.gru_hidden]).unwrap();
    let (seq, _) = gru_forward(&m.params.gru, &h.transpose().unwrap(), &h0).unwrap();
    let hid = m.config.gru_hidden;
    let last = Tensor::from_vec(seq.data()[seq.len() - hid..].to_vec()).unwrap();
    let (pre, _) = dense_forward(&m.params.dense, &last).unwrap();
    margin = pre.data().iter().fold(margin, |a, v| a.min(v.abs()));
    let (logits, _) = dense_forward(&m.params.head, &pre.map(relu)).unwrap();
    assert_eq!(logits, m.forward_normalized(x).unwrap().0);
    margin
}

#[derive(Clone)]
struct E2eCase {
    params: Params<f64>,
    model: Model64,
    x: T64,
    target: usize,
}

impl E2eCase {
    fn loss(&self) -> f64 {
        let mut m = self.model.clone();
        m.params = self.params.clone();
        let (logits, _) = m.forward_normalized(&self.x).unwrap();
        let k = logits.len();
        softmax_cross_entropy(&logits.reshape(vec![1, k]).unwrap(), &[self.target]).unwrap().0
    }
}

/// Whole-network check: cross-entropy of one window, every parameter.
/// Draws whose ReLU pre-activations come within 0.02 of the kink are
/// redrawn, since a finite difference straddling the kink is meaningless.
pub fn end_to_end_suite(seed: u64) -> Outcome {
    let mut out = Outcome::new();
    let mut draw = 0u64;
    while out.cases < CASES {
        draw += 1;
        let mut r = rng(seed ^ (draw * 2_147_483_647));
        let out_channels = if draw.is_multiple_of(2) { 2 } else { 3 };
        let mut model: Model64 = build_model(&tiny_config(seed + draw, out_channels)).unwrap();
        // non-zero biases and open-ish gates so every path carries gradient
        for t in model.params.tensors_mut() {
            let shape = t.shape().to_vec();
            *t = uniform(&mut r, &shape);
        }
        let x = uniform(&mut r, &[2, 6]);
        if relu_margin(&model, &x) < 0.02 {
            continue;
        }
        let target = r.gen_range(0..3);
        let (logits, cache) = model.forward_normalized(&x).unwrap();
        let (_, g) = softmax_cross_entropy(&logits.reshape(vec![1, 3]).unwrap(), &[target]).unwrap();
        let grads = model.backward_window(&cache, &g.reshape(vec![3]).unwrap()).unwrap();
        let case = E2eCase { params: model.params.clone(), model, x, target };
        let base = case.params.clone();
        for (ti, analytic) in grads.tensors().iter().enumerate() {
            let n = analytic.len();
            let numeric: Vec<f64> = (0..n)
                .map(|i| {
                    let mut probe = case.clone();
                    let mut bump = |d: f64| {
                        probe.params = base.clone();
                        probe.params.tensors_mut()[ti].data_mut()[i] += d;
                        probe.loss()
                    };
                    (bump(H) - bump(-H)) / (2.0 * H)
                })
                .collect();
            out.merge(analytic.data(), &numeric);
        }
        out.cases += 1;
    }
    out
}
