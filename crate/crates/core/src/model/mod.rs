//! Network assembly: gated conv blocks → GRU → dense → head.

mod config;
mod format;

use std::collections::BTreeMap;

pub use config::{ConvBlockConfig, ModelConfig, DEFAULT_GRU_HIDDEN};
pub use format::{load_model, model_from_bytes, model_to_bytes, save_model, CSGN_MAGIC, CSGN_VERSION};

use crate::error::{Error, Result};
use crate::layers::{
    conv1d_backward, conv1d_forward, dense_backward, dense_forward, gated_skip_apply,
    gated_skip_backward, gru_backward, gru_forward, Conv1dCache, Conv1dParams, DenseCache,
    DenseParams, GatedSkipCache, GatedSkipParams, GruCache, GruParams, Initializer,
};
use crate::scalar::relu;
use crate::tensor::{argmax, Tensor};
use crate::Scalar;

/// A convolution and the gated skip that wraps it.
#[derive(Clone, Debug, PartialEq)]
pub struct Block<T> {
    pub conv: Conv1dParams<T>,
    pub skip: GatedSkipParams<T>,
}

/// Every learnable tensor of the network. Gradients use the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<T> {
    pub blocks: Vec<Block<T>>,
    pub gru: GruParams<T>,
    pub dense: DenseParams<T>,
    pub head: DenseParams<T>,
}

const GRU_NAMES: [&str; 9] = [
    "gru.w_z", "gru.w_r", "gru.w_h", "gru.u_z", "gru.u_r", "gru.u_h", "gru.b_z", "gru.b_r",
    "gru.b_h",
];

impl<T: Scalar> Params<T> {
    /// Tensors with their record names, in the canonical file order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("block{i}.conv.w"), &b.conv.weights));
            out.push((format!("block{i}.conv.b"), &b.conv.bias));
            out.push((format!("block{i}.gate"), &b.skip.gate_logits));
            if let Some(p) = &b.skip.projection {
                out.push((format!("block{i}.proj.w"), &p.weights));
                out.push((format!("block{i}.proj.b"), &p.bias));
            }
        }
        for (name, t) in GRU_NAMES.iter().zip(self.gru.tensors()) {
            out.push((name.to_string(), t));
        }
        out.push(("dense.w".into(), &self.dense.weights));
        out.push(("dense.b".into(), &self.dense.bias));
        out.push(("head.w".into(), &self.head.weights));
        out.push(("head.b".into(), &self.head.bias));
        out
    }

    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        self.named_tensors().into_iter().map(|(_, t)| t).collect()
    }

    /// Same order as [`Params::named_tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            out.push(&mut b.conv.weights);
            out.push(&mut b.conv.bias);
            out.push(&mut b.skip.gate_logits);
            if let Some(p) = &mut b.skip.projection {
                out.push(&mut p.weights);
                out.push(&mut p.bias);
            }
        }
        out.extend(self.gru.tensors_mut());
        out.push(&mut self.dense.weights);
        out.push(&mut self.dense.bias);
        out.push(&mut self.head.weights);
        out.push(&mut self.head.bias);
        out
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.data_mut().fill(T::zero());
        }
        z
    }

    /// `self += other`, element by element in canonical order.
    pub fn accumulate(&mut self, other: &Params<T>) -> Result<()> {
        let src = other.tensors();
        let mut dst = self.tensors_mut();
        if src.len() != dst.len() {
            return Err(Error::dim("parameter sets have different layouts"));
        }
        for (d, s) in dst.iter_mut().zip(src) {
            if d.shape() != s.shape() {
                return Err(Error::dim(format!(
                    "cannot accumulate {:?} into {:?}",
                    s.shape(),
                    d.shape()
                )));
            }
            for (a, &b) in d.data_mut().iter_mut().zip(s.data()) {
                *a += b;
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> Params<U> {
        let conv = |c: &Conv1dParams<T>| Conv1dParams {
            weights: c.weights.cast(),
            bias: c.bias.cast(),
            stride: c.stride,
            padding: c.padding,
        };
        let dense = |d: &DenseParams<T>| DenseParams {
            weights: d.weights.cast(),
            bias: d.bias.cast(),
        };
        let g = &self.gru;
        Params {
            blocks: self
                .blocks
                .iter()
                .map(|b| Block {
                    conv: conv(&b.conv),
                    skip: GatedSkipParams {
                        gate_logits: b.skip.gate_logits.cast(),
                        projection: b.skip.projection.as_ref().map(conv),
                    },
                })
                .collect(),
            gru: GruParams {
                w_z: g.w_z.cast(),
                w_r: g.w_r.cast(),
                w_h: g.w_h.cast(),
                u_z: g.u_z.cast(),
                u_r: g.u_r.cast(),
                u_h: g.u_h.cast(),
                b_z: g.b_z.cast(),
                b_r: g.b_r.cast(),
                b_h: g.b_h.cast(),
            },
            dense: dense(&self.dense),
            head: dense(&self.head),
        }
    }
}

/// Per-channel input normalization, `(x - mean) / std`.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalizer<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

impl<T: Scalar> Normalizer<T> {
    pub fn identity(channels: usize) -> Self {
        Normalizer {
            mean: vec![T::zero(); channels],
            std: vec![T::one(); channels],
        }
    }

    pub fn validate(&self, channels: usize) -> Result<()> {
        if self.mean.len() != channels || self.std.len() != channels {
            return Err(Error::Config(format!(
                "normalizer has {}/{} entries for {channels} channels",
                self.mean.len(),
                self.std.len()
            )));
        }
        if self.std.iter().any(|s| s.is_nan() || *s <= T::zero() || !s.is_finite()) {
            return Err(Error::Config("normalizer std must be positive and finite".into()));
        }
        if self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Config("normalizer mean must be finite".into()));
        }
        Ok(())
    }

    /// Normalizes a `[channels × time]` window.
    pub fn apply(&self, w: &Tensor<T>) -> Result<Tensor<T>> {
        let &[c, t] = w.shape() else {
            return Err(Error::dim(format!("window must be rank 2, got {:?}", w.shape())));
        };
        if c != self.mean.len() {
            return Err(Error::dim(format!(
                "window has {c} channels, normalizer {}",
                self.mean.len()
            )));
        }
        let mut out = w.clone();
        for (ch, row) in out.data_mut().chunks_mut(t).enumerate() {
            let (m, s) = (self.mean[ch], self.std[ch]);
            row.iter_mut().for_each(|x| *x = (*x - m) / s);
        }
        Ok(out)
    }
}

/// Parameter totals per component.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamCount {
    pub total: usize,
    pub components: Vec<(String, usize)>,
}

/// A complete model: architecture, weights, input normalization, and free
/// form metadata carried in the file header.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState<T> {
    pub config: ModelConfig,
    pub params: Params<T>,
    pub normalizer: Normalizer<T>,
    pub meta: BTreeMap<String, String>,
}

struct BlockCache<T> {
    conv: Conv1dCache<T>,
    pre_relu: Tensor<T>,
    skip: GatedSkipCache<T>,
}

/// Intermediate values from [`ModelState::forward_window`] needed by the
/// backward pass.
pub struct ForwardCache<T> {
    config: ModelConfig,
    blocks: Vec<BlockCache<T>>,
    seq_len: usize,
    gru: GruCache<T>,
    dense: DenseCache<T>,
    dense_pre: Tensor<T>,
    head: DenseCache<T>,
}

/// Builds and seeds a model from `config`. Equal configs (including seed)
/// yield bit-identical parameters.
pub fn build_model<T: Scalar>(config: &ModelConfig) -> Result<ModelState<T>> {
    config.validate()?;
    let mut init = Initializer::new(config.seed);
    let mut blocks = Vec::with_capacity(config.conv_blocks.len());
    let mut c_in = config.input_channels;
    for b in &config.conv_blocks {
        let conv = Conv1dParams::init(&mut init, c_in, b.out_channels, b.kernel, b.stride, b.padding)?;
        let skip = GatedSkipParams::init(&mut init, c_in, b.out_channels)?;
        blocks.push(Block { conv, skip });
        c_in = b.out_channels;
    }
    let gru = GruParams::init(&mut init, c_in, config.gru_hidden)?;
    let dense = DenseParams::init(&mut init, config.gru_hidden, config.dense_hidden)?;
    let head = DenseParams::init(&mut init, config.dense_hidden, config.num_classes)?;
    Ok(ModelState {
        config: config.clone(),
        params: Params {
            blocks,
            gru,
            dense,
            head,
        },
        normalizer: Normalizer::identity(config.input_channels),
        meta: BTreeMap::new(),
    })
}

impl<T: Scalar> ModelState<T> {
    pub fn input_shape(&self) -> [usize; 2] {
        [self.config.input_channels, self.config.window_len]
    }

    /// Normalizes a `[channels × window_len]` window and runs the network.
    pub fn forward_window(&self, w: &Tensor<T>) -> Result<(Tensor<T>, ForwardCache<T>)> {
        self.check_window(w)?;
        let x = self.normalizer.apply(w)?;
        self.forward_normalized(&x)
    }

    /// Runs the network on an already normalized window.
    pub fn forward_normalized(&self, x: &Tensor<T>) -> Result<(Tensor<T>, ForwardCache<T>)> {
        self.check_window(x)?;
        let mut x = x.clone();
        let mut caches = Vec::with_capacity(self.params.blocks.len());
        for b in &self.params.blocks {
            let (pre, conv) = conv1d_forward(&b.conv, &x)?;
            let main = pre.map(relu);
            let (y, skip) = gated_skip_apply(&b.skip, &main, &x)?;
            caches.push(BlockCache {
                conv,
                pre_relu: pre,
                skip,
            });
            x = y;
        }
        let seq = x.transpose()?;
        let seq_len = seq.shape()[0];
        let h0 = Tensor::zeros(&[self.config.gru_hidden])?;
        let (h_seq, gru) = gru_forward(&self.params.gru, &seq, &h0)?;
        let hid = self.config.gru_hidden;
        let last = Tensor::from_vec(h_seq.data()[(seq_len - 1) * hid..].to_vec())?;
        let (dense_pre, dense) = dense_forward(&self.params.dense, &last)?;
        let (logits, head) = dense_forward(&self.params.head, &dense_pre.map(relu))?;
        let cache = ForwardCache {
            config: self.config.clone(),
            blocks: caches,
            seq_len,
            gru,
            dense,
            dense_pre,
            head,
        };
        Ok((logits, cache))
    }

    /// Gradients of every parameter given the gradient of the logits.
    pub fn backward_window(&self, cache: &ForwardCache<T>, grad_logits: &Tensor<T>) -> Result<Params<T>> {
        if cache.config != self.config || cache.blocks.len() != self.params.blocks.len() {
            return Err(Error::Usage(
                "forward cache was produced by a different model".into(),
            ));
        }
        if grad_logits.shape() != [self.config.num_classes] {
            return Err(Error::dim(format!(
                "grad_logits must have shape [{}], got {:?}",
                self.config.num_classes,
                grad_logits.shape()
            )));
        }
        let p = &self.params;
        let head = dense_backward(&p.head, &cache.head, grad_logits)?;
        let masked: Vec<T> = head
            .x
            .data()
            .iter()
            .zip(cache.dense_pre.data())
            .map(|(&g, &pre)| if pre > T::zero() { g } else { T::zero() })
            .collect();
        let dense = dense_backward(&p.dense, &cache.dense, &Tensor::from_vec(masked)?)?;

        let hid = self.config.gru_hidden;
        let mut grad_h = vec![T::zero(); cache.seq_len * hid];
        grad_h[(cache.seq_len - 1) * hid..].copy_from_slice(dense.x.data());
        let (grad_seq, gru, _) =
            gru_backward(&p.gru, &cache.gru, &Tensor::new(vec![cache.seq_len, hid], grad_h)?)?;

        let mut grad_x = grad_seq.transpose()?;
        let mut blocks = Vec::with_capacity(p.blocks.len());
        for (b, bc) in p.blocks.iter().zip(&cache.blocks).rev() {
            let sg = gated_skip_backward(&b.skip, &bc.skip, &grad_x)?;
            let mut grad_pre = sg.main;
            for (g, &pre) in grad_pre.data_mut().iter_mut().zip(bc.pre_relu.data()) {
                if pre <= T::zero() {
                    *g = T::zero();
                }
            }
            let cg = conv1d_backward(&b.conv, &bc.conv, &grad_pre)?;
            let mut gx = cg.x;
            for (a, &s) in gx.data_mut().iter_mut().zip(sg.skip_in.data()) {
                *a += s;
            }
            grad_x = gx;
            blocks.push(Block {
                conv: Conv1dParams {
                    weights: cg.weights,
                    bias: cg.bias,
                    stride: b.conv.stride,
                    padding: b.conv.padding,
                },
                skip: GatedSkipParams {
                    gate_logits: sg.gate_logits,
                    projection: sg.projection.map(|(weights, bias)| Conv1dParams {
                        weights,
                        bias,
                        stride: 1,
                        padding: 0,
                    }),
                },
            });
        }
        blocks.reverse();
        Ok(Params {
            blocks,
            gru,
            dense: DenseParams {
                weights: dense.weights,
                bias: dense.bias,
            },
            head: DenseParams {
                weights: head.weights,
                bias: head.bias,
            },
        })
    }

    /// Predicted class (lowest index on ties) and its softmax probability.
    pub fn predict(&self, w: &Tensor<T>) -> Result<(usize, T)> {
        let (logits, _) = self.forward_window(w)?;
        Ok(top_class(logits.data()))
    }

    pub fn count_params(&self) -> ParamCount {
        let mut components = Vec::new();
        for (i, b) in self.params.blocks.iter().enumerate() {
            components.push((format!("block{i}.conv"), b.conv.param_count()));
            components.push((format!("block{i}.skip"), b.skip.param_count()));
        }
        components.push(("gru".into(), self.params.gru.param_count()));
        components.push(("dense".into(), self.params.dense.param_count()));
        components.push(("head".into(), self.params.head.param_count()));
        ParamCount {
            total: components.iter().map(|(_, n)| n).sum(),
            components,
        }
    }

    pub fn cast<U: Scalar>(&self) -> ModelState<U> {
        ModelState {
            config: self.config.clone(),
            params: self.params.cast(),
            normalizer: Normalizer {
                mean: self.normalizer.mean.iter().map(|&m| U::of(m.as_f64())).collect(),
                std: self.normalizer.std.iter().map(|&s| U::of(s.as_f64())).collect(),
            },
            meta: self.meta.clone(),
        }
    }

    fn check_window(&self, w: &Tensor<T>) -> Result<()> {
        let want = self.input_shape();
        if w.shape() != want {
            return Err(Error::dim(format!(
                "window shape {:?} does not match model input {:?}",
                w.shape(),
                want
            )));
        }
        Ok(())
    }
}

/// Argmax of the logits and the softmax probability at that index.
pub fn top_class<T: Scalar>(logits: &[T]) -> (usize, T) {
    let k = argmax(logits);
    let max = logits[k];
    let sum: T = logits.iter().map(|&l| (l - max).exp()).sum();
    (k, T::one() / sum)
}
